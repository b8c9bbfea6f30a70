//! Real-space winding number, inverse participation ratios and spectral
//! summaries of a single disorder realization.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChiralOperator;
use crate::spectral::{ChiralBranches, SpectralDecomposition};

/// Split of an open chain into `l | L' | l` sites. The winding trace runs over
/// the middle `L'` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindingConfig {
    pub l_sites: usize,
    pub l_prime_sites: usize,
}

impl WindingConfig {
    /// Interval layout for a chain of `n_sites` with boundary margins of
    /// `l_sites` on both ends.
    pub fn new(n_sites: usize, l_sites: usize) -> Result<Self> {
        if l_sites % 2 != 0 {
            return Err(Error::WindingConfig(format!("l = {l_sites} sites is not cell aligned")));
        }
        if n_sites % 2 != 0 {
            return Err(Error::WindingConfig(format!("L = {n_sites} sites is odd")));
        }
        if 2 * l_sites >= n_sites {
            return Err(Error::WindingConfig(format!(
                "l = {l_sites} leaves no middle interval in L = {n_sites}"
            )));
        }
        Ok(WindingConfig { l_sites, l_prime_sites: n_sites - 2 * l_sites })
    }

    /// `l = fraction·L` rounded to the nearest even number of sites.
    pub fn from_fraction(n_sites: usize, fraction: f64) -> Result<Self> {
        let l = 2 * ((fraction * n_sites as f64) / 2.0).round() as usize;
        Self::new(n_sites, l)
    }

    pub fn n_sites(&self) -> usize {
        2 * self.l_sites + self.l_prime_sites
    }

    pub fn middle_cells(&self) -> usize {
        self.l_prime_sites / 2
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        if self.n_sites() != n_sites || self.l_sites % 2 != 0 || self.l_prime_sites % 2 != 0 {
            return Err(Error::WindingConfig(format!(
                "intervals {}+{}+{} do not tile {} sites in whole cells",
                self.l_sites, self.l_prime_sites, self.l_sites, n_sites
            )));
        }
        if self.l_prime_sites == 0 {
            return Err(Error::WindingConfig("empty middle interval".into()));
        }
        Ok(())
    }
}

/// Flat-band matrix `Q = Σ₊ (|R⟩⟨L| − C|R⟩⟨L|C⁻¹)` in the balanced frame.
fn flat_band_q(d: &SpectralDecomposition, b: &ChiralBranches, c: &ChiralOperator) -> Result<Mat<c64>> {
    let cb = d.balanced_chiral(c)?;
    let n = d.n_sites();
    let m = b.plus.len();
    let right = d.right_balanced();
    let left = d.left_balanced();
    let t_plus = Mat::<c64>::from_fn(n, m, |i, k| right[(i, b.plus[k])]);
    let l_plus = Mat::<c64>::from_fn(m, n, |k, j| left[(b.plus[k], j)]);
    let p = &t_plus * &l_plus;
    // C⁻¹ = C† for a unitary chiral operator.
    let cpc = cb.conjugate(&p);
    Ok(&p - &cpc)
}

/// Open-bulk winding number `ν = Tr'(C Q [Q, X]) / L'`, with `X` the unit-cell
/// coordinate and `Tr'` over the `L'/2` middle cells.
pub fn winding_number(
    d: &SpectralDecomposition,
    b: &ChiralBranches,
    c: &ChiralOperator,
    cfg: &WindingConfig,
) -> Result<f64> {
    let n = d.n_sites();
    cfg.check(n)?;
    let q = flat_band_q(d, b, c)?;
    let cb = d.balanced_chiral(c)?.block;
    let cell = |i: usize| (i / 2) as f64;

    // (Q[Q,X])_{p i} = Σ_k Q_pk Q_ki (x_i − x_k)
    let q_commutator = |p: usize, i: usize| -> c64 {
        let xi = cell(i);
        (0..n).map(|k| q[(p, k)] * q[(k, i)] * (xi - cell(k))).sum()
    };

    let first = cfg.l_sites;
    let last = cfg.l_sites + cfg.l_prime_sites;
    let mut trace = c64::new(0.0, 0.0);
    for i in first..last {
        let base = 2 * (i / 2);
        let a = i % 2;
        for col in 0..2 {
            let weight = cb[a][col];
            if weight != c64::new(0.0, 0.0) {
                trace += weight * q_commutator(base + col, i);
            }
        }
    }
    Ok(c.kind.winding_sign() * trace.re / cfg.l_prime_sites as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IprMode {
    PerState,
    SpectrumAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ipr {
    PerState(Vec<f64>),
    SpectrumAverage(f64),
}

/// `Σ_x |ψ_x|⁴` of a unit-norm site vector.
pub fn participation(psi: &[c64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr().powi(2)).sum()
}

/// Inverse participation ratios of the 2-norm normalized right eigenvectors.
pub fn ipr(d: &SpectralDecomposition, mode: IprMode) -> Ipr {
    let per_state: Vec<f64> = (0..d.n_sites())
        .map(|n| participation(&d.right_vector(n).expect("index in range")))
        .collect();
    match mode {
        IprMode::PerState => Ipr::PerState(per_state),
        IprMode::SpectrumAverage => {
            Ipr::SpectrumAverage(per_state.iter().sum::<f64>() / per_state.len() as f64)
        }
    }
}

pub fn ipr_per_state(d: &SpectralDecomposition) -> Vec<f64> {
    match ipr(d, IprMode::PerState) {
        Ipr::PerState(v) => v,
        Ipr::SpectrumAverage(_) => unreachable!(),
    }
}

/// `|ψ_{n,x}|²` over sites.
pub fn density_profile(d: &SpectralDecomposition, n: usize) -> Result<Vec<f64>> {
    Ok(d.right_vector(n)?.iter().map(|z| z.norm_sqr()).collect())
}

/// Middle-of-spectrum eigenvalues and the numeric bulk gap.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// Canonically sorted eigenvalues at one-based positions `L/2−1 … L/2+2`.
    pub mid_energies: [c64; 4],
    /// `|E_{L/2+2} − E_{L/2−1}|`
    pub numeric_gap: f64,
    pub edge_energies: Vec<c64>,
}

pub fn spectral_observables(d: &SpectralDecomposition, b: &ChiralBranches) -> Result<SpectralSummary> {
    let n = d.n_sites();
    if n < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 sites, have {n}")));
    }
    let e = d.eigenvalues();
    let h = n / 2;
    let mid_energies = [e[h - 2], e[h - 1], e[h], e[h + 1]];
    Ok(SpectralSummary {
        mid_energies,
        numeric_gap: (mid_energies[3] - mid_energies[0]).norm(),
        edge_energies: b.excluded.iter().map(|&k| e[k]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, chiral_operator, clean_realization, sample_disorder, ModelSpec, Variant};
    use crate::spectral::{chiral_branches, decompose};

    fn nu(spec: &ModelSpec, seed: Option<u64>, n_exclude: usize, l_sites: usize) -> f64 {
        let real = seed.map_or_else(|| clean_realization(spec), |s| sample_disorder(spec, s));
        let h = build_hamiltonian(spec, &real).unwrap();
        let c = chiral_operator(spec);
        let d = decompose(&h, 1e-8).unwrap();
        let b = chiral_branches(&d, &c, n_exclude).unwrap();
        winding_number(&d, &b, &c, &WindingConfig::new(spec.n_sites(), l_sites).unwrap()).unwrap()
    }

    #[test]
    fn interval_layout() {
        let w = WindingConfig::new(400, 80).unwrap();
        assert_eq!((w.l_prime_sites, w.middle_cells(), w.n_sites()), (240, 120, 400));
        assert_eq!(WindingConfig::from_fraction(100, 0.2).unwrap().l_sites, 20);
        assert_eq!(WindingConfig::from_fraction(24, 0.2).unwrap().l_sites, 4);
        assert!(WindingConfig::new(100, 21).is_err());
        assert!(WindingConfig::new(100, 50).is_err());
        assert!(WindingConfig::new(101, 20).is_err());
    }

    #[test]
    fn clean_winding_is_quantized() {
        for (n_cells, l) in [(50, 20), (200, 80)] {
            for gamma in [0.0, 1.0, 3.0] {
                let top = ModelSpec { n_cells, gamma, ..ModelSpec::default() };
                assert!((nu(&top, None, 2, l) - 1.0).abs() < 1e-2, "L = {}, gamma = {gamma}", 2 * n_cells);
            }
            let triv = ModelSpec { n_cells, t_prime: 0.5, ..ModelSpec::default() };
            assert!(nu(&triv, None, 0, l).abs() < 1e-6);
        }
    }

    #[test]
    fn trivial_exclusion_bias_shrinks_with_length() {
        // Without end modes the two excluded states are band-edge bulk states.
        let short = ModelSpec { n_cells: 50, t_prime: 0.5, ..ModelSpec::default() };
        let long = ModelSpec { n_cells: 200, ..short };
        let (a, b) = (nu(&short, None, 2, 20), nu(&long, None, 2, 80));
        assert!(a.abs() < 0.05 && b.abs() < 0.02 && b.abs() < a.abs(), "{a}, {b}");
    }

    #[test]
    fn winding_follows_mapped_hoppings() {
        // t'√(1+γ) crosses t = 1 at γ = 1/t'² − 1.
        let tp: f64 = 0.7;
        let gc = 1.0 / (tp * tp) - 1.0;
        for (gamma, n_exclude, expect) in [(gc - 0.6, 0, 0.0), (gc + 0.6, 2, 1.0)] {
            let spec = ModelSpec { n_cells: 100, t_prime: tp, gamma, ..ModelSpec::default() };
            assert!((nu(&spec, None, n_exclude, 40) - expect).abs() < 0.02, "gamma = {gamma}");
        }
    }

    #[test]
    fn gainloss_winding_matches_nonreciprocal_frame() {
        let spec = ModelSpec { variant: Variant::GainLoss, n_cells: 100, t_prime: 1.0, gain_loss: 1.0, ..ModelSpec::default() };
        assert!((nu(&spec, None, 2, 40) - 1.0).abs() < 1e-2);
        let triv = ModelSpec { t_prime: 0.5, ..spec };
        assert!(nu(&triv, None, 0, 40).abs() < 1e-6);
    }

    #[test]
    fn exclusion_count_is_immaterial_in_bulk() {
        let spec = ModelSpec { n_cells: 200, gamma: 1.0, w1: 1.0, ..ModelSpec::default() };
        for seed in 0..2 {
            let (a, b) = (nu(&spec, Some(seed), 2, 80), nu(&spec, Some(seed), 4, 80));
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn participation_limits() {
        let one = [c64::new(0.0, 0.0), c64::new(0.0, 1.0), c64::new(0.0, 0.0)];
        assert_eq!(participation(&one), 1.0);
        let n = 64;
        let flat: Vec<c64> = (0..n).map(|k| c64::cis(k as f64) / (n as f64).sqrt()).collect();
        assert!((participation(&flat) - 1.0 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn ipr_and_density() {
        // Dimerized chain: every bulk state lives on two sites, the end modes on one.
        let spec = ModelSpec { n_cells: 10, t: 0.0, t_prime: 1.0, ..ModelSpec::default() };
        let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
        let per = ipr_per_state(&d);
        assert!(per.iter().all(|&v| (v - 0.5).abs() < 1e-12 || (v - 1.0).abs() < 1e-12));
        assert_eq!(per.iter().filter(|&&v| v > 0.75).count(), 2);
        match ipr(&d, IprMode::SpectrumAverage) {
            Ipr::SpectrumAverage(avg) => assert!((avg - (18.0 * 0.5 + 2.0) / 20.0).abs() < 1e-12),
            Ipr::PerState(_) => unreachable!(),
        }
        let rho = density_profile(&d, 9).unwrap();
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(density_profile(&d, 20).is_err());
    }

    #[test]
    fn spectral_summary() {
        let spec = ModelSpec { n_cells: 50, gamma: 1.0, ..ModelSpec::default() };
        let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
        let b = chiral_branches(&d, &chiral_operator(&spec), 2).unwrap();
        let s = spectral_observables(&d, &b).unwrap();
        assert!(s.mid_energies[1].norm() < 1e-8 && s.mid_energies[2].norm() < 1e-8);
        assert!((s.mid_energies[0] + s.mid_energies[3]).norm() < 1e-10);
        assert_eq!(s.edge_energies.len(), 2);
    }
}
