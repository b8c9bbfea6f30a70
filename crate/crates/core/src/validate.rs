//! Self-check suite run by `nhtai validate`.
//!
//! Each check builds small chains with known answers and reports a pass/fail
//! line; the suite takes a few seconds.

use faer::c64;

use crate::analytic::{
    bulk_gap_formula, critical_disorder, localization_length_inverse,
    localization_length_inverse_intracell,
};
use crate::config::parse_config;
use crate::ensemble::{derive_seed, run_point, EnsembleConfig};
use crate::error::Result;
use crate::lattice::{
    build_hamiltonian, chiral_operator, clean_realization, gainloss_rotation, hermiticity_residual,
    sample_disorder, similarity_transform, verify_symmetry, Boundary, ModelSpec, Symmetry, Variant,
};
use crate::observables::{ipr_per_state, spectral_observables, winding_number, WindingConfig};
use crate::spectral::{chiral_branches, decompose, SpectralDecomposition};

const TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match body() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn variants() -> [ModelSpec; 4] {
    let base = ModelSpec { n_cells: 20, w1: 1.5, w2: 0.4, ..ModelSpec::default() };
    [
        ModelSpec { gamma: 0.8, ..base },
        ModelSpec { variant: Variant::Modified, gamma: 0.8, t_double_prime: 0.3, ..base },
        ModelSpec { variant: Variant::RandomGamma, sigma_gamma: 0.7, ..base },
        ModelSpec { variant: Variant::GainLoss, gain_loss: 0.9, ..base },
    ]
}

fn nu_of(spec: &ModelSpec, seed: u64, l_sites: usize) -> Result<f64> {
    let h = build_hamiltonian(spec, &sample_disorder(spec, seed))?;
    let c = chiral_operator(spec);
    let d = decompose(&h, TOL)?;
    let b = chiral_branches(&d, &c, 2)?;
    winding_number(&d, &b, &c, &WindingConfig::new(spec.n_sites(), l_sites)?)
}

/// Hausdorff distance between two spectra. Sorted order is not comparable
/// across solvers once conjugate pairs appear.
fn spectrum_distance(a: &SpectralDecomposition, b: &SpectralDecomposition) -> f64 {
    let one_way = |x: &[c64], y: &[c64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a.eigenvalues(), b.eigenvalues()).max(one_way(b.eigenvalues(), a.eigenvalues()))
}

pub fn run_suite() -> Vec<CheckResult> {
    vec![
        check("chiral symmetry, all variants and boundaries", || {
            let mut worst: f64 = 0.0;
            for spec in variants() {
                for boundary in [Boundary::Open, Boundary::Periodic] {
                    let spec = spec.with_boundary(boundary);
                    let h = build_hamiltonian(&spec, &sample_disorder(&spec, 11))?;
                    worst = worst.max(verify_symmetry(&h, &chiral_operator(&spec), Symmetry::Chiral)?);
                }
            }
            Ok((worst < 1e-12, format!("max ‖CHC⁻¹ + H‖ = {worst:.2e}")))
        }),
        check("PT symmetry of the gain/loss chain", || {
            let spec = variants()[3];
            let h = build_hamiltonian(&spec, &sample_disorder(&spec, 5))?;
            let r = verify_symmetry(&h, &chiral_operator(&spec), Symmetry::ParityTime)?;
            Ok((r < 1e-12, format!("residual {r:.2e}")))
        }),
        check("dimerized oracle", || {
            let top = ModelSpec { t: 0.0, t_prime: 1.0, ..ModelSpec::default() };
            let triv = ModelSpec { t: 1.0, t_prime: 0.0, ..ModelSpec::default() };
            let (a, b) = (nu_of(&top, 0, 20)?, nu_of(&triv, 0, 20)?);
            Ok(((a - 1.0).abs() < 1e-10 && b.abs() < 1e-10, format!("nu = {a}, {b}")))
        }),
        check("similarity transform", || {
            let spec = ModelSpec { n_cells: 30, gamma: 0.7, w1: 2.0, ..ModelSpec::default() };
            let h = build_hamiltonian(&spec, &sample_disorder(&spec, 3))?;
            let ht = similarity_transform(&h, spec.gamma)?;
            let dist = spectrum_distance(&decompose(&h, TOL)?, &decompose(&ht, TOL)?);
            let herm = hermiticity_residual(ht.entries());
            Ok((dist < 1e-8 && herm < 1e-10, format!("spectrum distance {dist:.2e}, hermiticity {herm:.2e}")))
        }),
        check("gain/loss rotation", || {
            let spec = variants()[3];
            let h = build_hamiltonian(&spec, &sample_disorder(&spec, 9))?;
            let dist = spectrum_distance(&decompose(&h, TOL)?, &decompose(&gainloss_rotation(&h)?, TOL)?);
            Ok((dist < 1e-8, format!("spectrum distance {dist:.2e}")))
        }),
        check("biorthonormal decomposition", || {
            let mut worst = (0.0f64, 0.0f64);
            for spec in variants() {
                let h = build_hamiltonian(&spec, &sample_disorder(&spec, 21))?;
                let d = decompose(&h, TOL)?;
                worst = (worst.0.max(d.biorth_residual()), worst.1.max(d.recon_residual()));
            }
            Ok((worst.0 < TOL && worst.1 < TOL, format!("biorth {:.2e}, recon {:.2e}", worst.0, worst.1)))
        }),
        check("spectrum symmetric under E -> -E", || {
            let mut worst: f64 = 0.0;
            for spec in variants() {
                let h = build_hamiltonian(&spec, &sample_disorder(&spec, 4))?;
                let e = decompose(&h, TOL)?.eigenvalues().to_vec();
                for z in &e {
                    let partner = e.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
                    worst = worst.max(partner);
                }
            }
            Ok((worst < 1e-8, format!("max pairing distance {worst:.2e}")))
        }),
        check("open-chain gap formula", || {
            let mut worst: f64 = 0.0;
            for gamma in [1.0, 3.0] {
                let spec = ModelSpec { gamma, ..ModelSpec::default() };
                let h = build_hamiltonian(&spec, &clean_realization(&spec))?;
                let c = chiral_operator(&spec);
                let d = decompose(&h, TOL)?;
                let b = chiral_branches(&d, &c, 2)?;
                let numeric = spectral_observables(&d, &b)?.numeric_gap;
                let formula = bulk_gap_formula(&spec)?;
                worst = worst.max((numeric - formula).abs() / formula);
            }
            Ok((worst < 0.02, format!("max relative deviation {worst:.2e}")))
        }),
        check("IPR bounds", || {
            let spec = variants()[0];
            let h = build_hamiltonian(&spec, &sample_disorder(&spec, 8))?;
            let ipr = ipr_per_state(&decompose(&h, TOL)?);
            let lo = 1.0 / spec.n_sites() as f64;
            let ok = ipr.iter().all(|&v| v >= lo - 1e-12 && v <= 1.0 + 1e-12);
            Ok((ok, format!("range [{:.3e}, {:.3e}]", ipr.iter().cloned().fold(1.0, f64::min), ipr.iter().cloned().fold(0.0, f64::max))))
        }),
        check("winding invariant under H -> cH", || {
            let spec = ModelSpec { n_cells: 30, gamma: 1.0, w1: 2.0, ..ModelSpec::default() };
            let h = build_hamiltonian(&spec, &sample_disorder(&spec, 13))?;
            let c = chiral_operator(&spec);
            let cfg = WindingConfig::new(spec.n_sites(), 12)?;
            let mut nus = Vec::new();
            for s in [1.0, 3.7] {
                let d = decompose(&h.scaled(s), TOL)?;
                nus.push(winding_number(&d, &chiral_branches(&d, &c, 2)?, &c, &cfg)?);
            }
            Ok(((nus[0] - nus[1]).abs() < 1e-8, format!("nu = {}, {}", nus[0], nus[1])))
        }),
        check("localization length consistency", || {
            let a = localization_length_inverse(1.2, 0.5, 1.3, 0.0);
            let b = localization_length_inverse_intracell(1.2, 0.5, 1.3);
            let roots = critical_disorder(1.2, 0.5);
            let at_root = roots.iter().map(|&w| localization_length_inverse(1.2, 0.5, w, 0.0)).fold(0.0, f64::max);
            Ok((
                (a - b).abs() < 1e-12 && !roots.is_empty() && at_root < 1e-5,
                format!("general {a}, specialized {b}, roots {roots:?}"),
            ))
        }),
        check("seed derivation", || {
            let a = derive_seed(7, 3, 5, 0);
            let ok = a == derive_seed(7, 3, 5, 0)
                && a != derive_seed(7, 3, 6, 0)
                && a != derive_seed(7, 3, 5, 1)
                && a != derive_seed(7, 4, 5, 0)
                && a != derive_seed(8, 3, 5, 0);
            Ok((ok, format!("{a:#018x}")))
        }),
        check("clean ensemble point", || {
            let spec = ModelSpec { n_cells: 20, gamma: 1.0, ..ModelSpec::default() };
            let cfg = EnsembleConfig { n_realizations: 5, ..EnsembleConfig::default() };
            let out = run_point(&spec, &cfg, &WindingConfig::new(40, 8)?, 0)?;
            let r = out.record;
            Ok((
                r.rejects == 0 && r.nu_stderr == 0.0 && !r.failed && (r.nu_mean - 1.0).abs() < 1e-2,
                format!("nu = {}, stderr = {}, rejects = {}", r.nu_mean, r.nu_stderr, r.rejects),
            ))
        }),
        check("trivial ensemble point keeps its band edges", || {
            let spec = ModelSpec { n_cells: 50, t_prime: 0.7, ..ModelSpec::default() };
            let cfg = EnsembleConfig { n_realizations: 1, ..EnsembleConfig::default() };
            let nu = run_point(&spec, &cfg, &WindingConfig::new(100, 20)?, 0)?.record.nu_mean;
            Ok((nu.abs() < 1e-2, format!("nu = {nu:.2e}")))
        }),
        check("mid-spectrum zero modes", || {
            let spec = ModelSpec { gamma: 1.0, ..ModelSpec::default() };
            let h = build_hamiltonian(&spec, &clean_realization(&spec))?;
            let c = chiral_operator(&spec);
            let d = decompose(&h, TOL)?;
            let s = spectral_observables(&d, &chiral_branches(&d, &c, 2)?)?;
            let zero = s.mid_energies[1].norm().max(s.mid_energies[2].norm());
            let imag = d.eigenvalues().iter().map(|z: &c64| z.im.abs()).fold(0.0, f64::max);
            Ok((zero < 1e-6 && imag < 1e-8, format!("|E_mid| {zero:.2e}, max|Im E| {imag:.2e}")))
        }),
        check("default configuration", || {
            let ok = parse_config("{}").is_ok() && parse_config(r#"{"winding": {"l": 21}}"#).is_err();
            Ok((ok, "defaults parse, odd margin rejected".into()))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        let results = super::run_suite();
        for r in &results {
            println!("{r}");
        }
        assert!(results.iter().all(|r| r.passed));
    }
}
