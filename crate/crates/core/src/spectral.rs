//! Dense biorthonormal eigendecomposition and chiral branch selection.
//!
//! Open nonreciprocal chains have eigenvector matrices whose condition number
//! grows like `r^N`, so the solver never works on `H` directly. It first
//! rotates every unit cell into a frame where the chiral operator is diagonal
//! (only needed for gain/loss), then applies a power-of-two diagonal scaling
//! `D` fitted to the bond asymmetries:
//!
//! ```text
//! H_b = D⁻¹ F H F† D,     H = F† D T Λ T⁻¹ D⁻¹ F
//! ```
//!
//! Because both `F` and `D` are cell-local and commute with the (diagonal)
//! chiral operator and the cell coordinate, every trace observable can be
//! evaluated in the balanced frame. Right vectors handed out by
//! [`SpectralDecomposition::right_vector`] are mapped back to site amplitudes.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{
    gainloss_frame, hermiticity_residual, Boundary, CellOperator, ChiralOperator,
    HamiltonianMatrix, Variant,
};

/// Eigenvector matrices with a 1-norm condition estimate above this are
/// treated as defective.
pub const MAX_CONDITION: f64 = 1e12;

/// Below this magnitude `Re E` (and then `Im E`) carries no branch sign.
pub const BRANCH_EPS: f64 = 1e-12;

const MAX_SCALE_EXPONENT: i32 = 500;

/// Inverse refinement is skipped once `‖T⁻¹T − I‖_max` is this small.
const REFINE_BELOW: f64 = 1e-12;
const REFINE_STEPS: usize = 2;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<c64>,
    right: Mat<c64>,
    left: Mat<c64>,
    frame: CellOperator,
    scales: Vec<f64>,
    biorth_residual: f64,
    recon_residual: f64,
    condition: f64,
    boundary: Boundary,
}

impl SpectralDecomposition {
    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in canonical order: ascending real part, then imaginary
    /// part, then original solver index.
    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    /// Right eigenvectors of the balanced matrix (columns, unit 2-norm).
    pub fn right_balanced(&self) -> &Mat<c64> {
        &self.right
    }

    /// Inverse of [`Self::right_balanced`]; row `n` is `⟨nL|`.
    pub fn left_balanced(&self) -> &Mat<c64> {
        &self.left
    }

    pub fn frame(&self) -> &CellOperator {
        &self.frame
    }

    /// Diagonal of `D`.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn biorth_residual(&self) -> f64 {
        self.biorth_residual
    }

    pub fn recon_residual(&self) -> f64 {
        self.recon_residual
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn is_unscaled(&self) -> bool {
        self.scales.iter().all(|&s| s == 1.0)
    }

    /// The chiral operator expressed in the balanced frame, `F C F†`.
    pub fn balanced_chiral(&self, c: &ChiralOperator) -> Result<CellOperator> {
        if 2 * c.n_cells != self.n_sites() {
            return Err(Error::DimensionMismatch { expected: self.n_sites() / 2, found: c.n_cells });
        }
        let cb = snap(&self.frame.compose(&c.cell_operator()).compose(&self.frame.adjoint()));
        if !cb.is_diagonal() && !self.is_unscaled() {
            return Err(Error::InvalidArgument(
                "chiral operator does not commute with the balancing scales".into(),
            ));
        }
        Ok(cb)
    }

    /// Right eigenvector `n` in the site basis, unit 2-norm.
    pub fn right_vector(&self, n: usize) -> Result<Vec<c64>> {
        self.check_index(n)?;
        let dmax = self.scales.iter().cloned().fold(0.0, f64::max);
        let scaled: Vec<c64> = (0..self.n_sites())
            .map(|i| self.right[(i, n)] * (self.scales[i] / dmax))
            .collect();
        let mut v = self.frame.adjoint().apply_vec(&scaled);
        normalize(&mut v);
        Ok(v)
    }

    /// Left eigenvector `n` in the site basis, scaled so that it pairs to one
    /// with [`Self::right_vector`]`(n)`.
    pub fn left_vector(&self, n: usize) -> Result<Vec<c64>> {
        let right = self.right_vector(n)?;
        let dmin = self.scales.iter().cloned().fold(f64::INFINITY, f64::min);
        let row: Vec<c64> = (0..self.n_sites())
            .map(|i| self.left[(n, i)] * (dmin / self.scales[i]))
            .collect();
        // ⟨ℓ| F  as a row vector is  (Fᵀ ℓᵀ)ᵀ.
        let f = self.frame.block;
        let ft = CellOperator { block: [[f[0][0], f[1][0]], [f[0][1], f[1][1]]] };
        let mut l = ft.apply_vec(&row);
        let overlap: c64 = l.iter().zip(&right).map(|(a, b)| a * b).sum();
        for x in &mut l {
            *x /= overlap;
        }
        Ok(l)
    }

    /// Eigenvalue condition number `‖R_n‖ ‖L_n‖` in the balanced frame.
    pub fn eigen_condition(&self, n: usize) -> Result<f64> {
        self.check_index(n)?;
        let m = self.n_sites();
        let r = (0..m).map(|i| self.right[(i, n)].norm_sqr()).sum::<f64>().sqrt();
        let l = (0..m).map(|i| self.left[(n, i)].norm_sqr()).sum::<f64>().sqrt();
        Ok(r * l)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.n_sites() {
            return Err(Error::IndexOutOfRange { index: n, len: self.n_sites() });
        }
        Ok(())
    }
}

fn normalize(v: &mut [c64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

fn snap(op: &CellOperator) -> CellOperator {
    let fix = |x: f64| {
        let r = x.round();
        if (x - r).abs() < 1e-12 {
            r
        } else {
            x
        }
    };
    let mut out = *op;
    for row in out.block.iter_mut() {
        for z in row.iter_mut() {
            *z = c64::new(fix(z.re), fix(z.im));
        }
    }
    out
}

/// Log₂ site scales that make `|H_b[i,j]| ≈ |H_b[j,i]|` for every bond.
///
/// Weighted least squares on the bond graph: each bond asks for
/// `u_j − u_i = ½ ln(|h_ji| / |h_ij|)` with weight `√(|h_ij| |h_ji|)`.
/// On an open chain the graph is a tree and the fit is exact.
fn balance_exponents(h: &Mat<c64>) -> Vec<i32> {
    let n = h.nrows();
    let mut lap = Mat::<f64>::zeros(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    let mut any = false;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (h[(i, j)].norm(), h[(j, i)].norm());
            if a == 0.0 || b == 0.0 {
                continue;
            }
            let w = (a * b).sqrt();
            let delta = 0.5 * (b / a).ln();
            if delta != 0.0 {
                any = true;
            }
            lap[(i, i)] += w;
            lap[(j, j)] += w;
            lap[(i, j)] -= w;
            lap[(j, i)] -= w;
            rhs[(j, 0)] += w * delta;
            rhs[(i, 0)] -= w * delta;
        }
    }
    if !any {
        return vec![0; n];
    }
    let ridge = 1e-12 * (0..n).map(|i| lap[(i, i)]).fold(1e-300, f64::max);
    for i in 0..n {
        lap[(i, i)] += ridge;
    }
    let u = lap.partial_piv_lu().solve(&rhs);
    let mean = (0..n).map(|i| u[(i, 0)]).sum::<f64>() / n as f64;
    (0..n)
        .map(|i| {
            let e = ((u[(i, 0)] - mean) / std::f64::consts::LN_2).round();
            if e.is_finite() {
                (e as i32).clamp(-MAX_SCALE_EXPONENT, MAX_SCALE_EXPONENT)
            } else {
                0
            }
        })
        .collect()
}

fn max_abs(m: &Mat<c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

fn norm1(m: &Mat<c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Raw eigenpairs `(E, column)` of `m` in solver order.
fn eigenpairs(m: &Mat<c64>, hermitian: bool) -> Result<(Vec<c64>, Mat<c64>)> {
    let n = m.nrows();
    if hermitian {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S();
        let values = (0..n).map(|i| c64::new(s[i].re, 0.0)).collect();
        return Ok((values, evd.U().to_owned()));
    }
    let scale = max_abs(m);
    let imag = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)].im.abs())
        .fold(0.0, f64::max);
    if imag <= 4.0 * f64::EPSILON * scale {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = real.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S();
        let values = (0..n).map(|i| s[i]).collect();
        Ok((values, evd.U().to_owned()))
    } else {
        let evd = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S();
        let values = (0..n).map(|i| s[i]).collect();
        Ok((values, evd.U().to_owned()))
    }
}

/// Canonical ordering: ascending `Re E`, then `Im E`, then solver index.
pub fn canonical_order(values: &[c64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
            .then(a.cmp(&b))
    });
    order
}

/// Full eigendecomposition `H = T Λ T⁻¹` with left vectors from `T⁻¹`.
///
/// Rejects the matrix when the eigenvector matrix is near-defective, when
/// `‖T⁻¹T − I‖_max > tol`, or when `‖H_b − TΛT⁻¹‖_max > tol·‖H_b‖_max`.
pub fn decompose(h: &HamiltonianMatrix, tol: f64) -> Result<SpectralDecomposition> {
    let n = h.n_sites();
    let hermitian = hermiticity_residual(h.entries()) == 0.0;

    let (frame, balanced, scales) = if hermitian {
        (CellOperator::identity(), h.entries().clone(), vec![1.0; n])
    } else {
        let frame = match h.variant() {
            Variant::GainLoss => gainloss_frame(),
            _ => CellOperator::identity(),
        };
        let rotated = if frame.is_identity() { h.entries().clone() } else { frame.conjugate(h.entries()) };
        let exps = balance_exponents(&rotated);
        let scales: Vec<f64> = exps.iter().map(|&e| 2f64.powi(e)).collect();
        let balanced = Mat::from_fn(n, n, |i, j| rotated[(i, j)] * (scales[j] / scales[i]));
        (frame, balanced, scales)
    };

    let (raw_values, raw_vectors) = eigenpairs(&balanced, hermitian)?;
    let order = canonical_order(&raw_values);
    let eigenvalues: Vec<c64> = order.iter().map(|&k| raw_values[k]).collect();
    let mut right = Mat::<c64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let norm = (0..n).map(|i| raw_vectors[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Eigensolver(format!("eigenvector {k} has norm {norm}")));
        }
        for i in 0..n {
            right[(i, col)] = raw_vectors[(i, k)] / norm;
        }
    }

    let mut left = right.partial_piv_lu().inverse();
    let condition = norm1(&right) * norm1(&left);
    if !(condition.is_finite() && condition <= MAX_CONDITION) {
        return Err(Error::NearDefective { condition });
    }

    let identity_defect = |left: &Mat<c64>| {
        let mut defect = left * &right;
        for i in 0..n {
            defect[(i, i)] -= c64::new(1.0, 0.0);
        }
        defect
    };
    let mut defect = identity_defect(&left);
    let mut biorth_residual = max_abs(&defect);
    // Newton-Schulz steps X ← X − (XT − I)X square the inversion error of
    // poorly conditioned (but not defective) eigenvector matrices.
    for _ in 0..REFINE_STEPS {
        if biorth_residual <= REFINE_BELOW {
            break;
        }
        let refined = &left - &defect * &left;
        let refined_defect = identity_defect(&refined);
        let r = max_abs(&refined_defect);
        if !(r < biorth_residual) {
            break;
        }
        left = refined;
        defect = refined_defect;
        biorth_residual = r;
    }
    if !(biorth_residual <= tol) {
        return Err(Error::Biorthogonality { residual: biorth_residual, tol });
    }

    let mut t_lambda = right.clone();
    for (j, &e) in eigenvalues.iter().enumerate() {
        for i in 0..n {
            t_lambda[(i, j)] *= e;
        }
    }
    let rebuilt = &t_lambda * &left;
    let h_norm = max_abs(&balanced).max(f64::MIN_POSITIVE);
    let recon_residual = max_abs(&(&balanced - &rebuilt)) / h_norm;
    if !(recon_residual <= tol) {
        return Err(Error::Reconstruction { residual: recon_residual, tol });
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        right,
        left,
        frame,
        scales,
        biorth_residual,
        recon_residual,
        condition,
        boundary: h.boundary(),
    })
}

/// Bulk states split into chiral pairs. Only the `+` half is stored; the
/// partner of `|nR₊⟩` is always constructed as `C|nR₊⟩` with left vector
/// `⟨nL₊|C⁻¹`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChiralBranches {
    pub plus: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl ChiralBranches {
    /// Number of chiral pairs (`|plus|`).
    pub fn n_pairs(&self) -> usize {
        self.plus.len()
    }
}

/// Drops the `n_exclude` states of smallest `|E|` and picks the `+` half of the
/// rest (positive `Re E`, ties on `Im E`).
pub fn chiral_branches(
    d: &SpectralDecomposition,
    c: &ChiralOperator,
    n_exclude: usize,
) -> Result<ChiralBranches> {
    let n = d.n_sites();
    if 2 * c.n_cells != n {
        return Err(Error::DimensionMismatch { expected: n / 2, found: c.n_cells });
    }
    if n_exclude % 2 != 0 || n_exclude >= n {
        return Err(Error::InvalidArgument(format!(
            "n_exclude = {n_exclude} must be even and smaller than {n}"
        )));
    }
    let e = d.eigenvalues();
    let mut by_magnitude: Vec<usize> = (0..n).collect();
    by_magnitude.sort_by(|&a, &b| e[a].norm().total_cmp(&e[b].norm()).then(a.cmp(&b)));
    let mut excluded: Vec<usize> = by_magnitude[..n_exclude].to_vec();
    excluded.sort_unstable();

    let mut rest: Vec<usize> = by_magnitude[n_exclude..].to_vec();
    if rest.len() % 2 != 0 {
        return Err(Error::OddBranchCount(rest.len()));
    }
    let sign_re = |x: f64| if x.abs() < BRANCH_EPS { 0.0 } else { x };
    rest.sort_by(|&a, &b| {
        sign_re(e[b].re)
            .total_cmp(&sign_re(e[a].re))
            .then(e[b].im.total_cmp(&e[a].im))
            .then(a.cmp(&b))
    });
    let mut plus: Vec<usize> = rest[..rest.len() / 2].to_vec();
    if let Some(&bad) = plus
        .iter()
        .find(|&&k| e[k].re.abs() < BRANCH_EPS && e[k].im.abs() < BRANCH_EPS)
    {
        return Err(Error::AmbiguousBranch(bad));
    }
    plus.sort_unstable();
    Ok(ChiralBranches { plus, excluded })
}

/// Edge pairs have a chiral dipole close to 1, bulk `±E` pairs close to 0.
pub const EDGE_DIPOLE_MIN: f64 = 0.5;

/// Chiral dipole `|Tr(C P X)| / N_cells` of the states `pair`, with `P` their
/// biorthogonal projector and `X` the cell coordinate.
///
/// A zero-mode pair polarized on sublattice A at one end and B at the other
/// gives about 1. The partner of a bulk state is `C|R⟩`, so the sublattice
/// weights of a bulk pair cancel. Cell-local frame changes and diagonal
/// scalings drop out of the trace.
pub fn chiral_dipole(d: &SpectralDecomposition, c: &ChiralOperator, pair: [usize; 2]) -> Result<f64> {
    let cb = d.balanced_chiral(c)?;
    if !cb.is_diagonal() {
        return Err(Error::InvalidArgument("chiral operator is not diagonal in the balanced frame".into()));
    }
    let n = d.n_sites();
    let mut trace = c64::new(0.0, 0.0);
    for &k in &pair {
        d.check_index(k)?;
        for x in 0..n {
            let sign = cb.block[x % 2][x % 2];
            trace += sign * (x / 2) as f64 * d.left[(k, x)] * d.right[(x, k)];
        }
    }
    Ok(trace.norm() / (n / 2) as f64)
}

/// Number of the `max_exclude` smallest-`|E|` states that are edge modes.
///
/// Pairs are taken in order of `|E|` while their [`chiral_dipole`] is at least
/// [`EDGE_DIPOLE_MIN`]. A clean trivial chain has no edge modes, and dropping
/// its band-edge pair would bias `ν` by `O(1/L')`.
pub fn edge_mode_exclusion(d: &SpectralDecomposition, c: &ChiralOperator, max_exclude: usize) -> Result<usize> {
    let n = d.n_sites();
    let e = d.eigenvalues();
    let mut by_magnitude: Vec<usize> = (0..n).collect();
    by_magnitude.sort_by(|&a, &b| e[a].norm().total_cmp(&e[b].norm()).then(a.cmp(&b)));
    let mut k = 0;
    while k + 2 <= max_exclude.min(n) {
        if chiral_dipole(d, c, [by_magnitude[k], by_magnitude[k + 1]])? < EDGE_DIPOLE_MIN {
            break;
        }
        k += 2;
    }
    Ok(k)
}

/// [`chiral_branches`] with the exclusion widened pair by pair while the
/// smallest-`|E|` retained pair has an eigenvalue condition number above
/// `max_pair_condition`.
///
/// Near-zero pairs of a non-Hermitian chain can sit close to an exceptional
/// point where `E` and `−E` coalesce. Splitting such a pair across the two
/// branches makes the individual projectors, and with them `ν`, blow up;
/// dropping one more pair changes a well-behaved `ν` only by `O(1/L')`.
pub fn chiral_branches_conditioned(
    d: &SpectralDecomposition,
    c: &ChiralOperator,
    n_exclude: usize,
    max_pair_condition: f64,
) -> Result<ChiralBranches> {
    let n = d.n_sites();
    let e = d.eigenvalues();
    let mut by_magnitude: Vec<usize> = (0..n).collect();
    by_magnitude.sort_by(|&a, &b| e[a].norm().total_cmp(&e[b].norm()).then(a.cmp(&b)));
    let mut k = n_exclude;
    while k + 4 <= n {
        let worst = d.eigen_condition(by_magnitude[k])?.max(d.eigen_condition(by_magnitude[k + 1])?);
        if worst <= max_pair_condition {
            break;
        }
        k += 2;
    }
    chiral_branches(d, c, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, chiral_operator, clean_realization, sample_disorder, ModelSpec};
    use proptest::prelude::*;

    fn build(spec: &ModelSpec, seed: u64) -> HamiltonianMatrix {
        build_hamiltonian(spec, &sample_disorder(spec, seed)).unwrap()
    }

    #[test]
    fn hermitian_chain_matches_real_solver() {
        let spec = ModelSpec { n_cells: 15, w1: 1.0, w2: 0.3, ..ModelSpec::default() };
        let h = build(&spec, 2);
        let d = decompose(&h, 1e-8).unwrap();
        let reference = h.entries().self_adjoint_eigenvalues(Side::Lower).unwrap();
        for (a, b) in d.eigenvalues().iter().zip(&reference) {
            assert!((a - c64::new(*b, 0.0)).norm() < 1e-12);
        }
        assert!((0..30).all(|n| (d.eigen_condition(n).unwrap() - 1.0).abs() < 1e-10));
    }

    #[test]
    fn dimerized_limit_has_flat_bands() {
        // t = 0: isolated intercell dimers at ±√(t_l t_r) and two zero-energy end sites.
        let spec = ModelSpec { n_cells: 10, t: 0.0, t_prime: 1.0, gamma: 3.0, ..ModelSpec::default() };
        let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
        let e = d.eigenvalues();
        assert!(e[..9].iter().all(|z| (z - c64::new(-2.0, 0.0)).norm() < 1e-12));
        assert!(e[9].norm() < 1e-12 && e[10].norm() < 1e-12);
        assert!(e[11..].iter().all(|z| (z - c64::new(2.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn right_vectors_solve_the_original_matrix() {
        for variant in [Variant::Nonreciprocal, Variant::GainLoss] {
            let spec = ModelSpec { variant, n_cells: 8, gamma: 0.5, gain_loss: 0.8, w1: 1.0, ..ModelSpec::default() };
            let h = build(&spec, 7);
            let d = decompose(&h, 1e-8).unwrap();
            for n in 0..16 {
                let r = d.right_vector(n).unwrap();
                let l = d.left_vector(n).unwrap();
                let e = d.eigenvalues()[n];
                for i in 0..16 {
                    let hr: c64 = (0..16).map(|j| h.get(i, j) * r[j]).sum();
                    let lh: c64 = (0..16).map(|j| l[j] * h.get(j, i)).sum();
                    assert!((hr - e * r[i]).norm() < 1e-10);
                    assert!((lh - e * l[i]).norm() < 1e-8 * (1.0 + l.iter().map(|z| z.norm()).fold(0.0, f64::max)));
                }
                let norm: f64 = r.iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
                let overlap: c64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
                assert!((overlap - c64::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_order_breaks_ties() {
        let v = [c64::new(1.0, 0.0), c64::new(-1.0, 2.0), c64::new(-1.0, -2.0), c64::new(1.0, 0.0)];
        assert_eq!(canonical_order(&v), vec![2, 1, 0, 3]);
    }

    #[test]
    fn balancing_handles_strong_nonreciprocity() {
        // r^N = 4^100 would defeat an unbalanced solver.
        let spec = ModelSpec { n_cells: 200, gamma: 15.0, ..ModelSpec::default() };
        let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
        assert!(d.biorth_residual() < 1e-8 && d.recon_residual() < 1e-8);
        assert!(d.eigenvalues().iter().all(|z| z.im.abs() < 1e-8));
    }

    #[test]
    fn refinement_rescues_periodic_nonreciprocal_chains() {
        // Complex periodic spectra with nearly coalescing pairs; a plain LU
        // inverse misses the 1e-8 biorthonormality bound on some of these.
        let spec = ModelSpec { n_cells: 200, t_prime: 0.7, gamma: 0.6, w1: 0.8, boundary: Boundary::Periodic, ..ModelSpec::default() };
        for seed in 0..6 {
            let d = decompose(&build(&spec, seed), 1e-8).unwrap();
            assert!(d.biorth_residual() < 1e-10, "seed {seed}: {:.2e}", d.biorth_residual());
        }
    }

    #[test]
    fn branch_selection() {
        let spec = ModelSpec { n_cells: 20, gamma: 1.0, w1: 1.0, ..ModelSpec::default() };
        let d = decompose(&build(&spec, 1), 1e-8).unwrap();
        let c = chiral_operator(&spec);
        let b = chiral_branches(&d, &c, 2).unwrap();
        assert_eq!((b.n_pairs(), b.excluded.len()), (19, 2));
        assert!(b.plus.iter().all(|&k| d.eigenvalues()[k].re > 0.0));
        assert!(b.excluded.iter().all(|&k| d.eigenvalues()[k].norm() < 1e-3));
        assert!(chiral_branches(&d, &c, 3).is_err());
        assert!(chiral_branches(&d, &c, 40).is_err());
        let wrong = chiral_operator(&ModelSpec { n_cells: 10, ..spec });
        assert!(chiral_branches(&d, &wrong, 2).is_err());
    }

    #[test]
    fn conditioned_branches_keep_well_behaved_pairs() {
        let spec = ModelSpec { n_cells: 30, gamma: 1.0, w1: 1.0, ..ModelSpec::default() };
        let d = decompose(&build(&spec, 3), 1e-8).unwrap();
        let c = chiral_operator(&spec);
        assert_eq!(chiral_branches_conditioned(&d, &c, 2, 10.0).unwrap(), chiral_branches(&d, &c, 2).unwrap());
        // An impossible bound drops pairs until only one remains.
        let all = chiral_branches_conditioned(&d, &c, 2, 0.5).unwrap();
        assert_eq!(all.n_pairs(), 1);
    }

    #[test]
    fn dimerized_chiral_dipoles() {
        // Edge modes on a_1 (cell 0) and b_N (cell N−1); bulk dimers b_j–a_{j+1}.
        let n = 10;
        let spec = ModelSpec { n_cells: n, t: 0.0, t_prime: 1.0, gamma: 1.0, ..ModelSpec::default() };
        let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
        let c = chiral_operator(&spec);
        let edge = chiral_dipole(&d, &c, [9, 10]).unwrap();
        assert!((edge - (n - 1) as f64 / n as f64).abs() < 1e-12);
        // Bulk states are degenerate; a ±E pair is any state with its chiral image.
        let bulk = chiral_dipole(&d, &c, [0, 19]).unwrap();
        assert!(bulk < 1.5 / n as f64, "{bulk}");
        assert_eq!(edge_mode_exclusion(&d, &c, 2).unwrap(), 2);
        assert_eq!(edge_mode_exclusion(&d, &c, 4).unwrap(), 2);
    }

    #[test]
    fn trivial_chain_has_no_edge_modes() {
        for variant in [Variant::Nonreciprocal, Variant::GainLoss] {
            let spec = ModelSpec { variant, n_cells: 50, t_prime: 0.5, gamma: 0.6, gain_loss: 0.5, ..ModelSpec::default() };
            let d = decompose(&build_hamiltonian(&spec, &clean_realization(&spec)).unwrap(), 1e-8).unwrap();
            assert_eq!(edge_mode_exclusion(&d, &chiral_operator(&spec), 2).unwrap(), 0);
            let top = ModelSpec { t_prime: 1.2, ..spec };
            let d = decompose(&build_hamiltonian(&top, &clean_realization(&top)).unwrap(), 1e-8).unwrap();
            assert_eq!(edge_mode_exclusion(&d, &chiral_operator(&top), 2).unwrap(), 2);
        }
    }

    fn any_spec() -> impl Strategy<Value = ModelSpec> {
        (0usize..4, 0.3f64..1.5, -0.5f64..2.0, 0.0f64..3.0, 0.0f64..1.0, 0.0f64..1.8, 3usize..16, any::<bool>())
            .prop_map(|(v, tp, gamma, w1, w2, gl, n, periodic)| ModelSpec {
                variant: [Variant::Nonreciprocal, Variant::Modified, Variant::RandomGamma, Variant::GainLoss][v],
                t_prime: tp,
                gamma,
                sigma_gamma: 0.5,
                t_double_prime: 0.2,
                gain_loss: gl,
                w1,
                w2,
                n_cells: n,
                boundary: if periodic { Boundary::Periodic } else { Boundary::Open },
                ..ModelSpec::default()
            })
    }

    proptest! {
        #[test]
        fn decomposition_is_biorthonormal(spec in any_spec(), seed in any::<u64>()) {
            if let Ok(d) = decompose(&build(&spec, seed), 1e-8) {
                prop_assert!(d.biorth_residual() < 1e-8);
                prop_assert!(d.recon_residual() < 1e-8);
            }
        }

        #[test]
        fn spectrum_pairs_under_negation(spec in any_spec(), seed in any::<u64>()) {
            if let Ok(d) = decompose(&build(&spec, seed), 1e-8) {
                let e = d.eigenvalues();
                for z in e {
                    let partner = e.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(partner < 1e-6, "{z} unpaired ({partner:e})");
                }
            }
        }
    }
}
