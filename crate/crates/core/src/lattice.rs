//! Model parameterizations, disorder sampling and dense Hamiltonian assembly.
//!
//! Sites are ordered `A₁, B₁, A₂, B₂, …`: cell `j` (zero-based) owns site
//! `2j` on sublattice A and site `2j + 1` on sublattice B. With this ordering
//! the eigenstate index `n = L/2` of a canonically sorted spectrum sits in the
//! middle of the band.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Intercell hopping `t_r = t_l + f(γ)`.
    Nonreciprocal,
    /// Nonreciprocal chain plus a Hermitian `A_j ↔ B_{j+1}` bond of strength `t''`.
    Modified,
    /// Cell-dependent nonreciprocity `t_r = t_l + t γ_j`, `γ_j ~ N(0, σ_γ²)`.
    RandomGamma,
    /// Hermitian hoppings plus staggered on-site gain and loss `±iΓ/2`.
    GainLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonreciprocalForm {
    /// `f(γ) = t' γ`
    Linear,
    /// `f(γ) = t' (1 − γ + γ²)`
    Quadratic,
}

impl NonreciprocalForm {
    pub fn eval(self, t_prime: f64, gamma: f64) -> f64 {
        match self {
            NonreciprocalForm::Linear => t_prime * gamma,
            NonreciprocalForm::Quadratic => t_prime * (1.0 - gamma + gamma * gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Physical parameters of one chain. Energies are in units of `t`; fields not
/// used by `variant` are ignored but still validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub t: f64,
    pub t_prime: f64,
    pub gamma: f64,
    pub form: NonreciprocalForm,
    pub t_double_prime: f64,
    pub sigma_gamma: f64,
    /// Gain/loss strength Γ.
    pub gain_loss: f64,
    pub w1: f64,
    pub w2: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            variant: Variant::Nonreciprocal,
            t: 1.0,
            t_prime: 1.2,
            gamma: 0.0,
            form: NonreciprocalForm::Linear,
            t_double_prime: 0.0,
            sigma_gamma: 0.0,
            gain_loss: 0.0,
            w1: 0.0,
            w2: 0.0,
            n_cells: 50,
            boundary: Boundary::Open,
        }
    }
}

impl ModelSpec {
    pub fn n_sites(&self) -> usize {
        2 * self.n_cells
    }

    pub fn with_boundary(self, boundary: Boundary) -> Self {
        ModelSpec { boundary, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t", self.t),
            ("t_prime", self.t_prime),
            ("gamma", self.gamma),
            ("t_double_prime", self.t_double_prime),
            ("sigma_gamma", self.sigma_gamma),
            ("gain_loss", self.gain_loss),
            ("W1", self.w1),
            ("W2", self.w2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} = {v} is not finite")));
            }
        }
        for (name, v) in [("W1", self.w1), ("W2", self.w2), ("sigma_gamma", self.sigma_gamma)] {
            if v < 0.0 {
                return Err(Error::InvalidSpec(format!("{name} = {v} must be non-negative")));
            }
        }
        if self.n_cells < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_cells = {} (need at least 2)",
                self.n_cells
            )));
        }
        Ok(())
    }
}

/// Random numbers of one disorder configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub omega: Vec<f64>,
    pub omega_prime: Vec<f64>,
    /// Per-cell nonreciprocity; empty unless the variant is `RandomGamma`.
    pub gamma_j: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    pub fn n_cells(&self) -> usize {
        self.omega.len()
    }
}

/// Draws `ω_j, ω'_j ~ U[-1, 1]` (and `γ_j` for `RandomGamma`) from a ChaCha8
/// stream keyed by `seed`.
pub fn sample_disorder(spec: &ModelSpec, seed: u64) -> DisorderRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_cells;
    let omega: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let omega_prime: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let gamma_j = if spec.variant == Variant::RandomGamma {
        let normal = Normal::new(0.0, spec.sigma_gamma.max(0.0)).expect("finite std dev");
        (0..n).map(|_| rng.sample(normal)).collect()
    } else {
        Vec::new()
    };
    DisorderRealization { omega, omega_prime, gamma_j, seed }
}

/// Realization with all random numbers zero.
pub fn clean_realization(spec: &ModelSpec) -> DisorderRealization {
    let n = spec.n_cells;
    DisorderRealization {
        omega: vec![0.0; n],
        omega_prime: vec![0.0; n],
        gamma_j: if spec.variant == Variant::RandomGamma { vec![0.0; n] } else { Vec::new() },
        seed: 0,
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    entries: Mat<c64>,
    n_cells: usize,
    boundary: Boundary,
    variant: Variant,
}

impl HamiltonianMatrix {
    pub fn from_parts(entries: Mat<c64>, variant: Variant, boundary: Boundary) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() % 2 != 0 || entries.nrows() < 4 {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian must be square with an even size >= 4, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                let z = entries[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
                }
            }
        }
        let n_cells = entries.nrows() / 2;
        Ok(HamiltonianMatrix { entries, n_cells, boundary, variant })
    }

    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn n_sites(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn get(&self, row: usize, col: usize) -> c64 {
        self.entries[(row, col)]
    }

    /// Returns `c·H`.
    pub fn scaled(&self, c: f64) -> HamiltonianMatrix {
        let entries = Mat::from_fn(self.n_sites(), self.n_sites(), |i, j| self.entries[(i, j)] * c);
        HamiltonianMatrix { entries, n_cells: self.n_cells, boundary: self.boundary, variant: self.variant }
    }

    /// Adds a diagonal term; the result generally breaks chiral symmetry.
    pub fn with_onsite(&self, potential: &[f64]) -> Result<HamiltonianMatrix> {
        if potential.len() != self.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "potential has {} entries for {} sites",
                potential.len(),
                self.n_sites()
            )));
        }
        let mut entries = self.entries.clone();
        for (i, v) in potential.iter().enumerate() {
            entries[(i, i)] += c64::new(*v, 0.0);
        }
        Ok(HamiltonianMatrix { entries, n_cells: self.n_cells, boundary: self.boundary, variant: self.variant })
    }

    pub fn is_hermitian(&self) -> bool {
        hermiticity_residual(&self.entries) == 0.0
    }
}

/// Max-norm of `H − H†`.
pub fn hermiticity_residual(h: &Mat<c64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

fn site_a(cell: usize) -> usize {
    2 * cell
}

fn site_b(cell: usize) -> usize {
    2 * cell + 1
}

/// Assembles the dense real-space Hamiltonian.
///
/// Intracell `m_j = t + W₁ω_j`; intercell `t_l = t' + W₂ω'_j` on `B_j → A_{j+1}`
/// and `t_r = t_l + f` on `A_{j+1} ← B_j`. Under periodic boundaries the
/// wrap bond `N → 1` reuses the random numbers of cell `N`.
pub fn build_hamiltonian(
    spec: &ModelSpec,
    real: &DisorderRealization,
) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    let n = spec.n_cells;
    if real.omega.len() != n || real.omega_prime.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: real.n_cells() });
    }
    if spec.variant == Variant::RandomGamma && real.gamma_j.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: real.gamma_j.len() });
    }

    let mut h = Mat::<c64>::zeros(2 * n, 2 * n);
    let re = |x: f64| c64::new(x, 0.0);
    let bonds: Vec<(usize, usize)> = (0..n)
        .filter_map(|j| match (j + 1 < n, spec.boundary) {
            (true, _) => Some((j, j + 1)),
            (false, Boundary::Periodic) => Some((j, 0)),
            (false, Boundary::Open) => None,
        })
        .collect();

    for j in 0..n {
        let m = spec.t + spec.w1 * real.omega[j];
        h[(site_a(j), site_b(j))] += re(m);
        h[(site_b(j), site_a(j))] += re(m);
    }

    match spec.variant {
        Variant::Nonreciprocal | Variant::Modified | Variant::RandomGamma => {
            for &(j, k) in &bonds {
                let t_l = spec.t_prime + spec.w2 * real.omega_prime[j];
                let shift = match spec.variant {
                    Variant::RandomGamma => spec.t * real.gamma_j[j],
                    _ => spec.form.eval(spec.t_prime, spec.gamma),
                };
                h[(site_a(k), site_b(j))] += re(t_l + shift);
                h[(site_b(j), site_a(k))] += re(t_l);
                if spec.variant == Variant::Modified {
                    h[(site_b(k), site_a(j))] += re(spec.t_double_prime);
                    h[(site_a(j), site_b(k))] += re(spec.t_double_prime);
                }
            }
        }
        Variant::GainLoss => {
            let half_gain = c64::new(0.0, spec.gain_loss / 2.0);
            for j in 0..n {
                h[(site_a(j), site_a(j))] += half_gain;
                h[(site_b(j), site_b(j))] -= half_gain;
            }
            for &(j, k) in &bonds {
                let half = (spec.t_prime + spec.w2 * real.omega_prime[j]) / 2.0;
                let i_half = c64::new(0.0, half);
                h[(site_a(k), site_b(j))] += re(half);
                h[(site_b(j), site_a(k))] += re(half);
                h[(site_a(j), site_b(k))] += re(half);
                h[(site_b(k), site_a(j))] += re(half);
                h[(site_a(k), site_a(j))] += i_half;
                h[(site_a(j), site_a(k))] -= i_half;
                h[(site_b(k), site_b(j))] -= i_half;
                h[(site_b(j), site_b(k))] += i_half;
            }
        }
    }

    HamiltonianMatrix::from_parts(h, spec.variant, spec.boundary)
}

/// A 2×2 operator repeated on every unit cell, `block ⊗ I_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOperator {
    pub block: [[c64; 2]; 2],
}

impl CellOperator {
    pub fn identity() -> Self {
        let one = c64::new(1.0, 0.0);
        let zero = c64::new(0.0, 0.0);
        CellOperator { block: [[one, zero], [zero, one]] }
    }

    pub fn adjoint(&self) -> Self {
        let b = &self.block;
        CellOperator { block: [[b[0][0].conj(), b[1][0].conj()], [b[0][1].conj(), b[1][1].conj()]] }
    }

    pub fn compose(&self, other: &CellOperator) -> Self {
        let (a, b) = (&self.block, &other.block);
        let mut out = [[c64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        CellOperator { block: out }
    }

    pub fn is_identity(&self) -> bool {
        *self == CellOperator::identity()
    }

    pub fn is_diagonal(&self) -> bool {
        self.block[0][1] == c64::new(0.0, 0.0) && self.block[1][0] == c64::new(0.0, 0.0)
    }

    pub fn to_matrix(&self, n_cells: usize) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(2 * n_cells, 2 * n_cells);
        for j in 0..n_cells {
            for a in 0..2 {
                for b in 0..2 {
                    m[(2 * j + a, 2 * j + b)] = self.block[a][b];
                }
            }
        }
        m
    }

    /// `O · M`
    pub fn apply_left(&self, m: &Mat<c64>) -> Mat<c64> {
        let b = &self.block;
        Mat::from_fn(m.nrows(), m.ncols(), |i, k| {
            let (cell, a) = (i / 2, i % 2);
            b[a][0] * m[(2 * cell, k)] + b[a][1] * m[(2 * cell + 1, k)]
        })
    }

    /// `M · O`
    pub fn apply_right(&self, m: &Mat<c64>) -> Mat<c64> {
        let b = &self.block;
        Mat::from_fn(m.nrows(), m.ncols(), |k, i| {
            let (cell, a) = (i / 2, i % 2);
            m[(k, 2 * cell)] * b[0][a] + m[(k, 2 * cell + 1)] * b[1][a]
        })
    }

    /// `O · M · O†`
    pub fn conjugate(&self, m: &Mat<c64>) -> Mat<c64> {
        self.apply_right_adjoint(&self.apply_left(m))
    }

    fn apply_right_adjoint(&self, m: &Mat<c64>) -> Mat<c64> {
        self.adjoint().apply_right(m)
    }

    /// `O · v` for a site vector.
    pub fn apply_vec(&self, v: &[c64]) -> Vec<c64> {
        let b = &self.block;
        let mut out = vec![c64::new(0.0, 0.0); v.len()];
        for cell in 0..v.len() / 2 {
            let (x, y) = (v[2 * cell], v[2 * cell + 1]);
            out[2 * cell] = b[0][0] * x + b[0][1] * y;
            out[2 * cell + 1] = b[1][0] * x + b[1][1] * y;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiralKind {
    SigmaZ,
    SigmaY,
}

impl ChiralKind {
    /// Orientation of the winding number. The cell rotation that carries the
    /// gain/loss chain onto a nonreciprocal SSH chain maps `σ_y` to `−σ_z`, so
    /// the trace is taken with `−σ_y` to keep `ν = +1` on the topological side.
    pub fn winding_sign(self) -> f64 {
        match self {
            ChiralKind::SigmaZ => 1.0,
            ChiralKind::SigmaY => -1.0,
        }
    }
}

/// `σ_z ⊗ I` for the SSH-type variants, `σ_y ⊗ I` for gain/loss. Hermitian
/// and unitary, so `C⁻¹ = C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiralOperator {
    pub kind: ChiralKind,
    pub n_cells: usize,
}

impl ChiralOperator {
    pub fn cell_operator(&self) -> CellOperator {
        let zero = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        match self.kind {
            ChiralKind::SigmaZ => CellOperator { block: [[one, zero], [zero, -one]] },
            ChiralKind::SigmaY => CellOperator { block: [[zero, -i], [i, zero]] },
        }
    }

    pub fn matrix(&self) -> Mat<c64> {
        self.cell_operator().to_matrix(self.n_cells)
    }
}

pub fn chiral_operator(spec: &ModelSpec) -> ChiralOperator {
    let kind = match spec.variant {
        Variant::GainLoss => ChiralKind::SigmaY,
        _ => ChiralKind::SigmaZ,
    };
    ChiralOperator { kind, n_cells: spec.n_cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Chiral,
    /// Parity `σ_x ⊗ I` times complex conjugation.
    ParityTime,
}

/// Max-norm residual of the requested symmetry relation.
pub fn verify_symmetry(h: &HamiltonianMatrix, c: &ChiralOperator, which: Symmetry) -> Result<f64> {
    if c.n_cells != h.n_cells() {
        return Err(Error::DimensionMismatch { expected: h.n_cells(), found: c.n_cells });
    }
    let m = h.entries();
    let n = h.n_sites();
    let mut worst = 0.0f64;
    match which {
        Symmetry::Chiral => {
            let chc = c.cell_operator().conjugate(m);
            for j in 0..n {
                for i in 0..n {
                    worst = worst.max((chc[(i, j)] + m[(i, j)]).norm());
                }
            }
        }
        Symmetry::ParityTime => {
            if h.variant() != Variant::GainLoss {
                return Err(Error::UnsupportedVariant { op: "PT symmetry check", variant: h.variant() });
            }
            let partner = |i: usize| i ^ 1;
            for j in 0..n {
                for i in 0..n {
                    worst = worst.max((m[(partner(i), partner(j))].conj() - m[(i, j)]).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `S⁻¹ H S` with `S = diag(1, 1, r, r, r², r², …)`, `r = √(1+γ)`.
pub fn similarity_transform(h: &HamiltonianMatrix, gamma: f64) -> Result<HamiltonianMatrix> {
    if !(gamma > -1.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("similarity transform needs γ > -1, got {gamma}")));
    }
    if h.boundary() != Boundary::Open {
        return Err(Error::InvalidArgument(
            "similarity transform is only defined for open chains".into(),
        ));
    }
    let r = (1.0 + gamma).sqrt();
    let m = h.entries();
    let entries = Mat::from_fn(h.n_sites(), h.n_sites(), |i, j| {
        let z = m[(i, j)];
        if z == c64::new(0.0, 0.0) {
            return z;
        }
        let power = (j / 2) as i32 - (i / 2) as i32;
        z * r.powi(power)
    });
    HamiltonianMatrix::from_parts(entries, h.variant(), h.boundary())
}

/// Per-cell rotation `U = (I + iσ_x)/√2` that maps the gain/loss chain onto a
/// chain with nonreciprocal intracell hopping `t ± Γ/2`.
pub fn gainloss_frame() -> CellOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let d = c64::new(s, 0.0);
    let o = c64::new(0.0, s);
    CellOperator { block: [[d, o], [o, d]] }
}

/// Returns `U H U⁻¹`.
pub fn gainloss_rotation(h: &HamiltonianMatrix) -> Result<HamiltonianMatrix> {
    if h.variant() != Variant::GainLoss {
        return Err(Error::UnsupportedVariant { op: "gain/loss rotation", variant: h.variant() });
    }
    let rotated = gainloss_frame().conjugate(h.entries());
    HamiltonianMatrix::from_parts(rotated, h.variant(), h.boundary())
}
