//! Disorder averaging and two-parameter sweeps.
//!
//! Every random number is fixed by `(master_seed, point, realization,
//! reject)`. Realizations run on the ambient rayon pool and are reduced in
//! ascending index order, so results do not depend on the worker count.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    build_hamiltonian, chiral_operator, sample_disorder, Boundary, ModelSpec, Variant,
};
use crate::observables::{
    density_profile, ipr_per_state, spectral_observables, winding_number, WindingConfig,
};
use crate::spectral::{chiral_branches, chiral_branches_conditioned, decompose, edge_mode_exclusion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Edge states dropped from the winding sum; `None` means 2 for open and
    /// 0 for periodic chains.
    pub n_exclude: Option<usize>,
    pub tolerance: f64,
    /// Decomposition failures tolerated per grid point before it is marked
    /// failed.
    pub max_rejects: usize,
    /// Also diagonalize the periodic chain for the PBC-averaged IPR.
    pub periodic_ipr: bool,
    /// Widen the edge exclusion while the next near-zero pair has an
    /// eigenvalue condition number above this; `None` keeps it fixed.
    pub max_pair_condition: Option<f64>,
    /// Only exclude small-`|E|` pairs that sit at the chain ends; `n_exclude`
    /// is then an upper bound.
    pub detect_edge_modes: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_realizations: 200,
            master_seed: 1,
            n_exclude: None,
            tolerance: 1e-8,
            max_rejects: 20,
            periodic_ipr: true,
            max_pair_condition: Some(10.0),
            detect_edge_modes: true,
        }
    }
}

impl EnsembleConfig {
    pub fn exclusion(&self, boundary: Boundary) -> usize {
        self.n_exclude.unwrap_or(match boundary {
            Boundary::Open => 2,
            Boundary::Periodic => 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::InvalidArgument("n_realizations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_pair_condition.is_some_and(|k| !(k >= 1.0)) {
            return Err(Error::InvalidArgument("max_pair_condition must be at least 1".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one disorder sample. Each input is folded in through a bijective
/// 64-bit mixer, so changing any single input changes the seed.
pub fn derive_seed(master_seed: u64, point: u64, realization: u64, reject: u64) -> u64 {
    [point, realization, reject]
        .iter()
        .enumerate()
        .fold(splitmix64(master_seed), |h, (slot, &x)| {
            splitmix64(h ^ splitmix64(x.wrapping_add((slot as u64 + 1) << 56)))
        })
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nan_array_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
        v.map(|x| if x.is_finite() { Some(x) } else { None }).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 4], D::Error> {
        Ok(<[Option<f64>; 4]>::deserialize(d)?.map(|x| x.unwrap_or(f64::NAN)))
    }
}

/// Disorder-averaged observables of one parameter point. Failed points carry
/// NaN in every numeric field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(with = "nan_as_null")]
    pub nu_mean: f64,
    #[serde(with = "nan_as_null")]
    pub nu_stderr: f64,
    #[serde(with = "nan_as_null")]
    pub ipr_avg_obc: f64,
    #[serde(with = "nan_as_null")]
    pub ipr_avg_pbc: f64,
    /// Averaged IPR of the `L/2`-th state (open chain).
    #[serde(with = "nan_as_null")]
    pub ipr_mid: f64,
    #[serde(with = "nan_as_null")]
    pub gap_mean: f64,
    #[serde(with = "nan_array_as_null")]
    pub e_mid_re: [f64; 4],
    #[serde(with = "nan_array_as_null")]
    pub e_mid_im: [f64; 4],
    pub rejects: usize,
    pub failed: bool,
}

impl PointRecord {
    fn failed(rejects: usize) -> Self {
        PointRecord {
            nu_mean: f64::NAN,
            nu_stderr: f64::NAN,
            ipr_avg_obc: f64::NAN,
            ipr_avg_pbc: f64::NAN,
            ipr_mid: f64::NAN,
            gap_mean: f64::NAN,
            e_mid_re: [f64::NAN; 4],
            e_mid_im: [f64::NAN; 4],
            rejects,
            failed: true,
        }
    }

    pub fn mid_energies(&self) -> [c64; 4] {
        std::array::from_fn(|k| c64::new(self.e_mid_re[k], self.e_mid_im[k]))
    }
}

/// A point record plus the per-site and per-state averages that do not go
/// into the tabular output.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub record: PointRecord,
    pub nu_samples: Vec<f64>,
    /// `I_n` averaged over realizations, open chain, canonical order.
    pub ipr_per_state: Vec<f64>,
    /// Averaged `|ψ_{L/2, x}|²` of the open chain.
    pub density_mid: Vec<f64>,
}

struct Sample {
    nu: f64,
    ipr_states: Vec<f64>,
    ipr_pbc: f64,
    gap: f64,
    mid: [c64; 4],
    density_mid: Vec<f64>,
}

fn has_randomness(spec: &ModelSpec) -> bool {
    spec.w1 != 0.0
        || spec.w2 != 0.0
        || (spec.variant == Variant::RandomGamma && spec.sigma_gamma != 0.0)
}

fn evaluate(spec: &ModelSpec, cfg: &EnsembleConfig, wcfg: &WindingConfig, seed: u64) -> Result<Sample> {
    let open = spec.with_boundary(Boundary::Open);
    let real = sample_disorder(&open, seed);
    let c = chiral_operator(&open);
    let h = build_hamiltonian(&open, &real)?;
    let d = decompose(&h, cfg.tolerance)?;
    let mut n_exclude = cfg.exclusion(Boundary::Open);
    if cfg.detect_edge_modes {
        n_exclude = edge_mode_exclusion(&d, &c, n_exclude)?;
    }
    let b = match cfg.max_pair_condition {
        Some(k) => chiral_branches_conditioned(&d, &c, n_exclude, k)?,
        None => chiral_branches(&d, &c, n_exclude)?,
    };
    let nu = winding_number(&d, &b, &c, wcfg)?;
    let summary = spectral_observables(&d, &b)?;
    let ipr_states = ipr_per_state(&d);
    let density_mid = density_profile(&d, open.n_sites() / 2 - 1)?;

    let ipr_pbc = if cfg.periodic_ipr {
        let periodic = spec.with_boundary(Boundary::Periodic);
        let hp = build_hamiltonian(&periodic, &real)?;
        let dp = decompose(&hp, cfg.tolerance)?;
        let states = ipr_per_state(&dp);
        states.iter().sum::<f64>() / states.len() as f64
    } else {
        f64::NAN
    };

    Ok(Sample {
        nu,
        ipr_states,
        ipr_pbc,
        gap: summary.numeric_gap,
        mid: summary.mid_energies,
        density_mid,
    })
}

/// Evaluates realization `s`, resampling up to `max_rejects` times.
fn evaluate_with_retries(
    spec: &ModelSpec,
    cfg: &EnsembleConfig,
    wcfg: &WindingConfig,
    point: u64,
    s: u64,
) -> Result<(Option<Sample>, usize)> {
    for reject in 0..=cfg.max_rejects {
        let seed = derive_seed(cfg.master_seed, point, s, reject as u64);
        match evaluate(spec, cfg, wcfg, seed) {
            Ok(sample) => return Ok((Some(sample), reject)),
            Err(e) if e.is_decomposition_failure() => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((None, cfg.max_rejects + 1))
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

/// Disorder average at one parameter point.
///
/// `point` only enters the seed derivation; grid sweeps pass the flattened
/// grid index.
pub fn run_point(
    spec: &ModelSpec,
    cfg: &EnsembleConfig,
    wcfg: &WindingConfig,
    point: u64,
) -> Result<PointOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if wcfg.n_sites() != spec.n_sites() {
        return Err(Error::WindingConfig(format!(
            "winding intervals cover {} sites, chain has {}",
            wcfg.n_sites(),
            spec.n_sites()
        )));
    }

    let n_s = cfg.n_realizations;
    let results: Vec<(Option<Sample>, usize)> = if has_randomness(spec) {
        (0..n_s as u64)
            .into_par_iter()
            .map(|s| evaluate_with_retries(spec, cfg, wcfg, point, s))
            .collect::<Result<_>>()?
    } else {
        // Every realization yields the same matrix.
        let (sample, rejects) = evaluate_with_retries(spec, cfg, wcfg, point, 0)?;
        match sample {
            Some(sample) => {
                let mut v = Vec::with_capacity(n_s);
                v.push((Some(sample), rejects));
                v
            }
            None => vec![(None, rejects)],
        }
    };

    let rejects: usize = results.iter().map(|(_, r)| r).sum();
    if rejects > cfg.max_rejects || results.iter().any(|(s, _)| s.is_none()) {
        return Ok(PointOutcome {
            record: PointRecord::failed(rejects),
            nu_samples: Vec::new(),
            ipr_per_state: Vec::new(),
            density_mid: Vec::new(),
        });
    }
    let samples: Vec<Sample> = results.into_iter().map(|(s, _)| s.expect("checked")).collect();
    if samples.len() == 1 && n_s > 1 {
        return Ok(replicated(samples.into_iter().next().expect("one sample"), n_s, rejects));
    }

    let n = samples.len();
    let nu_mean = mean(samples.iter().map(|s| s.nu), n);
    let nu_stderr = if n > 1 {
        let var = samples.iter().map(|s| (s.nu - nu_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let n_sites = spec.n_sites();
    let ipr_per_state: Vec<f64> =
        (0..n_sites).map(|k| mean(samples.iter().map(|s| s.ipr_states[k]), n)).collect();
    let density_mid: Vec<f64> =
        (0..n_sites).map(|x| mean(samples.iter().map(|s| s.density_mid[x]), n)).collect();
    let mid: [c64; 4] = std::array::from_fn(|k| {
        let sum: c64 = samples.iter().map(|s| s.mid[k]).sum();
        sum / n as f64
    });

    let record = PointRecord {
        nu_mean,
        nu_stderr,
        ipr_avg_obc: mean(ipr_per_state.iter().copied(), n_sites),
        ipr_avg_pbc: mean(samples.iter().map(|s| s.ipr_pbc), n),
        ipr_mid: ipr_per_state[n_sites / 2 - 1],
        gap_mean: mean(samples.iter().map(|s| s.gap), n),
        e_mid_re: mid.map(|z| z.re),
        e_mid_im: mid.map(|z| z.im),
        rejects,
        failed: false,
    };
    Ok(PointOutcome { nu_samples: samples.iter().map(|s| s.nu).collect(), ipr_per_state, density_mid, record })
}

fn replicated(sample: Sample, n_s: usize, rejects: usize) -> PointOutcome {
    let n_sites = sample.ipr_states.len();
    let record = PointRecord {
        nu_mean: sample.nu,
        nu_stderr: 0.0,
        ipr_avg_obc: mean(sample.ipr_states.iter().copied(), n_sites),
        ipr_avg_pbc: sample.ipr_pbc,
        ipr_mid: sample.ipr_states[n_sites / 2 - 1],
        gap_mean: sample.gap,
        e_mid_re: sample.mid.map(|z| z.re),
        e_mid_im: sample.mid.map(|z| z.im),
        rejects,
        failed: false,
    };
    PointOutcome {
        record,
        nu_samples: vec![sample.nu; n_s],
        ipr_per_state: sample.ipr_states,
        density_mid: sample.density_mid,
    }
}

/// Model parameter swept along a grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisParam {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "Gamma")]
    GainLoss,
    #[serde(rename = "t_prime")]
    TPrime,
    #[serde(rename = "t_double_prime")]
    TDoublePrime,
    #[serde(rename = "sigma_gamma")]
    SigmaGamma,
    /// Disorder strength; sets `W₁ = r₁W`, `W₂ = r₂W` through [`Linkage`].
    #[serde(rename = "W")]
    W,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::Gamma => "gamma",
            AxisParam::GainLoss => "Gamma",
            AxisParam::TPrime => "t_prime",
            AxisParam::TDoublePrime => "t_double_prime",
            AxisParam::SigmaGamma => "sigma_gamma",
            AxisParam::W => "W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub w1_ratio: f64,
    pub w2_ratio: f64,
}

impl Default for Linkage {
    fn default() -> Self {
        Linkage { w1_ratio: 1.0, w2_ratio: 0.0 }
    }
}

impl Linkage {
    pub fn apply(&self, spec: &mut ModelSpec, w: f64) {
        spec.w1 = self.w1_ratio * w;
        spec.w2 = self.w2_ratio * w;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: AxisParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    pub base: ModelSpec,
    pub linkage: Linkage,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.axis1.param == self.axis2.param {
            return Err(Error::InvalidArgument("both grid axes sweep the same parameter".into()));
        }
        for axis in [&self.axis1, &self.axis2] {
            if axis.values.is_empty() {
                return Err(Error::InvalidArgument(format!("axis {} is empty", axis.param.name())));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("axis {} has non-finite values", axis.param.name())));
            }
            if axis.values.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!("axis {} is not sorted", axis.param.name())));
            }
        }
        for (i, _, _) in self.points() {
            self.spec_at(i).validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axis1.values.len() * self.axis2.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(flat index, axis1 value, axis2 value)` in axis1-major order.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let n2 = self.axis2.values.len();
        self.axis1
            .values
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| self.axis2.values.iter().enumerate().map(move |(j, &b)| (i * n2 + j, a, b)))
            .collect()
    }

    pub fn spec_at(&self, index: usize) -> ModelSpec {
        let n2 = self.axis2.values.len();
        let mut spec = self.base;
        for (param, value) in [
            (self.axis1.param, self.axis1.values[index / n2]),
            (self.axis2.param, self.axis2.values[index % n2]),
        ] {
            match param {
                AxisParam::Gamma => spec.gamma = value,
                AxisParam::GainLoss => spec.gain_loss = value,
                AxisParam::TPrime => spec.t_prime = value,
                AxisParam::TDoublePrime => spec.t_double_prime = value,
                AxisParam::SigmaGamma => spec.sigma_gamma = value,
                AxisParam::W => self.linkage.apply(&mut spec, value),
            }
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub axis1: f64,
    pub axis2: f64,
    pub record: PointRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub master_seed: u64,
    pub ensemble: EnsembleConfig,
    pub winding: WindingConfig,
    pub grid: SweepGrid,
    pub threads: usize,
    pub resumed_points: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramResult {
    pub manifest: Manifest,
    pub points: Vec<GridPoint>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Append-only record of completed points.
    pub checkpoint: Option<PathBuf>,
    /// Reuse completed points found in `checkpoint`.
    pub resume: bool,
    /// Stop with [`Error::Checkpoint`] after computing this many new points.
    pub stop_after: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
}

fn fingerprint(grid: &SweepGrid, cfg: &EnsembleConfig, wcfg: &WindingConfig) -> Result<String> {
    Ok(serde_json::to_string(&(grid, cfg, wcfg))?)
}

fn load_checkpoint(path: &Path, fp: &str) -> Result<BTreeMap<usize, GridPoint>> {
    let file = File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header: CheckpointHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Ok(BTreeMap::new()),
    };
    if header.fingerprint != fp {
        return Err(Error::Checkpoint(format!(
            "{} was written for a different configuration",
            path.display()
        )));
    }
    let mut done = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted write is ignored.
        if let Ok(point) = serde_json::from_str::<GridPoint>(&line) {
            done.insert(point.index, point);
        }
    }
    Ok(done)
}

fn open_checkpoint(path: &Path, fp: &str, fresh: bool) -> Result<File> {
    let unwritable = |e: std::io::Error| Error::Checkpoint(format!("{}: {e}", path.display()));
    if fresh {
        let mut f = File::create(path).map_err(unwritable)?;
        writeln!(f, "{}", serde_json::to_string(&CheckpointHeader { fingerprint: fp.to_string() })?)
            .map_err(unwritable)?;
        f.flush().map_err(unwritable)?;
        Ok(f)
    } else {
        let mut f = OpenOptions::new().read(true).append(true).open(path).map_err(unwritable)?;
        // Terminate a torn final line so the next record starts on its own.
        let len = f.metadata().map_err(unwritable)?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            f.seek(SeekFrom::Start(len - 1)).map_err(unwritable)?;
            f.read_exact(&mut last).map_err(unwritable)?;
            if last[0] != b'\n' {
                writeln!(f).map_err(unwritable)?;
            }
        }
        Ok(f)
    }
}

/// Runs every grid point in axis1-major order, appending each finished point
/// to the checkpoint.
pub fn run_sweep(
    grid: &SweepGrid,
    cfg: &EnsembleConfig,
    wcfg: &WindingConfig,
    opts: &SweepOptions,
) -> Result<PhaseDiagramResult> {
    grid.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let fp = fingerprint(grid, cfg, wcfg)?;

    let mut done = BTreeMap::new();
    let mut sink = None;
    if let Some(path) = &opts.checkpoint {
        let existing = opts.resume && path.exists();
        if existing {
            done = load_checkpoint(path, &fp)?;
        }
        sink = Some(open_checkpoint(path, &fp, !existing)?);
    }
    let resumed_points = done.len();

    let mut computed = 0usize;
    let mut points = Vec::with_capacity(grid.len());
    for (index, a, b) in grid.points() {
        if let Some(point) = done.remove(&index) {
            points.push(point);
            continue;
        }
        if opts.stop_after.is_some_and(|k| computed >= k) {
            return Err(Error::Checkpoint(format!("stopped after {computed} new points")));
        }
        let outcome = run_point(&grid.spec_at(index), cfg, wcfg, index as u64)?;
        let point = GridPoint { index, axis1: a, axis2: b, record: outcome.record };
        if let Some(f) = sink.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&point)?)?;
            f.flush()?;
        }
        points.push(point);
        computed += 1;
    }

    Ok(PhaseDiagramResult {
        manifest: Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.master_seed,
            ensemble: *cfg,
            winding: *wcfg,
            grid: grid.clone(),
            threads: rayon::current_num_threads(),
            resumed_points,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        points,
    })
}
