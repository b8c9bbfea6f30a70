//! Run configuration documents.
//!
//! A configuration is a JSON object with the sections `model`, `ensemble`,
//! `winding`, `grid` and `output`. Every key is optional; unknown keys are
//! rejected. An empty document `{}` describes the reference phase diagram:
//! `t = 1`, `t' = 1.2`, `L = 100`, `l = 20`, 200 realizations, `W₁ = W`,
//! `W₂ = 0`, linear nonreciprocity, swept over `γ ∈ [0, 3.5]` and `W ∈ [0, 6]`.
//!
//! ```
//! let cfg = nhtai::config::parse_config(r#"{"model": {"gamma": 1.0, "W": 3.0}}"#).unwrap();
//! assert_eq!(cfg.spec.w1, 3.0);
//! assert_eq!(cfg.winding.l_sites, 20);
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Axis, AxisParam, EnsembleConfig, Linkage, SweepGrid};
use crate::error::Error;
use crate::lattice::{Boundary, ModelSpec, NonreciprocalForm, Variant};
use crate::observables::WindingConfig;

const W1_RATIOS: [f64; 2] = [0.0, 1.0];
const W2_RATIOS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Model(#[from] Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub variant: Variant,
    pub t: f64,
    pub t_prime: f64,
    pub gamma: f64,
    pub form: NonreciprocalForm,
    pub t_double_prime: f64,
    pub sigma_gamma: f64,
    #[serde(rename = "Gamma")]
    pub gain_loss: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "W1_ratio")]
    pub w1_ratio: f64,
    #[serde(rename = "W2_ratio")]
    pub w2_ratio: f64,
    /// Chain length in sites.
    #[serde(rename = "L")]
    pub l_total: usize,
    pub boundary: Boundary,
}

impl Default for ModelSection {
    fn default() -> Self {
        let spec = ModelSpec::default();
        ModelSection {
            variant: spec.variant,
            t: spec.t,
            t_prime: spec.t_prime,
            gamma: spec.gamma,
            form: spec.form,
            t_double_prime: spec.t_double_prime,
            sigma_gamma: spec.sigma_gamma,
            gain_loss: spec.gain_loss,
            w: 0.0,
            w1_ratio: 1.0,
            w2_ratio: 0.0,
            l_total: 100,
            boundary: Boundary::Open,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub realizations: usize,
    pub seed: u64,
    pub n_exclude: Option<usize>,
    pub tolerance: f64,
    pub max_rejects: usize,
    pub periodic_ipr: bool,
    pub max_pair_condition: Option<f64>,
    pub detect_edge_modes: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        EnsembleSection {
            realizations: e.n_realizations,
            seed: e.master_seed,
            n_exclude: e.n_exclude,
            tolerance: e.tolerance,
            max_rejects: e.max_rejects,
            periodic_ipr: e.periodic_ipr,
            max_pair_condition: e.max_pair_condition,
            detect_edge_modes: e.detect_edge_modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindingSection {
    /// Boundary margin in sites; overrides `l_fraction`.
    pub l: Option<usize>,
    pub l_fraction: f64,
}

impl Default for WindingSection {
    fn default() -> Self {
        WindingSection { l: None, l_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub param: AxisParam,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub range: Option<RangeSpec>,
}

impl AxisSection {
    fn resolve(&self) -> Result<Axis, ConfigError> {
        let values = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => linspace(r)?,
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(format!(
                    "axis {} sets both values and range",
                    self.param.name()
                )))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(format!("axis {} needs values or range", self.param.name())))
            }
        };
        Ok(Axis { param: self.param, values })
    }
}

fn linspace(r: &RangeSpec) -> Result<Vec<f64>, ConfigError> {
    match r.count {
        0 => Err(ConfigError::Invalid("range count must be positive".into())),
        1 => Ok(vec![r.start]),
        n => {
            let step = (r.stop - r.start) / (n - 1) as f64;
            Ok((0..n).map(|k| if k == n - 1 { r.stop } else { r.start + k as f64 * step }).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub axis1: AxisSection,
    pub axis2: AxisSection,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            axis1: AxisSection {
                param: AxisParam::Gamma,
                values: None,
                range: Some(RangeSpec { start: 0.0, stop: 3.5, count: 15 }),
            },
            axis2: AxisSection {
                param: AxisParam::W,
                values: None,
                range: Some(RangeSpec { start: 0.0, stop: 6.0, count: 25 }),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub prefix: String,
    pub checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), format: OutputFormat::Both, prefix: "run".into(), checkpoint: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub model: ModelSection,
    pub ensemble: EnsembleSection,
    pub winding: WindingSection,
    pub grid: GridSection,
    pub output: OutputSection,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Model at the single point `(gamma, W)` of the `model` section.
    pub spec: ModelSpec,
    pub ensemble: EnsembleConfig,
    pub grid: SweepGrid,
    pub winding: WindingConfig,
    pub linkage: Linkage,
    /// `W` of the `model` section.
    pub w: f64,
    pub output: OutputSection,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let file: RunConfigFile = serde_json::from_str(text)?;
    file.resolve()
}

fn in_set(x: f64, set: &[f64]) -> bool {
    set.iter().any(|&s| s == x)
}

impl RunConfigFile {
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let m = &self.model;
        if m.l_total % 2 != 0 {
            return Err(ConfigError::Invalid(format!("L = {} sites is odd", m.l_total)));
        }
        if !in_set(m.w1_ratio, &W1_RATIOS) {
            return Err(ConfigError::Invalid(format!("W1_ratio {} is not one of {W1_RATIOS:?}", m.w1_ratio)));
        }
        if !in_set(m.w2_ratio, &W2_RATIOS) {
            return Err(ConfigError::Invalid(format!("W2_ratio {} is not one of {W2_RATIOS:?}", m.w2_ratio)));
        }
        let linkage = Linkage { w1_ratio: m.w1_ratio, w2_ratio: m.w2_ratio };
        let mut spec = ModelSpec {
            variant: m.variant,
            t: m.t,
            t_prime: m.t_prime,
            gamma: m.gamma,
            form: m.form,
            t_double_prime: m.t_double_prime,
            sigma_gamma: m.sigma_gamma,
            gain_loss: m.gain_loss,
            w1: 0.0,
            w2: 0.0,
            n_cells: m.l_total / 2,
            boundary: m.boundary,
        };
        linkage.apply(&mut spec, m.w);
        spec.validate()?;

        let winding = match self.winding.l {
            Some(l) if l % 2 != 0 => {
                return Err(ConfigError::Invalid(format!("l = {l} sites is odd")));
            }
            Some(l) => WindingConfig::new(m.l_total, l)?,
            None => WindingConfig::from_fraction(m.l_total, self.winding.l_fraction)?,
        };

        let e = &self.ensemble;
        let ensemble = EnsembleConfig {
            n_realizations: e.realizations,
            master_seed: e.seed,
            n_exclude: e.n_exclude,
            tolerance: e.tolerance,
            max_rejects: e.max_rejects,
            periodic_ipr: e.periodic_ipr,
            max_pair_condition: e.max_pair_condition,
            detect_edge_modes: e.detect_edge_modes,
        };
        ensemble.validate()?;

        let grid = SweepGrid {
            axis1: self.grid.axis1.resolve()?,
            axis2: self.grid.axis2.resolve()?,
            base: spec,
            linkage,
        };
        grid.validate()?;

        Ok(RunConfig { spec, ensemble, grid, winding, linkage, w: m.w, output: self.output.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        for text in ["", "{}"] {
            let cfg = parse_config(text).unwrap();
            assert_eq!(cfg.spec.t, 1.0);
            assert_eq!(cfg.spec.t_prime, 1.2);
            assert_eq!(cfg.spec.n_sites(), 100);
            assert_eq!(cfg.winding.l_sites, 20);
            assert_eq!(cfg.ensemble.n_realizations, 200);
            assert_eq!(cfg.spec.w2, 0.0);
            assert_eq!(cfg.spec.form, NonreciprocalForm::Linear);
            assert_eq!(cfg.spec.variant, Variant::Nonreciprocal);
            assert_eq!(cfg.grid.axis1.param, AxisParam::Gamma);
            assert_eq!(cfg.grid.axis2.param, AxisParam::W);
            assert_eq!(cfg.grid.axis1.values.last(), Some(&3.5));
        }
    }

    #[test]
    fn odd_margin_is_rejected() {
        let err = parse_config(r#"{"winding": {"l": 21}}"#).unwrap_err();
        assert!(err.to_string().contains("odd"), "{err}");
        assert!(parse_config(r#"{"model": {"L": 101}}"#).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config(r#"{"model": {"gama": 1.0}}"#).is_err());
        assert!(parse_config(r#"{"modle": {}}"#).is_err());
        assert!(parse_config(r#"{"grid": {"axis1": {"param": "gamma", "value": [0]}}}"#).is_err());
    }

    #[test]
    fn intercell_ratio_links_disorder() {
        let cfg = parse_config(r#"{"model": {"W": 2.0, "W2_ratio": 0.25}}"#).unwrap();
        assert_eq!(cfg.spec.w1, 2.0);
        assert_eq!(cfg.spec.w2, 0.5);
        let idx = cfg.grid.points().iter().find(|p| p.2 == 6.0).unwrap().0;
        let at = cfg.grid.spec_at(idx);
        assert_eq!((at.w1, at.w2), (6.0, 1.5));
        assert!(parse_config(r#"{"model": {"W2_ratio": 0.3}}"#).is_err());
    }

    #[test]
    fn explicit_axis_values() {
        let cfg = parse_config(
            r#"{"grid": {"axis1": {"param": "Gamma", "values": [0.5, 1.0]},
                         "axis2": {"param": "t_prime", "range": {"start": 0.2, "stop": 1.0, "count": 5}}},
                "model": {"variant": "gain_loss"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.grid.len(), 10);
        assert_eq!(cfg.grid.axis2.values, vec![0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
    }

    #[test]
    fn unsorted_axis_is_rejected() {
        assert!(parse_config(r#"{"grid": {"axis1": {"param": "gamma", "values": [1, 0]}}}"#).is_err());
    }
}
