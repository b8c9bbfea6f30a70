use crate::lattice::Variant;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("disorder realization has {found} cells, model has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{op} is not defined for the {variant:?} model")]
    UnsupportedVariant { op: &'static str, variant: Variant },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("eigenvector matrix is near-defective (condition estimate {condition:.3e})")]
    NearDefective { condition: f64 },
    #[error("biorthonormality residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Biorthogonality { residual: f64, tol: f64 },
    #[error("reconstruction residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Reconstruction { residual: f64, tol: f64 },
    #[error("{0} states remain after edge-mode exclusion; cannot split into chiral pairs")]
    OddBranchCount(usize),
    #[error("state {0} has |Re E| and |Im E| below 1e-12; chiral branch is ambiguous")]
    AmbiguousBranch(usize),
    #[error("winding interval: {0}")]
    WindingConfig(String),
    #[error("state index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures that resampling the disorder realization can cure.
    pub fn is_decomposition_failure(&self) -> bool {
        matches!(
            self,
            Error::Eigensolver(_)
                | Error::NearDefective { .. }
                | Error::Biorthogonality { .. }
                | Error::Reconstruction { .. }
                | Error::AmbiguousBranch(_)
                | Error::OddBranchCount(_)
        )
    }
}
