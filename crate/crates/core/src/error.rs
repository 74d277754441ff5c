use alloc::string::String;

use crate::geometry::Exponent;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
    #[error("perturbation radius must be finite and nonnegative, got {0}")]
    InvalidRadius(f64),
    #[error("weight vector must be non-empty with finite entries")]
    InvalidWeights,
    #[error("weight vector is identically zero")]
    DegenerateModel,
    #[error("the dual map is undefined for q = inf; use optimal_perturbation for p = 1")]
    DualMapAtInfinity,
    #[error("projection onto the unit l{0} sphere is unsupported (q must be 1 or 2)")]
    UnsupportedProjection(Exponent),
    #[error("cannot project the zero vector onto a sphere")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector has lq norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("{value} is outside the range of the {loss} loss")]
    OutsideLossRange { loss: &'static str, value: f64 },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("hard-margin sampling gave up after {attempts} draws")]
    GenerationTimeout { attempts: u64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} requires a smooth loss (cross_entropy)")]
    SmoothLossRequired(&'static str),
    #[error("invalid oracle request: {0}")]
    InvalidOracle(String),
}
