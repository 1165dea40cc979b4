//! Error taxonomy for the toolkit.
//!
//! Variants are grouped by how a front end should react: `Config` failures
//! mean the run was mis-specified, `Input` failures mean a data file was
//! malformed, and `Assertion` failures mean a numerical certificate that the
//! library promises to uphold could not be produced.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VcError {
    /// A parameter combination violates a documented precondition.
    #[error("config: {0}")]
    Config(String),

    /// An input file or signal failed validation.
    #[error("input: {0}")]
    Input(String),

    /// Frequency endpoints out of order.
    #[error("frequency interval out of order: lo={lo}, hi={hi}")]
    FrequencyOrder { lo: f64, hi: f64 },

    /// A requested scale cannot be represented on the sampling grid.
    #[error("scale {scale} unresolvable at grid spacing {spacing}")]
    ScaleUnresolvable { scale: f64, spacing: f64 },

    /// A tile region contains tiles no candidate tent can cover.
    #[error("region not coverable by the candidate tent family: {0}")]
    Incoverable(String),

    /// An iterative construction exhausted its budget without certifying
    /// its required bound.
    #[error("construction failed: {0}")]
    Assertion(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VcError>;

impl VcError {
    /// Process exit code a CLI should use for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            VcError::Config(_) | VcError::FrequencyOrder { .. } | VcError::ScaleUnresolvable { .. } => 2,
            VcError::Input(_) | VcError::Io(_) => 3,
            VcError::Incoverable(_) | VcError::Assertion(_) => 4,
        }
    }
}
