use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpccError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("objective matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("problem is not in coordinate-selection form: {0}")]
    NotCoordinateSelection(String),
    #[error("point is infeasible for the complementarity set at pair {index}: ({a}, {b})")]
    Infeasible { index: usize, a: f64, b: f64 },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String, point: Vec<f64> },
    #[error("enumeration guard exceeded: {what} = {value} > {limit}")]
    GuardExceeded {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("reference point is only known for w_a = 0 (got {0})")]
    NoReferencePoint(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("instance file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T, E = MpccError> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MpccError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
