use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum LabError {
    /// Argument outside the domain of an operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// Dimension violating the standing assumption N = 2k, N >= 2.
    #[error("dimension N = {0} rejected: the Sobolev limit case requires N even and N >= 2 (N = 2k)")]
    Dimension(i64),

    /// A non-finite sample was produced while evaluating a profile.
    #[error("non-finite {quantity} at node t = {t} (r = {r})")]
    NonFinite { quantity: &'static str, t: f64, r: f64 },

    /// The exponent of the functional left double-precision range.
    #[error("blow-up detected at r = {radius:e}: exponent {exponent:.3} exceeds {limit}")]
    BlowUp { radius: f64, exponent: f64, limit: f64 },

    /// The Lagrange multiplier is undefined for the zero profile.
    #[error("Lagrange multiplier undefined: profile vanishes identically")]
    ZeroProfile,

    /// Unmet precondition of an operation.
    #[error("precondition failed in {op}: {detail}")]
    Precondition { op: &'static str, detail: String },

    /// The fixed-point solver failed.
    #[error("solver failure: {0}")]
    Solver(#[from] crate::extremal::SolveFailure),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        LabError::Domain { op, detail: detail.into() }
    }

    pub(crate) fn precondition(op: &'static str, detail: impl Into<String>) -> Self {
        LabError::Precondition { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Whether the error originates from numerics (as opposed to input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            LabError::NonFinite { .. }
                | LabError::BlowUp { .. }
                | LabError::ZeroProfile
                | LabError::Solver(_)
        )
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
