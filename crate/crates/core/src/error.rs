use thiserror::Error;

/// Failures surfaced by the library. Numerical failures are never turned
/// into silent wrong values.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {value}, error {error})")]
    Quadrature {
        subdivisions: usize,
        value: f64,
        error: f64,
    },

    #[error("bridge sampler exceeded {cap} proposals (t={t}, y={y}, envelope={envelope})")]
    ProposalCap {
        cap: u64,
        t: f64,
        y: f64,
        envelope: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    /// Short name of the component that failed, used in CLI diagnostics.
    pub fn component(&self) -> &'static str {
        match self {
            Error::Domain { op, .. } => op,
            Error::Quadrature { .. } => "quadrature",
            Error::ProposalCap { .. } => "bridge envelope",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
