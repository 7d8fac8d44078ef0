use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group subchannel is numerically singular: condition number {condition:.3e} exceeds cap {cap:.1e}")]
    SingularGroupChannel { condition: f64, cap: f64 },

    #[error("quadrature did not reach tolerance {tolerance:.1e} within {evaluations} evaluations (error estimate {estimate:.3e})")]
    QuadratureNonConvergence {
        tolerance: f64,
        evaluations: usize,
        estimate: f64,
    },

    #[error("unsupported configuration K = {k}, N = {n} (only K = 4, N = 5 is classified)")]
    UnsupportedConfiguration { k: usize, n: usize },

    #[error("alignment did not converge after {sweeps} sweeps (leakage {leakage:.3e})")]
    AlignmentNotConverged { sweeps: usize, leakage: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("feasibility violated at receiver {user}: d = {dof} plus interference dimension {interference_dim} exceeds N = {antennas}")]
    FeasibilityViolated {
        user: usize,
        dof: usize,
        interference_dim: usize,
        antennas: usize,
    },

    #[error("certification failed ({check}) at user {user}: {detail}")]
    CertificationFailed {
        check: &'static str,
        user: usize,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularGroupChannel { .. } => "SingularGroupChannel",
            Error::QuadratureNonConvergence { .. } => "QuadratureNonConvergence",
            Error::UnsupportedConfiguration { .. } => "UnsupportedConfiguration",
            Error::AlignmentNotConverged { .. } => "AlignmentNotConverged",
            Error::DegenerateChannel(_) => "DegenerateChannel",
            Error::FeasibilityViolated { .. } => "FeasibilityViolated",
            Error::CertificationFailed { .. } => "CertificationFailed",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
