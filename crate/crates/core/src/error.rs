use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent outcome: {0}")]
    Inconsistent(String),

    #[error("search is unbounded: {0}")]
    Unbounded(String),

    #[error("sample size {n} exceeds the stability cap of {cap}")]
    StabilityCap { n: usize, cap: usize },

    #[error("alternating sum lost precision: estimated rounding error {estimate:.3e} exceeds {tolerance:.1e}")]
    Unstable { estimate: f64, tolerance: f64 },
}

impl Error {
    /// True for the two numerical-stability failures.
    pub fn is_stability(&self) -> bool {
        matches!(self, Error::StabilityCap { .. } | Error::Unstable { .. })
    }
}
