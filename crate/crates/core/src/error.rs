use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested (or maximal) truncation leaves more probability mass
    /// than the configured tolerance.
    #[error("truncation at j_max = {j_max} leaves tail mass {tail_bound:e} above tolerance {tolerance:e}")]
    Truncation {
        j_max: usize,
        tail_bound: f64,
        tolerance: f64,
    },

    #[error("shape mismatch: layout is {expected_arms}x{expected_windows}, matrix is {arms}x{windows}")]
    Shape {
        expected_arms: usize,
        expected_windows: usize,
        arms: usize,
        windows: usize,
    },

    #[error("lambda bounds [{lo}, {hi}] do not bracket the optimum at M = {m}, N = {n}")]
    Bracket { m: usize, n: usize, lo: f64, hi: f64 },

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {value} is outside [0, 1]")))
    }
}
