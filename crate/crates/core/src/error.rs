use thiserror::Error;

/// Errors raised by the key-rate model and its solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("detection probability is zero; {0} is undefined")]
    UndefinedRate(&'static str),

    #[error("no sign change bracketed on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("{0} did not converge")]
    NotConverged(&'static str),

    /// A ratio whose denominator vanished. `q2 = 0` in the short-distance
    /// factor means perfect multiphoton rejection; callers treat it as unbounded.
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("need at least {needed} points, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("enumeration over {stages} stages exceeds the limit of {limit}")]
    EnumerationLimit { stages: u32, limit: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}
