use thiserror::Error;

/// Errors raised across the regulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular system ({0})")]
    SingularSystem(String),

    #[error("matrix exponential overflow")]
    Overflow,

    #[error("{0} is not Hurwitz")]
    NotHurwitz(String),

    #[error("(M, N) is not controllable: controllability rank {rank} < {order}")]
    NotControllable { rank: usize, order: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input gain b = {0} (must be positive)")]
    InvalidGain(f64),

    #[error("invalid event bracket: g({t_lo}) = {g_lo}, g({t_hi}) = {g_hi}")]
    BracketInvalid {
        t_lo: f64,
        g_lo: f64,
        t_hi: f64,
        g_hi: f64,
    },

    #[error("non-finite closed-loop state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("transformed view requires a regulator solution")]
    MissingSolution,

    #[error("no trace rows inside window [{t_a}, {t_b}]")]
    EmptyWindow { t_a: f64, t_b: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
