use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("denominator {0} exceeds the supported range (2^31)")]
    Overflow(u64),
    #[error("enumeration capacity exceeded: q = {q} > {limit}")]
    Capacity { q: usize, limit: usize },
    #[error("non-finite state encountered")]
    NonFinite,
    #[error("trajectory diverged (|x| = {0:e})")]
    Divergence(f64),
    #[error("border collision at step {step} (x = {x:e})")]
    BorderCollision { step: usize, x: f64 },
    #[error("map is not orientation preserving: {0}")]
    NonOrientable(String),
    #[error("negative gap {0:e}: rotation interval regime, out of scope")]
    NegativeGap(f64),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("root finding failed: {0}")]
    RootNotFound(String),
    #[error("event detection failed: {0}")]
    EventDetection(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
