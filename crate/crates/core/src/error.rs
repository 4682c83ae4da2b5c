//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A probability-valued argument fell outside its admissible range.
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// An integer-valued argument fell outside its admissible range.
    #[error("{name} = {value} must be {requirement}")]
    Parameter {
        name: &'static str,
        value: i64,
        requirement: &'static str,
    },

    /// A time series was too short for the requested computation.
    #[error("series of length {len} is too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    /// Exhaustive enumeration was refused because the instance is too large.
    #[error("{what} = {size} exceeds the enumeration cap of {cap}")]
    CapacityExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    /// A sweep was refused because it would exceed the step budget.
    #[error("sweep would execute {estimate} simulation steps, over the cap of {cap}; raise the cap to proceed")]
    ResourceCap { estimate: u128, cap: u64 },

    /// A per-flow quantity was required but not supplied.
    #[error("flow {flow} has no {what}")]
    MissingFlowData { flow: usize, what: &'static str },

    /// Two inputs that must describe the same system do not.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    /// A topology failed validation.
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    /// A configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
