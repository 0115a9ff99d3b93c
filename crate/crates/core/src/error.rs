use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("test function shape not supported here: {0}")]
    UnsupportedShape(String),

    #[error("generator not available: {0}")]
    Unsupported(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("population cap exceeded: {count} particles at t = {time} (cap {cap})")]
    PopulationCap { count: usize, cap: usize, time: f64 },

    #[error("trajectory has no retained engine state")]
    MissingState,

    #[error("lineage log does not cover [{from}, {to}] (log covers [{start}, {end}])")]
    IncompleteLog { from: f64, to: f64, start: f64, end: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
