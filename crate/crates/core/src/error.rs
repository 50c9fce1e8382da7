use thiserror::Error;

/// Errors raised anywhere in the simulation, offload or benchmark layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("position ({x}, {y}, {z}) lies outside the domain")]
    Domain { x: f64, y: f64, z: f64 },

    #[error("invalid value for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("allocation failed: {0}")]
    Allocation(String),

    #[error("numerical fault in species {species} at particle {index}")]
    NumericalFault { species: usize, index: usize },

    #[error("particle {index} of species {species} on worker {worker} moved more than one slab")]
    CflViolation {
        worker: usize,
        species: usize,
        index: usize,
    },

    #[error("engine fault: {0}")]
    EngineFault(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Whether the error stems from configuration rather than a runtime fault.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
