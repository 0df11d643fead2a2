use thiserror::Error;

/// Errors raised by the sampler, simulator and evaluation routines.
#[derive(Debug, Error)]
pub enum BnnError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("insufficient draws: need at least {needed}, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("numerical singularity in posterior precision (condition estimate {condition:.3e})")]
    NumericalSingularity { condition: f64 },

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("sweep {index} failed: {source}")]
    Sweep {
        index: usize,
        #[source]
        source: Box<BnnError>,
    },

    #[error("period {period} failed: {source}")]
    Period {
        period: String,
        #[source]
        source: Box<BnnError>,
    },
}

impl BnnError {
    /// True for errors caused by floating point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            BnnError::NumericalSingularity { .. } | BnnError::StateCorruption(_) => true,
            BnnError::Sweep { source, .. } | BnnError::Period { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, BnnError>;
