use thiserror::Error;

/// Errors raised by the fatigue models and their numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Miner damage never reached one before the sequence ended.
    #[error("severity sequence exhausted before failure (final damage {damage})")]
    SequenceExhausted { damage: f64 },

    /// A simulated specimen outlived the severity sequence.
    #[error("severity sequence exhausted before failure (residual health {residual})")]
    HealthRemaining { residual: f64 },

    /// A survival curve never dropped to the requested level.
    #[error("cycle grid too short: survival still {last} at the last grid point")]
    GridTooShort { last: f64 },

    /// The severity field does not have the hot-point structure the Laplace
    /// expansion relies on.
    #[error("geometry violates the expected hot-point structure: {0}")]
    HotPointStructure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {value}"))
    }
}
