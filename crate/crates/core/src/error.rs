use thiserror::Error;

pub type Result<T, E = PfcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PfcError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// A metric or transform hit a zero denominator (coincident class means,
    /// zero-norm matrix, zero path length).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("optimization diverged at epoch {epoch} (objective {value})")]
    Divergence { epoch: usize, value: f64 },

    #[error("metric curve failed at t = {t}: {source}")]
    CurvePoint {
        t: f64,
        #[source]
        source: Box<PfcError>,
    },

    #[error("solve failed for lambda = {lambda}: {source}")]
    SweepPoint {
        lambda: f64,
        #[source]
        source: Box<PfcError>,
    },

    #[error("{origin}: malformed input: {message}")]
    Format { origin: String, message: String },

    #[error("class {class} has {available} samples, {required} required")]
    InsufficientData {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PfcError {
    /// True for failures of the numerics themselves, as opposed to bad input
    /// or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            PfcError::Degenerate(_) | PfcError::Divergence { .. } => true,
            PfcError::CurvePoint { source, .. } | PfcError::SweepPoint { source, .. } => {
                source.is_numeric()
            }
            _ => false,
        }
    }

    pub(crate) fn format(origin: impl Into<String>, message: impl Into<String>) -> Self {
        PfcError::Format {
            origin: origin.into(),
            message: message.into(),
        }
    }
}
