use thiserror::Error;

/// Errors produced by the skin simulator.
#[derive(Debug, Error)]
pub enum SkinError {
    #[error("infeasible packing: placed {placed} of {requested} points with min separation {min_separation} mm")]
    InfeasiblePacking {
        placed: usize,
        requested: usize,
        min_separation: f64,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("at {freq_hz} Hz: {source}")]
    AtFrequency {
        freq_hz: f64,
        #[source]
        source: Box<SkinError>,
    },

    #[error("at t = {t_s} s: {source}")]
    AtTime {
        t_s: f64,
        #[source]
        source: Box<SkinError>,
    },

    #[error("insufficient baseline: {0}")]
    InsufficientBaseline(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unclassifiable event: deltaR = {delta_r} ohm, deltaX = {delta_x} ohm")]
    UnclassifiableEvent { delta_r: f64, delta_x: f64 },

    #[error("protocol window: {0}")]
    ProtocolWindow(String),

    #[error("calibration infeasible after {evaluations} evaluations: best max residual {best_residual} ohm (tolerance {tolerance} ohm)")]
    CalibrationInfeasible {
        evaluations: usize,
        best_residual: f64,
        tolerance: f64,
    },

    #[error("invalid cell label '{0}'")]
    InvalidCell(String),

    #[error("invalid field '{field}': {message}")]
    InvalidField { field: String, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SkinError {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        SkinError::InvalidField {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SkinError>;
