use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion failed: {0}")]
    Ingest(#[from] std::io::Error),

    #[error("{origin}: {malformed} of {total} lines malformed; not a raw sensor log")]
    Format {
        origin: String,
        malformed: usize,
        total: usize,
    },

    #[error("fusion error: window {window_index} of subject {subject} activity {activity} lacks source {source_name}")]
    Fusion {
        subject: u32,
        activity: char,
        window_index: u32,
        source_name: &'static str,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("stratification error: class {class} has {count} samples, need at least {k}")]
    Stratification { class: String, count: usize, k: usize },

    #[error("no data for {0}")]
    EmptySlice(String),

    #[error("authentication split error: {0}")]
    Split(String),

    #[error("ROC needs both genuine and imposter scores")]
    OneClass,

    #[error("invalid attack config: {0}")]
    AttackConfig(String),

    #[error("calibration premise fails: benign mean {benign:.4} <= adversarial mean {adversarial:.4}")]
    Calibration { benign: f64, adversarial: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
