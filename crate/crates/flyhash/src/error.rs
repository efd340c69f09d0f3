use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("id {id} out of range (limit {limit})")]
    IdOutOfRange { id: u32, limit: u32 },

    #[error("degenerate unit {0}: zero weight row selected as winner")]
    DegenerateUnit(usize),

    #[error("code length mismatch: {left} vs {right}")]
    LengthMismatch { left: u32, right: u32 },

    #[error("constant sequence: rank correlation undefined")]
    ConstantSequence,

    #[error("no scorable records (all skipped as out-of-vocabulary)")]
    NoScorableRecords,

    #[error("bad magic: not a recognized file")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file")]
    Truncated,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,

    #[error("non-finite weight in unit {unit}")]
    NonFinite { unit: usize },

    #[error("weights diverged in unit {unit} (|w| > {limit:e})")]
    Diverged { unit: usize, limit: f64 },

    #[error("zero vector at index {0}: cosine distance undefined")]
    ZeroVector(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
