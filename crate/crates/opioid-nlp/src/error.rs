use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate {kind} '{key}'")]
    DuplicateKey { kind: &'static str, key: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("rule '{rule_id}' failed to compile: {msg}")]
    InvalidPattern { rule_id: String, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("key phrase '{0}' was eliminated by preprocessing")]
    KeyPhraseEliminated(String),

    #[error("feature index {index} out of range for model with {dims} features")]
    DimensionMismatch { index: usize, dims: usize },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("model checksum mismatch (file corrupted or truncated)")]
    ChecksumMismatch,

    #[error("unsupported model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("training diverged: non-finite loss at epoch {0}")]
    Divergence(usize),

    #[error("{0}")]
    Degenerate(String),

    #[error("snippet id mismatch at position {position}: '{predicted}' vs '{gold}'")]
    IdMismatch {
        position: usize,
        predicted: String,
        gold: String,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
