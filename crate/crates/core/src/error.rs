use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown atom id {0}")]
    UnknownAtom(usize),

    #[error("graph too large for exact edit distance: {atoms} heavy atoms (limit {limit})")]
    GedTooLarge { atoms: usize, limit: usize },

    #[error("SMILES parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid molecular graph: {0}")]
    InvalidGraph(String),

    #[error("illegal mutation: {0}")]
    IllegalMutation(String),

    #[error("no legal mutation exists for this graph")]
    NoLegalMutation,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
