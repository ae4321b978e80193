use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input at {path}: {message}")]
    MalformedInput { path: String, message: String },

    #[error("label mismatch at {path}: {label:?} is not in the declared label space")]
    LabelMismatch { path: String, label: String },

    #[error("length mismatch at {path}: {tokens} tokens but {slots} slot labels")]
    LengthMismatch { path: String, tokens: usize, slots: usize },

    #[error("malformed slot label {0:?}: expected \"O\", \"B-<type>\" or \"I-<type>\"")]
    MalformedLabel(String),

    #[error("insufficient corpus: {0}")]
    InsufficientCorpus(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate vector: zero norm under {0} similarity")]
    DegenerateVector(&'static str),

    #[error("frozen encoder has no trainable parameters")]
    FrozenEncoder,

    #[error("lattice has no feasible (intent, slot sequence) pair")]
    InfeasibleLattice,

    #[error("gold (intent, slot sequence) pair is masked out")]
    InfeasibleGold,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedInput { .. } => "MalformedInput",
            Error::LabelMismatch { .. } => "LabelMismatch",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::MalformedLabel(_) => "MalformedLabel",
            Error::InsufficientCorpus(_) => "InsufficientCorpus",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::DegenerateVector(_) => "DegenerateVector",
            Error::FrozenEncoder => "FrozenEncoder",
            Error::InfeasibleLattice => "InfeasibleLattice",
            Error::InfeasibleGold => "InfeasibleGold",
            Error::Checkpoint(_) => "Checkpoint",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
