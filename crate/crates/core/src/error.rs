use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record `{record}`: non-canonical residue `{found}` at position {position}")]
    Residue {
        record: String,
        position: usize,
        found: char,
    },
    #[error("record `{0}` has no residues")]
    EmptyRecord(String),
    #[error("malformed FASTA: {0}")]
    Fasta(String),
    #[error("invalid sequence `{id}`: {reason}")]
    InvalidSequence { id: String, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("substitution matrix row `{residue}` has no observations and the pseudocount is zero")]
    EmptyMatrixRow { residue: char },
    #[error("substitution matrix row `{residue}` has no off-diagonal mass")]
    DegenerateMatrix { residue: char },
    #[error(
        "library generation exhausted its retry budget: {produced} of {requested} candidates after {attempts} attempts"
    )]
    LibraryExhausted {
        requested: usize,
        produced: usize,
        attempts: usize,
    },

    #[error("requested {requested} components but the data supports at most {max}")]
    RankTooLow { requested: usize, max: usize },
    #[error("rank-deficient design matrix")]
    RankDeficient,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("sequence `{id}`: expected {expected} rank scores, got {got}")]
    ScoreArity {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("malformed oracle response line: {line}")]
    MalformedResponse { line: String },
    #[error("oracle returned no response for `{0}`")]
    MissingResponse(String),
    #[error("oracle returned a response for unknown or repeated id `{0}`")]
    UnexpectedResponse(String),
    #[error("oracle reported an error for `{id}`: {message}")]
    OracleReported { id: String, message: String },
    #[error("oracle process exited with {status}: {stderr}")]
    OracleExit { status: String, stderr: String },
    #[error("oracle batch timed out after {secs:.1} s")]
    OracleTimeout { secs: f64 },

    #[error("config hash mismatch: state was written under {expected}, current config hashes to {found}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("corrupt state file: {0}")]
    CorruptState(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Process(std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Residue { .. }
                | Error::EmptyRecord(_)
                | Error::Fasta(_)
                | Error::InvalidSequence { .. }
                | Error::InvalidInput(_)
                | Error::DuplicateId(_)
                | Error::LayoutMismatch(_)
                | Error::Config(_)
                | Error::ConfigHashMismatch { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
