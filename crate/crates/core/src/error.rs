use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("label component is empty")]
    EmptyToken,
    #[error("invalid label {0:?}: labels may not contain commas or whitespace")]
    InvalidLabel(String),
    #[error("unknown level {0:?} (expected action, verb or noun)")]
    UnknownLevel(String),
    #[error("no sequence contributes a transition")]
    EmptyGraph,
    #[error("malformed graph file at line {line}, column {column}: {reason}")]
    MalformedGraphFile {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("state {0:?} has no successors in the reference graph")]
    UnknownState(String),
    #[error("sequence must contain at least two labels")]
    SequenceTooShort,
    #[error("durations must be positive and finite")]
    NonPositiveDuration,
    #[error("no reference time for label {0:?}")]
    MissingReferenceTime(String),
    #[error("strict sequence mode requires an expected sequence")]
    MissingExpectedSequence,
    #[error("session must contain at least one step")]
    EmptySession,
    #[error("prediction source exhausted")]
    SourceExhausted,
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("malformed annotation row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("malformed prediction record at line {line}: {reason}")]
    MalformedPrediction { line: usize, reason: String },
    #[error("malformed session record at line {line}: {reason}")]
    MalformedSession { line: usize, reason: String },
    #[error("dictionary label {0:?} is not in the vocabulary")]
    DictionaryLabelNotInVocabulary(String),
    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: String, found: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown graph {0:?}")]
    UnknownGraph(String),
    #[error("unknown dictionary {0:?}")]
    UnknownDictionary(String),
    #[error("label {0:?} is not in the graph vocabulary")]
    UnknownLabel(String),
    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used by the service and the C interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyToken => "empty_token",
            Error::InvalidLabel(_) => "invalid_label",
            Error::UnknownLevel(_) => "unknown_level",
            Error::EmptyGraph => "empty_graph",
            Error::MalformedGraphFile { .. } => "malformed_graph_file",
            Error::UnknownState(_) => "unknown_state",
            Error::SequenceTooShort => "sequence_too_short",
            Error::NonPositiveDuration => "non_positive_duration",
            Error::MissingReferenceTime(_) => "missing_reference_time",
            Error::MissingExpectedSequence => "missing_expected_sequence",
            Error::EmptySession => "empty_session",
            Error::SourceExhausted => "source_exhausted",
            Error::InvalidPrediction(_) => "invalid_prediction",
            Error::MalformedRow { .. } => "malformed_row",
            Error::MalformedPrediction { .. } => "malformed_prediction",
            Error::MalformedSession { .. } => "malformed_session",
            Error::DictionaryLabelNotInVocabulary(_) => "dictionary_label_not_in_vocabulary",
            Error::LevelMismatch { .. } => "level_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownSession(_) => "unknown_session",
            Error::UnknownGraph(_) => "unknown_graph",
            Error::UnknownDictionary(_) => "unknown_dictionary",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
