use core::fmt;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A map row is shorter or longer than the first row.
    RaggedRow { row: usize },
    /// A map cell character outside the accepted alphabet.
    IllegalChar { ch: char, row: usize, col: usize },
    /// Empty map text.
    EmptyMapText,
    /// Two grids that must share dimensions do not.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A numeric parameter outside its admissible range.
    Parameter(&'static str),
    /// An input outside the mathematical domain of the operation.
    Domain(&'static str),
    /// An obstacle-pattern/sensor combination with no known closed form.
    UnsupportedPattern(&'static str),
    /// The requested round count is below the minimum needed for the
    /// target confidence; the threshold interval is empty.
    InfeasibleRounds { rounds: u32, required: u32 },
    /// An operation over a collection received no elements.
    EmptyInput,
    /// An observation map still contains unknown (-1) cells.
    IncompleteObservation { index: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RaggedRow { row } => write!(f, "map row {row} has a different length"),
            Error::IllegalChar { ch, row, col } => {
                write!(f, "illegal map character {ch:?} at row {row}, column {col}")
            }
            Error::EmptyMapText => write!(f, "map text is empty"),
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::UnsupportedPattern(msg) => write!(f, "unsupported pattern: {msg}"),
            Error::InfeasibleRounds { rounds, required } => write!(
                f,
                "{rounds} rounds cannot reach the target confidence (need at least {required}); \
                 plan for a degraded confidence instead"
            ),
            Error::EmptyInput => write!(f, "no input maps"),
            Error::IncompleteObservation { index } => {
                write!(f, "observation map {index} contains unknown (-1) cells")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
