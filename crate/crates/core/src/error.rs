use alloc::string::String;

use thiserror::Error;

use crate::env::AircraftId;

/// Failure to turn map text into a [`GridMap`](crate::map::GridMap).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },

    #[error("line {line}, col {col}: unknown cell symbol {symbol:?}")]
    UnknownSymbol { line: usize, col: usize, symbol: char },

    #[error("line {line}: expected {expected} cells, found {found}")]
    RowWidth { line: usize, expected: usize, found: usize },

    #[error("expected {expected} map rows, found {found}")]
    RowCount { expected: usize, found: usize },

    #[error("map is empty")]
    Empty,

    #[error("runway {runway}: {message}")]
    Runway { runway: u8, message: String },
}

/// Errors raised by the simulator, planners and learners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("cell ({x}, {y}) is not traversable")]
    NotTraversable { x: i32, y: i32 },

    #[error("aircraft {0} does not exist")]
    UnknownAircraft(AircraftId),

    #[error("aircraft {0} is not active")]
    InactiveAircraft(AircraftId),

    #[error("aircraft {id}: action {action} is masked out")]
    MaskedAction { id: AircraftId, action: &'static str },

    #[error("expected actions for {expected} active aircraft, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("runway schedule: {0}")]
    Schedule(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("traffic generation: {0}")]
    Generation(String),

    #[error("planning: {0}")]
    Planning(String),

    #[error("model: {0}")]
    Model(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
