use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
    #[error("invalid velocity code {0} (valid codes are 1..=15)")]
    InvalidCode(u8),
    #[error("aliasing: f*dt = {0} >= 0.5")]
    Aliasing(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unit index {0} out of range")]
    UnitIndex(usize),
    #[error("chip is not held in clear")]
    NotInClear,
    #[error("chip is not programmed")]
    NotProgrammed,
    #[error("nyquist violation: fs = {fs:.1} Hz, need > {need:.1} Hz")]
    Nyquist { fs: f64, need: f64 },
    #[error("stream length {len} not divisible by {phases} phases")]
    StreamLength { len: usize, phases: usize },
    #[error("trace too short: {len} samples, need {need}")]
    TraceTooShort { len: usize, need: usize },
    #[error("degenerate design: inner products are all identical")]
    DegenerateDesign,
    #[error("insufficient population: {admitted} admitted, {needed} needed")]
    InsufficientPopulation { admitted: usize, needed: usize },
    #[error("pair members do not have opposite preferred directions")]
    NotOpposing,
    #[error("too few active groups: {active} < {min}")]
    TooFewGroups { active: usize, min: usize },
    #[error("only {active} active {axis}-axis groups, need {min}")]
    TooFewAxisGroups { axis: char, active: usize, min: usize },
    #[error("{m} is not divisible by 2^{n}")]
    NotDivisible { m: u64, n: u32 },
    #[error("bump at ({x},{y}) cannot move {dir}")]
    OutOfBounds { x: i32, y: i32, dir: char },
    #[error("segment {segment} exceeded tick budget {budget}")]
    TickBudget { segment: usize, budget: u64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown script {0}")]
    UnknownScript(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
