use alloc::string::String;
use alloc::vec::Vec;

use crate::solvers::TracePoint;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point lies outside the feasible region (distance excess {excess:e})")]
    OutsideRegion { excess: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("schedule {schedule} requires parameter `{field}`")]
    MissingParameter {
        field: &'static str,
        schedule: &'static str,
    },
    #[error("inconsistent configuration: {0}")]
    Config(String),
    #[error("batch operator needs at least one stream")]
    EmptyBatch,
    #[error("robust mode requires explicit τ")]
    RobustNeedsTau,
    #[error("chain not uniformly ergodic: {0}")]
    NotErgodic(String),
    #[error("singular linear system: {0}")]
    Singular(&'static str),
    #[error("rank-deficient features (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("degenerate zero value function")]
    ZeroValue,
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("iterate diverged at t={t} (norm {norm:e})")]
    Diverged {
        t: u64,
        norm: f64,
        trace: Vec<TracePoint>,
    },
    #[error("setup failed: {0}")]
    Setup(String),
}
