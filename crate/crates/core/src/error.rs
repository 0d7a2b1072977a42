use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("schedule does not cover [{t0}, {t1}] (covers up to {end})")]
    Domain { t0: f64, t1: f64, end: f64 },

    #[error("incompatible schedule grids: {0}")]
    ScheduleMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("channel count mismatch: model has {model}, shifts have {shifts}")]
    ChannelMismatch { model: usize, shifts: usize },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("integration failure at step {step} (t = {time}): {reason}")]
    Integration {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("state decayed to zero norm at t = {time}")]
    TotalDecay { time: f64 },

    #[error("overlap with the initial state vanishes at t = {time}; phase undefined")]
    BranchTracking { time: f64 },

    #[error("step too large: total jump probability {probability} exceeds 1 at t = {time}")]
    StepTooLarge { probability: f64, time: f64 },

    #[error("shift is not hidden: {0}")]
    ShiftNotHidden(String),
}
