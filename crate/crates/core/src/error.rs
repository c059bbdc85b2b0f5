use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("invalid period {0}: discretization must be finite and non-negative")]
    InvalidPeriod(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("packet disorder possible: tau_max ({tau_max} s) must be < NT ({nt} s)")]
    Disorder { tau_max: f64, nt: f64 },

    #[error("delay {tau} s outside the gain-schedule range [0, {limit}] s")]
    DelayOutOfRange { tau: f64, limit: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("traces are not on a common grid: {0}")]
    GridMismatch(String),

    #[error("empty robustness grid")]
    EmptyGrid,

    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numeric overflow at t = {time} s on axis {axis}")]
    Overflow { time: f64, axis: usize },
}
