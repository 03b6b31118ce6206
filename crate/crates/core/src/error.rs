use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The integrated state stopped being finite.
    Divergence {
        time: f64,
    },
    /// Same as [`Error::Divergence`], raised from a batched flow.
    DivergenceAtNode {
        node: usize,
        time: f64,
    },
    /// A flowed node left the region where the observable can be evaluated.
    WindowEscape {
        node: usize,
    },
    /// A grid-sampled observable was evaluated outside its box.
    OutOfGrid,
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    HorizonMismatch {
        left: f64,
        right: f64,
    },
    TimeOutOfRange {
        time: f64,
        horizon: f64,
    },
    NonPositiveStep(f64),
    EmptySet,
    ZeroScale,
    /// A sequence that must be strictly decreasing (h values) or non-increasing
    /// (control distances) is not.
    NotDecreasing {
        index: usize,
    },
    NotUniform,
    TooFewSamples {
        needed: usize,
        found: usize,
    },
    NotDifferentiable,
    NotSmooth,
    SpliceNotClosed {
        left: String,
        right: String,
    },
    UnalignedSplice {
        switch: f64,
    },
    ScheduleGap {
        time: f64,
    },
    StepExceedsHorizon {
        h: f64,
    },
    FeedbackMismatch,
    NegativeBase,
    Eigensolver {
        feedback: usize,
    },
    Invalid(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Divergence { time } => write!(f, "flow diverged at time {time}"),
            Error::DivergenceAtNode { node, time } => {
                write!(f, "flow from node {node} diverged at time {time}")
            }
            Error::WindowEscape { node } => {
                write!(f, "flowed node {node} left the evaluation window")
            }
            Error::OutOfGrid => write!(f, "grid-sampled observable evaluated outside its box"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::HorizonMismatch { left, right } => {
                write!(f, "horizon mismatch: {left} vs {right}")
            }
            Error::TimeOutOfRange { time, horizon } => {
                write!(f, "time {time} outside [0, {horizon}]")
            }
            Error::NonPositiveStep(h) => write!(f, "step must be positive and finite, got {h}"),
            Error::EmptySet => write!(f, "empty input set"),
            Error::ZeroScale => write!(f, "scale h must be nonzero"),
            Error::NotDecreasing { index } => {
                write!(f, "sequence is not decreasing at index {index}")
            }
            Error::NotUniform => write!(f, "time samples are not uniformly spaced"),
            Error::TooFewSamples { needed, found } => {
                write!(f, "need at least {needed} samples, found {found}")
            }
            Error::NotDifferentiable => write!(f, "observable is not continuously differentiable"),
            Error::NotSmooth => write!(f, "vector field is not flagged C1"),
            Error::SpliceNotClosed { left, right } => {
                write!(
                    f,
                    "signal family is not splice-closed: {left} | {right} missing"
                )
            }
            Error::UnalignedSplice { switch } => {
                write!(
                    f,
                    "switch time {switch} does not fall on a common segment grid"
                )
            }
            Error::ScheduleGap { time } => write!(f, "schedule does not cover time {time}"),
            Error::StepExceedsHorizon { h } => write!(f, "h = {h} exceeds the horizon"),
            Error::FeedbackMismatch => write!(f, "eigenpair feedback does not belong to the field"),
            Error::NegativeBase => {
                write!(f, "non-integer power of a base that is not positive real")
            }
            Error::Eigensolver { feedback } => {
                write!(f, "eigensolver did not converge for feedback {feedback}")
            }
            Error::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for Error {}
