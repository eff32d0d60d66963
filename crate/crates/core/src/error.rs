use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the set where the quantity is defined.
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// Not enough samples (or terms) for the requested quantity.
    #[error("{what}: need at least {needed}, got {got}")]
    Size {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("index {index} out of range (valid 0..={max})")]
    Index { index: usize, max: usize },
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("filter is not in A(p, q): {reason}")]
    InvalidFilter { reason: &'static str },
    /// A value could not be inverted because it falls outside the range
    /// attained by the limit function. `nearest` is the parameter at the
    /// closest boundary, which callers may use to clamp.
    #[error("statistic {value} is outside the attainable range [{low}, {high}]; nearest parameter {nearest}")]
    OutOfRange {
        value: f64,
        low: f64,
        high: f64,
        nearest: f64,
    },
    #[error("cannot interpolate at {at}: table covers [{low}, {high}]")]
    Interpolation { at: f64, low: f64, high: f64 },
    #[error("table is malformed: {reason}")]
    Table { reason: &'static str },
}
