use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("index {index} is outside the stored range [{start}, {end}]")]
    IndexOutOfRange { index: u64, start: u64, end: u64 },

    #[error("insufficient data: need index {needed}, sequence ends at {available}")]
    InsufficientData { needed: u64, available: u64 },

    #[error("moment n = {n} diverges for this measure")]
    DivergentMoment { n: u64 },

    #[error("measure carries an atom at 0 of mass {mass}")]
    AtomAtZero { mass: f64 },

    #[error("expected a measure on {expected}")]
    WrongDomain { expected: &'static str },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fit residual {residual:e} exceeds tolerance {tol:e}")]
    FitFailed { residual: f64, tol: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite",
        })
    }
}
