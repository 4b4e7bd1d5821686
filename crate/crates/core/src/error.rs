use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters, tables or settings.
    Config(String),
    /// The evolution rate reached a non-positive value.
    DomainCollapse { t: f64, rho: f64 },
    /// A function produced a non-finite value.
    Evaluation { what: &'static str, t: f64 },
    /// An iterative method ran out of iterations.
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// The time integrator produced a non-finite or exploding state.
    BlowUp { t: f64, sup: f64 },
    /// A density exceeded the bound of the quasimonotone transform.
    BoundViolation { sup: f64, bound: f64 },
    /// Upper/lower iterates lost their ordering.
    MonotonicityFailure { iteration: usize, violation: f64 },
    /// A state that should be impossible for valid inputs.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::DomainCollapse { t, rho } => {
                write!(f, "domain collapse: rho({t}) = {rho} is not positive")
            }
            Error::Evaluation { what, t } => {
                write!(f, "non-finite value while evaluating {what} at t = {t}")
            }
            Error::NoConvergence {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge in {iterations} iterations (last residual {residual:e})"
            ),
            Error::BlowUp { t, sup } => {
                write!(f, "solution blew up at t = {t} (sup norm {sup:e})")
            }
            Error::BoundViolation { sup, bound } => {
                write!(f, "sup v2 = {sup} exceeds the transform bound M = {bound}")
            }
            Error::MonotonicityFailure {
                iteration,
                violation,
            } => write!(
                f,
                "monotone ordering violated by {violation:e} at iteration {iteration}; \
                 try halving dt and doubling the number of grid nodes"
            ),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
