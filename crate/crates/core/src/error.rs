use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("degree {degree} exceeds the cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("range [{lo}, {hi}] is outside the domain [{a}, {b}]")]
    OutsideDomain { lo: f64, hi: f64, a: f64, b: f64 },
    #[error("invalid breakpoints: {0}")]
    Breakpoints(String),
    #[error("invalid target: {0}")]
    Target(String),
    #[error("density is not positive on the domain (minimum {0})")]
    NonPositiveDensity(f64),
    #[error("width {got} does not match the required {expected}")]
    Width { got: usize, expected: usize },
    #[error("parameter vector has length {got}, expected 3*width+1 = {expected}")]
    ParamLength { got: usize, expected: usize },
    #[error("consecutive slopes {0} and {1} coincide; reduce the target first")]
    RepeatedSlopes(usize, usize),
    #[error("parameter lies outside the regular region (neuron {0} has a kink at an endpoint)")]
    NotRegular(usize),
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("matrix is not square or has inconsistent size")]
    Shape,
    #[error("grid is not strictly increasing")]
    Grid,
    #[error("weight {0} is zero")]
    ZeroWeight(usize),
    #[error("chart invariant violated: {0}")]
    Chart(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("too few usable rows for a fit: {0}")]
    FitRows(usize),
    #[error("series tail did not converge: {0}")]
    Tail(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
