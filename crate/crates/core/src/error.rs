use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{param} = {value} is outside its domain {expected}")]
    Domain {
        param: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{what} {requested} exceeds the supported limit {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("{what} {index} out of range (max {max})")]
    Index {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("integrand is not finite at s = {abscissa}")]
    NonFiniteSample { abscissa: f64 },

    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    ToleranceNotMet { a: f64, b: f64, tol: f64 },

    #[error("derivative of order {order} was not supplied")]
    MissingDerivative { order: usize },

    #[error("invalid trapezoid grid: {0}")]
    Grid(String),

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("eigenvalue {eigenvalue} lies outside [{lo}, {hi}]")]
    SpectrumOutOfRange { eigenvalue: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("exponential action for term j = {index} failed: {source}")]
    Term {
        index: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("vertex {vertex} has zero degree")]
    ZeroDegree { vertex: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Format(String),
}
