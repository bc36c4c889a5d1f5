use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hypergeometric series does not terminate")]
    NonTerminating,
    #[error("bottom parameter {0} is a pole before the series terminates")]
    BottomPole(f64),
    #[error("quadrature failed on [{a}, {b}]: {detail}")]
    Quadrature { a: f64, b: f64, detail: String },
    #[error("boundary classification indeterminate at {endpoint}: {detail}")]
    Indeterminate { endpoint: &'static str, detail: String },
    #[error("right-hand side is not centered: <rhs> = {mean:e}")]
    Solvability { mean: f64 },
    #[error("speed density of the fast factor is not integrable")]
    NotErgodic,
    #[error("yield undefined for bond price {0}")]
    UndefinedYield(f64),
    #[error("price {price} outside no-arbitrage band ({lo}, {hi})")]
    NoImpliedVol { price: f64, lo: f64, hi: f64 },
    #[error("series truncation: {0}")]
    Truncation(String),
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
