use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "perpetual regime gap: K = {strike}, L = {level}; neither K < 2L nor 2rK > L(σ² + 2r) holds \
         (2L = {two_level}, L(σ² + 2r)/(2r) = {upper})"
    )]
    AmbiguousRegime {
        strike: f64,
        level: f64,
        two_level: f64,
        upper: f64,
    },

    #[error("no root at node {node} (t = {t}): bracket [{lo}, {hi}] has residuals ({f_lo}, {f_hi}) of equal sign")]
    NoRoot {
        node: usize,
        t: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("boundary not monotone at node {node} (t = {t}): {value} > next value {next}")]
    NonMonotone { node: usize, t: f64, value: f64, next: f64 },

    #[error("non-finite integrand at t = {t}, x = {x}")]
    Quadrature { t: f64, x: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
