//! Market and contract parameterization plus the Gaussian and lognormal
//! building blocks shared by the rest of the crate.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Black–Scholes market: `dX = r X dt + σ X dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    r: f64,
    sigma: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("r", r, "interest rate must be positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", sigma, "volatility must be positive"));
        }
        Ok(MarketParams { r, sigma })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `α = 2r/σ² − 1`, always recomputed from `r` and `σ`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.r / (self.sigma * self.sigma) - 1.0
    }

    /// Log-price drift `r − σ²/2`.
    pub fn log_drift(&self) -> f64 {
        self.r - 0.5 * self.sigma * self.sigma
    }

    /// The perpetual problem needs `α < 0`, i.e. `2r < σ²`.
    pub fn require_perpetual(&self) -> Result<()> {
        let alpha = self.alpha();
        if alpha < 0.0 {
            Ok(())
        } else {
            Err(Error::param(
                "alpha",
                alpha,
                "perpetual pricing requires alpha = 2r/sigma^2 - 1 < 0",
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maturity {
    Finite(f64),
    Perpetual,
}

/// Put with strike `K` whose exercise right ends at the last exit time from
/// `[L, ∞)`. Requires `K > L > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    strike: f64,
    level: f64,
    maturity: Maturity,
}

impl Contract {
    pub fn new(strike: f64, level: f64, maturity: Maturity) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::param("strike", strike, "strike must be positive"));
        }
        if !(level.is_finite() && level > 0.0) {
            return Err(Error::param("level", level, "level must be positive"));
        }
        if strike <= level {
            return Err(Error::InvalidContract(format!(
                "strike K = {strike} must exceed level L = {level}"
            )));
        }
        if let Maturity::Finite(t) = maturity {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::param("maturity", t, "maturity must be positive"));
            }
        }
        Ok(Contract {
            strike,
            level,
            maturity,
        })
    }

    pub fn finite(strike: f64, level: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, level, Maturity::Finite(maturity))
    }

    pub fn perpetual(strike: f64, level: f64) -> Result<Self> {
        Self::new(strike, level, Maturity::Perpetual)
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn maturity(&self) -> Maturity {
        self.maturity
    }

    /// Finite maturity in years, or an error for perpetual contracts.
    pub fn horizon(&self) -> Result<f64> {
        match self.maturity {
            Maturity::Finite(t) => Ok(t),
            Maturity::Perpetual => Err(Error::InvalidContract("operation needs a finite maturity".into())),
        }
    }
}

/// Strictly increasing time nodes `0 = t_0 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first node must be 0, got {}", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "nodes not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn uniform(maturity: f64, steps: usize) -> Result<Self> {
        Self::check_args(maturity, steps)?;
        let mut nodes: Vec<f64> = (0..=steps).map(|k| maturity * k as f64 / steps as f64).collect();
        nodes[steps] = maturity;
        Self::new(nodes)
    }

    /// Nodes uniform in `√(T − t)`, which packs them toward maturity where
    /// the exercise boundary has infinite slope.
    pub fn sqrt_spaced(maturity: f64, steps: usize) -> Result<Self> {
        Self::check_args(maturity, steps)?;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| {
                let w = 1.0 - k as f64 / steps as f64;
                maturity * (1.0 - w * w)
            })
            .collect();
        nodes[0] = 0.0;
        nodes[steps] = maturity;
        Self::new(nodes)
    }

    fn check_args(maturity: f64, steps: usize) -> Result<()> {
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::param("maturity", maturity, "maturity must be positive"));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn maturity(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

/// Standard normal CDF, accurate to ~1e-16 absolute.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Φ(b) − Φ(a)` for `a ≤ b`, computed on the side that avoids cancellation.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// Upper limit of an integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upper {
    At(f64),
    Unbounded,
}

/// Which lognormal moment to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `p = 0`: discounted probability mass.
    Zeroth,
    /// `p = 1`: discounted price.
    First,
}

/// `E[e^{−ru} X_u^p 1{a < X_u ≤ b}]` with `X_u = x0 exp((r − σ²/2)u + σW_u)`.
pub fn lognormal_partial_expectation(
    x0: f64,
    u: f64,
    a: f64,
    b: Upper,
    moment: Moment,
    params: &MarketParams,
) -> Result<f64> {
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::param("x0", x0, "spot must be positive"));
    }
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::param("u", u, "horizon must be positive"));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::param("a", a, "lower limit must be finite and >= 0"));
    }
    if let Upper::At(b) = b {
        if b.is_nan() || b <= a {
            return Err(Error::param("b", b, "upper limit must exceed lower limit"));
        }
    }
    Ok(partial_expectation(x0, u, a, b, moment, params))
}

/// Unchecked body of [`lognormal_partial_expectation`]; the solver's inner
/// loops call this directly.
pub(crate) fn partial_expectation(x0: f64, u: f64, a: f64, b: Upper, moment: Moment, params: &MarketParams) -> f64 {
    let sd = params.sigma() * u.sqrt();
    let mean = x0.ln() + params.log_drift() * u;
    let z = |y: f64| (y.ln() - mean) / sd;
    let za = if a > 0.0 { z(a) } else { f64::NEG_INFINITY };
    let zb = match b {
        Upper::At(b) => z(b),
        Upper::Unbounded => f64::INFINITY,
    };
    match moment {
        Moment::Zeroth => (-params.r() * u).exp() * norm_interval(za, zb),
        Moment::First => x0 * norm_interval(za - sd, zb - sd),
    }
}
