//! Closed-form perpetual solution.
//!
//! With `Z(x) = (L/x)^α ∧ 1` and gain `G(x) = (K − x)⁺ Z(x)`, the value is
//! `G` on `(0, b]` and `C₂ x^{−2r/σ²}` above `b`, where the optimal level is
//! `b = K/2` when `K < 2L` and `b = 2rK/(2r + σ²)` when `2rK > L(σ² + 2r)`.

use crate::azema::z_perp_unchecked;
use crate::error::{Error, Result};
use crate::model::{Contract, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `b = K/2 < L`.
    BelowL,
    /// `b = 2rK/(2r + σ²) > L`.
    AboveL,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpetualSolution {
    pub b: f64,
    pub regime: Regime,
    /// Coefficient of `x^{−2r/σ²}` in the continuation region.
    pub c2: f64,
    /// Set when `K = 2L` exactly: the strict `K < 2L` condition fails but
    /// the `BelowL` formula is used with `b = L`.
    pub tie: bool,
}

const TIE_RTOL: f64 = 1e-12;

pub fn solve_perpetual(contract: &Contract, params: &MarketParams) -> Result<PerpetualSolution> {
    params.require_perpetual()?;
    let (k, l) = (contract.strike(), contract.level());
    let (r, s2) = (params.r(), params.sigma() * params.sigma());
    let gamma = 2.0 * r / s2;
    let tie = ((k - 2.0 * l) / k).abs() <= TIE_RTOL;
    let below = k < 2.0 * l || tie;
    let above = 2.0 * r * k > l * (s2 + 2.0 * r);
    match (below, above) {
        (true, false) => {
            let b = 0.5 * k;
            Ok(PerpetualSolution {
                b,
                regime: Regime::BelowL,
                c2: l.powf(params.alpha()) * k * k / 4.0,
                tie,
            })
        }
        (false, true) => {
            let b = 2.0 * r * k / (2.0 * r + s2);
            Ok(PerpetualSolution {
                b,
                regime: Regime::AboveL,
                c2: (k - b) * b.powf(gamma),
                tie: false,
            })
        }
        _ => Err(Error::AmbiguousRegime {
            strike: k,
            level: l,
            two_level: 2.0 * l,
            upper: l * (s2 + 2.0 * r) / (2.0 * r),
        }),
    }
}

/// Perpetual gain `(K − x)⁺ Z(x)`.
pub fn perpetual_gain(x: f64, contract: &Contract, params: &MarketParams) -> f64 {
    let k = contract.strike();
    if x >= k {
        return 0.0;
    }
    (k - x) * z_perp_unchecked(x, contract.level(), params.alpha())
}

pub fn perpetual_value(x: f64, sol: &PerpetualSolution, contract: &Contract, params: &MarketParams) -> f64 {
    let gamma = 2.0 * params.r() / (params.sigma() * params.sigma());
    let stop = match sol.regime {
        Regime::BelowL => x <= sol.b,
        Regime::AboveL => x < sol.b,
    };
    if stop {
        perpetual_gain(x, contract, params)
    } else {
        sol.c2 * x.powf(-gamma)
    }
}
