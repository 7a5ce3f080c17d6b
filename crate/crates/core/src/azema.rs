//! The Azéma supermartingale `Z(t, x) = P(θ > t | X_t = x)` of the last exit
//! time `θ` from `[L, ∞)`, in perpetual and finite-horizon form, with its
//! analytic partial derivatives.
//!
//! For `x < L` and `τ = T − t > 0`:
//!
//! ```text
//! d1 = (−log(L/x) + (r − σ²/2)τ) / (σ√τ)
//! d2 = (−log(L/x) − (r − σ²/2)τ) / (σ√τ)
//! Z  = Φ(d1) + (L/x)^α Φ(d2)
//! ```
//!
//! and `Z = 1` for `x ≥ L`. At `t = T`, `Z = 1{x ≥ L}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{norm_cdf, Contract, MarketParams, Maturity};

/// `Z` and its partial derivatives at one point.
///
/// At `x = L` the space derivatives jump; `left_limit` is then set and the
/// `x`-derivatives hold the limits from below, which is the value every
/// integral formula uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZDerivatives {
    pub z: f64,
    pub z_t: f64,
    pub z_x: f64,
    pub z_xt: f64,
    pub d1: f64,
    pub d2: f64,
    pub left_limit: bool,
}

/// Perpetual `Z(x) = (L/x)^α ∧ 1`, requires `α < 0`.
pub fn z_perp(x: f64, level: f64, params: &MarketParams) -> Result<f64> {
    params.require_perpetual()?;
    if !(x > 0.0) {
        return Err(Error::param("x", x, "price must be positive"));
    }
    if !(level > 0.0) {
        return Err(Error::param("level", level, "level must be positive"));
    }
    Ok(z_perp_unchecked(x, level, params.alpha()))
}

pub(crate) fn z_perp_unchecked(x: f64, level: f64, alpha: f64) -> f64 {
    if x >= level {
        1.0
    } else {
        (level / x).powf(alpha).min(1.0)
    }
}

/// `(d1, d2)` at `(t, x)`; needs `t < T`.
pub fn d1d2(t: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<(f64, f64)> {
    let maturity = contract.horizon()?;
    if !(t >= 0.0 && t < maturity) {
        return Err(Error::param("t", t, "d1/d2 need 0 <= t < T"));
    }
    if !(x > 0.0) {
        return Err(Error::param("x", x, "price must be positive"));
    }
    Ok(Azema::new(contract.level(), maturity, params).d1d2(maturity - t, x))
}

/// Finite-horizon `Z(t, x)`; a perpetual contract falls back to
/// [`z_perp`].
pub fn z(t: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::param("x", x, "price must be positive"));
    }
    match contract.maturity() {
        Maturity::Perpetual => z_perp(x, contract.level(), params),
        Maturity::Finite(maturity) => {
            if !(t >= 0.0 && t <= maturity) {
                return Err(Error::param("t", t, "need 0 <= t <= T"));
            }
            Ok(Azema::new(contract.level(), maturity, params).z(t, x))
        }
    }
}

/// All partial derivatives of `Z` at `(t, x)`.
///
/// Rejects the singular corner `(T, L)`; elsewhere at `t = T` every
/// derivative is zero.
pub fn z_derivs(t: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<ZDerivatives> {
    let maturity = contract.horizon()?;
    if !(x > 0.0) {
        return Err(Error::param("x", x, "price must be positive"));
    }
    if !(t >= 0.0 && t <= maturity) {
        return Err(Error::param("t", t, "need 0 <= t <= T"));
    }
    let level = contract.level();
    if t == maturity && x == level {
        return Err(Error::param("t", t, "Z_x is singular at (t, x) = (T, L)"));
    }
    Ok(Azema::new(level, maturity, params).derivs(t, x))
}

/// Left limit `Z_x(t, L−)`; needs `t < T`.
pub fn z_x_left_at_level(t: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    let maturity = contract.horizon()?;
    if !(t >= 0.0 && t < maturity) {
        return Err(Error::param("t", t, "need 0 <= t < T"));
    }
    Ok(Azema::new(contract.level(), maturity, params).z_x_left_at_level(maturity - t))
}

/// Upper bound for `Z_x(t, x)` valid for `t ≤ t_δ < T` and `0 < x ≤ L`:
///
/// ```text
/// √(2/π) / (σ √(T − t_δ) x) − α (L/x)^α Φ(d2(t, x)) / x
/// ```
///
/// obtained from the exact expression by `e^{−d1²/2} ≤ 1` and
/// `T − t ≥ T − t_δ`.
pub fn z_x_upper_bound(t: f64, t_delta: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    let maturity = contract.horizon()?;
    if !(t_delta < maturity && t >= 0.0 && t <= t_delta) {
        return Err(Error::param("t_delta", t_delta, "need 0 <= t <= t_delta < T"));
    }
    let level = contract.level();
    if !(x > 0.0 && x <= level) {
        return Err(Error::param("x", x, "bound holds for 0 < x <= L"));
    }
    let az = Azema::new(level, maturity, params);
    let (_, d2) = az.d1d2(maturity - t, x);
    let alpha = params.alpha();
    let first = (2.0 / PI).sqrt() / (params.sigma() * (maturity - t_delta).sqrt() * x);
    Ok(first - alpha * (level / x).powf(alpha) * norm_cdf(d2) / x)
}

/// Flattened parameters for evaluating `Z` in hot loops.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Azema {
    pub level: f64,
    pub maturity: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub drift: f64,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Azema {
    pub fn new(level: f64, maturity: f64, params: &MarketParams) -> Self {
        Azema {
            level,
            maturity,
            sigma: params.sigma(),
            alpha: params.alpha(),
            drift: params.log_drift(),
        }
    }

    #[inline]
    pub fn d1d2(&self, tau: f64, x: f64) -> (f64, f64) {
        let lg = (self.level / x).ln();
        let sd = self.sigma * tau.sqrt();
        let m = self.drift * tau;
        ((-lg + m) / sd, (-lg - m) / sd)
    }

    #[inline]
    pub fn z(&self, t: f64, x: f64) -> f64 {
        if x >= self.level {
            return 1.0;
        }
        let tau = self.maturity - t;
        if tau <= 0.0 {
            return 0.0;
        }
        let (d1, d2) = self.d1d2(tau, x);
        (norm_cdf(d1) + (self.level / x).powf(self.alpha) * norm_cdf(d2)).min(1.0)
    }

    /// `(Z, Z_x)` for `x < L`, `t < T`, sharing the transcendental calls.
    #[inline]
    pub fn z_and_zx_below(&self, t: f64, x: f64) -> (f64, f64) {
        let tau = self.maturity - t;
        let lg = (self.level / x).ln();
        let sqrt_tau = tau.sqrt();
        let sd = self.sigma * sqrt_tau;
        let m = self.drift * tau;
        let d1 = (-lg + m) / sd;
        let d2 = (-lg - m) / sd;
        let a = (self.alpha * lg).exp();
        let phi_d2 = norm_cdf(d2);
        let z = (norm_cdf(d1) + a * phi_d2).min(1.0);
        let zx = (SQRT_2_OVER_PI * (-0.5 * d1 * d1).exp() / sd - self.alpha * a * phi_d2) / x;
        (z, zx)
    }

    /// `Z_x(T − τ, L−)`.
    #[inline]
    pub fn z_x_left_at_level(&self, tau: f64) -> f64 {
        let sd = self.sigma * tau.sqrt();
        let d1 = self.drift * tau / sd;
        (SQRT_2_OVER_PI * (-0.5 * d1 * d1).exp() / sd - self.alpha * norm_cdf(-d1)) / self.level
    }

    pub fn derivs(&self, t: f64, x: f64) -> ZDerivatives {
        let tau = self.maturity - t;
        if tau <= 0.0 {
            let (d1, d2) = if x >= self.level {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (f64::NEG_INFINITY, f64::NEG_INFINITY)
            };
            return ZDerivatives {
                z: if x >= self.level { 1.0 } else { 0.0 },
                z_t: 0.0,
                z_x: 0.0,
                z_xt: 0.0,
                d1,
                d2,
                left_limit: false,
            };
        }
        let (d1, d2) = self.d1d2(tau, x);
        if x > self.level {
            return ZDerivatives {
                z: 1.0,
                z_t: 0.0,
                z_x: 0.0,
                z_xt: 0.0,
                d1,
                d2,
                left_limit: false,
            };
        }
        let lg = (self.level / x).ln();
        let a = (self.alpha * lg).exp();
        let e1 = (-0.5 * d1 * d1).exp();
        let sd = self.sigma * tau.sqrt();
        let z = (norm_cdf(d1) + a * norm_cdf(d2)).min(1.0);
        let z_t = -INV_SQRT_2PI * lg * e1 / (self.sigma * tau.powf(1.5));
        let z_x = (SQRT_2_OVER_PI * e1 / sd - self.alpha * a * norm_cdf(d2)) / x;
        let vol_drift = self.drift / self.sigma;
        let z_xt = INV_SQRT_2PI / (x * self.sigma * tau.powf(1.5))
            * e1
            * (1.0 - lg * lg / (tau * self.sigma * self.sigma) + lg / self.sigma * vol_drift);
        ZDerivatives {
            z,
            z_t,
            z_x,
            z_xt,
            d1,
            d2,
            left_limit: x == self.level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(level: f64, maturity: f64) -> (Contract, MarketParams) {
        (
            Contract::finite(7.0, level, maturity).unwrap(),
            MarketParams::new(0.05, 0.4).unwrap(),
        )
    }

    #[test]
    fn perpetual_values() {
        let p = MarketParams::new(0.05, 0.4).unwrap();
        assert_eq!(z_perp(2.0, 2.0, &p).unwrap(), 1.0);
        assert_eq!(z_perp(4.0, 2.0, &p).unwrap(), 1.0);
        assert_abs_diff_eq!(z_perp(1.0, 2.0, &p).unwrap(), 2f64.powf(-0.375), epsilon = 1e-15);
        assert_abs_diff_eq!(z_perp(1.0, 2.0, &p).unwrap(), 0.77111, epsilon = 1e-5);
        let q = MarketParams::new(0.1, 0.4).unwrap();
        assert!(z_perp(1.0, 2.0, &q).is_err());
    }

    #[test]
    fn perpetual_ode_residual() {
        let p = MarketParams::new(0.05, 0.4).unwrap();
        let (r, s, a, l) = (p.r(), p.sigma(), p.alpha(), 2.0);
        for i in 1..40 {
            let x = l * i as f64 / 40.0;
            // Z = L^α x^{−α}
            let zp = -a * l.powf(a) * x.powf(-a - 1.0);
            let zpp = a * (a + 1.0) * l.powf(a) * x.powf(-a - 2.0);
            let res = r * x * zp + 0.5 * s * s * x * x * zpp;
            assert!(res.abs() < 1e-10, "residual {res} at x = {x}");
        }
    }

    #[test]
    fn d1d2_values() {
        let (c, p) = setup(2.0, 5.0);
        let (d1, d2) = d1d2(4.0, 1.0, &c, &p).unwrap();
        assert_abs_diff_eq!(d1, -1.807_867_951_399_863, epsilon = 1e-12);
        assert_abs_diff_eq!(d2, (-(2f64).ln() + 0.03) / 0.4, epsilon = 1e-12);
        let (d1, d2) = d1d2(1.0, 2.0, &c, &p).unwrap();
        assert_abs_diff_eq!(d1, -0.03 / 0.4 * 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d2, -d1, epsilon = 1e-14);
        assert!(d1d2(5.0, 1.0, &c, &p).is_err());
    }

    #[test]
    fn d1d2_identity() {
        let (c, p) = setup(2.0, 5.0);
        for &(t, x) in &[(0.0, 1.0), (2.5, 0.3), (4.9, 1.9), (0.0, 3.0)] {
            let (d1, d2) = d1d2(t, x, &c, &p).unwrap();
            let lhs = (-0.5 * d1 * d1).exp();
            let rhs = (2.0 / x).powf(p.alpha()) * (-0.5 * d2 * d2).exp();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn terminal_and_above_level() {
        let (c, p) = setup(2.0, 5.0);
        assert_eq!(z(5.0, 1.8, &c, &p).unwrap(), 0.0);
        assert_eq!(z(5.0, 2.0, &c, &p).unwrap(), 1.0);
        for &t in &[0.0, 1.0, 4.99, 5.0] {
            assert_eq!(z(t, 3.0, &c, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn long_horizon_limit() {
        let (c, p) = setup(2.0, 1e4);
        for &x in &[0.5, 1.0, 1.9] {
            let zf = z(0.0, x, &c, &p).unwrap();
            let zp = z_perp(x, 2.0, &p).unwrap();
            assert!((zf - zp).abs() < 1e-6, "{zf} vs {zp}");
        }
    }

    #[test]
    fn derivatives_vs_finite_differences() {
        let (c, p) = setup(2.0, 5.0);
        let zt = |t: f64, x: f64| z(t, x, &c, &p).unwrap();
        for &(t, x) in &[(4.0, 1.0), (0.5, 1.5), (3.0, 0.6), (4.8, 1.95)] {
            let d = z_derivs(t, x, &c, &p).unwrap();
            let h = 1e-5;
            let fx = (zt(t, x + h) - zt(t, x - h)) / (2.0 * h);
            let ft = (zt(t + h, x) - zt(t - h, x)) / (2.0 * h);
            assert_abs_diff_eq!(d.z_x, fx, epsilon = 1e-6);
            assert_abs_diff_eq!(d.z_t, ft, epsilon = 1e-6);
            let zx = |t: f64| z_derivs(t, x, &c, &p).unwrap().z_x;
            let fxt = (zx(t + h) - zx(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(d.z_xt, fxt, epsilon = 1e-5 * fxt.abs().max(1.0));
        }
        // x = 1, T − t = 1: the closed form written out.
        let d = z_derivs(4.0, 1.0, &c, &p).unwrap();
        let expected =
            (2.0 / PI).sqrt() * (-0.5 * d.d1 * d.d1).exp() / 0.4 + 0.375 * 2f64.powf(-0.375) * norm_cdf(d.d2);
        assert_abs_diff_eq!(d.z_x, expected, epsilon = 1e-14);
    }

    #[test]
    fn derivative_edge_cases() {
        let (c, p) = setup(2.0, 5.0);
        let d = z_derivs(1.0, 4.0, &c, &p).unwrap();
        assert_eq!((d.z_t, d.z_x, d.z_xt), (0.0, 0.0, 0.0));
        assert!(z_derivs(5.0, 2.0, &c, &p).is_err());
        let at = z_derivs(1.0, 2.0, &c, &p).unwrap();
        assert!(at.left_limit);
        assert_abs_diff_eq!(at.z_x, z_x_left_at_level(1.0, &c, &p).unwrap(), epsilon = 1e-14);
        let below = z_derivs(1.0, 2.0 - 1e-9, &c, &p).unwrap();
        assert_abs_diff_eq!(at.z_x, below.z_x, epsilon = 1e-6);
        let term = z_derivs(5.0, 1.0, &c, &p).unwrap();
        assert_eq!(term.z_x, 0.0);
    }

    #[test]
    fn pde_residual_on_grid() {
        let level = 2.0;
        let (c, p) = setup(level, 5.0);
        let (r, s) = (p.r(), p.sigma());
        let zf = |t: f64, x: f64| z(t, x, &c, &p).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=18 {
            let t = 0.9 * 5.0 * i as f64 / 18.0;
            for j in 1..=40 {
                let x = level * (0.1 + 0.85 * j as f64 / 40.0);
                if (x - level).abs() / level <= 0.05 {
                    continue;
                }
                let h = 1e-4 * x.max(1.0);
                let zxx = (zf(t, x + h) - 2.0 * zf(t, x) + zf(t, x - h)) / (h * h);
                let d = z_derivs(t, x, &c, &p).unwrap();
                let res = d.z_t + r * x * d.z_x + 0.5 * s * s * x * x * zxx;
                worst = worst.max(res.abs());
            }
        }
        assert!(worst < 1e-5, "worst PDE residual {worst}");
    }

    #[test]
    fn upper_bound_holds() {
        let (c, p) = setup(6.5, 5.0);
        for &td in &[1.0, 3.0, 4.5] {
            for i in 0..=10 {
                let t = td * i as f64 / 10.0;
                for j in 1..=50 {
                    let x = 6.5 * j as f64 / 50.0;
                    let zx = if x < 6.5 {
                        z_derivs(t, x, &c, &p).unwrap().z_x
                    } else {
                        z_x_left_at_level(t, &c, &p).unwrap()
                    };
                    let bound = z_x_upper_bound(t, td, x, &c, &p).unwrap();
                    assert!(zx <= bound, "t={t} x={x}: {zx} > {bound}");
                }
            }
        }
    }
}
