use crate::azema::Azema;
use crate::model::{norm_pdf, partial_expectation, Contract, MarketParams, Moment, Upper};
use crate::quadrature::GaussLegendre;

/// An early-exercise problem whose value admits a premium representation
/// `V = terminal − ∫ e^{−ru} E[H 1{X < c}] du + local-time terms`.
///
/// All `x`, `c` arguments are prices; `s` is calendar time and `u = s − t`
/// the elapsed horizon from the evaluation time.
pub trait EarlyExercise: Sync {
    fn params(&self) -> &MarketParams;
    fn strike(&self) -> f64;
    fn maturity(&self) -> f64;

    fn gain(&self, t: f64, x: f64) -> f64;

    /// `E_{t,x}[e^{−r(T−t)} G(T, X_T)]`.
    fn terminal(&self, t: f64, x: f64) -> f64;

    /// `e^{−ru} E_{x0}[−H(s, X_u) 1{X_u < c}]` where `s` is the calendar time
    /// reached after `u`.
    fn premium(&self, s: f64, x0: f64, u: f64, c: f64, space: &GaussLegendre) -> f64;

    /// `e^{−ru} E_{x0}[−H(s, X_u) 1{c ≤ X_u < K}]`, the complement of
    /// [`premium`](Self::premium) below the strike.
    fn premium_above(&self, s: f64, x0: f64, u: f64, c: f64, space: &GaussLegendre) -> f64;

    /// Level below the strike where the gain has a kink, if any.
    fn kink_level(&self) -> Option<f64> {
        None
    }

    /// `(K − L)/2 · Z_x(s, L−)`.
    fn kink_weight(&self, _s: f64) -> f64 {
        0.0
    }
}

/// Standard American put (`Z ≡ 1`).
#[derive(Debug, Clone)]
pub struct ClassicalPut {
    params: MarketParams,
    strike: f64,
    maturity: f64,
}

impl ClassicalPut {
    pub fn new(strike: f64, maturity: f64, params: &MarketParams) -> Self {
        ClassicalPut {
            params: *params,
            strike,
            maturity,
        }
    }
}

impl EarlyExercise for ClassicalPut {
    fn params(&self) -> &MarketParams {
        &self.params
    }

    fn strike(&self) -> f64 {
        self.strike
    }

    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn gain(&self, _t: f64, x: f64) -> f64 {
        (self.strike - x).max(0.0)
    }

    fn terminal(&self, t: f64, x: f64) -> f64 {
        let u = self.maturity - t;
        if u <= 0.0 {
            return self.gain(t, x);
        }
        let k = self.strike;
        let p = &self.params;
        k * partial_expectation(x, u, 0.0, Upper::At(k), Moment::Zeroth, p)
            - partial_expectation(x, u, 0.0, Upper::At(k), Moment::First, p)
    }

    fn premium(&self, _s: f64, x0: f64, u: f64, c: f64, _space: &GaussLegendre) -> f64 {
        let k = self.strike;
        let c = c.min(k);
        self.params.r() * k * partial_expectation(x0, u, 0.0, Upper::At(c), Moment::Zeroth, &self.params)
    }

    fn premium_above(&self, _s: f64, x0: f64, u: f64, c: f64, _space: &GaussLegendre) -> f64 {
        let k = self.strike;
        if c >= k {
            return 0.0;
        }
        self.params.r() * k * partial_expectation(x0, u, c, Upper::At(k), Moment::Zeroth, &self.params)
    }
}

/// Last-exit put: gain `(K − x)⁺ Z(t, x)`.
#[derive(Debug, Clone)]
pub struct LastExitPut {
    params: MarketParams,
    strike: f64,
    level: f64,
    maturity: f64,
    azema: Azema,
}

impl LastExitPut {
    pub fn new(contract: &Contract, maturity: f64, params: &MarketParams) -> Self {
        LastExitPut {
            params: *params,
            strike: contract.strike(),
            level: contract.level(),
            maturity,
            azema: Azema::new(contract.level(), maturity, params),
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `e^{−ru} E[(rKZ + σ²y²Z_y)(s, X_u) 1{bottom ≤ X_u < top}]` for
    /// `top ≤ L`; `bottom = 0` integrates the whole lower range.
    fn below_level(&self, s: f64, x0: f64, u: f64, bottom: f64, top: f64, gl: &GaussLegendre) -> f64 {
        let tau = self.maturity - s;
        if tau <= 0.0 {
            return 0.0;
        }
        let sigma = self.params.sigma();
        let sd = sigma * u.sqrt();
        let m = x0.ln() + self.params.log_drift() * u;
        let mut lo = m - 9.0 * sd;
        if bottom > 0.0 {
            lo = lo.max(bottom.ln());
        }
        let hi = top.ln().min(m + 9.0 * sd);
        if hi <= lo {
            return 0.0;
        }
        let ln_l = self.level.ln();
        let spike = sigma * tau.sqrt();
        let mut cuts = [
            lo,
            m - 3.0 * sd,
            m,
            m + 3.0 * sd,
            ln_l - 10.0 * spike,
            ln_l - 3.0 * spike,
            hi,
        ];
        cuts.sort_by(f64::total_cmp);
        let rk = self.params.r() * self.strike;
        let s2 = sigma * sigma;
        let inv_sd = 1.0 / sd;
        let integrand = |w: f64| {
            let y = w.exp();
            let (z, zx) = self.azema.z_and_zx_below(s, y);
            let g = (w - m) * inv_sd;
            (rk * z + s2 * y * y * zx) * norm_pdf(g) * inv_sd
        };
        let mut acc = 0.0;
        let mut a = lo;
        for &b in cuts.iter().filter(|&&c| c > lo && c <= hi) {
            if b - a > 1e-12 * (1.0 + a.abs()) {
                acc += gl.integrate(a, b, integrand);
                a = b;
            }
        }
        (-self.params.r() * u).exp() * acc
    }
}

impl EarlyExercise for LastExitPut {
    fn params(&self) -> &MarketParams {
        &self.params
    }

    fn strike(&self) -> f64 {
        self.strike
    }

    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn gain(&self, t: f64, x: f64) -> f64 {
        if x >= self.strike {
            return 0.0;
        }
        (self.strike - x) * self.azema.z(t, x)
    }

    fn terminal(&self, t: f64, x: f64) -> f64 {
        let u = self.maturity - t;
        if u <= 0.0 {
            return self.gain(self.maturity, x);
        }
        let (k, l) = (self.strike, self.level);
        let p = &self.params;
        k * partial_expectation(x, u, l, Upper::At(k), Moment::Zeroth, p)
            - partial_expectation(x, u, l, Upper::At(k), Moment::First, p)
    }

    fn premium(&self, s: f64, x0: f64, u: f64, c: f64, space: &GaussLegendre) -> f64 {
        let (k, l) = (self.strike, self.level);
        let c = c.min(k);
        let mut acc = 0.0;
        if c > l {
            acc += self.params.r() * k * partial_expectation(x0, u, l, Upper::At(c), Moment::Zeroth, &self.params);
        }
        acc + self.below_level(s, x0, u, 0.0, c.min(l), space)
    }

    fn premium_above(&self, s: f64, x0: f64, u: f64, c: f64, space: &GaussLegendre) -> f64 {
        let (k, l) = (self.strike, self.level);
        if c >= k {
            return 0.0;
        }
        let rk = self.params.r() * k;
        if c >= l {
            return rk * partial_expectation(x0, u, c, Upper::At(k), Moment::Zeroth, &self.params);
        }
        rk * partial_expectation(x0, u, l, Upper::At(k), Moment::Zeroth, &self.params)
            + self.below_level(s, x0, u, c, l, space)
    }

    fn kink_level(&self) -> Option<f64> {
        Some(self.level)
    }

    fn kink_weight(&self, s: f64) -> f64 {
        let tau = self.maturity - s;
        if tau <= 0.0 {
            return 0.0;
        }
        0.5 * (self.strike - self.level) * self.azema.z_x_left_at_level(tau)
    }
}
