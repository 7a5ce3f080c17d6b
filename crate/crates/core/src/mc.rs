//! Monte Carlo oracle.
//!
//! Paths are exact lognormal samples on a uniform grid. Path `j` draws its
//! Gaussians from `ChaCha8Rng` stream `j` (or `j / 2` for an antithetic pair,
//! whose second member flips every sign), so a batch is a pure function of
//! `(seed, j)`: nothing is stored, any path can be regenerated, and results do
//! not depend on how the work is scheduled.
//!
//! Between grid times the level may be crossed unseen. With bridge
//! correction each payoff uses the conditional crossing probability of the
//! Brownian bridge in log-price instead of the discrete indicator.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::StandardNormal;

use crate::azema::Azema;
use crate::error::{Error, Result};
use crate::fb_solver::BoundaryCurve;
use crate::model::{Contract, MarketParams};
use crate::par::{map_indexed, pairwise_sum, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Time steps per year.
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub bridge_correction: bool,
    pub execution: Execution,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64, antithetic: bool, bridge_correction: bool) -> Result<Self> {
        if n_paths < 100 {
            return Err(Error::param("n_paths", n_paths as f64, "need at least 100 paths"));
        }
        if n_steps < 10 {
            return Err(Error::param(
                "n_steps",
                n_steps as f64,
                "need at least 10 steps per year",
            ));
        }
        Ok(McConfig {
            n_paths,
            n_steps,
            seed,
            antithetic,
            bridge_correction,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            n_steps: 50,
            seed: 0x5eed_1e7e,
            antithetic: true,
            bridge_correction: true,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// `|mean − value| ≤ k·SE`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }

    /// `√(SE₁² + SE₂²)`.
    pub fn combined_se(&self, other: &McEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Stop once the price is at or below the level.
    Below,
    /// Stop once the price is at or above the level.
    Above,
}

/// Exercise rule, checked at the grid times; a rule that never fires
/// exercises at the horizon.
#[derive(Debug, Clone)]
pub enum StoppingRule {
    FixedTime(f64),
    Threshold {
        level: f64,
        side: Side,
    },
    /// First grid time with `X_t ≤ b(t)`.
    Boundary(BoundaryCurve),
}

/// Lazily generated set of paths `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct PathBatch {
    x0: f64,
    horizon: f64,
    steps: usize,
    config: McConfig,
    params: MarketParams,
}

/// Batch of `config.n_paths` paths from `x0` over `[0, horizon]` with
/// `ceil(horizon · n_steps)` steps.
pub fn simulate_paths(x0: f64, horizon: f64, config: &McConfig, params: &MarketParams) -> Result<PathBatch> {
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::param("x0", x0, "spot must be positive"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param("horizon", horizon, "horizon must be positive"));
    }
    let steps = ((horizon * config.n_steps as f64).ceil() as usize).max(1);
    Ok(PathBatch {
        x0,
        horizon,
        steps,
        config: *config,
        params: *params,
    })
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.config.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.config.n_paths == 0
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Prices of path `j` at the grid times.
    pub fn path(&self, j: usize) -> Vec<f64> {
        let mut logs = Vec::with_capacity(self.steps + 1);
        self.log_path(j, &mut logs);
        let mut xs: Vec<f64> = logs.into_iter().map(f64::exp).collect();
        xs[0] = self.x0;
        xs
    }

    fn log_path(&self, j: usize, out: &mut Vec<f64>) {
        let (stream, sign) = if self.config.antithetic {
            (j / 2, if j.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (j, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream as u64);
        let dt = self.dt();
        let drift = self.params.log_drift() * dt;
        let vol = sign * self.params.sigma() * dt.sqrt();
        out.clear();
        let mut w = self.x0.ln();
        out.push(w);
        for _ in 0..self.steps {
            let g: f64 = rng.sample(StandardNormal);
            w += drift + vol * g;
            out.push(w);
        }
    }

    /// Applies `f` to every log-path and aggregates; antithetic partners are
    /// averaged into one sample.
    fn estimate<const M: usize, F>(&self, f: F) -> [McEstimate; M]
    where
        F: Fn(&[f64]) -> [f64; M] + Sync + Send,
    {
        let n = self.config.n_paths;
        let group = if self.config.antithetic { 2 } else { 1 };
        let samples = map_indexed(self.config.execution, n.div_ceil(group), |s| {
            let mut buf = Vec::with_capacity(self.steps + 1);
            let mut acc = [0.0; M];
            let members = (s * group..((s + 1) * group).min(n)).len();
            for j in s * group..((s + 1) * group).min(n) {
                self.log_path(j, &mut buf);
                for (a, v) in acc.iter_mut().zip(f(&buf)) {
                    *a += v;
                }
            }
            acc.map(|a| a / members as f64)
        });
        std::array::from_fn(|m| {
            let xs: Vec<f64> = samples.iter().map(|s| s[m]).collect();
            summarize(&xs, n)
        })
    }
}

/// Mean and standard error, accumulated as deviations from the first sample
/// so that a constant sample gives an exact mean and zero error.
fn summarize(xs: &[f64], n_paths: usize) -> McEstimate {
    let shift = xs[0];
    let dev: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let m = xs.len() as f64;
    let mean_dev = pairwise_sum(&dev) / m;
    let sq: Vec<f64> = dev.iter().map(|d| (d - mean_dev) * (d - mean_dev)).collect();
    let var = if xs.len() > 1 {
        pairwise_sum(&sq) / (m - 1.0)
    } else {
        0.0
    };
    McEstimate {
        mean: shift + mean_dev,
        std_error: (var / m).sqrt(),
        n_paths,
    }
}

/// Rule resolved against a batch's grid, in log-price.
enum Stopper {
    At(usize),
    Below(Vec<f64>),
    Above(f64),
}

impl Stopper {
    fn new(rule: &StoppingRule, batch: &PathBatch) -> Result<Self> {
        Ok(match rule {
            StoppingRule::FixedTime(t) => {
                if !(0.0..=batch.horizon).contains(t) {
                    return Err(Error::param("t", *t, "stopping time must lie in [0, horizon]"));
                }
                let k = (t / batch.dt() - 1e-9).ceil().max(0.0) as usize;
                Stopper::At(k.min(batch.steps))
            }
            StoppingRule::Threshold { level, side } => {
                if !(level.is_finite() && *level > 0.0) {
                    return Err(Error::param("level", *level, "threshold must be positive"));
                }
                match side {
                    Side::Below => Stopper::Below(vec![level.ln(); batch.steps + 1]),
                    Side::Above => Stopper::Above(level.ln()),
                }
            }
            StoppingRule::Boundary(curve) => {
                if (curve.maturity() - batch.horizon).abs() > 1e-9 * batch.horizon {
                    return Err(Error::InvalidGrid(format!(
                        "boundary ends at {} but the paths end at {}",
                        curve.maturity(),
                        batch.horizon
                    )));
                }
                Stopper::Below((0..=batch.steps).map(|k| curve.value_at(batch.time(k)).ln()).collect())
            }
        })
    }

    fn index(&self, logs: &[f64]) -> usize {
        let last = logs.len() - 1;
        match self {
            Stopper::At(k) => *k,
            Stopper::Below(b) => logs.iter().zip(b).position(|(w, c)| w <= c).unwrap_or(last),
            Stopper::Above(c) => logs.iter().position(|w| w >= c).unwrap_or(last),
        }
    }
}

/// Probability that the path reaches `ln_level` on `[t_k, T]` given the
/// grid values: 1 if a grid value does, else the Brownian-bridge crossing
/// probability over the remaining steps (or 0 without bridge correction).
fn hit_after(logs: &[f64], k: usize, ln_level: f64, bridge: Option<f64>) -> f64 {
    let rest = &logs[k..];
    if rest.iter().any(|&w| w >= ln_level) {
        return 1.0;
    }
    let Some(two_over_var) = bridge else {
        return 0.0;
    };
    let mut miss = 1.0;
    for w in rest.windows(2) {
        let (a, b) = (ln_level - w[0], ln_level - w[1]);
        miss *= 1.0 - (-two_over_var * a * b).exp();
    }
    1.0 - miss
}

fn horizon_of(contract: &Contract, batch: &PathBatch) -> Result<f64> {
    let maturity = contract.horizon()?;
    if (maturity - batch.horizon).abs() > 1e-9 * maturity {
        return Err(Error::InvalidContract(format!(
            "paths end at {} but the contract matures at {maturity}",
            batch.horizon
        )));
    }
    Ok(maturity)
}

/// Both reduction twins on the same paths: the raw payoff
/// `e^{−rτ}(K − X_τ)⁺ 1{τ ≤ θ}` and the projected one
/// `e^{−rτ}(K − X_τ)⁺ Z(τ, X_τ)`.
pub fn payoffs(
    batch: &PathBatch,
    rule: &StoppingRule,
    contract: &Contract,
    params: &MarketParams,
) -> Result<(McEstimate, McEstimate)> {
    let maturity = horizon_of(contract, batch)?;
    let stopper = Stopper::new(rule, batch)?;
    let az = Azema::new(contract.level(), maturity, params);
    let (k, ln_l, r) = (contract.strike(), contract.level().ln(), params.r());
    let bridge = bridge_factor(batch, params);
    let [raw, projected] = batch.estimate(|logs| {
        let i = stopper.index(logs);
        let t = batch.time(i);
        let x = if i == 0 { batch.x0 } else { logs[i].exp() };
        let payoff = (-r * t).exp() * (k - x).max(0.0);
        if payoff == 0.0 {
            return [0.0, 0.0];
        }
        [payoff * hit_after(logs, i, ln_l, bridge), payoff * az.z(t, x)]
    });
    Ok((raw, projected))
}

/// `e^{−rτ}(K − X_τ)⁺ 1{τ ≤ θ}`, with `θ` the last time at or above `L`.
pub fn payoff_last_exit(
    batch: &PathBatch,
    rule: &StoppingRule,
    contract: &Contract,
    params: &MarketParams,
) -> Result<McEstimate> {
    payoffs(batch, rule, contract, params).map(|p| p.0)
}

/// `e^{−rτ}(K − X_τ)⁺ Z(τ, X_τ)`.
pub fn payoff_z_weighted(
    batch: &PathBatch,
    rule: &StoppingRule,
    contract: &Contract,
    params: &MarketParams,
) -> Result<McEstimate> {
    payoffs(batch, rule, contract, params).map(|p| p.1)
}

fn bridge_factor(batch: &PathBatch, params: &MarketParams) -> Option<f64> {
    let s = params.sigma();
    batch.config.bridge_correction.then(|| 2.0 / (s * s * batch.dt()))
}

/// `P(max_{[0, horizon]} X ≥ level)`.
pub fn prob_max_exceeds(
    x0: f64,
    horizon: f64,
    level: f64,
    config: &McConfig,
    params: &MarketParams,
) -> Result<McEstimate> {
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::param("level", level, "level must be positive"));
    }
    let batch = simulate_paths(x0, horizon, config, params)?;
    if level <= x0 {
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            n_paths: config.n_paths,
        });
    }
    let bridge = bridge_factor(&batch, params);
    let ln_l = level.ln();
    let [p] = batch.estimate(|logs| [hit_after(logs, 0, ln_l, bridge)]);
    Ok(p)
}
