//! Free-boundary solver for early-exercise premium integral equations.
//!
//! The classical American put (`Z ≡ 1`) and the last-exit put share one
//! backward-induction engine: starting from `b(T) = K`, each earlier node
//! solves `G(t_i, b) = rhs(t_i, b; b|_[t_i, T])` with the already solved tail
//! and a linear segment to the trial value.

mod boundary;
mod eep;
mod problem;
mod solve;

pub use boundary::{BoundaryCurve, Instance, Tail};
pub use eep::PIN_BAND;
pub use problem::{ClassicalPut, EarlyExercise, LastExitPut};

use log::warn;

use crate::azema::Azema;
use crate::error::{Error, Result};
use crate::model::{Contract, MarketParams, TimeGrid};
use crate::par::Execution;
use crate::quadrature::GaussLegendre;
use eep::Rules;

/// Node counts and tolerances for the space and time integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per piece of a lognormal-density integral.
    pub n_space: usize,
    /// Gauss–Legendre nodes per boundary segment in time.
    pub n_time: usize,
    /// Residual tolerance of the root search, in currency.
    pub root_tol: f64,
    /// Iteration cap of the root search.
    pub max_bisect: usize,
    /// How independent evaluations (surfaces, residual checks) are scheduled.
    pub execution: Execution,
}

impl QuadratureSpec {
    pub fn new(n_space: usize, n_time: usize, root_tol: f64, max_bisect: usize) -> Result<Self> {
        if n_space == 0 || n_time == 0 || max_bisect == 0 {
            return Err(Error::InvalidGrid(
                "quadrature node counts and iteration cap must be positive".into(),
            ));
        }
        if !(root_tol.is_finite() && root_tol > 0.0) {
            return Err(Error::param("root_tol", root_tol, "tolerance must be positive"));
        }
        Ok(QuadratureSpec {
            n_space,
            n_time,
            root_tol,
            max_bisect,
            execution: Execution::default(),
        })
    }

    /// Defaults scaled to the strike: 16 space nodes, 16 time nodes,
    /// `root_tol = 1e-8·K`.
    pub fn for_strike(strike: f64) -> Self {
        QuadratureSpec {
            n_space: 16,
            n_time: 16,
            root_tol: 1e-8 * strike,
            max_bisect: 100,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// `root_tol` may not undercut what the quadrature can deliver.
    pub fn check_for(&self, contract: &Contract) -> Result<()> {
        if self.root_tol < 1e-10 * contract.strike() {
            return Err(Error::param("root_tol", self.root_tol, "must be at least 1e-10 K"));
        }
        Ok(())
    }

    pub(crate) fn rules(&self) -> Rules {
        Rules {
            space: GaussLegendre::new(self.n_space),
            time: GaussLegendre::new(self.n_time),
        }
    }
}

/// `G(t, x) = (K − x)⁺ Z(t, x)`.
pub fn gain(t: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    Ok((contract.strike() - x).max(0.0) * crate::azema::z(t, x, contract, params)?)
}

/// `H(t, x)`, the generator `(∂_t + L_X − r)` applied to the gain away from
/// its kinks. Below `L` the left limit is used at `x = L`.
pub fn h_fn(t: f64, x: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    let (k, l) = (contract.strike(), contract.level());
    let r = params.r();
    if x >= k {
        return Ok(0.0);
    }
    if x > l {
        return Ok(-r * k);
    }
    let d = crate::azema::z_derivs(t, x, contract, params)?;
    if x == l && !d.left_limit {
        return Ok(-r * k);
    }
    let s2 = params.sigma() * params.sigma();
    Ok(-r * k * d.z - s2 * x * x * d.z_x)
}

/// Maximiser of `x ↦ G(t, x)` over `(0, L]`, by golden-section search.
pub fn x_star(t: f64, contract: &Contract, params: &MarketParams, tol: f64) -> Result<f64> {
    let maturity = contract.horizon()?;
    if !(0.0..=maturity).contains(&t) {
        return Err(Error::param("t", t, "time must lie in [0, T]"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param("tol", tol, "tolerance must be positive"));
    }
    let az = Azema::new(contract.level(), maturity, params);
    Ok(x_star_raw(t, contract.strike(), &az, tol))
}

pub(crate) fn x_star_raw(t: f64, strike: f64, az: &Azema, tol: f64) -> f64 {
    let l = az.level;
    let g = |x: f64| (strike - x) * az.z(t, x);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (1e-6 * l, l);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let m = 0.5 * (a + b);
    if g(l) >= g(m) {
        l
    } else {
        m
    }
}

/// Density of `u ↦ E_{x0}[l_u^L]`: `(σL/√u) φ((ln(L/x0) − (r − σ²/2)u)/(σ√u))`.
pub fn local_time_density(x0: f64, u: f64, contract: &Contract, params: &MarketParams) -> Result<f64> {
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::param("u", u, "horizon must be positive"));
    }
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::param("x0", x0, "spot must be positive"));
    }
    Ok(eep::local_time_density_raw(x0, u, contract.level(), params))
}

/// Builds the problem object for `instance`.
pub fn problem(instance: Instance, contract: &Contract, params: &MarketParams) -> Result<Box<dyn EarlyExerciseObj>> {
    let maturity = contract.horizon()?;
    Ok(match instance {
        Instance::Classical => Box::new(ClassicalPut::new(contract.strike(), maturity, params)),
        Instance::LastExit => Box::new(LastExitPut::new(contract, maturity, params)),
    })
}

/// Object-safe view of [`EarlyExercise`] plus the premium representation.
pub trait EarlyExerciseObj: Sync {
    fn gain_at(&self, t: f64, x: f64) -> f64;
    fn rhs(&self, t: f64, x: f64, tail: &Tail<'_>, spec: &QuadratureSpec) -> Result<f64>;
}

impl<P: EarlyExercise> EarlyExerciseObj for P {
    fn gain_at(&self, t: f64, x: f64) -> f64 {
        self.gain(t, x)
    }

    fn rhs(&self, t: f64, x: f64, tail: &Tail<'_>, spec: &QuadratureSpec) -> Result<f64> {
        eep::eep(self, t, x, tail, &spec.rules())
    }
}

/// Right side of the premium representation at `(t, x)` for the boundary
/// `tail` on `[t, T]`.
pub fn eep_rhs(
    t: f64,
    x: f64,
    tail: &Tail<'_>,
    instance: Instance,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::param("x", x, "spot must be positive"));
    }
    let rules = quad.rules();
    let maturity = contract.horizon()?;
    match instance {
        Instance::Classical => eep::eep(
            &ClassicalPut::new(contract.strike(), maturity, params),
            t,
            x,
            tail,
            &rules,
        ),
        Instance::LastExit => eep::eep(&LastExitPut::new(contract, maturity, params), t, x, tail, &rules),
    }
}

/// Both boundaries with the derived crossing data. The last-exit curve lives on
/// the solver grid with `t_*` added as a node; `x_star` and the node indices
/// refer to that grid.
#[derive(Debug, Clone)]
pub struct BoundarySet {
    pub classical: BoundaryCurve,
    pub last_exit: BoundaryCurve,
    pub t_star: f64,
    /// `x*(t_i)` for last-exit nodes with `t_i ≤ t_*`.
    pub x_star: Vec<Option<f64>>,
    /// Nodes where the root fell below the stopping-set bound.
    pub clamped: Vec<usize>,
    /// Pinned nodes whose local-time weight had to be clamped to `[0, 1]`.
    pub weight_clamped: Vec<usize>,
    /// Nodes projected onto their successor to keep `b` monotone, with the
    /// excess of the unconstrained root.
    pub projected: Vec<(usize, f64)>,
    pub h_check: HCheck,
}

/// `grid` with `t` inserted, unless `t` is at or outside the ends or already
/// within rounding of a node.
fn with_knot(grid: &TimeGrid, t: f64) -> Result<TimeGrid> {
    let nodes = grid.nodes();
    let eps = 1e-9 * grid.maturity();
    if !(t > eps && t < grid.maturity() - eps) || nodes.iter().any(|&n| (n - t).abs() <= eps) {
        return Ok(grid.clone());
    }
    let at = nodes.partition_point(|&n| n < t);
    let mut refined = nodes.to_vec();
    refined.insert(at, t);
    TimeGrid::new(refined)
}

fn check_grid(contract: &Contract, grid: &TimeGrid) -> Result<f64> {
    let maturity = contract.horizon()?;
    if (grid.maturity() - maturity).abs() > 1e-12 * maturity.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "grid ends at {} but the contract matures at {maturity}",
            grid.maturity()
        )));
    }
    if grid.nodes()[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at t = 0".into()));
    }
    Ok(maturity)
}

/// Classical American put boundary `B(t)`.
pub fn solve_classical(
    contract: &Contract,
    params: &MarketParams,
    grid: &TimeGrid,
    quad: &QuadratureSpec,
) -> Result<BoundaryCurve> {
    let maturity = check_grid(contract, grid)?;
    quad.check_for(contract)?;
    let k = contract.strike();
    let r = params.r();
    let s2 = params.sigma() * params.sigma();
    let perpetual = 2.0 * r * k / (2.0 * r + s2);
    let p = ClassicalPut::new(k, maturity, params);
    let solved = solve::backward_induction(&p, grid, &quad.rules(), quad, |_| perpetual, None)?;
    BoundaryCurve::new(Instance::Classical, grid.clone(), solved.values, solved.at_level)?
        .with_pin_weights(solved.weights)
}

/// Solves the classical boundary and then the last-exit boundary on the same
/// grid, using `x*` on `[0, t_*]` and `B` on `[t_*, T]` as lower bounds.
pub fn solve_both(
    contract: &Contract,
    params: &MarketParams,
    grid: &TimeGrid,
    quad: &QuadratureSpec,
) -> Result<BoundarySet> {
    let maturity = check_grid(contract, grid)?;
    let classical = solve_classical(contract, params, grid, quad)?;
    let ts = star(&classical, contract.level());
    // The last-exit boundary leaves the level at t_*, so t_* becomes a knot.
    let le_grid = with_knot(grid, ts)?;
    let times = le_grid.nodes();
    let az = Azema::new(contract.level(), maturity, params);
    let k = contract.strike();
    let xs_tol = 1e-10 * contract.level();
    let x_star: Vec<Option<f64>> = times
        .iter()
        .map(|&t| (t <= ts).then(|| x_star_raw(t, k, &az, xs_tol)))
        .collect();
    let h_check = check_h_monotone(contract, params, &le_grid, &x_star);
    if h_check.violations > 0 {
        warn!(
            "t -> H(t, x) not decreasing at {} of {} checked points (worst H_t = {:.3e}); \
             the boundary characterisation may not apply",
            h_check.violations, h_check.checked, h_check.worst
        );
    }
    let p = LastExitPut::new(contract, maturity, params);
    let lower = |i: usize| {
        let b = classical.value_at(times[i]);
        match x_star[i] {
            Some(x) if times[i] < ts => x,
            Some(x) => x.max(b),
            None => b,
        }
    };
    let solved = solve::backward_induction(&p, &le_grid, &quad.rules(), quad, lower, Some(contract.level()))?;
    let last_exit = BoundaryCurve::new(Instance::LastExit, le_grid.clone(), solved.values, solved.at_level)?
        .with_pin_weights(solved.weights)?;
    Ok(BoundarySet {
        classical,
        last_exit,
        t_star: ts,
        x_star,
        clamped: solved.clamped,
        weight_clamped: solved.weight_clamped,
        projected: solved.projected,
        h_check,
    })
}

/// Solves the boundary of `instance`.
pub fn solve_boundary(
    contract: &Contract,
    params: &MarketParams,
    grid: &TimeGrid,
    quad: &QuadratureSpec,
    instance: Instance,
) -> Result<BoundaryCurve> {
    match instance {
        Instance::Classical => solve_classical(contract, params, grid, quad),
        Instance::LastExit => Ok(solve_both(contract, params, grid, quad)?.last_exit),
    }
}

/// First time the classical boundary reaches `level` (0 if it starts above).
pub fn t_star(classical: &BoundaryCurve, level: f64) -> Result<f64> {
    if classical.instance() != Instance::Classical {
        return Err(Error::InvalidGrid("t_star needs the classical boundary".into()));
    }
    Ok(star(classical, level))
}

fn star(curve: &BoundaryCurve, level: f64) -> f64 {
    if curve.values()[0] > level {
        return 0.0;
    }
    // Bisection on the interpolated curve, which is nondecreasing.
    let maturity = curve.maturity();
    let (mut a, mut b) = (0.0, maturity);
    if curve.value_at(b) < level {
        return maturity;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if curve.value_at(m) >= level {
            b = m;
        } else {
            a = m;
        }
        if b - a <= 1e-14 * maturity {
            break;
        }
    }
    b
}

/// Integral-equation residuals `G(t_i, b_i) − rhs(t_i, b_i)` at every node
/// before maturity.
pub fn residuals(
    curve: &BoundaryCurve,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    check_grid(contract, curve.grid())?;
    let solved;
    let curve = if curve.weights_solved() {
        curve
    } else {
        solved = solve_pin_weights(curve, contract, params, quad)?;
        &solved
    };
    let p = problem(curve.instance(), contract, params)?;
    let ts = curve.times();
    let n = ts.len() - 1;
    let out = crate::par::map_indexed(quad.execution, n, |i| {
        let t = ts[i];
        let b = curve.values()[i];
        let tail = curve.tail_from(t);
        p.rhs(t, b, &tail, quad).map(|v| p.gain_at(t, b) - v)
    });
    out.into_iter().collect()
}

/// Recomputes the local-time weights of the pinned nodes of `curve`, e.g.
/// after reading it from CSV. Weights outside `[0, 1]` are clamped.
pub fn solve_pin_weights(
    curve: &BoundaryCurve,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<BoundaryCurve> {
    let maturity = check_grid(contract, curve.grid())?;
    let ts = curve.times();
    let n = ts.len();
    let mut weights = vec![1.0; n];
    if curve.instance() == Instance::LastExit {
        let p = LastExitPut::new(contract, maturity, params);
        let rules = quad.rules();
        for i in (0..n - 1).rev() {
            if !curve.at_level()[i] {
                continue;
            }
            let theta = solve::pin_weight(
                &p,
                ts[i],
                curve.values()[i],
                &ts[i + 1..],
                &curve.values()[i + 1..],
                &weights[i + 1..],
                &rules,
            )?;
            weights[i] = solve::clamp_weight(theta);
        }
    }
    curve.clone().with_pin_weights(weights)
}

/// Outcome of the numerical check that `t ↦ H(t, x)` is nonincreasing on the
/// region where the stopping set is known to lie.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HCheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `H_t` found (positive means violated).
    pub worst: f64,
}

/// Samples `H_t = −rK Z_t − σ²x² Z_xt` on `[x*(t), L)` for nodes with `t ≤ t_*`;
/// above `L` the map is constant in `t`.
pub fn check_h_monotone(contract: &Contract, params: &MarketParams, grid: &TimeGrid, x_star: &[Option<f64>]) -> HCheck {
    let Ok(maturity) = contract.horizon() else {
        return HCheck {
            checked: 0,
            violations: 0,
            worst: 0.0,
        };
    };
    let az = Azema::new(contract.level(), maturity, params);
    let (k, l) = (contract.strike(), contract.level());
    let r = params.r();
    let s2 = params.sigma() * params.sigma();
    let mut out = HCheck {
        checked: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
    };
    const SAMPLES: usize = 32;
    for (&t, xs) in grid.nodes().iter().zip(x_star) {
        let Some(lo) = *xs else { continue };
        if t >= maturity {
            continue;
        }
        for j in 0..SAMPLES {
            let x = lo + (l - lo) * j as f64 / SAMPLES as f64;
            if x <= 0.0 || x >= l {
                continue;
            }
            let d = az.derivs(t, x);
            let h_t = -r * k * d.z_t - s2 * x * x * d.z_xt;
            out.checked += 1;
            out.worst = out.worst.max(h_t);
            if h_t > 1e-12 * k {
                out.violations += 1;
            }
        }
    }
    if out.checked == 0 {
        out.worst = 0.0;
    }
    out
}
