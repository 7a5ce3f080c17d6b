use log::{debug, info, warn};

use super::boundary::Tail;
use super::eep::{gap, Rules, PIN_BAND};
use super::problem::EarlyExercise;
use super::QuadratureSpec;
use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Allowed increase of `b` between consecutive nodes going backwards, as a
/// fraction of `K`.
const MONOTONE_SLACK: f64 = 1e-8;
/// Largest excess over the next node that is projected back onto it rather
/// than reported as [`Error::NonMonotone`], as a fraction of `K`.
const PROJECTION_LIMIT: f64 = 1e-3;
/// Bracket width at which the root search stops, as a fraction of `K`.
const X_TOL: f64 = 1e-12;

/// Per-node outcome of the backward induction.
#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub values: Vec<f64>,
    pub at_level: Vec<bool>,
    /// Local-time weight `θ` per node (1 off the pinned set).
    pub weights: Vec<f64>,
    /// Nodes where the equation's root fell below the stopping-set bound and
    /// the bound was taken instead.
    pub clamped: Vec<usize>,
    /// Pinned nodes whose weight left `[0, 1]` and was clamped.
    pub weight_clamped: Vec<usize>,
    /// Nodes where the root exceeded the next node's value and was projected
    /// onto it, with the excess.
    pub projected: Vec<(usize, f64)>,
}

/// Solves `G(t_i, b) = rhs(t_i, b)` node by node from maturity.
///
/// `lower(i)` is a known lower bound for `b(t_i)`; `level` enables the
/// pinned-at-level treatment, where `b_i = L` is known and the equation is
/// solved for the local-time weight `θ_i` instead.
pub(crate) fn backward_induction<P, B>(
    p: &P,
    grid: &TimeGrid,
    rules: &Rules,
    spec: &QuadratureSpec,
    lower: B,
    level: Option<f64>,
) -> Result<Solved>
where
    P: EarlyExercise,
    B: Fn(usize) -> f64,
{
    let ts = grid.nodes();
    let n = ts.len();
    let k = p.strike();
    let band = PIN_BAND * k;
    let mut values = vec![k; n];
    let mut at_level = vec![false; n];
    let mut weights = vec![1.0; n];
    let mut clamped = Vec::new();
    let mut weight_clamped = Vec::new();
    let mut projected = Vec::new();

    for i in (0..n - 1).rev() {
        let t = ts[i];
        let (head, rest) = values.split_at_mut(i + 1);
        let (w_head, w_rest) = weights.split_at_mut(i + 1);
        let tail_times = &ts[i + 1..];
        let next = rest[0];
        let f_w = |b: f64, w: f64| -> Result<f64> {
            let tail = Tail {
                start: t,
                start_value: b,
                start_weight: w,
                times: tail_times,
                values: rest,
                weights: w_rest,
            };
            gap(p, t, b, &tail, rules)
        };
        let f = |b: f64| f_w(b, 1.0);
        let in_band = |b: f64| level.is_some_and(|l| (b - l).abs() <= band);

        if at_level[i + 1] {
            // Pinned next node: the level holds while some weight in [0, 1]
            // zeroes the residual there; a negative weight means the level is
            // in the continuation set and the boundary drops below it.
            let theta = pin_weight(p, t, next, tail_times, rest, w_rest, rules)?;
            if theta >= 0.0 || !theta.is_finite() {
                if theta > 1.0 {
                    weight_clamped.push(i);
                }
                w_head[i] = clamp_weight(theta);
                head[i] = next;
                at_level[i] = true;
                continue;
            }
        }

        let f_hi = f(next)?;
        let root = if f_hi == 0.0 {
            next
        } else if f_hi > 0.0 {
            let f_k = f(k)?;
            let above = illinois(&f, next, f_hi, k, f_k, spec, i, t)?;
            if above > next + PROJECTION_LIMIT * k {
                return Err(Error::NonMonotone {
                    node: i,
                    t,
                    value: above,
                    next,
                });
            }
            if above > next + MONOTONE_SLACK * k {
                projected.push((i, above - next));
            }
            next
        } else {
            let bound = lower(i).min(next);
            let mut lo = bound.max(0.5 * next);
            let mut f_lo = f(lo)?;
            let mut tries = 0;
            while f_lo <= 0.0 && lo > bound && tries < 30 {
                lo = bound.max(0.5 * lo);
                f_lo = f(lo)?;
                tries += 1;
            }
            if f_lo > 0.0 {
                illinois(&f, lo, f_lo, next, f_hi, spec, i, t)?
            } else if lo > bound {
                return Err(Error::NoRoot {
                    node: i,
                    t,
                    lo,
                    hi: next,
                    f_lo,
                    f_hi,
                });
            } else {
                debug!("node {i} (t = {t}): root below stopping-set bound {bound}, clamped");
                clamped.push(i);
                bound
            }
        };
        let pinned = in_band(root) && !at_level[i + 1];
        if pinned {
            let theta = pin_weight(p, t, root, tail_times, rest, w_rest, rules)?;
            if !(0.0..=1.0).contains(&theta) {
                weight_clamped.push(i);
            }
            w_head[i] = clamp_weight(theta);
        }
        head[i] = root;
        at_level[i] = pinned;
    }
    if !clamped.is_empty() {
        info!("{} node(s) clamped to the stopping-set lower bound", clamped.len());
    }
    if !projected.is_empty() {
        let worst = projected.iter().map(|p| p.1).fold(0.0, f64::max);
        warn!(
            "{} node(s) projected onto the next node to keep the boundary monotone (largest excess {worst:.3e})",
            projected.len()
        );
    }
    if !weight_clamped.is_empty() {
        warn!(
            "{} pinned node(s) with a local-time weight outside [0, 1]",
            weight_clamped.len()
        );
    }
    Ok(Solved {
        values,
        at_level,
        weights,
        clamped,
        weight_clamped,
        projected,
    })
}

/// Local-time weight `θ` that zeroes the residual at a node pinned at `b`;
/// the residual is affine in `θ`.
pub(crate) fn pin_weight<P: EarlyExercise>(
    p: &P,
    t: f64,
    b: f64,
    times: &[f64],
    values: &[f64],
    weights: &[f64],
    rules: &Rules,
) -> Result<f64> {
    let g = |w: f64| {
        let tail = Tail {
            start: t,
            start_value: b,
            start_weight: w,
            times,
            values,
            weights,
        };
        gap(p, t, b, &tail, rules)
    };
    let (g0, g1) = (g(0.0)?, g(1.0)?);
    Ok(if g0 == g1 { weights[0] } else { g0 / (g0 - g1) })
}

pub(crate) fn clamp_weight(theta: f64) -> f64 {
    if theta.is_finite() {
        theta.clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Illinois (modified regula falsi) on a sign-changing bracket `f(a) > 0 > f(b)`,
/// falling back to bisection when the bracket stops shrinking.
///
/// Close to maturity `f` is nearly flat on the stopping side of the root, so
/// convergence is judged on the bracket width; the residual only decides
/// whether an exhausted search still counts as a root.
#[allow(clippy::too_many_arguments)]
fn illinois<F>(
    f: &F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    spec: &QuadratureSpec,
    node: usize,
    t: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (lo0, hi0, f_lo0, f_hi0) = (a, b, fa, fb);
    let x_tol = X_TOL * b.abs();
    let mut side = 0i8;
    let mut slow = 0;
    let mut width = b - a;
    // Unmodified function values at the bracket ends.
    let (mut ra, mut rb) = (fa, fb);
    for _ in 0..spec.max_bisect {
        let mut c = if slow >= 2 {
            slow = 0;
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            ra = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            rb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        let w = b - a;
        slow = if w > 0.5 * width { slow + 1 } else { 0 };
        width = w;
        if w <= x_tol {
            return Ok(if ra.abs() <= rb.abs() { a } else { b });
        }
    }
    let (best, fbest) = if ra.abs() <= rb.abs() { (a, ra) } else { (b, rb) };
    if fbest.abs() <= spec.root_tol {
        return Ok(best);
    }
    Err(Error::NoRoot {
        node,
        t,
        lo: lo0,
        hi: hi0,
        f_lo: f_lo0,
        f_hi: f_hi0,
    })
}
