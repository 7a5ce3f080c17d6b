use super::boundary::Tail;
use super::problem::EarlyExercise;
use crate::error::{Error, Result};
use crate::model::{norm_pdf, MarketParams};
use crate::quadrature::GaussLegendre;

/// Half-width of the band `|b − L| ≤ PIN_BAND·K` treated as "pinned at L".
pub const PIN_BAND: f64 = 1e-6;

pub(crate) struct Rules {
    pub space: GaussLegendre,
    pub time: GaussLegendre,
}

/// `(σL/√u) φ((ln(L/x0) − (r − σ²/2)u)/(σ√u))`, the density of `u ↦ E[l_u^L]`.
#[inline]
pub(crate) fn local_time_density_raw(x0: f64, u: f64, level: f64, params: &MarketParams) -> f64 {
    let sd = params.sigma() * u.sqrt();
    let z = ((level / x0).ln() - params.log_drift() * u) / sd;
    params.sigma() * level / u.sqrt() * norm_pdf(z)
}

/// Right side of the premium representation at `(t, x)` for boundary `tail`.
pub(crate) fn eep<P: EarlyExercise>(p: &P, t: f64, x: f64, tail: &Tail<'_>, rules: &Rules) -> Result<f64> {
    let maturity = p.maturity();
    if maturity - t <= 0.0 || tail.segments() == 0 {
        return Ok(p.gain(maturity, x));
    }
    let total = p.terminal(t, x) + sum_segments(p, t, x, tail, rules, Form::Direct);
    if !total.is_finite() {
        return Err(Error::Quadrature { t, x });
    }
    Ok(total)
}

/// `G(t, x) − eep(t, x)` written without the cancelling terms.
///
/// Itô–Tanaka applied to the gain over the whole horizon gives
/// `E[e^{−r(T−t)} G(T, X_T)] = G − ∫ e^{−ru} E[−H] du − ∫ w dE[l^L] + ½ ∫ e^{−ru} dE[l^K]`,
/// and subtracting the premium representation leaves
/// `∫ e^{−ru} E[−H 1{c ≤ X < K}] du + ∫ (1 − s_c) w dE[l^L] − ½ ∫ e^{−ru} dE[l^K]`
/// with `s_c` the local-time sign on the boundary. Every term is small where the
/// direct form subtracts two numbers close to `K − x`.
pub(crate) fn gap<P: EarlyExercise>(p: &P, t: f64, x: f64, tail: &Tail<'_>, rules: &Rules) -> Result<f64> {
    if p.maturity() - t <= 0.0 || tail.segments() == 0 {
        return Ok(0.0);
    }
    let total = sum_segments(p, t, x, tail, rules, Form::Gap);
    if !total.is_finite() {
        return Err(Error::Quadrature { t, x });
    }
    Ok(total)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    Direct,
    Gap,
}

fn sum_segments<P: EarlyExercise>(p: &P, t: f64, x: f64, tail: &Tail<'_>, rules: &Rules, form: Form) -> f64 {
    let mut terms = Vec::with_capacity(tail.segments());
    for k in 0..tail.segments() {
        terms.push(segment(p, t, x, tail, k, rules, form));
    }
    crate::par::pairwise_sum(&terms)
}

fn segment<P: EarlyExercise>(p: &P, t: f64, x: f64, tail: &Tail<'_>, k: usize, rules: &Rules, form: Form) -> f64 {
    let (sa, ca, sb, cb) = tail.segment(k);
    if sb <= sa {
        return 0.0;
    }
    let params = p.params();
    let (r, sigma) = (params.r(), params.sigma());
    let strike = p.strike();
    let last = k + 1 == tail.segments();
    let slope = (cb - ca) / (sb - sa);
    let c_at = |s: f64| ca + slope * (s - sa);
    let scale = |d: f64| (d > 0.0 && d.is_finite()).then(|| d * d / (sigma * sigma));

    // Log distances to the features the law of X_u has to resolve; a zero
    // distance carries no scale.
    let nearest = |levels: &[f64]| {
        levels
            .iter()
            .map(|&c| (x / c).ln().abs())
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    };
    let mut features = vec![ca];
    features.extend(p.kink_level());
    let delta = nearest(&features);
    // Time integrals run over `u = s − t`, which keeps the `u → 0` end free of
    // cancellation in `s − t`.
    let (ua, ub) = (sa - t, sb - t);
    let premium = match form {
        Form::Direct => integrate_time(&rules.time, ua, ub, last, scale(delta), |u| {
            let s = t + u;
            p.premium(s, x, u, c_at(s), &rules.space)
        }),
        Form::Gap => {
            let delta = delta.min(nearest(&[strike]));
            integrate_time(&rules.time, ua, ub, last, scale(delta), |u| {
                let s = t + u;
                p.premium_above(s, x, u, c_at(s), &rules.space)
                    - 0.5 * (-r * u).exp() * local_time_density_raw(x, u, strike, params)
            })
        }
    };

    let mut local = 0.0;
    if let Some(l) = p.kink_level() {
        let band = PIN_BAND * strike;
        let split = scale((x / l).ln().abs());
        let (wa, wb) = tail.segment_weights(k);
        let w_slope = (wb - wa) / (sb - sa);
        for (s1, s2, region) in indicator_pieces(sa, ca, sb, cb, l, band) {
            // Local-time weight: 1 above the level, θ(s) on it, 0 below; the
            // gap form carries the complement.
            let sign = |s: f64| match region {
                Region::Above => 1.0,
                Region::Pinned => wa + w_slope * (s - sa),
                Region::Below => 0.0,
            };
            let coef = |s: f64| match form {
                Form::Direct => sign(s),
                Form::Gap => 1.0 - sign(s),
            };
            let trivial = match (form, region) {
                (Form::Direct, Region::Below) | (Form::Gap, Region::Above) => true,
                (_, Region::Pinned) => coef(s1) == 0.0 && coef(s2) == 0.0,
                _ => false,
            };
            if trivial {
                continue;
            }
            let right = last && s2 == sb;
            let (u1, u2) = (if s1 == sa { ua } else { s1 - t }, if s2 == sb { ub } else { s2 - t });
            local += integrate_time(&rules.time, u1, u2, right, split, |u| {
                let s = t + u;
                coef(s) * (-r * u).exp() * p.kink_weight(s) * local_time_density_raw(x, u, l, params)
            });
        }
    }
    premium + local
}

/// `∫_a^b f(u) du` for `0 ≤ a < b`, with `f` possibly of order `u^{-1/2}`
/// toward `u = 0` and, when `right`, of order `(b − u)^{-1/2}` at `b`.
///
/// The integral is taken in `v = √u`, on a mesh graded geometrically from
/// `split` when the integrand also changes on that scale next to `0`.
fn integrate_time<F: FnMut(f64) -> f64>(
    gl: &GaussLegendre,
    a: f64,
    b: f64,
    right: bool,
    split: Option<f64>,
    mut f: F,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a.max(0.0)];
    if let Some(w) = split.filter(|&w| w > 0.0) {
        let mut u = w;
        while u < b {
            if u > cuts[0] {
                cuts.push(u);
            }
            u *= 4.0;
        }
    }
    if right {
        let lo = *cuts.last().unwrap_or(&a);
        cuts.push(0.5 * (lo + b));
    }
    cuts.push(b);
    let mut total = 0.0;
    let mut in_v = |p: f64, q: f64| {
        gl.integrate(p.sqrt(), q.sqrt(), |v| {
            let u = v * v;
            if u > 0.0 {
                2.0 * v * f(u)
            } else {
                0.0
            }
        })
    };
    let pieces = cuts.len() - 1;
    for j in 0..pieces.saturating_sub(usize::from(right)) {
        total += in_v(cuts[j], cuts[j + 1]);
    }
    if right {
        let (p, q) = (cuts[pieces - 1], cuts[pieces]);
        total += gl.integrate_sqrt_ends(p, q, false, true, f);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Above,
    Pinned,
    Below,
}

/// Sub-intervals of `[sa, sb]` on which the linear boundary is above, inside
/// or below the band around `level`.
fn indicator_pieces(
    sa: f64,
    ca: f64,
    sb: f64,
    cb: f64,
    level: f64,
    band: f64,
) -> impl Iterator<Item = (f64, f64, Region)> {
    let mut cuts = [0.0, 1.0, 1.0, 1.0];
    let mut n = 1;
    let dc = cb - ca;
    if dc != 0.0 {
        for target in [level - band, level + band] {
            let lam = (target - ca) / dc;
            if lam > 0.0 && lam < 1.0 {
                cuts[n] = lam;
                n += 1;
            }
        }
    }
    cuts[n] = 1.0;
    cuts[..=n].sort_by(f64::total_cmp);
    let classify = move |lam: f64| {
        let c = ca + lam * dc;
        if c > level + band {
            Region::Above
        } else if c >= level - band {
            Region::Pinned
        } else {
            Region::Below
        }
    };
    (0..n).filter_map(move |j| {
        let (l0, l1) = (cuts[j], cuts[j + 1]);
        if l1 <= l0 {
            return None;
        }
        let region = classify(0.5 * (l0 + l1));
        let s1 = if j == 0 { sa } else { sa + l0 * (sb - sa) };
        let s2 = if j + 1 == n { sb } else { sa + l1 * (sb - sa) };
        Some((s1, s2, region))
    })
}
