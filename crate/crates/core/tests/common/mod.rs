#![allow(dead_code)]

use std::sync::OnceLock;

use lastexit_core::fb_solver::{solve_both, BoundarySet, QuadratureSpec};
use lastexit_core::{Contract, MarketParams, TimeGrid};

pub const K: f64 = 7.0;

pub fn params() -> MarketParams {
    MarketParams::new(0.05, 0.4).unwrap()
}

pub fn quad() -> QuadratureSpec {
    QuadratureSpec::for_strike(K)
}

pub fn contract(level: f64, maturity: f64) -> Contract {
    Contract::finite(K, level, maturity).unwrap()
}

/// Levels of the three reference parameter sets, all with `T = 10`.
pub const REFERENCE_LEVELS: [f64; 3] = [2.0, 5.0, 6.5];

pub struct Solved {
    pub contract: Contract,
    pub set: BoundarySet,
}

/// Solved boundaries for a reference set at `T = 10` on a 100-step grid,
/// computed once per test binary.
pub fn reference_set(level: f64) -> &'static Solved {
    static CELLS: [OnceLock<Solved>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let i = REFERENCE_LEVELS
        .iter()
        .position(|&l| l == level)
        .expect("not a reference level");
    CELLS[i].get_or_init(|| solve(level, 10.0, 100))
}

pub fn solve(level: f64, maturity: f64, steps: usize) -> Solved {
    let contract = contract(level, maturity);
    let grid = TimeGrid::sqrt_spaced(maturity, steps).unwrap();
    let set = solve_both(&contract, &params(), &grid, &quad()).unwrap();
    Solved { contract, set }
}

/// Cox–Ross–Rubinstein tree for the American put. Returns the value at
/// `s0` and the continuation value of the root node.
pub fn binomial_put(s0: f64, strike: f64, r: f64, sigma: f64, maturity: f64, steps: usize) -> (f64, f64) {
    let dt = maturity / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - d) / (u - d);
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (strike - s0 * u.powi(2 * j as i32 - steps as i32)).max(0.0))
        .collect();
    let mut continuation = 0.0;
    for n in (0..steps).rev() {
        let mut s = s0 * u.powi(-(n as i32));
        for j in 0..=n {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            if n == 0 {
                continuation = cont;
            }
            v[j] = cont.max(strike - s);
            s *= u * u;
        }
    }
    (v[0], continuation)
}

/// Critical price of the American put with `tau` years to run: the largest
/// spot at which exercising is at least as good as continuing.
pub fn binomial_boundary(strike: f64, r: f64, sigma: f64, tau: f64, steps: usize) -> f64 {
    let (mut lo, mut hi) = (0.2 * strike, strike);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let (_, cont) = binomial_put(mid, strike, r, sigma, tau, steps);
        if cont <= strike - mid + 1e-10 * strike {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
