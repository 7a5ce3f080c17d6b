mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{binomial_boundary, binomial_put, contract, params, quad, reference_set, solve, K};
use lastexit_core::azema::{d1d2, z, z_derivs};
use lastexit_core::fb_solver::{gain, residuals, solve_classical, BoundarySet};
use lastexit_core::mc::{self, McConfig, Side, StoppingRule};
use lastexit_core::perpetual::solve_perpetual;
use lastexit_core::valuation::{prepare, value, value_surface, SurfaceGrid};
use lastexit_core::{Contract, TimeGrid};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn mc_config() -> McConfig {
    McConfig::new(100_000, 50, 20_241_014, true, true).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn perpetual_boundaries() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut slowest = Duration::ZERO;
    for (level, expected) in [(2.0, 2.6923), (4.0, 3.5)] {
        let c = Contract::perpetual(K, level).unwrap();
        let start = Instant::now();
        let sol = solve_perpetual(&c, &params()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let rounded = (sol.b * 1e4).round() / 1e4;
        ok &= (rounded - expected).abs() < 1e-9;
        lines.push(format!("L={level}: b={:.4}", sol.b));
    }
    ok &= slowest < Duration::from_millis(1);
    check(ok, format!("{}, slowest {:?}", lines.join(", "), slowest))
}

fn t_star_reproduction() -> Outcome {
    let c = contract(6.5, 5.0);
    let grid = TimeGrid::sqrt_spaced(5.0, 400).unwrap();
    let start = Instant::now();
    let classical = solve_classical(&c, &params(), &grid, &quad()).map_err(|e| e.to_string())?;
    let ts = lastexit_core::fb_solver::t_star(&classical, 6.5).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(
        (ts - 4.98).abs() <= 0.05 && took < Duration::from_secs(30),
        format!("t_* = {ts:.4} (target 4.98 +- 0.05), N=400 in {took:.2?}"),
    )
}

fn azema_validation() -> Outcome {
    let p = params();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_z = 0.0f64;
    let mut ok = true;
    for _ in 0..10 {
        let level = [2.0, 5.0, 6.5][rng.random_range(0..3)];
        let x = level * rng.random_range(0.3..0.97);
        let horizon = rng.random_range(0.25..10.0);
        let c = contract(level, horizon);
        let exact = z(0.0, x, &c, &p).map_err(|e| e.to_string())?;
        let est = mc::prob_max_exceeds(x, horizon, level, &mc_config(), &p).map_err(|e| e.to_string())?;
        ok &= est.within(exact, 3.0);
        worst_z = worst_z.max((est.mean - exact).abs() / est.std_error.max(1e-300));
    }

    let mut worst_id = 0.0f64;
    let mut worst_pde = 0.0f64;
    for level in common::REFERENCE_LEVELS {
        let maturity = 10.0;
        let c = contract(level, maturity);
        let alpha = p.alpha();
        for i in 0..=30 {
            let t = 0.9 * maturity * i as f64 / 30.0;
            for j in 1..=60 {
                let x = level * (0.05 + 1.45 * j as f64 / 60.0);
                let (d1, d2) = d1d2(t, x, &c, &p).map_err(|e| e.to_string())?;
                let lhs = (-0.5 * d1 * d1).exp();
                let rhs = (level / x).powf(alpha) * (-0.5 * d2 * d2).exp();
                worst_id = worst_id.max((lhs - rhs).abs());
                if x >= level || (x - level).abs() / level <= 0.05 {
                    continue;
                }
                let h = 1e-4 * x.max(1.0);
                let zf = |y: f64| z(t, y, &c, &p).unwrap();
                let z_xx = (zf(x + h) - 2.0 * zf(x) + zf(x - h)) / (h * h);
                let dv = z_derivs(t, x, &c, &p).map_err(|e| e.to_string())?;
                let s2 = p.sigma() * p.sigma();
                let res = dv.z_t + p.r() * x * dv.z_x + 0.5 * s2 * x * x * z_xx;
                worst_pde = worst_pde.max(res.abs());
            }
        }
    }
    ok &= worst_id < 1e-10 && worst_pde < 1e-5;
    let took = start.elapsed();
    ok &= took < Duration::from_secs(60);
    check(
        ok,
        format!(
            "10 z-vs-MC pairs, worst {worst_z:.2} SE; d1/d2 identity {worst_id:.1e}; PDE residual {worst_pde:.1e}; {took:.2?}"
        ),
    )
}

fn rules(set: &BoundarySet, maturity: f64, level: f64) -> Vec<(String, StoppingRule)> {
    let b0 = set.last_exit.values()[0];
    vec![
        ("fixed 0".into(), StoppingRule::FixedTime(0.0)),
        ("fixed T/2".into(), StoppingRule::FixedTime(0.5 * maturity)),
        (
            "X <= 0.9 b(0)".into(),
            StoppingRule::Threshold {
                level: 0.9 * b0,
                side: Side::Below,
            },
        ),
        (
            "X >= L".into(),
            StoppingRule::Threshold {
                level,
                side: Side::Above,
            },
        ),
        ("boundary".into(), StoppingRule::Boundary(set.last_exit.clone())),
    ]
}

fn reduction_equivalence() -> Outcome {
    let start = Instant::now();
    let p = params();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let l65 = solve(6.5, 5.0, 100);
    let cases: [(f64, f64, &BoundarySet); 3] = [
        (2.0, 10.0, &reference_set(2.0).set),
        (5.0, 10.0, &reference_set(5.0).set),
        (6.5, 5.0, &l65.set),
    ];
    for (level, maturity, set) in cases {
        let c = contract(level, maturity);
        let x0 = 0.5 * (set.last_exit.values()[0] + K);
        let batch = mc::simulate_paths(x0, maturity, &mc_config(), &p).map_err(|e| e.to_string())?;
        for (name, rule) in rules(set, maturity, level) {
            let (raw, zw) = mc::payoffs(&batch, &rule, &c, &p).map_err(|e| e.to_string())?;
            let se = raw.combined_se(&zw);
            let gap = (raw.mean - zw.mean).abs();
            if gap > 3.0 * se {
                failures.push(format!("L={level} {name}: gap {gap:.3e} > 3 SE {:.3e}", 3.0 * se));
            }
            if se > 0.0 {
                worst = worst.max(gap / se);
            }
        }
    }
    let took = start.elapsed();
    if took > Duration::from_secs(300) {
        failures.push(format!("took {took:.2?}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("15 rule/parameter pairs, worst {worst:.2} combined SE, {took:.2?}")
        } else {
            failures.join("; ")
        },
    )
}

fn boundary_validity() -> Outcome {
    let p = params();
    let q = quad();
    let slack = 1e-8 * K;
    let mut failures = Vec::new();
    let mut worst_res = 0.0f64;
    for level in common::REFERENCE_LEVELS {
        let s = reference_set(level);
        let (set, c) = (&s.set, &s.contract);
        let b = set.last_exit.values();
        let ts = set.last_exit.times();
        let n = b.len() - 1;
        if b[n] != K {
            failures.push(format!("L={level}: b(t_N) = {}", b[n]));
        }
        if b.windows(2).any(|w| w[1] < w[0] - slack) {
            failures.push(format!("L={level}: decreasing"));
        }
        for (i, &t) in ts.iter().enumerate() {
            if t >= set.t_star && b[i] < set.classical.value_at(t) - slack {
                failures.push(format!("L={level}: b < B at t={t:.4}"));
                break;
            }
            if let Some(xs) = set.x_star[i] {
                if b[i] < xs - slack {
                    failures.push(format!("L={level}: b < x* at t={t:.4}"));
                    break;
                }
            }
        }
        let res = residuals(&set.last_exit, c, &p, &q).map_err(|e| e.to_string())?;
        let r = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst_res = worst_res.max(r);
        if r >= 2.0 * q.root_tol {
            failures.push(format!("L={level}: residual {r:.3e}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "3 reference sets, shape and ordering hold, worst residual {worst_res:.2e} < {:.1e}",
                2.0 * q.root_tol
            )
        } else {
            failures.join("; ")
        },
    )
}

fn value_consistency() -> Outcome {
    let p = params();
    let q = quad();
    let mut failures = Vec::new();
    let mut worst_mc = 0.0f64;
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = f64::NEG_INFINITY;
    let start = Instant::now();
    for level in common::REFERENCE_LEVELS {
        let s = reference_set(level);
        let (set, c) = (&s.set, &s.contract);
        let le = prepare(&set.last_exit, c, &p, &q).map_err(|e| e.to_string())?;
        let classical = prepare(&set.classical, c, &p, &q).map_err(|e| e.to_string())?;
        let b0 = le.values()[0];
        let rule = StoppingRule::Boundary(le.clone());
        for i in 0..10 {
            let x = b0 + (1.3 * K - b0) * (i as f64 + 0.5) / 10.0;
            let v = value(0.0, x, &le, c, &p, &q).map_err(|e| e.to_string())?;
            let batch = mc::simulate_paths(x, 10.0, &mc_config(), &p).map_err(|e| e.to_string())?;
            let est = mc::payoff_z_weighted(&batch, &rule, c, &p).map_err(|e| e.to_string())?;
            let tol = (3.0 * est.std_error).max(5e-3 * K);
            worst_mc = worst_mc.max((v - est.mean).abs() / tol);
            if (v - est.mean).abs() > tol {
                failures.push(format!(
                    "L={level} x={x:.4}: V={v:.6} vs MC {:.6} (tol {tol:.2e})",
                    est.mean
                ));
            }
        }
        let grid = SurfaceGrid::uniform(10.0, 50, 0.1 * K, 1.5 * K, 50).unwrap();
        let surf = value_surface(&grid, &le, Some(&classical), c, &p, &q).map_err(|e| e.to_string())?;
        for i in 0..50 {
            for j in 0..50 {
                let (v, g, va) = (surf.value(i, j), surf.gain(i, j), surf.american(i, j).unwrap());
                worst_lo = worst_lo.min(v - g);
                worst_hi = worst_hi.max(v - va);
                let (t, x) = (grid.times()[i], grid.prices()[j]);
                if v < g - 1e-8 * K {
                    failures.push(format!("L={level}: V < G at ({t:.3}, {x:.3})"));
                }
                if v > va + 2.0 * q.root_tol {
                    failures.push(format!("L={level}: V > V^A at ({t:.3}, {x:.3})"));
                }
                debug_assert_eq!(g, gain(t, x, c, &p).unwrap());
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "30 points, worst |V - MC| at {:.0}% of tolerance; min(V - G) = {worst_lo:.1e}, max(V - V^A) = {worst_hi:.1e}; {:.2?}",
                100.0 * worst_mc,
                start.elapsed()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn classical_oracle() -> Outcome {
    let p = params();
    let q = quad();
    let maturity = 5.0;
    let c = contract(2.0, maturity);
    let grid = TimeGrid::sqrt_spaced(maturity, 100).unwrap();
    let classical = solve_classical(&c, &p, &grid, &q).map_err(|e| e.to_string())?;
    let v = value(0.0, K, &classical, &c, &p, &q).map_err(|e| e.to_string())?;
    let (v_bin, _) = binomial_put(K, K, p.r(), p.sigma(), maturity, 5000);
    let mut ok = (v - v_bin).abs() <= 2e-3 * K;
    let mut parts = vec![format!("V^A(0, K) = {v:.6} vs tree {v_bin:.6}")];
    for t in [0.0, 0.5 * maturity] {
        let b = classical.value_at(t);
        let b_bin = binomial_boundary(K, p.r(), p.sigma(), maturity - t, 5000);
        ok &= (b - b_bin).abs() <= 0.01 * K;
        parts.push(format!("B({t}) = {b:.5} vs tree {b_bin:.5}"));
    }
    check(ok, parts.join(", "))
}

fn perpetual_limit() -> Outcome {
    let p = params();
    let mut ok = true;
    let mut parts = Vec::new();
    for level in [2.0, 4.0] {
        let perp = solve_perpetual(&Contract::perpetual(K, level).unwrap(), &p).map_err(|e| e.to_string())?;
        let s = solve(level, 200.0, 200);
        let b0 = s.set.last_exit.values()[0];
        ok &= (b0 - perp.b).abs() <= 0.01 * K;
        parts.push(format!("L={level}: b(0) = {b0:.5} vs {:.5}", perp.b));
    }
    check(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("perpetual boundary reproduction", perpetual_boundaries),
        ("t_* reproduction", t_star_reproduction),
        ("Azema function validation", azema_validation),
        ("reduction equivalence", reduction_equivalence),
        ("boundary validity", boundary_validity),
        ("value consistency", value_consistency),
        ("classical-instance oracle", classical_oracle),
        ("perpetual large-T limit", perpetual_limit),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{took:.2?}]", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{took:.2?}]", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
