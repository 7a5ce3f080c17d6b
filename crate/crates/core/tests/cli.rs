use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = "r = 0.05\nsigma = 0.4\nstrike = 7\n";

fn run(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{cmd}.cfg"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_lastexit-put"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn perpetual_prints_known_boundaries() {
    let dir = TempDir::new().unwrap();
    for (level, b) in [("2", "b = 2.69231"), ("4", "b = 3.50000")] {
        let o = run(
            dir.path(),
            "perpetual",
            &format!("{BASE}level = {level}\nmaturity = inf\n"),
            &[],
        );
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains(b), "{}", stdout(&o));
        let csv = fs::read_to_string(dir.path().join("perpetual.csv")).unwrap();
        assert!(csv.starts_with("x,V,G\n"));
        assert_eq!(csv.lines().count(), 201);
    }
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = TempDir::new().unwrap();
    let bad = run(
        dir.path(),
        "perpetual",
        &format!("{BASE}level = 8\nmaturity = inf\n"),
        &[],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("must exceed level"));
    let gap = run(
        dir.path(),
        "perpetual",
        &format!("{BASE}level = 3\nmaturity = inf\n"),
        &[],
    );
    assert_eq!(gap.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gap.stderr).contains("gap"));
    let unknown = run(
        dir.path(),
        "perpetual",
        &format!("{BASE}level = 2\nmaturity = inf\ncolour = red\n"),
        &[],
    );
    assert_eq!(unknown.status.code(), Some(1));
    let finite_only = run(
        dir.path(),
        "boundary",
        &format!("{BASE}level = 2\nmaturity = inf\n"),
        &[],
    );
    assert_eq!(finite_only.status.code(), Some(1));
}

#[test]
fn boundary_reports_t_star_and_ends_at_strike() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        "boundary",
        &format!("{BASE}level = 6.5\nmaturity = 5\ngrid_steps = 200\n"),
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let ts: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("t_* = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((ts - 4.98).abs() <= 0.05, "{out}");
    let csv = fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,b,B,x_star,at_level"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let last = rows.last().unwrap();
    assert_eq!((last[0], last[1]), ("5.00000000000", "7.00000000000"));
    for row in &rows {
        let t: f64 = row[0].parse().unwrap();
        assert_eq!(row[3].is_empty(), t > ts + 1e-9, "{row:?}");
    }
}

#[test]
fn value_flags_stopping_and_worthless_regions() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{BASE}level = 2\nmaturity = 10\ngrid_steps = 50\n");
    let stop = run(dir.path(), "value", &cfg, &["--t", "1", "--x", "2.5"]);
    assert_eq!(stop.status.code(), Some(0));
    let out = stdout(&stop);
    let v = out.lines().find(|l| l.starts_with("V(t, x)")).unwrap();
    let g = out.lines().find(|l| l.starts_with("G(t, x)")).unwrap();
    assert!(v.ends_with("stop"), "{out}");
    assert_eq!(v.split_whitespace().nth(3), g.split_whitespace().nth(3));
    let far = run(dir.path(), "value", &cfg, &["--x", "70000"]);
    let line = stdout(&far)
        .lines()
        .find(|l| l.starts_with("V(t, x)"))
        .unwrap()
        .to_string();
    let v: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((0.0..1e-9).contains(&v), "{line}");
}

#[test]
fn csv_round_trip_reproduces_values_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{BASE}level = 5\nmaturity = 3\ngrid_steps = 40\nsurface_nt = 4\nsurface_nx = 6\n");
    assert_eq!(run(dir.path(), "boundary", &cfg, &[]).status.code(), Some(0));
    assert_eq!(run(dir.path(), "value", &cfg, &[]).status.code(), Some(0));
    let solved = fs::read(dir.path().join("value_surface.csv")).unwrap();
    let file = dir.path().join("last_exit_boundary.csv");
    let from_file = format!("{cfg}boundary_file = {}\n", file.display());
    assert_eq!(run(dir.path(), "value", &from_file, &[]).status.code(), Some(0));
    let reread = fs::read(dir.path().join("value_surface.csv")).unwrap();
    assert_eq!(solved, reread);
}

fn verify_config(level: f64, maturity: f64, paths: usize) -> String {
    format!("{BASE}level = {level}\nmaturity = {maturity}\ngrid_steps = 60\nmc_paths = {paths}\nmc_seed = 17\n")
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = verify_config(2.0, 10.0, 20_000);
    let a = run(dir.path(), "verify", &cfg, &["--x", "4"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let out = stdout(&a);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    assert!(out.contains("value(0, 4.00000) vs MC policy value"));
    let b = run(dir.path(), "verify", &cfg, &["--x", "4"]);
    assert_eq!(out, stdout(&b));
}

#[test]
fn verify_with_few_paths_still_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "verify", &verify_config(5.0, 2.0, 100), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn corrupted_boundary_fails_verification() {
    let dir = TempDir::new().unwrap();
    let cfg = verify_config(5.0, 2.0, 2_000);
    assert_eq!(run(dir.path(), "boundary", &cfg, &[]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("last_exit_boundary.csv")).unwrap();
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let fields: Vec<String> = lines[10].split(',').map(String::from).collect();
    let b: f64 = fields[1].parse().unwrap();
    lines[10] = format!("{},{},{}", fields[0], b * 0.97, fields[2]);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = run(
        dir.path(),
        "verify",
        &format!("{cfg}boundary_file = {}\n", bad.display()),
        &[],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("FAIL boundary residual"), "{}", stdout(&o));
}
