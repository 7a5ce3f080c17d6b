//! Gauss–Legendre rules and the end-point substitutions used for integrands
//! with `1/√u` behaviour.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`, roots by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// `∫_a^b f` where `f` may behave like `(s − a)^{-1/2}` and/or
    /// `(b − s)^{-1/2}` at the flagged ends. A flagged end is absorbed with a
    /// quadratic substitution; with both flags the interval is split at its
    /// midpoint.
    pub fn integrate_sqrt_ends<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, left: bool, right: bool, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        match (left, right) {
            (false, false) => self.integrate(a, b, f),
            (true, false) => self.left_sqrt(a, b, &mut f),
            (false, true) => self.right_sqrt(a, b, &mut f),
            (true, true) => {
                let m = 0.5 * (a + b);
                self.left_sqrt(a, m, &mut f) + self.right_sqrt(m, b, &mut f)
            }
        }
    }

    /// `s = a + h v²`, `ds = 2 h v dv`.
    fn left_sqrt<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, f: &mut F) -> f64 {
        let h = b - a;
        self.integrate(0.0, 1.0, |v| 2.0 * h * v * f(a + h * v * v))
    }

    fn right_sqrt<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, f: &mut F) -> f64 {
        let h = b - a;
        self.integrate(0.0, 1.0, |w| 2.0 * h * w * f(b - h * w * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
