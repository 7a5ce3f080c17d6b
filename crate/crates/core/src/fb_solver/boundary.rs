use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::model::TimeGrid;

/// Which early-exercise problem a boundary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instance {
    /// Standard American put: gain `(K − x)⁺`, `Z ≡ 1`.
    Classical,
    /// Last-exit put: gain `(K − x)⁺ Z(t, x)`.
    LastExit,
}

/// Discretized exercise boundary `t ↦ b(t)`, linear between nodes.
///
/// Nodes pinned at the level also carry a local-time weight `θ ∈ [0, 1]`:
/// smooth fit fails there, and `θ` encodes the value function's kink at `L`
/// (`θ = 1` when `V_x(L+) = G_x(L+)`, `θ = 0` when `V_x(L+) = G_x(L−)`).
/// Unpinned nodes carry `θ = 1`, matching the sign of the local-time term
/// above the level.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    instance: Instance,
    grid: TimeGrid,
    values: Vec<f64>,
    at_level: Vec<bool>,
    pin_weights: Vec<f64>,
    weights_solved: bool,
}

impl BoundaryCurve {
    pub fn new(instance: Instance, grid: TimeGrid, values: Vec<f64>, at_level: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || at_level.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "boundary has {} values and {} flags for {} nodes",
                values.len(),
                at_level.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::param("b", *v, "boundary values must be positive"));
        }
        let n = values.len();
        Ok(BoundaryCurve {
            instance,
            grid,
            values,
            at_level,
            pin_weights: vec![1.0; n],
            weights_solved: false,
        })
    }

    /// Attaches solved local-time weights for the pinned nodes.
    pub fn with_pin_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} weights for {} nodes",
                weights.len(),
                self.values.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::param("theta", *w, "pin weights must lie in [0, 1]"));
        }
        self.pin_weights = weights;
        self.weights_solved = true;
        Ok(self)
    }

    pub fn pin_weights(&self) -> &[f64] {
        &self.pin_weights
    }

    /// False for a curve with pinned nodes whose weights have not been
    /// solved yet, e.g. one read from CSV.
    pub fn weights_solved(&self) -> bool {
        self.weights_solved || !self.at_level.iter().any(|&f| f)
    }

    pub fn instance(&self) -> Instance {
        self.instance
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_level(&self) -> &[bool] {
        &self.at_level
    }

    pub fn maturity(&self) -> f64 {
        self.grid.maturity()
    }

    /// Linear interpolation; clamps outside `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(self.times(), &self.values, t)
    }

    /// Portion of the curve on `[t, T]`, starting from the interpolated value
    /// at `t`.
    pub fn tail_from(&self, t: f64) -> Tail<'_> {
        let ts = self.times();
        let k = ts.partition_point(|&s| s <= t).min(ts.len());
        Tail {
            start: t,
            start_value: self.value_at(t),
            start_weight: interpolate(ts, &self.pin_weights, t),
            times: &ts[k..],
            values: &self.values[k..],
            weights: &self.pin_weights[k..],
        }
    }

    /// First and last node flagged as pinned at the level, i.e. the interval
    /// `[t_b, t^b]` when one was detected.
    pub fn pinned_interval(&self) -> Option<(f64, f64)> {
        let first = self.at_level.iter().position(|&f| f)?;
        let last = self.at_level.iter().rposition(|&f| f)?;
        Some((self.times()[first], self.times()[last]))
    }

    /// CSV with header `t,b,at_level`, 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,b,at_level")?;
        for ((t, b), f) in self.times().iter().zip(&self.values).zip(&self.at_level) {
            writeln!(w, "{},{},{}", sig(*t, 12), sig(*b, 12), u8::from(*f))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, instance: Instance) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Csv("empty boundary file".into()))??;
        if header.trim() != "t,b,at_level" {
            return Err(Error::Csv(format!("unexpected header `{}`", header.trim())));
        }
        let (mut ts, mut bs, mut fs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Csv(format!("row {}: expected 3 columns", i + 2)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: {e}", i + 2)))
            };
            ts.push(num(cols[0])?);
            bs.push(num(cols[1])?);
            fs.push(match cols[2].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::Csv(format!("row {}: bad flag `{other}`", i + 2))),
            });
        }
        BoundaryCurve::new(instance, TimeGrid::new(ts)?, bs, fs)
    }
}

fn interpolate(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= ts[0] {
        return ys[0];
    }
    let n = ts.len();
    if t >= ts[n - 1] {
        return ys[n - 1];
    }
    let k = ts.partition_point(|&s| s <= t);
    let (t0, t1) = (ts[k - 1], ts[k]);
    let w = (t - t0) / (t1 - t0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Boundary knots from `start` to maturity.
#[derive(Debug, Clone, Copy)]
pub struct Tail<'a> {
    pub start: f64,
    pub start_value: f64,
    pub start_weight: f64,
    /// Nodes strictly after `start`.
    pub times: &'a [f64],
    pub values: &'a [f64],
    /// Local-time weights at `times`.
    pub weights: &'a [f64],
}

impl<'a> Tail<'a> {
    pub fn segments(&self) -> usize {
        self.times.len()
    }

    /// Segment `k` as `(s_a, c_a, s_b, c_b)`.
    #[inline]
    pub fn segment(&self, k: usize) -> (f64, f64, f64, f64) {
        let (sa, ca) = if k == 0 {
            (self.start, self.start_value)
        } else {
            (self.times[k - 1], self.values[k - 1])
        };
        (sa, ca, self.times[k], self.values[k])
    }

    /// Local-time weights at the ends of segment `k`.
    #[inline]
    pub fn segment_weights(&self, k: usize) -> (f64, f64) {
        let wa = if k == 0 { self.start_weight } else { self.weights[k - 1] };
        (wa, self.weights[k])
    }
}
