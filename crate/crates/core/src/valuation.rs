//! Value function `V(t, x)` and value surfaces.
//!
//! Inside the stopping set `V = G`. Elsewhere `V` is the premium
//! representation evaluated on the solved boundary: the European-style
//! terminal term, the time integral of `−H` over the stopping region and the
//! local-time terms at `L` (weighted by the boundary's pin weights).

use std::io::Write;

use crate::error::{Error, Result};
use crate::fb_solver::{problem, solve_pin_weights, BoundaryCurve, EarlyExerciseObj, QuadratureSpec};
use crate::fmt::sig;
use crate::model::{Contract, MarketParams};

/// `V(t, x)` under `boundary`, for the instance the boundary was solved for.
///
/// Curves without solved pin weights (e.g. read back from CSV) get them
/// recomputed first; [`prepare`] does that once for repeated calls.
pub fn value(
    t: f64,
    x: f64,
    boundary: &BoundaryCurve,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let prepared;
    let boundary = if boundary.weights_solved() {
        boundary
    } else {
        prepared = prepare(boundary, contract, params, quad)?;
        &prepared
    };
    let p = problem(boundary.instance(), contract, params)?;
    value_with(p.as_ref(), t, x, boundary, contract, quad)
}

/// Returns `boundary` with its pin weights solved.
pub fn prepare(
    boundary: &BoundaryCurve,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<BoundaryCurve> {
    if boundary.weights_solved() {
        check_horizon(boundary, contract)?;
        return Ok(boundary.clone());
    }
    solve_pin_weights(boundary, contract, params, quad)
}

fn check_horizon(boundary: &BoundaryCurve, contract: &Contract) -> Result<f64> {
    let maturity = contract.horizon()?;
    if (boundary.maturity() - maturity).abs() > 1e-12 * maturity.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "boundary ends at {} but the contract matures at {maturity}",
            boundary.maturity()
        )));
    }
    Ok(maturity)
}

fn value_with(
    p: &dyn EarlyExerciseObj,
    t: f64,
    x: f64,
    boundary: &BoundaryCurve,
    contract: &Contract,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let maturity = check_horizon(boundary, contract)?;
    if !(0.0..=maturity).contains(&t) {
        return Err(Error::param("t", t, "time must lie in [0, T]"));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::param("x", x, "spot must be positive"));
    }
    if t >= maturity || x <= boundary.value_at(t) {
        return Ok(p.gain_at(t, x));
    }
    let v = p.rhs(t, x, &boundary.tail_from(t), quad)?;
    Ok(v.max(0.0))
}

/// Time and price axes of a value surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    times: Vec<f64>,
    prices: Vec<f64>,
}

impl SurfaceGrid {
    pub fn new(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if times.is_empty() || !increasing(&times) || times[0] < 0.0 {
            return Err(Error::InvalidGrid(
                "surface times must be nonnegative and strictly increasing".into(),
            ));
        }
        if prices.is_empty() || !increasing(&prices) || prices[0] <= 0.0 {
            return Err(Error::InvalidGrid(
                "surface prices must be positive and strictly increasing".into(),
            ));
        }
        Ok(SurfaceGrid { times, prices })
    }

    /// `n_t` times uniform on `[0, t_max]` and `n_x` prices uniform on
    /// `[x_lo, x_hi]`.
    pub fn uniform(t_max: f64, n_t: usize, x_lo: f64, x_hi: f64, n_x: usize) -> Result<Self> {
        if n_t < 2 || n_x < 2 {
            return Err(Error::InvalidGrid("surface axes need at least two points".into()));
        }
        let axis = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        SurfaceGrid::new(axis(0.0, t_max, n_t), axis(x_lo, x_hi, n_x))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

/// `V`, `G` and optionally the classical value `V^A` on a grid, row-major in
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: SurfaceGrid,
    values: Vec<f64>,
    gains: Vec<f64>,
    american: Option<Vec<f64>>,
}

impl ValueSurface {
    pub fn grid(&self) -> &SurfaceGrid {
        &self.grid
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[self.index(i, j)]
    }

    pub fn american(&self, i: usize, j: usize) -> Option<f64> {
        self.american.as_ref().map(|a| a[self.index(i, j)])
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * self.grid.prices.len() + j
    }

    /// CSV with header `t,x,V,G,VA`, 12 significant digits; `VA` is empty
    /// when no classical boundary was supplied.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,V,G,VA")?;
        for (i, &t) in self.grid.times.iter().enumerate() {
            for (j, &x) in self.grid.prices.iter().enumerate() {
                let va = self.american(i, j).map(|v| sig(v, 12)).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{va}",
                    sig(t, 12),
                    sig(x, 12),
                    sig(self.value(i, j), 12),
                    sig(self.gain(i, j), 12)
                )?;
            }
        }
        Ok(())
    }
}

/// Evaluates [`value`] on every grid point, and `V^A` as well when the
/// classical boundary `american` is given. Points are independent and run
/// under `quad.execution`.
pub fn value_surface(
    grid: &SurfaceGrid,
    boundary: &BoundaryCurve,
    american: Option<&BoundaryCurve>,
    contract: &Contract,
    params: &MarketParams,
    quad: &QuadratureSpec,
) -> Result<ValueSurface> {
    let evaluate = |curve: &BoundaryCurve| -> Result<(Vec<f64>, Vec<f64>)> {
        let curve = prepare(curve, contract, params, quad)?;
        let p = problem(curve.instance(), contract, params)?;
        let nx = grid.prices.len();
        let cells = crate::par::map_indexed(quad.execution, grid.times.len() * nx, |k| {
            let (t, x) = (grid.times[k / nx], grid.prices[k % nx]);
            value_with(p.as_ref(), t, x, &curve, contract, quad).map(|v| (v, p.gain_at(t, x)))
        });
        let cells: Vec<(f64, f64)> = cells.into_iter().collect::<Result<_>>()?;
        Ok(cells.into_iter().unzip())
    };
    let (values, gains) = evaluate(boundary)?;
    let american = american.map(|c| evaluate(c).map(|(v, _)| v)).transpose()?;
    Ok(ValueSurface {
        grid: grid.clone(),
        values,
        gains,
        american,
    })
}
