//! Forward variance curves: the time-t conditional expectation of future
//! instantaneous variance under the variance-optimal measure, generated by
//! the second-kind resolvent of the mean-reverting kernel.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{resolvent_second_kind, KernelSpec};
use crate::portfolio::ModelParams;

/// Expected variance s -> xi_t(s) for maturities s in [t, T], anchored at
/// node `anchor` of the full [0, T] grid. Maturities before the anchor are
/// not stored; `values[j]` belongs to grid node `anchor + j`.
#[derive(Debug, Clone)]
pub struct ForwardVarianceCurve {
    grid: Grid,
    anchor: usize,
    values: Vec<f64>,
}

impl ForwardVarianceCurve {
    pub fn new(grid: Grid, anchor: usize, values: Vec<f64>) -> Result<Self> {
        if anchor > grid.n_steps() {
            return Err(Error::InvalidParameter(format!(
                "anchor node {anchor} is outside a grid of {} steps",
                grid.n_steps()
            )));
        }
        if values.len() != grid.len() - anchor {
            return Err(Error::GridMismatch(format!(
                "curve holds {} values but [t, T] spans {} nodes",
                values.len(),
                grid.len() - anchor
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "forward variance values must be finite".into(),
            ));
        }
        Ok(ForwardVarianceCurve {
            grid,
            anchor,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor
    }

    pub fn anchor_time(&self) -> f64 {
        self.grid.node(self.anchor)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at full-grid node i, which must lie at or after the anchor.
    pub fn value_at_node(&self, i: usize) -> Result<f64> {
        if i < self.anchor || i > self.grid.n_steps() {
            return Err(Error::Domain(format!(
                "node {i} is outside the curve's maturity span [{}, {}]",
                self.anchor,
                self.grid.n_steps()
            )));
        }
        Ok(self.values[i - self.anchor])
    }

    /// Trapezoidal integral of the curve over [t_i, T].
    pub fn tail_integral_from(&self, i: usize) -> Result<f64> {
        if i < self.anchor || i > self.grid.n_steps() {
            return Err(Error::Domain(format!(
                "node {i} is outside the curve's maturity span [{}, {}]",
                self.anchor,
                self.grid.n_steps()
            )));
        }
        let h = self.grid.h();
        let tail = &self.values[i - self.anchor..];
        let mut acc = 0.0;
        for w in tail.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
        }
        Ok(acc)
    }

    /// Integral over the whole stored span [t, T].
    pub fn total_integral(&self) -> f64 {
        self.tail_integral_from(self.anchor).expect("anchor is in span")
    }
}

/// Deterministic time-0 forward variance curve on `grid`:
/// xi_0(s) = (1 - int_0^s R) V0 + kappa phi int_0^s R / lambda,
/// with R the second-kind resolvent of lambda K. Both integrals are exact
/// catalog antiderivatives; the lambda = 0 degeneracy turns the second term
/// into kappa phi int_0^s K.
pub fn xi0(params: &ModelParams, kernel: &KernelSpec, grid: &Grid) -> Result<ForwardVarianceCurve> {
    params.validate()?;
    check_horizon(params, grid)?;
    let resolvent = resolvent_second_kind(kernel, params.lambda(), grid)?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let s = grid.node(i);
        let depleted = 1.0 - resolvent.cumulative(s)?;
        let replenished = resolvent.over_lambda_cumulative(s)?;
        values.push(depleted * params.v0 + params.kappa * params.phi * replenished);
    }
    ForwardVarianceCurve::new(*grid, 0, values)
}

/// Grids for portfolio quantities must span exactly [0, T].
pub(crate) fn check_horizon(params: &ModelParams, grid: &Grid) -> Result<()> {
    if (grid.t_max() - params.horizon).abs() > 1e-9 * params.horizon {
        return Err(Error::GridMismatch(format!(
            "grid spans [0, {}] but the horizon is {}",
            grid.t_max(),
            params.horizon
        )));
    }
    Ok(())
}
