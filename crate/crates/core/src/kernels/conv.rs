//! Product-integration convolution on uniform grids.
//!
//! All quadrature here integrates the kernel factor exactly over each cell
//! (via its antiderivatives) and interpolates only the smooth factor, so the
//! fractional kernel's singularity at lag zero never meets a point
//! evaluation. The same weights reproduce the classical trapezoidal rule
//! when the kernel is constant.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{special, KernelSpec};

/// Per-cell integrals of a convolution factor against the local linear
/// interpolation basis on a uniform lag grid.
///
/// For cell m (covering lags ((m-1)h, mh]), `mass` is the plain integral of
/// the factor and `ramp` is its integral against the rising ramp
/// (u - (m-1)h)/h. Together they integrate the factor against any piecewise
/// linear function exactly.
#[derive(Debug, Clone)]
pub struct LagWeights {
    mass: Vec<f64>,
    ramp: Vec<f64>,
}

impl LagWeights {
    /// Weights for `n_cells` lag cells of width `h`, from the factor's exact
    /// first and second antiderivatives (both vanishing at 0).
    pub fn from_antiderivatives(
        k1: impl Fn(f64) -> f64,
        k2: impl Fn(f64) -> f64,
        h: f64,
        n_cells: usize,
    ) -> Self {
        let mut mass = Vec::with_capacity(n_cells);
        let mut ramp = Vec::with_capacity(n_cells);
        let mut k1_prev = 0.0;
        let mut k2_prev = 0.0;
        for m in 1..=n_cells {
            let t = m as f64 * h;
            let k1_m = k1(t);
            let k2_m = k2(t);
            mass.push(k1_m - k1_prev);
            // int K(u) (u-(m-1)h)/h du over the cell, after integration by
            // parts against K1
            ramp.push(k1_m - (k2_m - k2_prev) / h);
            k1_prev = k1_m;
            k2_prev = k2_m;
        }
        LagWeights { mass, ramp }
    }

    pub fn n_cells(&self) -> usize {
        self.mass.len()
    }

    /// Integral of the factor over lag cell m, 1-based.
    pub fn cell_mass(&self, m: usize) -> f64 {
        self.mass[m - 1]
    }

    /// Convolution value at node n from samples f[0..=n], interpolating f
    /// piecewise linearly (the corrector rule). Exact for linear f.
    pub fn convolve_at(&self, f: &[f64], n: usize) -> f64 {
        debug_assert!(n < f.len() && n <= self.mass.len());
        let mut acc = 0.0;
        for m in 1..=n {
            let a = self.mass[m - 1];
            let r = self.ramp[m - 1];
            acc += f[n - m + 1] * (a - r) + f[n - m] * r;
        }
        acc
    }

    /// Convolution value at node n holding f constant at its left sample on
    /// each cell (the predictor rule). Never touches f[n].
    pub fn predict_at(&self, f: &[f64], n: usize) -> f64 {
        debug_assert!(n < f.len() + 1 && n <= self.mass.len());
        let mut acc = 0.0;
        for m in 1..=n {
            acc += self.mass[m - 1] * f[n - m];
        }
        acc
    }
}

/// A convolution factor that can integrate itself exactly over lag cells.
///
/// Implemented by the closed-form kernel catalog and by sampled resolvent
/// curves; [`convolve`] is generic over it.
pub trait CellMeasure {
    /// Integral of the factor over the lag cell ((m-1)h, mh], m 1-based.
    fn cell_mass(&self, h: f64, m: usize) -> f64;

    /// Integral of the factor against the rising in-cell ramp over the same
    /// cell.
    fn cell_ramp(&self, h: f64, m: usize) -> f64;

    /// Reject grids the factor is not usable on (sampled curves must live on
    /// the same grid they were built on).
    fn check_grid(&self, grid: &Grid) -> Result<()>;
}

impl CellMeasure for KernelSpec {
    fn cell_mass(&self, h: f64, m: usize) -> f64 {
        let t = m as f64 * h;
        self.antiderivative(t) - self.antiderivative(t - h)
    }

    fn cell_ramp(&self, h: f64, m: usize) -> f64 {
        let t = m as f64 * h;
        self.antiderivative(t)
            - (self.second_antiderivative(t) - self.second_antiderivative(t - h)) / h
    }

    fn check_grid(&self, _grid: &Grid) -> Result<()> {
        Ok(())
    }
}

/// (factor * f)(t) at every grid node: out[n] approximates
/// int_0^{t_n} factor(t_n - s) f(s) ds with f piecewise linear and the
/// factor integrated exactly per cell.
pub fn convolve<M: CellMeasure + ?Sized>(factor: &M, f: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "convolve got {} samples on a grid of {} nodes",
            f.len(),
            grid.len()
        )));
    }
    factor.check_grid(grid)?;
    let h = grid.h();
    let n_cells = grid.n_steps();
    let weights = LagWeights {
        mass: (1..=n_cells).map(|m| factor.cell_mass(h, m)).collect(),
        ramp: (1..=n_cells).map(|m| factor.cell_ramp(h, m)).collect(),
    };
    Ok((0..grid.len())
        .map(|n| weights.convolve_at(f, n))
        .collect())
}

/// Riemann-Liouville fractional integral I^order f at the grid point `t`,
/// with order in (0, 1]. Order 1 reduces to plain trapezoidal integration.
///
/// `t` must be a node of `grid`; sampled curves are never interpolated.
pub fn fractional_integral(order: f64, f: &[f64], grid: &Grid, t: f64) -> Result<f64> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional integral order must lie in (0, 1], got {order}"
        )));
    }
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "fractional_integral got {} samples on a grid of {} nodes",
            f.len(),
            grid.len()
        )));
    }
    let n = grid.index_of(t)?;
    // kernel u^{order-1}/Gamma(order): antiderivatives in closed form; this
    // range of order is wider than KernelSpec admits, so build weights here
    let scale1 = special::recip_gamma(order + 1.0);
    let scale2 = special::recip_gamma(order + 2.0);
    let weights = LagWeights::from_antiderivatives(
        |u| u.powf(order) * scale1,
        |u| u.powf(order + 1.0) * scale2,
        grid.h(),
        n,
    );
    Ok(weights.convolve_at(f, n))
}

/// Integral of a smooth function g against a (possibly singular) positive
/// measure on [0, L], given the measure's cumulative function.
///
/// The mesh s_j = L (j/n)^q crowds nodes toward the origin where the
/// measure density may blow up; each cell contributes its exact mass times
/// g at the cell midpoint. Grading exponent q around 3 suits the
/// power-density measures in this crate.
pub fn graded_measure_integral(
    cumulative: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    l: f64,
    n_cells: usize,
    q: f64,
) -> f64 {
    debug_assert!(l >= 0.0 && n_cells > 0);
    if l == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut s_prev = 0.0;
    let mut c_prev = cumulative(0.0);
    for j in 1..=n_cells {
        let s = l * ((j as f64) / (n_cells as f64)).powf(q);
        let c = cumulative(s);
        acc += (c - c_prev) * g(0.5 * (s_prev + s));
        s_prev = s;
        c_prev = c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::special::{gamma, recip_gamma};

    fn grid(t_max: f64, n: usize) -> Grid {
        Grid::new(t_max, n).unwrap()
    }

    #[test]
    fn constant_kernel_is_trapezoid() {
        let g = grid(2.0, 16);
        let k = KernelSpec::constant(1.0).unwrap();
        let f: Vec<f64> = g.nodes().map(|t| t * t).collect();
        let conv = convolve(&k, &f, &g).unwrap();
        // plain trapezoid of t^2 from 0 to t_n
        let h = g.h();
        for n in 1..g.len() {
            let mut trap = 0.0;
            for j in 1..=n {
                trap += 0.5 * h * (f[j - 1] + f[j]);
            }
            assert!((conv[n] - trap).abs() < 1e-13, "node {n}");
        }
    }

    #[test]
    fn reproduces_linear_integrands_exactly() {
        // for f(s) = 1 + 2s the rule is exact:
        // (K*f)(t) = K1(t) + 2 K2(t)
        let g = grid(1.0, 64);
        for k in [
            KernelSpec::constant(1.7).unwrap(),
            KernelSpec::fractional(1.0, 0.6).unwrap(),
            KernelSpec::fractional(1.3, 0.85).unwrap(),
            KernelSpec::exponential(1.0, 2.5).unwrap(),
        ] {
            let f: Vec<f64> = g.nodes().map(|s| 1.0 + 2.0 * s).collect();
            let conv = convolve(&k, &f, &g).unwrap();
            for n in 1..g.len() {
                let t = g.node(n);
                let exact = k.antiderivative(t) + 2.0 * k.second_antiderivative(t);
                assert!(
                    (conv[n] - exact).abs() < 1e-13 * exact.abs().max(1.0),
                    "kernel {k:?} node {n}: {} vs {exact}",
                    conv[n]
                );
            }
        }
    }

    #[test]
    fn fractional_unit_function_closed_form() {
        let g = grid(1.0, 32);
        let alpha = 0.6;
        let k = KernelSpec::fractional(1.0, alpha).unwrap();
        let f = vec![1.0; g.len()];
        let conv = convolve(&k, &f, &g).unwrap();
        for n in 1..g.len() {
            let t = g.node(n);
            let exact = t.powf(alpha) * recip_gamma(alpha + 1.0);
            assert!((conv[n] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoint_weights_match_adams_corrector() {
        // the newest-sample weight must be h^alpha / Gamma(alpha + 2) and
        // the cell-1 ramp alpha h^alpha / Gamma(alpha + 2); this pins the
        // orientation of the rule
        let alpha = 0.6;
        let h = 0.01;
        let k = KernelSpec::fractional(1.0, alpha).unwrap();
        let w = k.lag_weights(h, 4);
        let newest = w.mass[0] - w.ramp[0];
        let expect = h.powf(alpha) * recip_gamma(alpha + 2.0);
        assert!((newest - expect).abs() < 1e-15 * expect);
        assert!((w.ramp[0] - alpha * expect).abs() < 1e-15);
    }

    #[test]
    fn predictor_uses_left_samples() {
        // for the constant kernel the predictor is the left Riemann sum
        let g = grid(1.0, 10);
        let k = KernelSpec::constant(1.0).unwrap();
        let f: Vec<f64> = g.nodes().map(|t| t + 0.5).collect();
        let w = k.lag_weights(g.h(), g.n_steps());
        let h = g.h();
        for n in 1..g.len() {
            let left: f64 = (0..n).map(|j| h * f[j]).sum();
            assert!((w.predict_at(&f, n) - left).abs() < 1e-14);
        }
    }

    #[test]
    fn fractional_integral_anchors() {
        let g = grid(2.0, 200);
        let ones = vec![1.0; g.len()];
        // I^1 of 1 at t = 2 is 2, exactly (trapezoid of a constant)
        let v = fractional_integral(1.0, &ones, &g, 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        // I^{1/2} of 1 at t = 1: t^{1/2} / Gamma(3/2)
        let g1 = grid(1.0, 250);
        let ones1 = vec![1.0; g1.len()];
        let v = fractional_integral(0.5, &ones1, &g1, 1.0).unwrap();
        assert!((v - 1.0 / gamma(1.5)).abs() < 1e-13);
        // off-grid evaluation points are rejected
        assert!(fractional_integral(0.5, &ones1, &g1, 0.3211).is_err());
        assert!(fractional_integral(1.2, &ones1, &g1, 1.0).is_err());
    }

    #[test]
    fn fractional_integral_composition() {
        // I^{1-a}(I^a f) = I^1 f for smooth f; the piecewise-linear
        // representation of the inner integral limits accuracy to
        // O(h^{1+a}) near the origin, so the grid is kept fine
        let g = grid(1.0, 3000);
        let alpha = 0.6;
        let f: Vec<f64> = g.nodes().map(|s| (2.0 * s).cos() + s).collect();
        let k = KernelSpec::fractional(1.0, alpha).unwrap();
        let inner = convolve(&k, &f, &g).unwrap();
        let composed = fractional_integral(1.0 - alpha, &inner, &g, 1.0).unwrap();
        let plain = fractional_integral(1.0, &f, &g, 1.0).unwrap();
        assert!(
            (composed - plain).abs() < 1e-6,
            "composition gap {:.3e}",
            (composed - plain).abs()
        );
    }

    #[test]
    fn convolve_rejects_mismatched_grid() {
        let g = grid(1.0, 10);
        let k = KernelSpec::constant(1.0).unwrap();
        let short = vec![1.0; 5];
        assert!(matches!(
            convolve(&k, &short, &g),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn graded_integral_against_singular_density() {
        // measure with density 0.6 s^{-0.4} (cumulative s^{0.6}) against
        // cos(s) on [0, 1]; reference from the alternating series
        // 0.6 sum_k (-1)^k / ((2k)! (2k + 0.6))
        let reference = 0.889_925_619_448_097;
        let got = graded_measure_integral(|s| s.powf(0.6), |s| s.cos(), 1.0, 4000, 3.0);
        assert!(
            (got - reference).abs() < 1e-8,
            "graded integral {got:.12} vs {reference:.12}"
        );
    }
}
