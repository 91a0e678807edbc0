//! Slow, independent reference implementations used to cross-check the
//! production paths: a classical Runge-Kutta solve of the flat-kernel ODE
//! system, a noiseless relaxation of the variance equation, and a
//! double-exponential quadrature.
//!
//! Nothing here calls the solver or portfolio layers; the only dependency
//! is the kernel catalog. Cross-checks against those layers live in the
//! integration tests, keeping both sides of every comparison independent.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelSpec;

/// Autonomous pair w' = c0 + c1 w + c2 w^2, y' = forcing * w started at
/// (0, 0). With flat-kernel coefficients the w component reproduces the
/// quadratic Volterra solutions and y accumulates their running integral
/// times `forcing`.
#[derive(Debug, Clone, Copy)]
pub struct OdeSystem {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub forcing: f64,
}

impl OdeSystem {
    pub fn new(c0: f64, c1: f64, c2: f64, forcing: f64) -> Self {
        OdeSystem {
            c0,
            c1,
            c2,
            forcing,
        }
    }

    fn slope(&self, w: f64) -> f64 {
        self.c0 + (self.c1 + self.c2 * w) * w
    }
}

/// RK4 solution of an [`OdeSystem`] sampled at the grid nodes, with the
/// step-halving error estimate that certifies it.
#[derive(Debug, Clone)]
pub struct OdeCurves {
    grid: Grid,
    w: Vec<f64>,
    y: Vec<f64>,
    step_halving_error: f64,
}

impl OdeCurves {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Max node distance between the returned solve and one at half the
    /// internal step.
    pub fn step_halving_error(&self) -> f64 {
        self.step_halving_error
    }
}

fn rk4_march(system: &OdeSystem, grid: &Grid, substeps: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    let mut wv = 0.0f64;
    let mut yv = 0.0f64;
    w.push(wv);
    y.push(yv);
    let hs = grid.h() / substeps as f64;
    for _ in 0..grid.n_steps() {
        for _ in 0..substeps {
            let k1 = system.slope(wv);
            let l1 = system.forcing * wv;
            let k2 = system.slope(wv + 0.5 * hs * k1);
            let l2 = system.forcing * (wv + 0.5 * hs * k1);
            let k3 = system.slope(wv + 0.5 * hs * k2);
            let l3 = system.forcing * (wv + 0.5 * hs * k2);
            let k4 = system.slope(wv + hs * k3);
            let l4 = system.forcing * (wv + hs * k3);
            wv += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            yv += hs / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        }
        w.push(wv);
        y.push(yv);
    }
    (w, y)
}

/// Integrate the system by classical RK4, doubling the internal substep
/// count until the step-halving estimate drops under 1e-9 (or a generous
/// cap is reached). The returned curves are from the finer of the last two
/// solves.
pub fn heston_ode_solve(system: &OdeSystem, grid: &Grid) -> OdeCurves {
    let mut substeps = 8;
    let (mut w, mut y) = rk4_march(system, grid, substeps);
    loop {
        let (w2, y2) = rk4_march(system, grid, 2 * substeps);
        let err = w
            .iter()
            .zip(&w2)
            .chain(y.iter().zip(&y2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err < 1e-9 || substeps >= 512 {
            return OdeCurves {
                grid: *grid,
                w: w2,
                y: y2,
                step_halving_error: err,
            };
        }
        substeps *= 2;
        w = w2;
        y = y2;
    }
}

/// Noiseless variance relaxation: the solution of
/// V = V0 + K * (kappa (phi - V)) by product-trapezoidal marching. The
/// newest value enters linearly, so each step is an exact solve rather
/// than a fixed-point sweep.
pub fn deterministic_volterra(
    v0: f64,
    kappa: f64,
    phi: f64,
    kernel: &KernelSpec,
    grid: &Grid,
) -> Vec<f64> {
    let weights = kernel.lag_weights(grid.h(), grid.n_steps());
    let newest = {
        let probe = [0.0, 1.0];
        weights.convolve_at(&probe, 1)
    };
    let mut v = Vec::with_capacity(grid.len());
    let mut f = Vec::with_capacity(grid.len());
    v.push(v0);
    f.push(kappa * (phi - v0));
    for n in 1..grid.len() {
        f.push(0.0);
        let lag = weights.convolve_at(&f, n);
        let vn = (v0 + lag + newest * kappa * phi) / (1.0 + newest * kappa);
        v.push(vn);
        f[n] = kappa * (phi - vn);
    }
    v
}

/// Adaptive double-exponential quadrature of f over [a, b]. The tanh-sinh
/// substitution crowds nodes toward the endpoints, so integrable endpoint
/// singularities converge; non-finite integrand values there are treated
/// as zero contribution. `tol` is the absolute acceptance threshold on the
/// last refinement step.
pub fn brute_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs finite bounds and tol > 0, got [{a}, {b}] at {tol}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let node = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let x = mid + half * s.tanh();
        let dx = half * FRAC_PI_2 * t.cosh() / (s.cosh() * s.cosh());
        let v = f(x) * dx;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // beyond |t| = 4 the transformed weight is below 1e-30 of the span
    let t_max = 4.0;
    let mut h = 1.0;
    let mut total = node(0.0);
    let mut k = 1.0;
    while k * h <= t_max {
        total += node(k * h) + node(-k * h);
        k += 1.0;
    }
    let mut estimate = h * total;
    for _ in 0..14 {
        // refine: keep old nodes, add the midpoints between them
        let mut added = 0.0;
        let mut t = 0.5 * h;
        while t <= t_max {
            added += node(t) + node(-t);
            t += h;
        }
        h *= 0.5;
        total += added;
        let refined = h * total;
        let diff = (refined - estimate).abs();
        estimate = refined;
        if diff <= tol {
            return Ok(estimate);
        }
    }
    Err(Error::Numeric(format!(
        "quadrature did not reach tolerance {tol:.1e} at maximum refinement \
         (last estimate {estimate:.12e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mittag_leffler, resolvent_second_kind};

    #[test]
    fn zero_forcing_system_stays_at_origin() {
        let g = Grid::new(1.0, 100).unwrap();
        let sys = OdeSystem::new(0.0, -1.0, 0.3, 0.02);
        let sol = heston_ode_solve(&sys, &g);
        assert!(sol.w().iter().all(|&v| v == 0.0));
        assert!(sol.y().iter().all(|&v| v == 0.0));
        assert_eq!(sol.step_halving_error(), 0.0);
    }

    #[test]
    fn linear_system_matches_exponential_solution() {
        let g = Grid::new(1.0, 200).unwrap();
        let (c0, c1, fs) = (-0.25, -1.3, 0.07);
        let sys = OdeSystem::new(c0, c1, 0.0, fs);
        let sol = heston_ode_solve(&sys, &g);
        assert!(sol.step_halving_error() < 1e-9);
        for i in 0..g.len() {
            let t = g.node(i);
            let w = c0 * ((c1 * t).exp() - 1.0) / c1;
            let y = fs * c0 * (((c1 * t).exp() - 1.0) / c1 - t) / c1;
            assert!((sol.w()[i] - w).abs() < 1e-10, "w at node {i}");
            assert!((sol.y()[i] - y).abs() < 1e-10, "y at node {i}");
        }
    }

    #[test]
    fn long_horizon_settles_at_stable_root() {
        let g = Grid::new(30.0, 600).unwrap();
        let (c0, c1, c2) = (-1.0, -3.0, 0.4);
        let sys = OdeSystem::new(c0, c1, c2, 0.0);
        let sol = heston_ode_solve(&sys, &g);
        // the attracting root of c2 w^2 + c1 w + c0
        let root = (3.0 - (9.0 + 1.6f64).sqrt()) / 0.8;
        assert!((sol.w()[600] - root).abs() < 1e-8);
        assert!(sol.step_halving_error() < 1e-9);
    }

    #[test]
    fn relaxation_fixed_point_is_flat() {
        let g = Grid::new(2.0, 300).unwrap();
        let k = KernelSpec::fractional(1.0, 0.7).unwrap();
        let v = deterministic_volterra(0.3, 1.1, 0.3, &k, &g);
        assert!(v.iter().all(|&x| (x - 0.3).abs() < 1e-14));
    }

    #[test]
    fn relaxation_flat_kernel_is_plain_exponential() {
        let g = Grid::new(1.0, 2000).unwrap();
        let k = KernelSpec::constant(1.0).unwrap();
        let (v0, kappa, phi) = (0.5, 2.0, 0.04);
        let v = deterministic_volterra(v0, kappa, phi, &k, &g);
        for i in (0..=2000).step_by(250) {
            let want = phi + (v0 - phi) * (-kappa * g.node(i)).exp();
            assert!((v[i] - want).abs() < 1e-6, "node {i}: {} vs {want}", v[i]);
        }
    }

    #[test]
    fn relaxation_singular_kernel_follows_mittag_leffler() {
        let g = Grid::new(1.0, 2000).unwrap();
        let alpha = 0.6;
        let k = KernelSpec::fractional(1.0, alpha).unwrap();
        let (v0, kappa, phi) = (0.5, 2.0, 0.04);
        let v = deterministic_volterra(v0, kappa, phi, &k, &g);
        for i in [250usize, 1000, 2000] {
            let t = g.node(i);
            let relax = mittag_leffler(alpha, 1.0, -kappa * t.powf(alpha)).unwrap();
            let want = phi + (v0 - phi) * relax;
            assert!((v[i] - want).abs() < 1e-5, "node {i}: {} vs {want}", v[i]);
        }
    }

    #[test]
    fn quadrature_handles_flat_singular_and_resolvent_integrands() {
        let one = brute_quadrature(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let singular = brute_quadrature(|t| t.powf(-0.4), 0.0, 1.0, 1e-10).unwrap();
        assert!((singular - 1.0 / 0.6).abs() < 1e-9, "got {singular}");
        let g = Grid::new(1.0, 10).unwrap();
        let k = KernelSpec::constant(1.0).unwrap();
        let r = resolvent_second_kind(&k, 0.29, &g).unwrap();
        let direct = brute_quadrature(|t| r.eval(t).unwrap(), 0.0, 1.0, 1e-12).unwrap();
        assert!((direct - r.cumulative(1.0).unwrap()).abs() < 1e-10);
        assert!((direct - (1.0 - (-0.29f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn quadrature_reports_unreachable_tolerance() {
        assert!(matches!(
            brute_quadrature(|t| (1.0e6 * t).sin(), 0.0, 1.0, 1e-12),
            Err(Error::Numeric(_))
        ));
        assert!(brute_quadrature(|_| 1.0, 0.0, 1.0, -1.0).is_err());
        assert_eq!(brute_quadrature(|_| 1.0, 0.3, 0.3, 1e-9).unwrap(), 0.0);
    }
}
