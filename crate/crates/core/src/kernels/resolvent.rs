//! Resolvents of the second and first kind for the kernel catalog.
//!
//! The second-kind resolvent R of the scaled kernel lambda*K solves
//! lambda (K * R) = lambda K - R; the first-kind resolvent L is the measure
//! with K * L identically 1. Both have closed forms for every catalog
//! kernel, and the identity-residual functions here verify those closed
//! forms by independent quadrature.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::conv::CellMeasure;
use crate::kernels::{mittag_leffler, special, KernelSpec};
use rayon::prelude::*;

/// Whether a resolvent curve came from a catalog closed form or from the
/// numerical marching fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventForm {
    ClosedForm,
    Numeric,
}

/// Second-kind resolvent of lambda*K sampled on a uniform grid.
///
/// For the fractional kernel with alpha < 1 the resolvent is singular at
/// lag zero; `values[0]` then holds the signed infinity of the limit, and
/// pointwise evaluation at 0 is a domain error. Everything downstream works
/// through the cumulative integral, which is finite.
#[derive(Debug, Clone)]
pub struct ResolventCurve {
    grid: Grid,
    lambda: f64,
    form: ResolventForm,
    values: Vec<f64>,
    /// Present for closed-form curves; carries the kernel whose scaled
    /// resolvent this is, enabling exact cumulative integrals.
    kernel: Option<KernelSpec>,
}

impl ResolventCurve {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn form(&self) -> ResolventForm {
        self.form
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        self.kernel.as_ref()
    }

    /// R(t) at an arbitrary lag (closed-form curves) or at a grid node
    /// (numeric curves).
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self.form {
            ResolventForm::ClosedForm => {
                let spec = self.kernel.as_ref().expect("closed form implies kernel");
                closed_value(spec, self.lambda, t)
            }
            ResolventForm::Numeric => Ok(self.values[self.grid.index_of(t)?]),
        }
    }

    /// Cumulative integral of R over [0, s]. Finite for every catalog
    /// kernel, including the singular fractional one.
    pub fn cumulative(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!(
                "cumulative resolvent needs s >= 0, got {s}"
            )));
        }
        match self.form {
            ResolventForm::ClosedForm => {
                let spec = self.kernel.as_ref().expect("closed form implies kernel");
                closed_cumulative(spec, self.lambda, s)
            }
            ResolventForm::Numeric => {
                // bounded sampled kernels only, so plain trapezoid applies
                let n = self.grid.index_of(s)?;
                let h = self.grid.h();
                let mut acc = 0.0;
                for j in 1..=n {
                    acc += 0.5 * h * (self.values[j - 1] + self.values[j]);
                }
                Ok(acc)
            }
        }
    }

    /// R(t)/lambda, with the lambda = 0 convention R/lambda := K.
    pub fn over_lambda_eval(&self, t: f64) -> Result<f64> {
        if self.lambda != 0.0 {
            return Ok(self.eval(t)? / self.lambda);
        }
        match &self.kernel {
            Some(spec) => spec.eval(t),
            None => Err(Error::InvalidParameter(
                "lambda = 0 needs the kernel to interpret R/lambda".into(),
            )),
        }
    }

    /// int_0^s R/lambda, with the lambda = 0 convention R/lambda := K.
    pub fn over_lambda_cumulative(&self, s: f64) -> Result<f64> {
        if self.lambda != 0.0 {
            return Ok(self.cumulative(s)? / self.lambda);
        }
        match &self.kernel {
            Some(spec) => Ok(spec.antiderivative(s)),
            None => Err(Error::InvalidParameter(
                "lambda = 0 needs the kernel to interpret R/lambda".into(),
            )),
        }
    }
}

impl CellMeasure for ResolventCurve {
    fn cell_mass(&self, h: f64, m: usize) -> f64 {
        let t = m as f64 * h;
        match (self.cumulative(t), self.cumulative(t - h)) {
            (Ok(hi), Ok(lo)) => hi - lo,
            _ => f64::NAN,
        }
    }

    fn cell_ramp(&self, h: f64, m: usize) -> f64 {
        // mass-weighted trapezoid: the in-cell ramp is taken at its mean;
        // exact ramp moments of R have no closed form
        0.5 * self.cell_mass(h, m)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::GridMismatch(
                "resolvent curve used on a different grid than it was built on".into(),
            ));
        }
        Ok(())
    }
}

/// R(t) of lambda*K by catalog closed form. Fractional alpha < 1 rejects
/// t <= 0 (the singular lag); bounded kinds reject negative lags.
fn closed_value(spec: &KernelSpec, lambda: f64, t: f64) -> Result<f64> {
    if lambda == 0.0 {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("resolvent lag must be >= 0, got {t}")));
        }
        return Ok(0.0);
    }
    match *spec {
        KernelSpec::Constant { c } => {
            if !(t >= 0.0) {
                return Err(Error::Domain(format!("resolvent lag must be >= 0, got {t}")));
            }
            Ok(lambda * c * (-lambda * c * t).exp())
        }
        KernelSpec::Fractional { c, alpha } => {
            if !(t > 0.0) {
                return Err(Error::Domain(format!(
                    "fractional resolvent needs t > 0, got {t}"
                )));
            }
            let lc = lambda * c;
            let e = mittag_leffler(alpha, alpha, -lc * t.powf(alpha))?;
            Ok(lc * t.powf(alpha - 1.0) * e)
        }
        KernelSpec::Exponential { c, beta } => {
            if !(t >= 0.0) {
                return Err(Error::Domain(format!("resolvent lag must be >= 0, got {t}")));
            }
            Ok(lambda * c * (-(beta + lambda * c) * t).exp())
        }
    }
}

/// int_0^s R of lambda*K by catalog closed form.
fn closed_cumulative(spec: &KernelSpec, lambda: f64, s: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    match *spec {
        KernelSpec::Constant { c } => Ok(-(-lambda * c * s).exp_m1()),
        KernelSpec::Fractional { c, alpha } => {
            if s == 0.0 {
                return Ok(0.0);
            }
            let e = mittag_leffler(alpha, 1.0, -lambda * c * s.powf(alpha))?;
            Ok(1.0 - e)
        }
        KernelSpec::Exponential { c, beta } => {
            let mu = beta + lambda * c;
            if mu == 0.0 {
                Ok(lambda * c * s)
            } else {
                Ok(lambda * c * (-(-mu * s).exp_m1()) / mu)
            }
        }
    }
}

/// Second-kind resolvent of lambda*K on `grid`, from the catalog closed
/// forms. lambda = 0 returns the zero curve.
pub fn resolvent_second_kind(
    spec: &KernelSpec,
    lambda: f64,
    grid: &Grid,
) -> Result<ResolventCurve> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "resolvent scaling must be finite, got {lambda}"
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    if lambda == 0.0 {
        values.resize(grid.len(), 0.0);
    } else {
        values.push(match *spec {
            KernelSpec::Fractional { alpha, .. } if alpha < 1.0 => {
                // the t -> 0 limit: the curve records the signed singularity
                f64::INFINITY * lambda.signum()
            }
            _ => lambda * spec.scale(),
        });
        for i in 1..grid.len() {
            values.push(closed_value(spec, lambda, grid.node(i))?);
        }
    }
    Ok(ResolventCurve {
        grid: *grid,
        lambda,
        form: ResolventForm::ClosedForm,
        values,
        kernel: Some(*spec),
    })
}

/// Numerical second-kind resolvent for a trusted bounded kernel given by
/// samples on `grid`, by product-trapezoidal marching on
/// R = lambda K - lambda K*R.
///
/// The samples must be finite (no singular kernels; the catalog covers
/// those in closed form). lambda = 0 returns the zero curve.
pub fn resolvent_second_kind_sampled(
    kernel_samples: &[f64],
    lambda: f64,
    grid: &Grid,
) -> Result<ResolventCurve> {
    if kernel_samples.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "kernel has {} samples on a grid of {} nodes",
            kernel_samples.len(),
            grid.len()
        )));
    }
    if kernel_samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "sampled resolvent needs a bounded kernel with finite samples".into(),
        ));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "resolvent scaling must be finite, got {lambda}"
        )));
    }
    let n_nodes = grid.len();
    let mut values = vec![0.0; n_nodes];
    if lambda != 0.0 {
        let h = grid.h();
        let k = kernel_samples;
        values[0] = lambda * k[0];
        // trapezoid in s of int_0^{t_n} K(t_n - s) R(s) ds, solved for the
        // newest sample each step
        let pivot = 1.0 + 0.5 * lambda * h * k[0];
        if pivot.abs() < 1e-12 {
            return Err(Error::Numeric(
                "resolvent marching pivot vanished; lambda h K(0)/2 is too close to -1".into(),
            ));
        }
        for n in 1..n_nodes {
            let mut conv = 0.5 * h * k[n] * values[0];
            for j in 1..n {
                conv += h * k[n - j] * values[j];
            }
            values[n] = (lambda * k[n] - lambda * conv) / pivot;
        }
    }
    Ok(ResolventCurve {
        grid: *grid,
        lambda,
        form: ResolventForm::Numeric,
        values,
        kernel: None,
    })
}

/// First-kind resolvent L of a catalog kernel: a point mass at zero plus an
/// absolutely continuous density, satisfying K * L identically 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstKindResolvent {
    atom: f64,
    density: FirstKindDensity,
}

/// Density part of the first-kind resolvent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstKindDensity {
    Zero,
    /// Constant rate, from the exponential kernel.
    Constant(f64),
    /// coeff * t^{exponent} with exponent in (-1, 0), from the fractional
    /// kernel.
    Power { coeff: f64, exponent: f64 },
}

impl FirstKindResolvent {
    /// Weight of the point mass at zero.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn density(&self) -> FirstKindDensity {
        self.density
    }

    /// Density value at t > 0.
    pub fn density_eval(&self, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        match self.density {
            FirstKindDensity::Zero => 0.0,
            FirstKindDensity::Constant(rate) => rate,
            FirstKindDensity::Power { coeff, exponent } => coeff * t.powf(exponent),
        }
    }

    /// int_0^s of the density (the atom is not included).
    pub fn density_cumulative(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match self.density {
            FirstKindDensity::Zero => 0.0,
            FirstKindDensity::Constant(rate) => rate * s,
            FirstKindDensity::Power { coeff, exponent } => {
                coeff * s.powf(exponent + 1.0) / (exponent + 1.0)
            }
        }
    }

    /// Second antiderivative of the density vanishing to first order at 0;
    /// pairs with [`Self::density_cumulative`] to build product weights.
    pub fn density_second_cumulative(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match self.density {
            FirstKindDensity::Zero => 0.0,
            FirstKindDensity::Constant(rate) => 0.5 * rate * s * s,
            FirstKindDensity::Power { coeff, exponent } => {
                coeff * s.powf(exponent + 2.0) / ((exponent + 1.0) * (exponent + 2.0))
            }
        }
    }
}

/// First-kind resolvent per catalog row: 1/c times the Dirac atom for the
/// bounded kernels (plus a beta/c rate for the exponential), and the
/// conjugate power density for the fractional kernel.
pub fn resolvent_first_kind(spec: &KernelSpec) -> FirstKindResolvent {
    match *spec {
        KernelSpec::Constant { c } => FirstKindResolvent {
            atom: 1.0 / c,
            density: FirstKindDensity::Zero,
        },
        KernelSpec::Fractional { c, alpha } => {
            if alpha == 1.0 {
                FirstKindResolvent {
                    atom: 1.0 / c,
                    density: FirstKindDensity::Zero,
                }
            } else {
                FirstKindResolvent {
                    atom: 0.0,
                    density: FirstKindDensity::Power {
                        coeff: special::recip_gamma(1.0 - alpha) / c,
                        exponent: -alpha,
                    },
                }
            }
        }
        KernelSpec::Exponential { c, beta } => FirstKindResolvent {
            atom: 1.0 / c,
            density: if beta == 0.0 {
                FirstKindDensity::Zero
            } else {
                FirstKindDensity::Constant(beta / c)
            },
        },
    }
}

/// Integral of `smooth` against the measure with the given cumulative on
/// [0, l], on a mesh graded toward the singular origin.
fn graded_against(
    cumulative: &dyn Fn(f64) -> f64,
    smooth: &dyn Fn(f64) -> f64,
    l: f64,
    n_cells: usize,
) -> f64 {
    const Q: f64 = 3.0;
    let mut acc = 0.0;
    let mut s_prev = 0.0;
    let mut c_prev = cumulative(0.0);
    for j in 1..=n_cells {
        let s = l * ((j as f64) / (n_cells as f64)).powf(Q);
        let c = cumulative(s);
        acc += (c - c_prev) * smooth(0.5 * (s_prev + s));
        s_prev = s;
        c_prev = c;
    }
    acc
}

/// Max over grid nodes t > 0 of |lambda (K*R)(t) - lambda K(t) + R(t)| for
/// a closed-form resolvent curve, with the convolution computed by an
/// independent two-sided graded quadrature (n_graded cells per side).
///
/// Each node splits the convolution at t/2: the lower half integrates the
/// R-measure (exact cumulative masses) against the there-smooth kernel, the
/// upper half integrates the kernel measure (exact antiderivative masses)
/// against the there-smooth resolvent. Both factors may be singular at
/// their own endpoint; neither singularity is ever point-sampled.
pub fn second_kind_identity_residual(curve: &ResolventCurve, n_graded: usize) -> Result<f64> {
    let spec = curve.kernel.ok_or_else(|| {
        Error::InvalidParameter("identity residual needs a closed-form catalog curve".into())
    })?;
    let lambda = curve.lambda;
    if lambda == 0.0 {
        // R is identically zero and both sides of the identity vanish
        return Ok(0.0);
    }
    let grid = curve.grid;
    let residuals: Result<Vec<f64>> = (1..grid.len())
        .into_par_iter()
        .map(|n| -> Result<f64> {
            let t = grid.node(n);
            let l = 0.5 * t;
            // inner evaluation failures become NaN and are caught below
            let cum_r = |s: f64| closed_cumulative(&spec, lambda, s).unwrap_or(f64::NAN);
            let k_at = |u: f64| spec.eval(u).unwrap_or(f64::NAN);
            let lower = graded_against(&cum_r, &|v| k_at(t - v), l, n_graded);
            let cum_k = |s: f64| spec.antiderivative(s);
            let r_at = |u: f64| closed_value(&spec, lambda, u).unwrap_or(f64::NAN);
            let upper = graded_against(&cum_k, &|w| r_at(t - w), l, n_graded);
            let conv = lower + upper;
            if !conv.is_finite() {
                return Err(Error::Numeric(format!(
                    "resolvent identity quadrature failed at t = {t}"
                )));
            }
            let residual = lambda * conv - lambda * spec.eval(t)? + closed_value(&spec, lambda, t)?;
            Ok(residual.abs())
        })
        .collect();
    Ok(residuals?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Max over the given times (each must be >= one grid step on the curve's
/// own scale) of |(K*L)(t) - 1| with the convolution computed by the same
/// two-sided graded quadrature as the second-kind check.
pub fn first_kind_identity_residual(
    spec: &KernelSpec,
    times: &[f64],
    n_graded: usize,
) -> Result<f64> {
    let l_res = resolvent_first_kind(spec);
    let mut worst = 0.0_f64;
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::Domain(format!(
                "first-kind identity needs t > 0, got {t}"
            )));
        }
        let half = 0.5 * t;
        // atom contributes K(t) directly
        let mut value = l_res.atom() * spec.eval(t)?;
        if l_res.density() != FirstKindDensity::Zero {
            let cum_rho = |s: f64| l_res.density_cumulative(s);
            let k_at = |u: f64| match spec.eval(u) {
                Ok(v) => v,
                Err(_) => f64::NAN,
            };
            let lower = graded_against(&cum_rho, &|v| k_at(t - v), half, n_graded);
            let cum_k = |s: f64| spec.antiderivative(s);
            let upper = graded_against(&cum_k, &|w| l_res.density_eval(t - w), half, n_graded);
            value += lower + upper;
        }
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "first-kind identity quadrature failed at t = {t}"
            )));
        }
        worst = worst.max((value - 1.0).abs());
    }
    Ok(worst)
}
