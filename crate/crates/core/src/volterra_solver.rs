//! Marching solver for scalar quadratic Volterra integral equations
//! f = K * (c0 + c1 f + c2 f^2), plus the barrier curves that certify
//! global existence of the two production instances.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{special, KernelSpec};
use crate::portfolio::ModelParams;

/// Quadratic right-hand side F(f) = c0 + c1 f + c2 f^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiRHS {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl RiccatiRHS {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        RiccatiRHS { c0, c1, c2 }
    }

    /// Coefficients of the strategy equation: the solved curve scales the
    /// hedging demand. c0 = -theta^2, c1 = -lambda, c2 = (1-2rho^2)sigma^2/2.
    pub fn strategy(params: &ModelParams) -> Self {
        RiccatiRHS {
            c0: -params.theta * params.theta,
            c1: -params.lambda(),
            c2: 0.5 * params.correlation_weight() * params.sigma * params.sigma,
        }
    }

    /// Coefficients of the exponential-moment equation at level `a`:
    /// c0 = a, c1 = -kappa, c2 = sigma^2/2.
    pub fn moment(a: f64, params: &ModelParams) -> Self {
        RiccatiRHS {
            c0: a,
            c1: -params.kappa,
            c2: 0.5 * params.sigma * params.sigma,
        }
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.c0 + (self.c1 + self.c2 * f) * f
    }
}

/// Which global-existence regime the strategy equation falls into, decided
/// by the sign of 1 - 2 rho^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiCase {
    /// 1 - 2 rho^2 > 0: unique global solution, strictly negative for t > 0.
    StrictlyNegative,
    /// 1 - 2 rho^2 = 0: the equation is linear.
    Linear,
    /// 1 - 2 rho^2 < 0 with lambda > 0 and positive discriminant: unique
    /// global solution squeezed between the case-3 barrier and zero.
    BoundedBelow,
    /// No sufficient condition applies; the solve proceeds on the blow-up
    /// guard alone.
    Unguaranteed,
}

/// Knobs of the predictor-corrector march.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Corrector applications per step. One matches standard practice;
    /// more sweeps shrink the fixed-point residual geometrically.
    pub sweeps: usize,
    /// |f| beyond this aborts with the blow-up time (accurate to one step).
    pub blow_up_threshold: f64,
    /// Residual level under which the solution reports converged.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            sweeps: 1,
            blow_up_threshold: 1e8,
            tolerance: 1e-6,
        }
    }
}

/// Solved curve of a quadratic Volterra equation on a uniform grid.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    grid: Grid,
    values: Vec<f64>,
    rhs_values: Vec<f64>,
    kernel: KernelSpec,
    converged: bool,
    max_residual: f64,
    psi_case: Option<PsiCase>,
}

impl RiccatiSolution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// F(f) at every node, cached from the march.
    pub fn rhs_values(&self) -> &[f64] {
        &self.rhs_values
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// max over nodes of |f - K*F(f)|, the product-trapezoidal residual.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// The existence regime recorded by the strategy solve; absent for
    /// direct and moment solves.
    pub fn psi_case(&self) -> Option<PsiCase> {
        self.psi_case
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.index_of(t)?])
    }
}

/// March f = K * F(f) with a product-rectangle predictor and
/// product-trapezoidal corrector sweeps. f(0) = 0 always.
pub fn solve_riccati(rhs: &RiccatiRHS, kernel: &KernelSpec, grid: &Grid) -> Result<RiccatiSolution> {
    solve_riccati_with(rhs, kernel, grid, SolverOptions::default())
}

pub fn solve_riccati_with(
    rhs: &RiccatiRHS,
    kernel: &KernelSpec,
    grid: &Grid,
    options: SolverOptions,
) -> Result<RiccatiSolution> {
    if options.sweeps == 0 {
        return Err(Error::InvalidParameter(
            "corrector needs at least one sweep".into(),
        ));
    }
    let n_nodes = grid.len();
    let weights = kernel.lag_weights(grid.h(), grid.n_steps());

    let mut f = Vec::with_capacity(n_nodes);
    let mut rhs_vals = Vec::with_capacity(n_nodes);
    f.push(0.0);
    rhs_vals.push(rhs.eval(0.0));
    for n in 1..n_nodes {
        let mut fnew = weights.predict_at(&rhs_vals, n);
        rhs_vals.push(rhs.eval(fnew));
        for _ in 0..options.sweeps {
            fnew = weights.convolve_at(&rhs_vals, n);
            rhs_vals[n] = rhs.eval(fnew);
        }
        if fnew.is_nan() {
            return Err(Error::Numeric(format!(
                "marching produced a non-finite value at t = {}",
                grid.node(n)
            )));
        }
        if fnew.abs() > options.blow_up_threshold {
            return Err(Error::Explosion {
                time: grid.node(n),
                threshold: options.blow_up_threshold,
            });
        }
        if !rhs_vals[n].is_finite() {
            return Err(Error::Numeric(format!(
                "right-hand side overflowed at t = {}",
                grid.node(n)
            )));
        }
        f.push(fnew);
    }

    let conv = crate::kernels::convolve(kernel, &rhs_vals, grid)?;
    let max_residual = f
        .iter()
        .zip(&conv)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(RiccatiSolution {
        grid: *grid,
        values: f,
        rhs_values: rhs_vals,
        kernel: *kernel,
        converged: max_residual <= options.tolerance,
        max_residual,
        psi_case: None,
    })
}

/// Classify the strategy equation's existence regime from the parameters.
pub fn classify_psi_case(params: &ModelParams) -> PsiCase {
    let cw = params.correlation_weight();
    if cw > 0.0 {
        PsiCase::StrictlyNegative
    } else if cw == 0.0 {
        PsiCase::Linear
    } else {
        let lambda = params.lambda();
        let disc = lambda * lambda
            + 2.0 * cw * params.theta * params.theta * params.sigma * params.sigma;
        if lambda > 0.0 && disc > 0.0 {
            PsiCase::BoundedBelow
        } else {
            PsiCase::Unguaranteed
        }
    }
}

/// Solve the strategy equation on [0, T] and record the existence regime.
pub fn solve_psi(params: &ModelParams, kernel: &KernelSpec, grid: &Grid) -> Result<RiccatiSolution> {
    solve_psi_with(params, kernel, grid, SolverOptions::default())
}

pub fn solve_psi_with(
    params: &ModelParams,
    kernel: &KernelSpec,
    grid: &Grid,
    options: SolverOptions,
) -> Result<RiccatiSolution> {
    params.validate()?;
    let rhs = RiccatiRHS::strategy(params);
    let mut sol = solve_riccati_with(&rhs, kernel, grid, options)?;
    sol.psi_case = Some(classify_psi_case(params));
    Ok(sol)
}

/// Solve the exponential-moment equation at level `a` on [0, T].
/// A blow-up error here signals an infinite exponential moment.
pub fn solve_g(
    a: f64,
    params: &ModelParams,
    kernel: &KernelSpec,
    grid: &Grid,
) -> Result<RiccatiSolution> {
    solve_g_with(a, params, kernel, grid, SolverOptions::default())
}

pub fn solve_g_with(
    a: f64,
    params: &ModelParams,
    kernel: &KernelSpec,
    grid: &Grid,
    options: SolverOptions,
) -> Result<RiccatiSolution> {
    params.validate()?;
    if !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "moment level must be finite, got {a}"
        )));
    }
    let rhs = RiccatiRHS::moment(a, params);
    solve_riccati_with(&rhs, kernel, grid, options)
}

/// Which barrier curves apply for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplicableCase {
    Neither,
    /// Moment-equation barrier (positive quadratic discriminant, a >= 0).
    MomentBound,
    /// Strategy-equation case-3 barrier (1 - 2 rho^2 < 0 regime).
    StrategyCaseThree,
    Both,
}

/// One-sided barrier from a positive quadratic H with H(0) = C > 0:
/// the solution stays below r(t), the inverse of w -> int_0^w du/H(u)
/// evaluated at int_0^t K. Partial fractions give the inverse in closed
/// form, so no quadrature or bisection enters the returned curve.
#[derive(Debug, Clone, Copy)]
struct QuadraticBarrier {
    /// smaller root of H, the asymptotic barrier level
    root_low: f64,
    /// larger root of H
    root_high: f64,
    sqrt_disc: f64,
}

impl QuadraticBarrier {
    /// Build from H(u) = (sigma^2/2) u^2 + b u + c with b < 0 <= c and
    /// positive discriminant.
    fn new(sigma: f64, b: f64, c: f64) -> Option<Self> {
        let a2 = 0.5 * sigma * sigma;
        let disc = b * b - 4.0 * a2 * c;
        if !(disc > 0.0) || c < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // stable small root via the conjugate form; -b > 0 here
        let root_low = 2.0 * c / (-b + sq);
        let root_high = (-b + sq) / (2.0 * a2);
        Some(QuadraticBarrier {
            root_low,
            root_high,
            sqrt_disc: sq,
        })
    }

    /// Barrier value at mass m = int_0^t K(s) ds.
    fn at_mass(&self, m: f64) -> f64 {
        let (u1, u2) = (self.root_low, self.root_high);
        let grow = (self.sqrt_disc * m).exp();
        if grow.is_infinite() {
            return u1;
        }
        u1 * u2 * (grow - 1.0) / (grow * u2 - u1)
    }
}

/// Barrier curves certifying the a-priori bounds of the two production
/// equations, where their preconditions hold.
#[derive(Debug, Clone)]
pub struct LemmaBounds {
    kernel: KernelSpec,
    moment_side: Option<QuadraticBarrier>,
    strategy_side: Option<QuadraticBarrier>,
    correlation_weight: f64,
    applicable_case: ApplicableCase,
}

impl LemmaBounds {
    pub fn applicable_case(&self) -> ApplicableCase {
        self.applicable_case
    }

    /// Asymptotic ceiling of the moment solution: the smaller root of
    /// a - kappa u + sigma^2 u^2 / 2.
    pub fn w_star(&self) -> Option<f64> {
        self.moment_side.map(|b| b.root_low)
    }

    /// Moment barrier r2(t): the solution satisfies 0 < g <= r2 < w_star
    /// for t > 0.
    pub fn r2(&self, t: f64) -> Option<f64> {
        debug_assert!(t >= 0.0);
        self.moment_side
            .map(|b| b.at_mass(self.kernel.antiderivative(t)))
    }

    /// Asymptotic ceiling of the transformed strategy solution.
    pub fn wbar_star(&self) -> Option<f64> {
        self.strategy_side.map(|b| b.root_low)
    }

    /// Case-3 barrier for the transformed strategy solution.
    pub fn rbar2(&self, t: f64) -> Option<f64> {
        debug_assert!(t >= 0.0);
        self.strategy_side
            .map(|b| b.at_mass(self.kernel.antiderivative(t)))
    }

    /// Lower bound on the strategy solution itself in case 3:
    /// rbar2(t)/(1-2rho^2) <= psi(t) < 0.
    pub fn psi_lower(&self, t: f64) -> Option<f64> {
        self.rbar2(t).map(|r| r / self.correlation_weight)
    }
}

/// Assemble whichever barrier curves the parameters admit. The moment side
/// needs kappa^2 - 2 a sigma^2 > 0 and a >= 0; the strategy side needs the
/// case-3 preconditions (1 - 2 rho^2 < 0, lambda > 0, positive
/// discriminant).
pub fn lemma_bounds(kernel: &KernelSpec, params: &ModelParams, a: f64) -> Result<LemmaBounds> {
    params.validate()?;
    let moment_side = if a >= 0.0 {
        QuadraticBarrier::new(params.sigma, -params.kappa, a)
    } else {
        None
    };
    let cw = params.correlation_weight();
    let lambda = params.lambda();
    let strategy_side = if cw < 0.0 && lambda > 0.0 {
        QuadraticBarrier::new(params.sigma, -lambda, -cw * params.theta * params.theta)
    } else {
        None
    };
    let applicable_case = match (moment_side.is_some(), strategy_side.is_some()) {
        (true, true) => ApplicableCase::Both,
        (true, false) => ApplicableCase::MomentBound,
        (false, true) => ApplicableCase::StrategyCaseThree,
        (false, false) => ApplicableCase::Neither,
    };
    Ok(LemmaBounds {
        kernel: *kernel,
        moment_side,
        strategy_side,
        correlation_weight: cw,
        applicable_case,
    })
}

/// Moment level below which the fractional kernel keeps the exponential
/// moment finite on [0, t]: a0(t) = (kappa + t^{-alpha}/Gamma(1-alpha))^2
/// / (2 sigma^2). At alpha = 1 this collapses to the quadratic-root
/// threshold kappa^2/(2 sigma^2).
pub fn fractional_moment_threshold(params: &ModelParams, alpha: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "moment threshold needs t > 0, got {t}"
        )));
    }
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "roughness exponent must lie in (1/2, 1], got {alpha}"
        )));
    }
    let edge = params.kappa + t.powf(-alpha) * special::recip_gamma(1.0 - alpha);
    Ok(edge * edge / (2.0 * params.sigma * params.sigma))
}

/// Empirical convergence order of the march under grid refinement.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// Mean of log2 error ratios between successive levels; infinite when
    /// every level is exact.
    pub order: f64,
    /// Max-node error of each level against the reference grid.
    pub errors: Vec<f64>,
    pub grid_steps: Vec<usize>,
    /// Whether refinement never increased the error by more than 5%.
    pub monotone: bool,
}

/// Solve on grids base, 2*base, ..., base*2^{levels-1} and compare against
/// a base*2^levels reference on the shared nodes.
pub fn convergence_order(
    rhs: &RiccatiRHS,
    kernel: &KernelSpec,
    t_max: f64,
    base_steps: usize,
    levels: usize,
    options: SolverOptions,
) -> Result<OrderEstimate> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "order estimate needs at least 3 refinement levels, got {levels}"
        )));
    }
    let fine_steps = base_steps << levels;
    let fine_grid = Grid::new(t_max, fine_steps)?;
    let reference = solve_riccati_with(rhs, kernel, &fine_grid, options)?;
    let mut errors = Vec::with_capacity(levels);
    let mut grid_steps = Vec::with_capacity(levels);
    for level in 0..levels {
        let steps = base_steps << level;
        let grid = Grid::new(t_max, steps)?;
        let sol = solve_riccati_with(rhs, kernel, &grid, options)?;
        let stride = 1 << (levels - level);
        let err = (0..grid.len())
            .map(|i| (sol.value(i) - reference.value(i * stride)).abs())
            .fold(0.0, f64::max);
        errors.push(err);
        grid_steps.push(steps);
    }
    let mut ratios = Vec::new();
    for w in errors.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            ratios.push((w[0] / w[1]).log2());
        }
    }
    let order = if ratios.is_empty() {
        f64::INFINITY
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] * 1.05);
    Ok(OrderEstimate {
        order,
        errors,
        grid_steps,
        monotone,
    })
}

/// Uniform draw helper for the randomized suites.
pub fn draw_params<R: Rng>(rng: &mut R, rho_range: (f64, f64)) -> ModelParams {
    use crate::portfolio::RateCurve;
    ModelParams {
        v0: rng.random_range(0.01..0.5),
        kappa: rng.random_range(0.1..2.5),
        phi: rng.random_range(0.01..0.5),
        sigma: rng.random_range(0.05..0.6),
        rho: rng.random_range(rho_range.0..rho_range.1),
        theta: rng.random_range(0.1..1.2),
        rate: RateCurve::Constant(0.02),
        horizon: 1.0,
        x0: 1.0,
        c: 1.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn grid(t_max: f64, n: usize) -> Grid {
        Grid::new(t_max, n).unwrap()
    }

    fn catalog() -> [KernelSpec; 3] {
        [
            KernelSpec::constant(1.0).unwrap(),
            KernelSpec::fractional(1.0, 0.6).unwrap(),
            KernelSpec::exponential(1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn zero_forcing_fixes_zero() {
        let g = grid(1.0, 64);
        let rhs = RiccatiRHS::new(0.0, -1.3, 0.4);
        for k in catalog() {
            let sol = solve_riccati(&rhs, &k, &g).unwrap();
            assert!(sol.values().iter().all(|&v| v == 0.0));
            assert_eq!(sol.max_residual(), 0.0);
            assert!(sol.converged());
        }
    }

    #[test]
    fn constant_kernel_linear_rhs_closed_form() {
        // f' = c0 + c1 f, f(0) = 0 has solution c0 (e^{c1 t} - 1)/c1
        let g = grid(1.0, 2000);
        let (c0, c1) = (1.0, -2.0);
        let rhs = RiccatiRHS::new(c0, c1, 0.0);
        let k = KernelSpec::constant(1.0).unwrap();
        let sol = solve_riccati(&rhs, &k, &g).unwrap();
        let worst = (0..g.len())
            .map(|i| {
                let t = g.node(i);
                (sol.value(i) - c0 * ((c1 * t).exp() - 1.0) / c1).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "closed-form gap {worst:.3e}");
        assert!(sol.converged());
    }

    #[test]
    fn fractional_linear_rhs_closed_form() {
        // f = I^a(c0 + c1 f) has solution c0 t^a E_{a,1+a}(c1 t^a);
        // at t = 1 with a = 0.6, c0 = -1/4, c1 = -1 the reference value is
        // -0.25 * 0.5866726590568937
        let g = grid(1.0, 2000);
        let rhs = RiccatiRHS::new(-0.25, -1.0, 0.0);
        let k = KernelSpec::fractional(1.0, 0.6).unwrap();
        let sol = solve_riccati(&rhs, &k, &g).unwrap();
        let want = -0.146_668_164_764_223_43;
        assert!(
            (sol.value(2000) - want).abs() < 2e-6,
            "terminal value {:.12e} vs {want:.12e}",
            sol.value(2000)
        );
    }

    #[test]
    fn explosion_reports_time_within_a_step() {
        // constant kernel, H(f) = 5 - 0.1 f + f^2/2 has no real root, so
        // the solution blows up near t = 1.01
        let g = grid(2.0, 4000);
        let rhs = RiccatiRHS::new(5.0, -0.1, 0.5);
        let k = KernelSpec::constant(1.0).unwrap();
        match solve_riccati(&rhs, &k, &g) {
            Err(Error::Explosion { time, threshold }) => {
                assert!(time > 0.9 && time < 1.15, "blow-up time {time}");
                assert_eq!(threshold, 1e8);
            }
            other => panic!("expected explosion, got {other:?}"),
        }
        // the same dynamics stay finite on a shorter horizon
        let sol = solve_riccati(&rhs, &k, &grid(0.9, 1800)).unwrap();
        assert!(sol.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn strategy_solution_negative_in_case_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let g = grid(1.0, 400);
        for _ in 0..12 {
            // |rho| < 1/sqrt(2) keeps 1 - 2 rho^2 > 0
            let params = draw_params(&mut rng, (-0.7, 0.7));
            assert_eq!(classify_psi_case(&params), PsiCase::StrictlyNegative);
            for k in catalog() {
                let sol = solve_psi(&params, &k, &g).unwrap();
                assert_eq!(sol.psi_case(), Some(PsiCase::StrictlyNegative));
                assert!(
                    sol.values()[1..].iter().all(|&v| v < 0.0),
                    "strategy curve not negative for {params:?} {k:?}"
                );
            }
        }
    }

    #[test]
    fn case_three_bound_squeezes_solution() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let g = grid(1.0, 400);
        let mut seen = 0;
        while seen < 8 {
            let params = draw_params(&mut rng, (0.75, 0.99));
            if classify_psi_case(&params) != PsiCase::BoundedBelow {
                continue;
            }
            seen += 1;
            let k = KernelSpec::fractional(1.0, 0.7).unwrap();
            let sol = solve_psi(&params, &k, &g).unwrap();
            let bounds = lemma_bounds(&k, &params, 0.0).unwrap();
            assert!(matches!(
                bounds.applicable_case(),
                ApplicableCase::StrategyCaseThree | ApplicableCase::Both
            ));
            for i in 1..g.len() {
                let t = g.node(i);
                let lower = bounds.psi_lower(t).unwrap();
                let v = sol.value(i);
                assert!(
                    lower - 1e-8 <= v && v < 0.0,
                    "case-3 squeeze fails at t = {t}: {lower} <= {v} < 0"
                );
            }
        }
    }

    #[test]
    fn moment_bounds_hold_for_admissible_levels() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let g = grid(1.0, 500);
        let mut seen = 0;
        while seen < 10 {
            let params = draw_params(&mut rng, (-0.9, 0.9));
            let a_max = params.kappa * params.kappa / (2.0 * params.sigma * params.sigma);
            let a = rng.random_range(0.0..1.0) * 0.9 * a_max;
            if a <= 0.0 {
                continue;
            }
            seen += 1;
            for k in catalog() {
                let sol = solve_g(a, &params, &k, &g).unwrap();
                let bounds = lemma_bounds(&k, &params, a).unwrap();
                let w_star = bounds.w_star().unwrap();
                for i in 1..g.len() {
                    let t = g.node(i);
                    let r2 = bounds.r2(t).unwrap();
                    let v = sol.value(i);
                    // for the flat kernel the barrier IS the solution, so
                    // the comparison carries the solver's own error
                    assert!(
                        v > 0.0 && v <= r2 + 1e-7 && r2 < w_star,
                        "moment bound fails for {k:?} at t = {t}: 0 < {v} <= {r2} < {w_star}"
                    );
                }
            }
        }
    }

    #[test]
    fn barrier_formula_matches_numeric_inversion() {
        // independent route: integrate 1/H by Simpson, invert by bisection
        let params = ModelParams {
            sigma: 0.3,
            kappa: 0.5,
            ..draw_params(&mut ChaCha12Rng::seed_from_u64(1), (-0.5, 0.5))
        };
        let a = 0.8;
        let k = KernelSpec::fractional(1.0, 0.6).unwrap();
        let bounds = lemma_bounds(&k, &params, a).unwrap();
        let w_star = bounds.w_star().unwrap();
        assert!((w_star - 1.938_039_867_533_398_6).abs() < 1e-13);
        let h_of = |u: f64| a - params.kappa * u + 0.5 * params.sigma * params.sigma * u * u;
        let q2 = |w: f64| {
            let n = 20_000;
            let step = w / n as f64;
            let mut acc = 1.0 / h_of(0.0) + 1.0 / h_of(w);
            for i in 1..n {
                let u = i as f64 * step;
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } / h_of(u);
            }
            acc * step / 3.0
        };
        for t in [0.3, 1.0] {
            let r2 = bounds.r2(t).unwrap();
            let mass = k.antiderivative(t);
            assert!(
                (q2(r2) - mass).abs() < 1e-9,
                "inverse check at t = {t}: Q2(r2) = {} vs {mass}",
                q2(r2)
            );
        }
        assert!((bounds.r2(1.0).unwrap() - 0.693_613_801_350_215_2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_moment_level_collapses_barrier() {
        let params = draw_params(&mut ChaCha12Rng::seed_from_u64(3), (-0.5, 0.5));
        let k = KernelSpec::constant(1.0).unwrap();
        let bounds = lemma_bounds(&k, &params, 0.0).unwrap();
        assert_eq!(bounds.w_star(), Some(0.0));
        assert_eq!(bounds.r2(0.7), Some(0.0));
        // negative levels leave the moment side inapplicable
        let none = lemma_bounds(&k, &params, -1.0).unwrap();
        assert!(none.w_star().is_none());
    }

    #[test]
    fn fractional_threshold_interpolates_to_quadratic_rule() {
        let params = draw_params(&mut ChaCha12Rng::seed_from_u64(5), (-0.5, 0.5));
        let at_one = fractional_moment_threshold(&params, 1.0, 1.0).unwrap();
        let quad_rule = params.kappa * params.kappa / (2.0 * params.sigma * params.sigma);
        assert!((at_one - quad_rule).abs() < 1e-14);
        // rougher kernels certify strictly larger levels
        let rough = fractional_moment_threshold(&params, 0.6, 1.0).unwrap();
        assert!(rough > at_one);
        assert!(fractional_moment_threshold(&params, 0.6, 0.0).is_err());
        assert!(fractional_moment_threshold(&params, 0.3, 1.0).is_err());
    }

    #[test]
    fn refinement_orders_match_scheme_theory() {
        let rhs = RiccatiRHS::new(-0.25, -1.0, 0.045);
        let opts = SolverOptions {
            sweeps: 3,
            ..SolverOptions::default()
        };
        let k = KernelSpec::constant(1.0).unwrap();
        let est = convergence_order(&rhs, &k, 1.0, 125, 3, opts).unwrap();
        assert!(
            (est.order - 2.0).abs() < 0.3,
            "flat-kernel order {:.3}",
            est.order
        );
        assert!(est.monotone);
        let k = KernelSpec::fractional(1.0, 0.6).unwrap();
        let est = convergence_order(&rhs, &k, 1.0, 125, 3, opts).unwrap();
        assert!(est.order >= 1.0, "singular-kernel order {:.3}", est.order);
        assert!(est.monotone);
        // the zero solution is exact at every level
        let est =
            convergence_order(&RiccatiRHS::new(0.0, -1.0, 0.5), &k, 1.0, 125, 3, opts).unwrap();
        assert!(est.order.is_infinite());
        assert!(convergence_order(&rhs, &k, 1.0, 125, 2, opts).is_err());
    }

    #[test]
    fn residual_reflects_sweep_count() {
        // more corrector sweeps drive the fixed-point residual down
        let params = ModelParams {
            theta: 5.0,
            sigma: 0.03,
            kappa: 0.1,
            rho: -0.7,
            ..draw_params(&mut ChaCha12Rng::seed_from_u64(9), (-0.5, 0.5))
        };
        let g = grid(1.0, 2000);
        let k = KernelSpec::fractional(1.0, 0.6).unwrap();
        let one = solve_psi(&params, &k, &g).unwrap();
        let three = solve_psi_with(
            &params,
            &k,
            &g,
            SolverOptions {
                sweeps: 3,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        assert!(three.max_residual() < one.max_residual());
        assert!(three.max_residual() < 1e-6);
        assert!(three.converged());
    }

    #[test]
    fn solve_psi_validates_and_classifies() {
        let mut params = draw_params(&mut ChaCha12Rng::seed_from_u64(21), (-0.5, 0.5));
        params.theta = 0.0;
        let g = grid(1.0, 50);
        let k = KernelSpec::constant(1.0).unwrap();
        assert!(solve_psi(&params, &k, &g).is_err());
        // an unguaranteed regime still solves under the guard
        let mut params = draw_params(&mut ChaCha12Rng::seed_from_u64(23), (0.8, 0.9));
        params.theta = -1.0;
        params.kappa = 0.05;
        params.sigma = 0.5;
        if classify_psi_case(&params) == PsiCase::Unguaranteed {
            let sol = solve_psi(&params, &k, &g).unwrap();
            assert_eq!(sol.psi_case(), Some(PsiCase::Unguaranteed));
        }
    }
}
