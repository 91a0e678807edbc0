//! Variance path generation.
//!
//! Both schemes use full truncation: drift and diffusion coefficients read
//! the clipped value max(V, 0), and stored paths are the clipped ones, so
//! every emitted node is nonnegative. Parameters are taken as given here;
//! validation happens upstream where the strategy is solved, which also
//! lets the noiseless sigma = 0 limit run for diagnostics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelSpec;
use crate::portfolio::ModelParams;

use super::{Scheme, SimConfig};

/// RNG for one path: a fixed-seed ChaCha stream indexed by path number.
/// Stream 0 is reserved for aggregate draws (bootstrap resampling).
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path as u64 + 1);
    rng
}

pub(crate) fn draw_increments(rng: &mut ChaCha12Rng, n_steps: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let root_h = h.sqrt();
    let mut dw1 = Vec::with_capacity(n_steps);
    let mut dw2 = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        dw1.push(root_h * z1);
        dw2.push(root_h * z2);
    }
    (dw1, dw2)
}

/// Exponential-sum approximation of a singular kernel: nodes and weights
/// from moment-matched geometric cells of the Laplace measure, plus the
/// relative L2 gap against the exact kernel measured on [h, T].
#[derive(Debug, Clone)]
pub struct LiftedApproximation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    l2_error: f64,
    flagged: bool,
}

impl LiftedApproximation {
    /// Mean-reversion speeds of the factors, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Relative L2 distance between the exponential sum and the kernel on
    /// [h, T].
    pub fn l2_error(&self) -> f64 {
        self.l2_error
    }

    /// True when the L2 gap exceeded the configured warning threshold.
    pub fn flagged(&self) -> bool {
        self.flagged
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * (-x * t).exp())
            .sum()
    }

    /// Build the approximation for the power kernel c t^(alpha-1)/Gamma(alpha).
    /// alpha = 1 degenerates to the single factor e^{0 t} with weight c,
    /// which reproduces the flat kernel exactly.
    pub fn build(
        c: f64,
        alpha: f64,
        n_factors: usize,
        first_edge: f64,
        spacing: f64,
        grid: &Grid,
        warn_threshold: f64,
    ) -> Result<Self> {
        if n_factors == 0 || !(first_edge > 0.0) || !(spacing > 1.0) {
            return Err(Error::InvalidParameter(
                "lifted approximation needs factors >= 1, a positive first edge, \
                 and spacing > 1"
                    .into(),
            ));
        }
        if alpha == 1.0 {
            return Ok(LiftedApproximation {
                nodes: vec![0.0],
                weights: vec![c],
                l2_error: 0.0,
                flagged: false,
            });
        }
        // Laplace density of the power kernel: x^{-alpha} sin(pi alpha)/pi.
        // Each geometric cell [b_{i-1}, b_i] contributes its total mass as
        // the weight and its mass-weighted mean as the node.
        let density_scale = c * (PI * alpha).sin() / PI;
        let mut nodes = Vec::with_capacity(n_factors);
        let mut weights = Vec::with_capacity(n_factors);
        let mut lo = 0.0f64;
        let mut hi = first_edge;
        for _ in 0..n_factors {
            let mass = (hi.powf(1.0 - alpha) - lo.powf(1.0 - alpha)) / (1.0 - alpha);
            let first_moment = (hi.powf(2.0 - alpha) - lo.powf(2.0 - alpha)) / (2.0 - alpha);
            nodes.push(first_moment / mass);
            weights.push(density_scale * mass);
            lo = hi;
            hi *= spacing;
        }
        let spec = KernelSpec::fractional(c, alpha)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..grid.len() {
            let t = grid.node(i);
            let exact = spec.eval(t)?;
            let gap = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * (-x * t).exp())
                .sum::<f64>()
                - exact;
            // trapezoid over [h, T]: half weight at both window ends
            let w = if i == 1 || i == grid.len() - 1 { 0.5 } else { 1.0 };
            num += w * gap * gap;
            den += w * exact * exact;
        }
        let l2_error = (num / den).sqrt();
        Ok(LiftedApproximation {
            nodes,
            weights,
            l2_error,
            flagged: l2_error > warn_threshold,
        })
    }
}

/// Simulated variance paths with the Brownian increments that drove them.
#[derive(Debug, Clone)]
pub struct VariancePaths {
    grid: Grid,
    v: Vec<Vec<f64>>,
    dw1: Vec<Vec<f64>>,
    dw2: Vec<Vec<f64>>,
    clipped_fraction: f64,
    lifted: Option<LiftedApproximation>,
}

impl VariancePaths {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Path-major node values, each path of length n_steps + 1, all >= 0.
    pub fn paths(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn dw1(&self) -> &[Vec<f64>] {
        &self.dw1
    }

    pub fn dw2(&self) -> &[Vec<f64>] {
        &self.dw2
    }

    /// Fraction of nodes where the raw scheme went negative and was
    /// clipped to zero.
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// Kernel approximation details when the lifted scheme produced the
    /// paths.
    pub fn lifted(&self) -> Option<&LiftedApproximation> {
        self.lifted.as_ref()
    }

    pub(crate) fn into_parts(self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, f64, Option<LiftedApproximation>) {
        (self.v, self.dw1, self.dw2, self.clipped_fraction, self.lifted)
    }
}

fn assemble(
    grid: Grid,
    per_path: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, usize)>,
    lifted: Option<LiftedApproximation>,
) -> VariancePaths {
    let n_paths = per_path.len();
    let nodes_per_path = grid.len();
    let mut v = Vec::with_capacity(n_paths);
    let mut dw1 = Vec::with_capacity(n_paths);
    let mut dw2 = Vec::with_capacity(n_paths);
    let mut clipped = 0usize;
    for (pv, p1, p2, c) in per_path {
        v.push(pv);
        dw1.push(p1);
        dw2.push(p2);
        clipped += c;
    }
    VariancePaths {
        grid,
        v,
        dw1,
        dw2,
        clipped_fraction: clipped as f64 / (n_paths * nodes_per_path) as f64,
        lifted,
    }
}

/// Direct convolution march: each raw node is
/// V0 + sum over past cells of K-bar * (drift step + diffusion shock),
/// where K-bar is the exact kernel average over the shifted cell. The
/// per-cell averages make the singular kernel first-order consistent at
/// the diagonal. Cost is O(n_paths * n_steps^2) with the full shock
/// history retained per path.
pub fn simulate_variance_volterra(
    params: &ModelParams,
    kernel: &KernelSpec,
    cfg: &SimConfig,
) -> Result<VariancePaths> {
    cfg.validate()?;
    if cfg.scheme != Scheme::VolterraEuler {
        return Err(Error::Config(
            "configuration selects the lifted scheme; call the lifted simulator".into(),
        ));
    }
    let grid = Grid::new(params.horizon, cfg.n_steps)?;
    let h = grid.h();
    let lag = kernel.lag_weights(h, cfg.n_steps);
    // kbar[m]: mean kernel value over the cell at lag m, 1-based
    let kbar: Vec<f64> = std::iter::once(0.0)
        .chain((1..=cfg.n_steps).map(|m| lag.cell_mass(m) / h))
        .collect();
    let (kappa, phi, sigma, rho) = (params.kappa, params.phi, params.sigma, params.rho);
    let v0 = params.v0;
    let rho_perp = (1.0 - rho * rho).sqrt();
    let per_path: Vec<_> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let (dw1, dw2) = draw_increments(&mut rng, cfg.n_steps, h);
            let mut v = Vec::with_capacity(grid.len());
            let mut shocks = Vec::with_capacity(cfg.n_steps);
            let mut clips = 0usize;
            v.push(v0);
            for n in 1..=cfg.n_steps {
                let prev = v[n - 1];
                let db = rho * dw1[n - 1] + rho_perp * dw2[n - 1];
                shocks.push(kappa * (phi - prev) * h + sigma * prev.sqrt() * db);
                let mut acc = v0;
                for (j, s) in shocks.iter().enumerate() {
                    acc += kbar[n - j] * s;
                }
                if acc < 0.0 {
                    clips += 1;
                    acc = 0.0;
                }
                v.push(acc);
            }
            (v, dw1, dw2, clips)
        })
        .collect();
    Ok(assemble(grid, per_path, None))
}

/// Multi-factor march: the singular kernel is replaced by an exponential
/// sum, each factor mean-reverts at its node speed, and all factors share
/// the variance Brownian driver. Cost is O(n_paths * n_steps * n_factors).
pub fn simulate_variance_lifted(
    params: &ModelParams,
    kernel: &KernelSpec,
    cfg: &SimConfig,
) -> Result<VariancePaths> {
    cfg.validate()?;
    if cfg.scheme != Scheme::Lifted {
        return Err(Error::Config(
            "configuration selects the direct scheme; call the convolution simulator".into(),
        ));
    }
    let (c, alpha) = match *kernel {
        KernelSpec::Fractional { c, alpha } => (c, alpha),
        _ => {
            return Err(Error::InvalidParameter(
                "the lifted scheme approximates the power kernel; other kernels \
                 use the direct scheme"
                    .into(),
            ))
        }
    };
    let grid = Grid::new(params.horizon, cfg.n_steps)?;
    let h = grid.h();
    let approx = LiftedApproximation::build(
        c,
        alpha,
        cfg.lifted_factors,
        cfg.lifted_first_node,
        cfg.lifted_spacing,
        &grid,
        cfg.lifted_l2_warn,
    )?;
    let (kappa, phi, sigma, rho) = (params.kappa, params.phi, params.sigma, params.rho);
    let v0 = params.v0;
    let rho_perp = (1.0 - rho * rho).sqrt();
    let nodes = approx.nodes().to_vec();
    let weights = approx.weights().to_vec();
    let per_path: Vec<_> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let (dw1, dw2) = draw_increments(&mut rng, cfg.n_steps, h);
            let mut v = Vec::with_capacity(grid.len());
            let mut y = vec![0.0f64; nodes.len()];
            let mut clips = 0usize;
            v.push(v0);
            for n in 0..cfg.n_steps {
                let cur = v[n];
                let drift = kappa * (phi - cur);
                let diffusion = sigma * cur.sqrt() * (rho * dw1[n] + rho_perp * dw2[n]);
                let mut next = v0;
                for (yi, &x) in y.iter_mut().zip(&nodes) {
                    *yi += (drift - x * *yi) * h + diffusion;
                }
                for (yi, &w) in y.iter().zip(&weights) {
                    next += w * yi;
                }
                if next < 0.0 {
                    clips += 1;
                    next = 0.0;
                }
                v.push(next);
            }
            (v, dw1, dw2, clips)
        })
        .collect();
    Ok(assemble(grid, per_path, Some(approx)))
}

#[cfg(test)]
mod tests {
    use super::super::p_variation;
    use super::*;
    use crate::oracle::deterministic_volterra;
    use crate::portfolio::RateCurve;

    fn params(v0: f64, kappa: f64, phi: f64, sigma: f64, rho: f64) -> ModelParams {
        ModelParams {
            v0,
            kappa,
            phi,
            sigma,
            rho,
            theta: 0.5,
            rate: RateCurve::Constant(0.02),
            horizon: 1.0,
            x0: 1.0,
            c: 1.5,
        }
    }

    #[test]
    fn noiseless_limit_tracks_relaxation_oracle() {
        let p = params(0.5, 2.0, 0.04, 0.0, -0.7);
        let cfg = SimConfig {
            n_paths: 1,
            n_steps: 2000,
            seed: 3,
            ..SimConfig::default()
        };
        for kernel in [
            KernelSpec::constant(1.0).unwrap(),
            KernelSpec::fractional(1.0, 0.6).unwrap(),
        ] {
            let sim = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
            let grid = *sim.grid();
            let exact = deterministic_volterra(p.v0, p.kappa, p.phi, &kernel, &grid);
            let worst = sim.paths()[0]
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-3, "noiseless gap {worst} for {kernel:?}");
            assert_eq!(sim.clipped_fraction(), 0.0);
        }
    }

    #[test]
    fn flat_kernel_march_is_the_classical_scheme() {
        let p = params(0.04, 2.0, 0.04, 0.3, -0.7);
        let cfg = SimConfig {
            n_paths: 3,
            n_steps: 250,
            seed: 7,
            ..SimConfig::default()
        };
        let kernel = KernelSpec::constant(1.0).unwrap();
        let sim = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
        let h = sim.grid().h();
        for path in 0..3 {
            let mut rng = path_rng(7, path);
            let (dw1, dw2) = draw_increments(&mut rng, 250, h);
            // classical full-truncation recursion, same increments
            let rho_perp = (1.0 - p.rho * p.rho).sqrt();
            let mut v = p.v0;
            for n in 0..250 {
                let db = p.rho * dw1[n] + rho_perp * dw2[n];
                v += p.kappa * (p.phi - v.max(0.0)) * h + p.sigma * v.max(0.0).sqrt() * db;
                let got = sim.paths()[path][n + 1];
                assert!(
                    (got - v.max(0.0)).abs() < 1e-10,
                    "path {path} node {n}: {got} vs {}",
                    v.max(0.0)
                );
            }
        }
    }

    #[test]
    fn stationary_start_keeps_terminal_mean_at_level() {
        let p = params(0.09, 8.0, 0.09, 0.5, -0.3);
        let cfg = SimConfig {
            n_paths: 400,
            n_steps: 250,
            seed: 11,
            ..SimConfig::default()
        };
        let kernel = KernelSpec::constant(1.0).unwrap();
        let sim = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
        let terminal: Vec<f64> = sim.paths().iter().map(|path| path[250]).collect();
        let mean = terminal.iter().sum::<f64>() / 400.0;
        let var = terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 399.0;
        let se = (var / 400.0).sqrt();
        assert!(
            (mean - p.phi).abs() < 3.0 * se,
            "terminal mean {mean} vs level {} (se {se})",
            p.phi
        );
    }

    #[test]
    fn factor_doubling_tightens_the_kernel_gap() {
        let grid = Grid::new(1.0, 100).unwrap();
        // double the factor count over a fixed speed range [0.01, 1e4] so
        // each doubling refines the geometric ratio
        let mut last = f64::INFINITY;
        for n in [5usize, 10, 20, 40] {
            let spacing = 1e6f64.powf(1.0 / n as f64);
            let approx =
                LiftedApproximation::build(1.0, 0.6, n, 0.01, spacing, &grid, 0.05).unwrap();
            assert!(
                approx.l2_error() < last,
                "{n} factors: {} not below {last}",
                approx.l2_error()
            );
            last = approx.l2_error();
        }
        let coarse = LiftedApproximation::build(1.0, 0.6, 2, 0.01, 1e3, &grid, 0.05).unwrap();
        assert!(coarse.flagged(), "2-factor gap {}", coarse.l2_error());
    }

    #[test]
    fn degenerate_exponent_reduces_to_flat_kernel() {
        let p = params(0.04, 2.0, 0.04, 0.3, -0.7);
        let lifted_cfg = SimConfig {
            n_paths: 2,
            n_steps: 250,
            seed: 13,
            scheme: Scheme::Lifted,
            lifted_factors: 1,
            ..SimConfig::default()
        };
        let direct_cfg = SimConfig {
            scheme: Scheme::VolterraEuler,
            ..lifted_cfg
        };
        let unit_power = KernelSpec::fractional(1.0, 1.0).unwrap();
        let flat = KernelSpec::constant(1.0).unwrap();
        let lifted = simulate_variance_lifted(&p, &unit_power, &lifted_cfg).unwrap();
        let approx = lifted.lifted().unwrap();
        assert_eq!(approx.nodes(), &[0.0]);
        assert_eq!(approx.weights(), &[1.0]);
        assert_eq!(approx.l2_error(), 0.0);
        let direct = simulate_variance_volterra(&p, &flat, &direct_cfg).unwrap();
        for (a, b) in lifted.paths().iter().zip(direct.paths()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_variation_grows_as_the_kernel_roughens() {
        let cfg = SimConfig {
            n_paths: 50,
            n_steps: 250,
            seed: 17,
            ..SimConfig::default()
        };
        let p = params(0.04, 2.0, 0.04, 0.3, -0.7);
        let mut stats = Vec::new();
        for alpha in [0.6, 0.9, 1.0] {
            let kernel = KernelSpec::fractional(1.0, alpha).unwrap();
            let sim = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
            let mean_qv = sim
                .paths()
                .iter()
                .map(|path| p_variation(path, 2.0).unwrap())
                .sum::<f64>()
                / 50.0;
            stats.push(mean_qv);
        }
        assert!(
            stats[0] > stats[1] && stats[1] > stats[2],
            "quadratic variation not decreasing in alpha: {stats:?}"
        );
    }

    #[test]
    fn identical_configuration_is_bit_identical() {
        let p = params(0.04, 2.0, 0.04, 0.3, -0.7);
        let cfg = SimConfig {
            n_paths: 5,
            n_steps: 50,
            seed: 23,
            ..SimConfig::default()
        };
        let kernel = KernelSpec::fractional(1.0, 0.7).unwrap();
        let a = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
        let b = simulate_variance_volterra(&p, &kernel, &cfg).unwrap();
        assert_eq!(a.paths(), b.paths());
        assert_eq!(a.dw1(), b.dw1());
        let wrong_scheme = SimConfig {
            scheme: Scheme::Lifted,
            ..cfg
        };
        assert!(simulate_variance_volterra(&p, &kernel, &wrong_scheme).is_err());
        assert!(simulate_variance_lifted(&p, &KernelSpec::constant(1.0).unwrap(), &wrong_scheme).is_err());
    }
}
