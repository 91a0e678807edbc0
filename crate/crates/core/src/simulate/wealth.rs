//! Stock and wealth paths under the optimal control, with the pathwise
//! forward-variance curve and scaling-factor evaluation.
//!
//! Wealth integrates in discounted units: the risk-free leg compounds
//! through exact rate integrals and only the risky increments are Euler
//! steps, so a path with the control forced to zero lands on x0 e^{int r}
//! exactly. The stock itself takes plain Euler steps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{resolvent_second_kind, KernelSpec};
use crate::portfolio::{m_t, xi0, ForwardVarianceCurve, MVSolution};

use super::variance::{simulate_variance_lifted, simulate_variance_volterra, LiftedApproximation};
use super::{Scheme, SimConfig};

/// Second-kind resolvent over lambda, presampled at every lag multiple of
/// the step so pathwise forward-variance updates stay table lookups. The
/// lambda = 0 case carries the kernel itself, matching the small-lambda
/// limit of R_lambda / lambda.
#[derive(Debug, Clone)]
pub struct ResolventLags {
    grid: Grid,
    over_lambda: Vec<f64>,
}

impl ResolventLags {
    pub fn sample(kernel: &KernelSpec, lambda: f64, grid: &Grid) -> Result<Self> {
        let curve = resolvent_second_kind(kernel, lambda, grid)?;
        let mut over_lambda = Vec::with_capacity(grid.len());
        over_lambda.push(0.0);
        for m in 1..grid.len() {
            over_lambda.push(curve.over_lambda_eval(m as f64 * grid.h())?);
        }
        Ok(ResolventLags {
            grid: *grid,
            over_lambda,
        })
    }

    fn at_lag(&self, m: usize) -> f64 {
        self.over_lambda[m]
    }
}

/// One shock step of the forward-variance curve: every node past the new
/// anchor gains the resolvent-propagated martingale increment, and nodes
/// pushed negative are clipped to zero. Returns the advanced curve and the
/// clip count.
pub fn update_forward_variance(
    xi: &ForwardVarianceCurve,
    lags: &ResolventLags,
    shock: f64,
) -> Result<(ForwardVarianceCurve, usize)> {
    let grid = *xi.grid();
    if grid != lags.grid {
        return Err(Error::GridMismatch(
            "forward curve and resolvent table live on different grids".into(),
        ));
    }
    let anchor = xi.anchor_index();
    if anchor >= grid.n_steps() {
        return Err(Error::Domain(
            "forward curve is already anchored at the horizon".into(),
        ));
    }
    let mut values = Vec::with_capacity(grid.len() - anchor - 1);
    let mut clips = 0usize;
    for j in anchor + 1..grid.len() {
        let mut val = xi.value_at_node(j)? + lags.at_lag(j - anchor) * shock;
        if val < 0.0 {
            clips += 1;
            val = 0.0;
        }
        values.push(val);
    }
    Ok((ForwardVarianceCurve::new(grid, anchor + 1, values)?, clips))
}

/// Simulated market under the optimal control: state, stock, wealth,
/// control, and pathwise scaling-factor curves, plus the Brownian
/// increments that generated them.
#[derive(Debug, Clone)]
pub struct PathBundle {
    grid: Grid,
    v: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    pi: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    dw1: Vec<Vec<f64>>,
    dw2: Vec<Vec<f64>>,
    clipped_variance_fraction: f64,
    clipped_xi_nodes: usize,
    lifted: Option<LiftedApproximation>,
    zeta_star: f64,
}

impl PathBundle {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Variance paths, n_paths x (n_steps + 1), nonnegative.
    pub fn variance(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Stock paths started at 1.
    pub fn stock(&self) -> &[Vec<f64>] {
        &self.s
    }

    /// Wealth paths under the control.
    pub fn wealth(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Control amounts at each node.
    pub fn control(&self) -> &[Vec<f64>] {
        &self.u
    }

    /// Volatility-normalized control at each node; this is the formula
    /// value A (zeta e^{-int r} - X), which extends the ratio u / sqrt(V)
    /// continuously to nodes where the variance was truncated at zero.
    pub fn fraction(&self) -> &[Vec<f64>] {
        &self.pi
    }

    /// Pathwise scaling-factor curves; the terminal node is exactly 2.
    pub fn scaling_factor(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn dw1(&self) -> &[Vec<f64>] {
        &self.dw1
    }

    pub fn dw2(&self) -> &[Vec<f64>] {
        &self.dw2
    }

    /// Fraction of variance nodes truncated at zero.
    pub fn clipped_variance_fraction(&self) -> f64 {
        self.clipped_variance_fraction
    }

    /// Total forward-variance nodes clipped at zero across all paths and
    /// steps.
    pub fn clipped_xi_nodes(&self) -> usize {
        self.clipped_xi_nodes
    }

    pub fn lifted(&self) -> Option<&LiftedApproximation> {
        self.lifted.as_ref()
    }

    pub fn zeta_star(&self) -> f64 {
        self.zeta_star
    }

    pub fn terminal_wealth(&self) -> Vec<f64> {
        self.x.iter().map(|path| path[self.grid.n_steps()]).collect()
    }
}

pub fn simulate_portfolio(mv: &MVSolution, cfg: &SimConfig) -> Result<PathBundle> {
    simulate_portfolio_impl(mv, cfg, false)
}

pub(crate) fn simulate_portfolio_impl(
    mv: &MVSolution,
    cfg: &SimConfig,
    zero_control: bool,
) -> Result<PathBundle> {
    cfg.validate()?;
    let params = mv.params();
    let kernel = mv.kernel();
    if mv.psi().grid().n_steps() != cfg.n_steps {
        return Err(Error::GridMismatch(format!(
            "strategy was solved on {} steps but the simulation asks for {}",
            mv.psi().grid().n_steps(),
            cfg.n_steps
        )));
    }
    let variance = match cfg.scheme {
        Scheme::VolterraEuler => simulate_variance_volterra(params, kernel, cfg)?,
        Scheme::Lifted => simulate_variance_lifted(params, kernel, cfg)?,
    };
    let grid = *variance.grid();
    let n = cfg.n_steps;
    let h = grid.h();
    let xi_start = xi0(params, kernel, &grid)?;
    let lags = ResolventLags::sample(kernel, params.lambda(), &grid)?;
    // per-node discount factors: growth from time zero and discount to T
    let growth: Vec<f64> = (0..=n)
        .map(|i| params.rate_integral(0.0, grid.node(i)).exp())
        .collect();
    let df_to_t: Vec<f64> = (0..=n)
        .map(|i| (-params.rate_integral(grid.node(i), params.horizon)).exp())
        .collect();
    let weights: Vec<f64> = (0..=n).map(|i| mv.hedging_weight_at_node(i)).collect();
    let zeta = mv.zeta_star();
    let (theta, sigma, rho) = (params.theta, params.sigma, params.rho);
    let rho_perp = (1.0 - rho * rho).sqrt();
    let (v_paths, dw1, dw2, clipped_variance_fraction, lifted) = variance.into_parts();
    let per_path: Vec<Result<_>> = v_paths
        .par_iter()
        .zip(dw1.par_iter().zip(&dw2))
        .map(|(v, (d1, d2))| {
            let mut s = Vec::with_capacity(n + 1);
            let mut x = Vec::with_capacity(n + 1);
            let mut u = Vec::with_capacity(n + 1);
            let mut pi = Vec::with_capacity(n + 1);
            let mut m_path = Vec::with_capacity(n + 1);
            let mut clips = 0usize;
            let mut xi = xi_start.clone();
            m_path.push(m_t(params, mv.psi(), &xi)?);
            let mut stock = 1.0f64;
            // discounted wealth: exact risk-free compounding, Euler risky leg
            let mut x_disc = params.x0;
            s.push(stock);
            x.push(params.x0);
            for i in 0..n {
                let vi = v[i];
                let root_v = vi.sqrt();
                let gap = zeta * df_to_t[i] - x_disc * growth[i];
                let (ui, pii) = if zero_control {
                    (0.0, 0.0)
                } else {
                    (weights[i] * root_v * gap, weights[i] * gap)
                };
                u.push(ui);
                pi.push(pii);
                let r_i = params.rate.value(grid.node(i));
                stock *= 1.0 + (r_i + theta * vi) * h + root_v * d1[i];
                x_disc += (theta * root_v * ui * h + ui * d1[i]) / growth[i];
                s.push(stock);
                x.push(x_disc * growth[i + 1]);
                // forward-variance shock under the tilted driver:
                // dB-tilde = dB + 2 theta rho sqrt(V) dt
                let db_tilde = rho * d1[i] + rho_perp * d2[i] + 2.0 * theta * rho * root_v * h;
                let step = update_forward_variance(&xi, &lags, sigma * root_v * db_tilde)?;
                xi = step.0;
                clips += step.1;
                m_path.push(m_t(params, mv.psi(), &xi)?);
            }
            let gap_t = zeta - x_disc * growth[n];
            let (ut, pit) = if zero_control {
                (0.0, 0.0)
            } else {
                (weights[n] * v[n].sqrt() * gap_t, weights[n] * gap_t)
            };
            u.push(ut);
            pi.push(pit);
            Ok((s, x, u, pi, m_path, clips))
        })
        .collect();
    let mut s = Vec::with_capacity(v_paths.len());
    let mut x = Vec::with_capacity(v_paths.len());
    let mut u = Vec::with_capacity(v_paths.len());
    let mut pi = Vec::with_capacity(v_paths.len());
    let mut m = Vec::with_capacity(v_paths.len());
    let mut clipped_xi_nodes = 0usize;
    for item in per_path {
        let (ps, px, pu, ppi, pm, clips) = item?;
        s.push(ps);
        x.push(px);
        u.push(pu);
        pi.push(ppi);
        m.push(pm);
        clipped_xi_nodes += clips;
    }
    Ok(PathBundle {
        grid,
        v: v_paths,
        s,
        x,
        u,
        pi,
        m,
        dw1,
        dw2,
        clipped_variance_fraction,
        clipped_xi_nodes,
        lifted,
        zeta_star: zeta,
    })
}
