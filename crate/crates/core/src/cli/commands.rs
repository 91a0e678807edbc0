//! The four computing subcommands: psi, strategy, frontier, simulate.

use super::table::ResultTable;
use super::RunConfig;
use crate::grid::Grid;
use crate::kernels::KernelSpec;
use crate::portfolio::{efficient_frontier, solve_mv_with, ModelParams};
use crate::simulate::{bootstrap_bands, simulate_portfolio_impl, terminal_stats};
use crate::volterra_solver::{solve_riccati_with, RiccatiRHS};
use crate::{Error, Result};

/// Kernel variants a command loops over: the alpha sweep when
/// `experiment.alphas` is set, otherwise the kernel block as configured.
/// Labels become column-name suffixes.
fn kernel_variants(cfg: &RunConfig) -> Result<Vec<(String, KernelSpec)>> {
    if cfg.experiment.alphas.is_empty() {
        let label = match cfg.kernel.shape {
            super::KernelShape::Constant => "constant".to_string(),
            super::KernelShape::Fractional => format!("alpha_{}", cfg.kernel.alpha),
            super::KernelShape::Exponential => "exponential".to_string(),
        };
        return Ok(vec![(label, cfg.kernel.build()?)]);
    }
    cfg.experiment
        .alphas
        .iter()
        .map(|&a| Ok((format!("alpha_{a}"), cfg.kernel.with_exponent(a)?)))
        .collect()
}

/// The psi command accepts parameter corners the portfolio problem
/// rejects, theta = 0 in particular, where the curve is identically zero.
fn psi_parameter_check(p: &ModelParams) -> Result<()> {
    let fields = [
        ("v0", p.v0),
        ("kappa", p.kappa),
        ("phi", p.phi),
        ("sigma", p.sigma),
        ("rho", p.rho),
        ("theta", p.theta),
        ("horizon", p.horizon),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite, got {v}"
            )));
        }
    }
    if p.horizon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be > 0, got {}",
            p.horizon
        )));
    }
    if p.sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sigma must be >= 0, got {}",
            p.sigma
        )));
    }
    Ok(())
}

pub fn cmd_psi(cfg: &RunConfig) -> Result<Vec<ResultTable>> {
    let p = &cfg.model;
    psi_parameter_check(p)?;
    let grid = Grid::new(p.horizon, cfg.solver.n_steps)?;
    let opts = cfg.solver.to_options();
    let variants = kernel_variants(cfg)?;
    let rhs = RiccatiRHS::strategy(p);
    let mut series = Vec::with_capacity(variants.len());
    let mut columns: Vec<String> = vec!["t".into()];
    for (label, kernel) in &variants {
        columns.push(format!("psi_{label}"));
        let sol = solve_riccati_with(&rhs, kernel, &grid, opts)?;
        series.push(sol.values().to_vec());
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new("psi", &cols);
    for i in 0..grid.len() {
        let mut row = Vec::with_capacity(cols.len());
        row.push(grid.node(i));
        row.extend(series.iter().map(|s| s[i]));
        table.push_row(row);
    }
    table.insert_metadata("n_steps", cfg.solver.n_steps.to_string());
    Ok(vec![table])
}

pub fn cmd_strategy(cfg: &RunConfig) -> Result<Vec<ResultTable>> {
    let p = &cfg.model;
    let grid = Grid::new(p.horizon, cfg.solver.n_steps)?;
    let opts = cfg.solver.to_options();
    let variants = kernel_variants(cfg)?;
    let v_eval = cfg.experiment.v_eval.unwrap_or(p.v0);
    if !(v_eval.is_finite() && v_eval >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "evaluation variance must be >= 0, got {v_eval}"
        )));
    }
    // wealth held fixed if given, otherwise compounded risk-free from x0
    let x_at = |t: f64| match cfg.experiment.x_eval {
        Some(x) => x,
        None => p.x0 * p.rate_integral(0.0, t).exp(),
    };

    let mut columns: Vec<String> = vec!["t".into()];
    for (label, _) in &variants {
        columns.push(format!("u_{label}"));
    }
    for (label, _) in &variants {
        columns.push(format!("pi_{label}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new("strategy", &cols);

    let mut solutions = Vec::with_capacity(variants.len());
    for (label, kernel) in &variants {
        let mv = solve_mv_with(p, kernel, &grid, opts)?;
        table.insert_metadata(format!("m0_{label}"), format!("{:.16e}", mv.m0()));
        table.insert_metadata(format!("eta_star_{label}"), format!("{:.16e}", mv.eta_star()));
        table.insert_metadata(
            format!("zeta_star_{label}"),
            format!("{:.16e}", mv.zeta_star()),
        );
        solutions.push(mv);
    }
    for i in 0..grid.len() {
        let t = grid.node(i);
        let x = x_at(t);
        let mut row = Vec::with_capacity(cols.len());
        row.push(t);
        for mv in &solutions {
            row.push(mv.optimal_u(t, v_eval, x)?);
        }
        for mv in &solutions {
            row.push(mv.optimal_pi(t, v_eval, x)?);
        }
        table.push_row(row);
    }
    table.insert_metadata("v_eval", format!("{v_eval:.16e}"));
    Ok(vec![table])
}

pub fn cmd_frontier(cfg: &RunConfig) -> Result<Vec<ResultTable>> {
    let p = &cfg.model;
    let targets = &cfg.experiment.targets;
    if targets.is_empty() {
        return Err(Error::Config(
            "the frontier command needs a non-empty experiment.targets list".into(),
        ));
    }
    let grid = Grid::new(p.horizon, cfg.solver.n_steps)?;
    let opts = cfg.solver.to_options();
    let variants = kernel_variants(cfg)?;
    let discount = (-p.rate_integral(0.0, p.horizon)).exp();

    let mut columns: Vec<String> = vec!["c".into()];
    for (label, _) in &variants {
        columns.push(format!("var_{label}"));
        columns.push(format!("std_{label}"));
        // variance over the squared discounted surplus; constant in c when
        // the frontier is exactly quadratic
        columns.push(format!("ratio_{label}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new("frontier", &cols);

    let mut curves = Vec::with_capacity(variants.len());
    for (label, kernel) in &variants {
        let fc = efficient_frontier(p, kernel, &grid, targets, opts)?;
        table.insert_metadata(format!("m0_{label}"), format!("{:.16e}", fc.m0()));
        curves.push(fc);
    }
    for (j, &c) in targets.iter().enumerate() {
        let mut row = Vec::with_capacity(cols.len());
        row.push(c);
        let surplus = c * discount - p.x0;
        for fc in &curves {
            let var = fc.variances()[j];
            row.push(var);
            row.push(var.sqrt());
            row.push(if surplus == 0.0 {
                f64::NAN
            } else {
                var / (surplus * surplus)
            });
        }
        table.push_row(row);
    }
    Ok(vec![table])
}

/// Standard error of the sample variance by the delta method.
fn variance_se(sample: &[f64], mean: f64, variance: f64) -> f64 {
    let n = sample.len() as f64;
    let m4 = sample.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - variance * variance).max(0.0) / n).sqrt()
}

struct CheckRow {
    label: String,
    value: f64,
    reference: f64,
    se: f64,
}

impl CheckRow {
    fn z(&self) -> f64 {
        let diff = (self.value - self.reference).abs();
        if self.se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.se
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig, seed: u64) -> Result<Vec<ResultTable>> {
    let sim = cfg.simulation.build(seed);
    let opts = cfg.solver.to_options();
    let mut investors: Vec<(&str, &ModelParams, &super::KernelConfig)> =
        vec![("investor1", &cfg.model, &cfg.kernel)];
    if let Some(m2) = &cfg.model2 {
        investors.push(("investor2", m2, cfg.kernel2.as_ref().unwrap_or(&cfg.kernel)));
    }
    // distinct keystream family for resampling; path streams start at 1
    let boot_seed = seed ^ 0x9e37_79b9_7f4a_7c15;

    let mut tables = Vec::new();
    let mut checks: Vec<CheckRow> = Vec::new();
    for (label, params, kcfg) in investors {
        let kernel = kcfg.build()?;
        // psi and the paths must share a grid, so the simulation step count
        // drives the solve here
        let grid = Grid::new(params.horizon, sim.n_steps)?;
        let mv = solve_mv_with(params, &kernel, &grid, opts)?;
        let bundle = simulate_portfolio_impl(&mv, &sim, cfg.experiment.zero_control)?;
        let times: Vec<f64> = grid.nodes().collect();
        let n_res = cfg.experiment.n_resamples;
        let level = cfg.experiment.band_level;

        let mut summary = |name: String, matrix: &[Vec<f64>]| -> Result<()> {
            let bands = bootstrap_bands(matrix, &times, n_res, level, boot_seed)?;
            let mut t = ResultTable::new(name, &["t", "mean", "lower", "upper"]);
            for i in 0..times.len() {
                t.push_row(vec![
                    times[i],
                    bands.mean()[i],
                    bands.lower()[i],
                    bands.upper()[i],
                ]);
            }
            t.insert_metadata("band_level", format!("{level}"));
            t.insert_metadata("n_resamples", n_res.to_string());
            t.insert_metadata("n_paths", sim.n_paths.to_string());
            tables.push(t);
            Ok(())
        };
        summary(format!("{label}_wealth_summary"), bundle.wealth())?;
        summary(format!("{label}_strategy_summary"), bundle.control())?;

        let k = cfg.experiment.sample_paths.min(sim.n_paths);
        if k > 0 {
            let mut columns: Vec<String> = vec!["t".into()];
            for j in 1..=k {
                columns.push(format!("wealth_{j}"));
            }
            for j in 1..=k {
                columns.push(format!("variance_{j}"));
            }
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            let mut t = ResultTable::new(format!("{label}_paths_sample"), &cols);
            for i in 0..times.len() {
                let mut row = Vec::with_capacity(cols.len());
                row.push(times[i]);
                row.extend((0..k).map(|j| bundle.wealth()[j][i]));
                row.extend((0..k).map(|j| bundle.variance()[j][i]));
                t.push_row(row);
            }
            tables.push(t);
        }

        let terminal = bundle.terminal_wealth();
        let ts = terminal_stats(&terminal, mv.zeta_star())?;
        let h0 = mv.zeta_star() * (-params.rate_integral(0.0, params.horizon)).exp();
        let gap_closed = 0.5 * mv.m0() * (params.x0 - h0) * (params.x0 - h0);
        let se_var = variance_se(&terminal, ts.mean, ts.variance);

        let mut t = ResultTable::new(
            format!("{label}_terminal"),
            &[
                "mean",
                "se_mean",
                "variance",
                "se_variance",
                "mean_square_gap",
                "se_gap",
                "target",
                "zeta_star",
                "m0",
                "variance_closed",
                "gap_closed",
                "clipped_variance_fraction",
                "clipped_xi_nodes",
                "lifted_l2_error",
            ],
        );
        t.push_row(vec![
            ts.mean,
            ts.se_mean,
            ts.variance,
            se_var,
            ts.mean_square_gap,
            ts.se_gap,
            params.c,
            mv.zeta_star(),
            mv.m0(),
            mv.variance_opt(),
            gap_closed,
            bundle.clipped_variance_fraction(),
            bundle.clipped_xi_nodes() as f64,
            bundle.lifted().map_or(f64::NAN, |l| l.l2_error()),
        ]);
        tables.push(t);

        checks.push(CheckRow {
            label: format!("{label}: terminal mean vs target"),
            value: ts.mean,
            reference: params.c,
            se: ts.se_mean,
        });
        checks.push(CheckRow {
            label: format!("{label}: terminal variance vs closed form"),
            value: ts.variance,
            reference: mv.variance_opt(),
            se: se_var,
        });
        checks.push(CheckRow {
            label: format!("{label}: mean square gap vs closed form"),
            value: ts.mean_square_gap,
            reference: gap_closed,
            se: ts.se_gap,
        });
    }

    let mut validation = ResultTable::with_labels(
        "validation",
        "check",
        &["value", "reference", "se", "z", "pass"],
    );
    for row in checks {
        let z = row.z();
        let pass = z <= 3.0;
        validation.push_labeled_row(
            row.label,
            vec![row.value, row.reference, row.se, z, pass as u8 as f64],
        );
    }
    tables.push(validation);
    Ok(tables)
}
