//! Command-line front end.
//!
//! A run is described by a TOML [`RunConfig`]; `--config` takes either a
//! file path or the name of a bundled preset. Commands write their
//! [`ResultTable`]s under the output directory and print the file paths.
//! Flags beat environment variables (`ROUGHMV_OUT`, `ROUGHMV_THREADS`),
//! which beat the config file. Exit codes: 0 success, 1 configuration or
//! parameter problems, 2 numerical failures, 3 validation-check failures.

mod commands;
mod table;
mod validate;

pub use table::{OutputFormat, ResultTable};

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kernels::KernelSpec;
use crate::portfolio::ModelParams;
use crate::simulate::{Scheme, SimConfig};
use crate::volterra_solver::SolverOptions;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "roughmv",
    version,
    about = "Mean-variance portfolio selection under rough and Volterra-type Heston volatility"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,

    /// TOML run configuration: a file path or a preset name.
    #[arg(long, global = true)]
    pub config: Option<String>,

    /// Output directory; beats ROUGHMV_OUT and the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Table format; beats the config file.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Monte Carlo seed; a missing seed is generated and reported.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread count; beats ROUGHMV_THREADS. Defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Solve the strategy equation and tabulate the psi curve per kernel.
    Psi,
    /// Tabulate the closed-form optimal feedback strategy on the grid.
    Strategy,
    /// Efficient frontier: optimal variance for each target expectation.
    Frontier,
    /// Monte Carlo run of the optimal portfolio with closed-form checks.
    Simulate,
    /// Numerical invariant battery; any failed check exits with code 3.
    Validate,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Psi => "psi",
            CommandKind::Strategy => "strategy",
            CommandKind::Frontier => "frontier",
            CommandKind::Simulate => "simulate",
            CommandKind::Validate => "validate",
        }
    }
}

/// Kernel family selector for the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    Constant,
    Fractional,
    Exponential,
}

/// Kernel block. `alpha` applies to the fractional shape, `beta` to the
/// exponential one; the unused field is simply ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub shape: KernelShape,
    pub scale: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            shape: KernelShape::Fractional,
            scale: 1.0,
            alpha: 0.6,
            beta: 1.0,
        }
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec> {
        match self.shape {
            KernelShape::Constant => KernelSpec::constant(self.scale),
            KernelShape::Fractional => KernelSpec::fractional(self.scale, self.alpha),
            KernelShape::Exponential => KernelSpec::exponential(self.scale, self.beta),
        }
    }

    /// The configured kernel with its exponent replaced, for alpha sweeps.
    pub fn with_exponent(&self, alpha: f64) -> Result<KernelSpec> {
        if self.shape != KernelShape::Fractional {
            return Err(Error::Config(
                "experiment.alphas sweeps need kernel.shape = \"fractional\"".into(),
            ));
        }
        KernelSpec::fractional(self.scale, alpha)
    }
}

/// Volterra solver block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub sweeps: usize,
    pub blow_up_threshold: f64,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_steps: 500,
            sweeps: 3,
            blow_up_threshold: 1.0e8,
            tolerance: 1.0e-6,
        }
    }
}

impl SolverConfig {
    pub fn to_options(self) -> SolverOptions {
        SolverOptions {
            sweeps: self.sweeps,
            blow_up_threshold: self.blow_up_threshold,
            tolerance: self.tolerance,
        }
    }
}

/// Monte Carlo block. Mirrors [`SimConfig`] except that the seed is
/// optional here: a run without one draws a fresh seed and records it in
/// the table metadata, so every run can be replayed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: Option<u64>,
    pub scheme: Scheme,
    pub lifted_factors: usize,
    pub lifted_spacing: f64,
    pub lifted_first_node: f64,
    pub lifted_l2_warn: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        SimulationConfig {
            n_paths: d.n_paths,
            n_steps: d.n_steps,
            seed: None,
            scheme: d.scheme,
            lifted_factors: d.lifted_factors,
            lifted_spacing: d.lifted_spacing,
            lifted_first_node: d.lifted_first_node,
            lifted_l2_warn: d.lifted_l2_warn,
        }
    }
}

impl SimulationConfig {
    pub fn build(&self, seed: u64) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            n_steps: self.n_steps,
            seed,
            scheme: self.scheme,
            lifted_factors: self.lifted_factors,
            lifted_spacing: self.lifted_spacing,
            lifted_first_node: self.lifted_first_node,
            lifted_l2_warn: self.lifted_l2_warn,
        }
    }
}

/// Experiment block: sweeps and evaluation points shared by the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Exponent sweep; empty means "use the kernel block as it stands".
    pub alphas: Vec<f64>,
    /// Target expectations for the frontier command.
    pub targets: Vec<f64>,
    /// Spot variance at which the strategy is tabulated; model v0 if unset.
    pub v_eval: Option<f64>,
    /// Wealth at which the strategy is tabulated; the risk-free roll-up of
    /// the initial wealth if unset.
    pub x_eval: Option<f64>,
    pub n_resamples: usize,
    pub band_level: f64,
    /// Simulated paths copied verbatim into the sample-path table.
    pub sample_paths: usize,
    /// Freeze the control at zero, as a drift-only diagnostic.
    pub zero_control: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alphas: Vec::new(),
            targets: Vec::new(),
            v_eval: None,
            x_eval: None,
            n_resamples: 1000,
            band_level: 0.95,
            sample_paths: 3,
            zero_control: false,
        }
    }
}

/// Output block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

/// Complete run description. Only the model block is mandatory; a second
/// investor can be given through `model2`/`kernel2` for comparison runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub model2: Option<ModelParams>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub kernel2: Option<KernelConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

const PRESET_NAMES: [&str; 6] = [
    "default",
    "fig1a",
    "fig1b",
    "fig2-small-sigma",
    "fig2-big-sigma",
    "fig4",
];

/// Bundled configuration for the given preset name.
pub fn preset(name: &str) -> Option<&'static str> {
    let text = match name {
        "default" => include_str!("presets/default.toml"),
        "fig1a" => include_str!("presets/fig1a.toml"),
        "fig1b" => include_str!("presets/fig1b.toml"),
        "fig2-small-sigma" => include_str!("presets/fig2_small_sigma.toml"),
        "fig2-big-sigma" => include_str!("presets/fig2_big_sigma.toml"),
        "fig4" => include_str!("presets/fig4.toml"),
        _ => return None,
    };
    Some(text)
}

/// Parse a run configuration from TOML text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("malformed run configuration: {e}")))
}

fn load_config(command: CommandKind, arg: Option<&str>) -> Result<RunConfig> {
    let text: String = match arg {
        Some(s) => {
            let path = Path::new(s);
            if path.exists() {
                fs::read_to_string(path)?
            } else if s == "fig3" {
                return Err(Error::Config(
                    "the two-investor comparison needs externally calibrated parameters; \
                     start from configs/two_investor_example.toml and fill in your own"
                        .into(),
                ));
            } else if let Some(t) = preset(s) {
                t.to_string()
            } else {
                return Err(Error::Config(format!(
                    "'{s}' is neither a config file nor a preset (presets: {})",
                    PRESET_NAMES.join(", ")
                )));
            }
        }
        None if command == CommandKind::Validate => preset("default")
            .expect("default preset is bundled")
            .to_string(),
        None => {
            return Err(Error::Config(format!(
                "--config is required: a TOML path or one of the presets ({})",
                PRESET_NAMES.join(", ")
            )));
        }
    };
    parse_config(&text)
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match env::var("ROUGHMV_THREADS") {
            Ok(s) if !s.is_empty() => Some(s.parse().map_err(|_| {
                Error::Config(format!("ROUGHMV_THREADS must be a positive integer, got {s:?}"))
            })?),
            _ => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn config_digest(cfg: &RunConfig) -> String {
    // the digest identifies the computation; where the tables land does not
    // belong to it
    let mut keyed = cfg.clone();
    keyed.output = OutputConfig::default();
    let bytes = serde_json::to_vec(&keyed).expect("config serializes");
    let hash = Sha256::digest(&bytes);
    hash.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = std::fmt::Write::write_fmt(&mut s, format_args!("{b:02x}"));
        s
    })
}

/// Execute a parsed invocation and return the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    configure_threads(cli.threads)?;
    let mut cfg = load_config(cli.command, cli.config.as_deref())?;
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    } else if let Ok(dir) = env::var("ROUGHMV_OUT") {
        if !dir.is_empty() {
            cfg.output.dir = PathBuf::from(dir);
        }
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(s) = cli.seed {
        cfg.simulation.seed = Some(s);
    }
    // hashed before any seed generation: the digest identifies the request
    let digest = config_digest(&cfg);

    let mut seed_used = None;
    let mut all_checks_pass = true;
    let mut tables = match cli.command {
        CommandKind::Psi => commands::cmd_psi(&cfg)?,
        CommandKind::Strategy => commands::cmd_strategy(&cfg)?,
        CommandKind::Frontier => commands::cmd_frontier(&cfg)?,
        CommandKind::Simulate => {
            let seed = match cfg.simulation.seed {
                Some(s) => s,
                None => {
                    let s: u64 = rand::random();
                    eprintln!("note: no seed configured; generated seed {s}");
                    s
                }
            };
            seed_used = Some(seed);
            commands::cmd_simulate(&cfg, seed)?
        }
        CommandKind::Validate => {
            let (tables, ok) = validate::run_battery(&cfg)?;
            all_checks_pass = ok;
            tables
        }
    };

    for t in &mut tables {
        t.insert_metadata("command", cli.command.name());
        t.insert_metadata("config_sha256", &digest);
        t.insert_metadata("version", env!("CARGO_PKG_VERSION"));
        if let Some(s) = seed_used {
            t.insert_metadata("seed", s.to_string());
        }
    }
    for t in &tables {
        let path = t.write_to(&cfg.output.dir, cfg.output.format)?;
        println!("wrote {}", path.display());
    }
    if cli.command == CommandKind::Validate {
        for t in &tables {
            validate::print_battery(t);
        }
    }
    Ok(if all_checks_pass { 0 } else { 3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_every_default() {
        let cfg: RunConfig = toml::from_str(
            "[model]\n\
             v0 = 0.09\nkappa = 1.5\nphi = 0.09\nsigma = 0.35\nrho = -0.65\n\
             theta = 0.8\nrate = 0.01\nhorizon = 1.0\nx0 = 1.0\nc = 1.12\n",
        )
        .unwrap();
        assert_eq!(cfg.kernel.shape, KernelShape::Fractional);
        assert_eq!(cfg.solver.n_steps, 500);
        assert_eq!(cfg.simulation.seed, None);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
        assert!(cfg.model2.is_none());
        assert!(cfg.experiment.alphas.is_empty());
        cfg.model.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_loudly() {
        let err = toml::from_str::<RunConfig>(
            "[model]\nv0 = 0.09\nkappa = 1.5\nphi = 0.09\nsigma = 0.35\n\
             rho = -0.65\ntheta = 0.8\nrate = 0.01\nhorizon = 1.0\nx0 = 1.0\n\
             c = 1.12\nvol_of_vol = 0.3\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("vol_of_vol"));
    }

    #[test]
    fn every_preset_parses_and_validates() {
        for name in PRESET_NAMES {
            let cfg: RunConfig = toml::from_str(preset(name).unwrap())
                .unwrap_or_else(|e| panic!("preset {name}: {e}"));
            cfg.model
                .validate()
                .unwrap_or_else(|e| panic!("preset {name}: {e}"));
            cfg.kernel.build().unwrap();
            for &a in &cfg.experiment.alphas {
                cfg.kernel.with_exponent(a).unwrap();
            }
        }
        assert!(preset("fig5").is_none());
    }

    #[test]
    fn step_rate_curves_parse_from_toml() {
        let cfg: RunConfig = toml::from_str(
            "[model]\nv0 = 0.09\nkappa = 1.5\nphi = 0.09\nsigma = 0.35\n\
             rho = -0.65\ntheta = 0.8\nhorizon = 1.0\nx0 = 1.0\nc = 1.12\n\
             rate = { boundaries = [0.5], rates = [0.01, 0.03] }\n",
        )
        .unwrap();
        assert_eq!(cfg.model.rate.value(0.75), 0.03);
        cfg.model.validate().unwrap();
    }

    #[test]
    fn config_digest_tracks_content_not_identity() {
        let a: RunConfig = toml::from_str(preset("default").unwrap()).unwrap();
        let mut b = a.clone();
        assert_eq!(config_digest(&a), config_digest(&b));
        b.solver.n_steps += 1;
        assert_ne!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }

    #[test]
    fn missing_config_and_fig3_give_actionable_errors() {
        let err = load_config(CommandKind::Psi, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("fig1a"));
        let err = load_config(CommandKind::Simulate, Some("fig3")).unwrap_err();
        assert!(err.to_string().contains("two_investor_example"));
        let err = load_config(CommandKind::Psi, Some("no-such-thing")).unwrap_err();
        assert!(err.to_string().contains("preset"));
        // validate falls back to the bundled default
        load_config(CommandKind::Validate, None).unwrap();
    }
}
