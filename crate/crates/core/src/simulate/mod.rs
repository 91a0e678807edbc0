//! Monte Carlo engine: variance paths under the direct convolution scheme
//! and the lifted multi-factor approximation, stock and wealth paths under
//! the optimal control, pathwise forward-variance and scaling-factor
//! updates, and bootstrap summaries.
//!
//! Paths are independent given their RNG substream, which is derived from
//! (seed, path index) alone, so results are bit-identical across thread
//! counts and repeated runs.

mod stats;
mod variance;
mod wealth;

pub use stats::{
    bootstrap_bands, ks_statistic, p_variation, terminal_stats, McSummary, TerminalStats,
};
pub use variance::{
    simulate_variance_lifted, simulate_variance_volterra, LiftedApproximation, VariancePaths,
};
pub use wealth::{simulate_portfolio, update_forward_variance, PathBundle, ResolventLags};
pub(crate) use wealth::simulate_portfolio_impl;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance discretization: the direct convolution march with exact
/// per-cell kernel averages, or the multi-factor exponential approximation
/// of the singular kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    VolterraEuler,
    Lifted,
}

/// Simulation controls. `n_steps * h` spans the model horizon exactly; the
/// seed fully determines every path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Number of exponential factors for the lifted scheme.
    pub lifted_factors: usize,
    /// Geometric ratio between successive factor-cell boundaries, > 1.
    pub lifted_spacing: f64,
    /// Right edge of the first factor cell.
    pub lifted_first_node: f64,
    /// Relative L2 kernel-approximation error (measured on [h, T]) above
    /// which the lifted run is flagged.
    pub lifted_l2_warn: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 1000,
            n_steps: 250,
            seed: 1,
            scheme: Scheme::VolterraEuler,
            lifted_factors: 20,
            lifted_spacing: 2.0,
            lifted_first_node: 0.01,
            lifted_l2_warn: 0.05,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::InvalidParameter(
                "simulation needs at least one path and one step".into(),
            ));
        }
        if self.lifted_factors == 0 {
            return Err(Error::InvalidParameter(
                "the lifted scheme needs at least one factor".into(),
            ));
        }
        if !(self.lifted_spacing > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lifted node spacing must exceed 1, got {}",
                self.lifted_spacing
            )));
        }
        if !(self.lifted_first_node > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "the first lifted cell edge must be positive, got {}",
                self.lifted_first_node
            )));
        }
        if !(self.lifted_l2_warn > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "the lifted approximation warning threshold must be positive, got {}",
                self.lifted_l2_warn
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate_and_reject_degenerates() {
        let cfg = SimConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.n_steps, 250);
        assert!(SimConfig {
            n_paths: 0,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            lifted_spacing: 1.0,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            lifted_first_node: 0.0,
            ..cfg
        }
        .validate()
        .is_err());
    }
}
