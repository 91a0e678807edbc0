//! The mean-variance layer: model parameters, forward variance curves,
//! moment functionals of the integrated variance, and the closed-form
//! optimal strategy with its efficient frontier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod forward;
pub mod moments;
pub mod mv;

pub use forward::{xi0, ForwardVarianceCurve};
pub use moments::{
    admissibility_constant, check_assumption_v, exp_moment, exp_moment_forms, exp_moment_with, m0,
    m0_forms, m_t, AssumptionVerdict, ExpMoment,
};
pub use mv::{
    efficient_frontier, psi_resolvent_identity_residual, solve_mv, solve_mv_with, FrontierCurve,
    MVSolution,
};

/// Deterministic short rate, constant or piecewise constant in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateCurve {
    Constant(f64),
    /// Right-continuous step function: `rates[i]` applies on
    /// [boundaries[i-1], boundaries[i]), with an implicit leading boundary
    /// at 0 and a trailing one at infinity, so `rates` has one more entry
    /// than `boundaries`.
    Step {
        boundaries: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl RateCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateCurve::Constant(r) => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "short rate must be a positive finite number, got {r}"
                    )));
                }
            }
            RateCurve::Step { boundaries, rates } => {
                if rates.len() != boundaries.len() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "step rate needs one more rate ({}) than boundaries ({})",
                        rates.len(),
                        boundaries.len()
                    )));
                }
                if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "step rates must be positive finite numbers".into(),
                    ));
                }
                let mut prev = 0.0;
                for &b in boundaries {
                    if !(b.is_finite() && b > prev) {
                        return Err(Error::InvalidParameter(
                            "rate boundaries must be strictly increasing and positive".into(),
                        ));
                    }
                    prev = b;
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            RateCurve::Constant(r) => *r,
            RateCurve::Step { boundaries, rates } => {
                let idx = boundaries.partition_point(|&b| b <= t);
                rates[idx]
            }
        }
    }

    /// Exact integral of the rate over [from, to].
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        debug_assert!(from <= to);
        match self {
            RateCurve::Constant(r) => r * (to - from),
            RateCurve::Step { boundaries, rates } => {
                let mut acc = 0.0;
                let mut lo = from;
                for (i, &b) in boundaries.iter().enumerate() {
                    if b <= lo {
                        continue;
                    }
                    if b >= to {
                        break;
                    }
                    acc += rates[i] * (b - lo);
                    lo = b;
                }
                let idx = boundaries.partition_point(|&b| b <= lo);
                acc + rates[idx] * (to - lo)
            }
        }
    }
}

/// Market and preference parameters of the mean-variance problem.
///
/// `c` is the target expected terminal wealth; feasibility requires it to
/// be at least the risk-free roll-up of the initial wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub v0: f64,
    pub kappa: f64,
    pub phi: f64,
    pub sigma: f64,
    pub rho: f64,
    pub theta: f64,
    pub rate: RateCurve,
    pub horizon: f64,
    pub x0: f64,
    pub c: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool); 8] = [
            ("v0 must be >= 0", self.v0.is_finite() && self.v0 >= 0.0),
            ("kappa must be > 0", self.kappa.is_finite() && self.kappa > 0.0),
            ("phi must be > 0", self.phi.is_finite() && self.phi > 0.0),
            ("sigma must be > 0", self.sigma.is_finite() && self.sigma > 0.0),
            (
                "rho must lie in [-1, 1]",
                self.rho.is_finite() && (-1.0..=1.0).contains(&self.rho),
            ),
            ("theta must be nonzero", self.theta.is_finite() && self.theta != 0.0),
            (
                "horizon must be > 0",
                self.horizon.is_finite() && self.horizon > 0.0,
            ),
            ("x0 must be > 0", self.x0.is_finite() && self.x0 > 0.0),
        ];
        for (msg, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter(msg.into()));
            }
        }
        self.rate.validate()?;
        let floor = self.x0 * self.rate.integral(0.0, self.horizon).exp();
        if !(self.c.is_finite() && self.c >= floor * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "target wealth c = {} must be at least the risk-free roll-up {floor}",
                self.c
            )));
        }
        Ok(())
    }

    /// Mean-reversion speed under the variance-optimal measure change.
    pub fn lambda(&self) -> f64 {
        self.kappa + 2.0 * self.theta * self.rho * self.sigma
    }

    /// The correlation weight 1 - 2 rho^2 deciding the solvability case of
    /// the strategy equation.
    pub fn correlation_weight(&self) -> f64 {
        1.0 - 2.0 * self.rho * self.rho
    }

    /// Integral of the short rate over [from, to], exact for the supported
    /// rate shapes.
    pub fn rate_integral(&self, from: f64, to: f64) -> f64 {
        self.rate.integral(from, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_params() -> ModelParams {
        ModelParams {
            v0: 0.04,
            kappa: 0.5,
            phi: 0.04,
            sigma: 0.3,
            rho: -0.7,
            theta: 0.5,
            rate: RateCurve::Constant(0.01),
            horizon: 1.0,
            x0: 1.0,
            c: 1.2,
        }
    }

    #[test]
    fn validation_accepts_base_and_rejects_bad_fields() {
        base_params().validate().unwrap();
        let mut p = base_params();
        p.theta = 0.0;
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.rho = -1.2;
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.c = 1.0;
        assert!(p.validate().is_err(), "target below risk-free roll-up");
        let mut p = base_params();
        p.v0 = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn step_rate_integrates_exactly() {
        let r = RateCurve::Step {
            boundaries: vec![0.5, 1.0],
            rates: vec![0.02, 0.04, 0.01],
        };
        r.validate().unwrap();
        assert!((r.integral(0.0, 2.0) - (0.01 + 0.02 + 0.01)).abs() < 1e-16);
        assert!((r.integral(0.25, 0.75) - (0.25 * 0.02 + 0.25 * 0.04)).abs() < 1e-16);
        assert_eq!(r.value(0.0), 0.02);
        assert_eq!(r.value(0.5), 0.04);
        assert_eq!(r.value(3.0), 0.01);
        let bad = RateCurve::Step {
            boundaries: vec![1.0, 0.5],
            rates: vec![0.02, 0.04, 0.01],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lambda_matches_definition() {
        let p = base_params();
        assert!((p.lambda() - (0.5 + 2.0 * 0.5 * (-0.7) * 0.3)).abs() < 1e-16);
        assert!((p.correlation_weight() - (1.0 - 2.0 * 0.49)).abs() < 1e-15);
    }
}
