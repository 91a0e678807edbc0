//! Uniform time grid shared by the solver, portfolio, and simulation layers.

use crate::error::{Error, Result};

/// Uniform grid t_i = i * h on [0, t_max] with h = t_max / n_steps.
///
/// Holds `n_steps + 1` nodes including both endpoints. All sampled curves in
/// this crate are indexed against a `Grid`; closed-form paths never
/// interpolate, so an off-grid time is a domain error rather than a lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_max: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid horizon must be positive and finite, got {t_max}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one step".into(),
            ));
        }
        Ok(Grid { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_steps);
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Index of a node equal to `t` up to a relative tolerance of 1e-9 * t_max.
    /// Off-grid times are rejected; sampled curves are never interpolated.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let h = self.h();
        let i = (t / h).round();
        if i < 0.0 || i > self.n_steps as f64 || (t - i * h).abs() > 1e-9 * self.t_max {
            return Err(Error::Domain(format!(
                "t = {t} is not a node of the grid [0, {}] with {} steps",
                self.t_max, self.n_steps
            )));
        }
        Ok(i as usize)
    }

    /// Grid on the same span with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Grid {
        Grid {
            t_max: self.t_max,
            n_steps: self.n_steps * factor.max(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_lookup() {
        let g = Grid::new(2.0, 8).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.index_of(0.75).unwrap(), 3);
        assert_eq!(g.index_of(2.0).unwrap(), 8);
        assert!(g.index_of(0.3).is_err());
        assert!(g.index_of(-0.25).is_err());
        assert!(g.index_of(2.25).is_err());
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(-1.0, 10).is_err());
        assert!(Grid::new(1.0, 0).is_err());
        assert!(Grid::new(f64::NAN, 10).is_err());
    }
}
