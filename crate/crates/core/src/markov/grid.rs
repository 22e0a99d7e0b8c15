use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Uniform time grid `t_k = k * dt` on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(MfgError::InvalidInput(format!(
                "horizon must be finite and nonnegative, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(MfgError::InvalidInput("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Default resolution: 1000 steps up to T = 2, then 500 per unit time.
    pub fn with_default_steps(horizon: f64) -> Result<Self> {
        let n = if horizon <= 2.0 {
            1000
        } else {
            (500.0 * horizon).ceil() as usize
        };
        Self::new(horizon, n)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }

    /// Index of the cell `[t_k, t_{k+1})` containing `t`; the last cell is closed.
    pub fn cell_of(&self, t: f64) -> usize {
        if self.horizon == 0.0 {
            return 0;
        }
        let s = (t / self.dt()).floor();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_steps - 1)
        }
    }

    /// Cell index and the linear weight of the right node for interpolation at `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let k = self.cell_of(t);
        if self.horizon == 0.0 {
            return (0, 0.0);
        }
        let w = ((t - self.node(k)) / self.dt()).clamp(0.0, 1.0);
        (k, w)
    }

    pub(crate) fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps && (self.horizon - other.horizon).abs() <= 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform_and_end_at_horizon() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.dt(), 0.5);
    }

    #[test]
    fn cell_lookup_conventions() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.25), 2);
        assert_eq!(g.cell_of(1.0), 9);
        let (k, w) = g.locate(0.25);
        assert_eq!(k, 2);
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 3).is_err());
        assert!(TimeGrid::new(f64::NAN, 3).is_err());
    }
}
