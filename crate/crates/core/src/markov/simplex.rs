use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::markov::grid::TimeGrid;

/// Tolerance on the total mass of a distribution over states.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// A probability vector over the `m` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MfgError::InvalidDimension("empty probability vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(MfgError::InvalidInput(format!(
                "weight {i} is {w}, expected a finite nonnegative number"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(MfgError::InvalidInput(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Normalizes a nonnegative vector with positive mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(MfgError::InvalidInput(
                "cannot normalize a vector without positive mass".into(),
            ));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self(weights))
    }

    pub fn vertex(m: usize, i: usize) -> Result<Self> {
        if i >= m {
            return Err(MfgError::OutOfRange {
                what: "state",
                index: i,
                size: m,
            });
        }
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Ok(Self(w))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(MfgError::InvalidDimension("m must be positive".into()));
        }
        Ok(Self(vec![1.0 / m as f64; m]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &SimplexPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l2_distance_sq(&self, other: &SimplexPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Convex combination `(1 - theta) * self + theta * other`.
    pub fn mix(&self, other: &SimplexPoint, theta: f64) -> SimplexPoint {
        let w = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        SimplexPoint(w)
    }

    pub(crate) fn from_raw_unchecked(w: Vec<f64>) -> Self {
        Self(w)
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = MfgError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.0
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Simplex-valued flow on a time grid, interpolated piecewise-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFlow {
    grid: TimeGrid,
    points: Vec<SimplexPoint>,
}

impl SimplexFlow {
    pub fn new(grid: TimeGrid, points: Vec<SimplexPoint>) -> Result<Self> {
        if points.len() != grid.n_nodes() {
            return Err(MfgError::DimensionMismatch {
                expected: grid.n_nodes(),
                got: points.len(),
                context: "simplex flow nodes",
            });
        }
        let m = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != m) {
            return Err(MfgError::DimensionMismatch {
                expected: m,
                got: p.dim(),
                context: "simplex flow state count",
            });
        }
        Ok(Self { grid, points })
    }

    pub fn constant(grid: TimeGrid, p: SimplexPoint) -> Self {
        Self {
            grid,
            points: vec![p; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[SimplexPoint] {
        &self.points
    }

    pub fn node(&self, k: usize) -> &SimplexPoint {
        &self.points[k]
    }

    pub fn terminal(&self) -> &SimplexPoint {
        self.points.last().expect("flow has at least one node")
    }

    /// Linear interpolation between nodes, written into `out`.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let (k, w) = self.grid.locate(t);
        let a = self.points[k].weights();
        let b = self.points[(k + 1).min(self.points.len() - 1)].weights();
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }

    /// Interpolation inside cell `k`, so `t = t_{k+1}` reads node `k + 1` without a lookup.
    pub fn interpolate_in_cell(&self, k: usize, t: f64, out: &mut [f64]) {
        let w = ((t - self.grid.node(k)) / self.grid.dt()).clamp(0.0, 1.0);
        let w = if w.is_finite() { w } else { 0.0 };
        let a = self.points[k].weights();
        let b = self.points[(k + 1).min(self.points.len() - 1)].weights();
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }

    pub fn at(&self, t: f64) -> SimplexPoint {
        let mut out = vec![0.0; self.num_states()];
        self.interpolate_into(t, &mut out);
        SimplexPoint(out)
    }

    /// `sup_k || self_k - other_k ||_1` over grid nodes.
    pub fn sup_l1_distance(&self, other: &SimplexFlow) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.l1_distance(b))
            .fold(0.0, f64::max)
    }

    pub fn mix(&self, other: &SimplexFlow, theta: f64) -> SimplexFlow {
        SimplexFlow {
            grid: self.grid,
            points: self
                .points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| a.mix(b, theta))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_weights() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn flow_interpolates_linearly() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let flow = SimplexFlow::new(
            g,
            vec![
                SimplexPoint::new(vec![1.0, 0.0]).unwrap(),
                SimplexPoint::new(vec![0.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let mid = flow.at(0.25);
        assert!((mid[0] - 0.75).abs() < 1e-15);
        assert!((mid[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mixing_with_unit_weight_is_exact() {
        let a = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        let b = SimplexPoint::new(vec![0.1, 0.9]).unwrap();
        assert_eq!(a.mix(&b, 1.0), b);
    }
}
