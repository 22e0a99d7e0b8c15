use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Axis-aligned box `A = prod_k [lower_k, upper_k]` of admissible controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Slack allowed when testing membership, to absorb rounding in projections.
pub const BOX_TOL: f64 = 1e-12;

impl ControlBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(MfgError::InvalidDimension("control dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(MfgError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
                context: "control box bounds",
            });
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(MfgError::InvalidInput(format!(
                    "control box side {k} is [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim()
            && a.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= lo - BOX_TOL && *x <= hi + BOX_TOL)
    }

    pub fn check(&self, a: &[f64]) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(MfgError::ControlOutsideBox { control: a.to_vec() })
        }
    }

    pub fn project(&self, a: &mut [f64]) {
        for (x, (lo, hi)) in a.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// All `2^l` corners, lexicographically with lower before upper in each coordinate.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let l = self.dim();
        (0..1usize << l)
            .map(|mask| {
                (0..l)
                    .map(|k| {
                        if mask >> (l - 1 - k) & 1 == 1 {
                            self.upper[k]
                        } else {
                            self.lower[k]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Point at fractions `u_k in [0, 1]` along each side.
    pub fn point_at(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (lo, hi))| lo + u.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_projection() {
        let b = ControlBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            b.corners(),
            vec![vec![0.0, -1.0], vec![0.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );
        let mut a = vec![2.0, -3.0];
        b.project(&mut a);
        assert_eq!(a, vec![1.0, -1.0]);
        assert!(b.contains(&a));
        assert!(!b.contains(&[1.5, 0.0]));
    }

    #[test]
    fn rejects_inverted_sides() {
        assert!(ControlBox::interval(1.0, 0.0).is_err());
        assert!(ControlBox::new(vec![], vec![]).is_err());
    }
}
