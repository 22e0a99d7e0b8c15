use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Row-sum tolerance for a valid generator.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Off-diagonal admissibility pattern for an `m`-state chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMask {
    m: usize,
    allowed: Vec<bool>,
}

impl TransitionMask {
    pub fn full(m: usize) -> Self {
        let mut allowed = vec![true; m * m];
        for i in 0..m {
            allowed[i * m + i] = false;
        }
        Self { m, allowed }
    }

    /// Builds a mask from rows of booleans. Diagonal entries are ignored.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let m = rows.len();
        let mut allowed = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(MfgError::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                    context: "mask row",
                });
            }
            allowed.extend(row.iter().enumerate().map(|(j, &b)| b && i != j));
        }
        Ok(Self { m, allowed })
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.m + j]
    }

    pub fn exits(&self, i: usize) -> usize {
        (0..self.m).filter(|&j| self.allows(i, j)).count()
    }

    pub fn forbid(&mut self, i: usize, j: usize) {
        self.allowed[i * self.m + j] = false;
    }

    pub fn is_full(&self) -> bool {
        (0..self.m).all(|i| self.exits(i) == self.m - 1)
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.allows(i, j)).collect())
            .collect()
    }
}

/// Generator of a continuous-time Markov chain together with its admissibility mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    entries: DMatrix<f64>,
    mask: TransitionMask,
}

impl RateMatrix {
    /// Wraps a matrix without checking generator properties; see [`validate_generator`].
    pub fn new(entries: DMatrix<f64>, mask: TransitionMask) -> Result<Self> {
        let m = mask.num_states();
        if entries.nrows() != m || entries.ncols() != m {
            return Err(MfgError::DimensionMismatch {
                expected: m,
                got: entries.nrows().max(entries.ncols()),
                context: "rate matrix shape",
            });
        }
        Ok(Self { entries, mask })
    }

    /// Builds a generator from off-diagonal rates; the diagonal is filled so rows sum to zero.
    pub fn from_off_diagonal(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let mut entries = DMatrix::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(MfgError::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                    context: "rate row",
                });
            }
            let mut total = 0.0;
            for (j, &r) in row.iter().enumerate() {
                if i != j {
                    entries[(i, j)] = r;
                    total += r;
                }
            }
            entries[(i, i)] = -total;
        }
        Self::new(entries, TransitionMask::full(m))
    }

    pub fn num_states(&self) -> usize {
        self.mask.num_states()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mask(&self) -> &TransitionMask {
        &self.mask
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Total exit rate `-Q_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.entries[(i, i)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }
}

/// Reference generator: rate 1 on admissible transitions, 0 elsewhere.
pub fn build_reference_generator(
    m: usize,
    mask: Option<&TransitionMask>,
    absorbing_allowed: bool,
) -> Result<RateMatrix> {
    if m < 2 {
        return Err(MfgError::InvalidDimension(format!(
            "a chain needs at least 2 states, got {m}"
        )));
    }
    let mask = match mask {
        Some(mk) if mk.num_states() != m => {
            return Err(MfgError::DimensionMismatch {
                expected: m,
                got: mk.num_states(),
                context: "mask size",
            })
        }
        Some(mk) => mk.clone(),
        None => TransitionMask::full(m),
    };
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        let exits = mask.exits(i);
        if exits == 0 && !absorbing_allowed {
            return Err(MfgError::InvalidInput(format!(
                "state {} has no admissible exit and absorbing states are not allowed",
                i + 1
            )));
        }
        for j in 0..m {
            if mask.allows(i, j) {
                entries[(i, j)] = 1.0;
            }
        }
        entries[(i, i)] = -(exits as f64);
    }
    RateMatrix::new(entries, mask)
}

/// A single failed generator check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeneratorViolation {
    NegativeRate { i: usize, j: usize, rate: f64 },
    MaskedNonzero { i: usize, j: usize, rate: f64 },
    RowSum { i: usize, sum: f64 },
    BelowLowerBound { i: usize, j: usize, rate: f64 },
    AboveUpperBound { i: usize, j: usize, rate: f64 },
    NonFinite { i: usize, j: usize },
}

/// Checks sign, mask, row-sum and rate-bound conditions; an empty list means valid.
///
/// Bounds are checked as `C1 <= q <= C2` on admissible entries.
pub fn validate_generator(q: &RateMatrix, c1: f64, c2: f64) -> Vec<GeneratorViolation> {
    let m = q.num_states();
    let mut out = Vec::new();
    for i in 0..m {
        let mut sum = 0.0;
        for j in 0..m {
            let r = q.rate(i, j);
            if !r.is_finite() {
                out.push(GeneratorViolation::NonFinite { i, j });
                continue;
            }
            sum += r;
            if i == j {
                continue;
            }
            if r < 0.0 {
                out.push(GeneratorViolation::NegativeRate { i, j, rate: r });
            }
            if !q.mask().allows(i, j) {
                if r != 0.0 {
                    out.push(GeneratorViolation::MaskedNonzero { i, j, rate: r });
                }
                continue;
            }
            if r < c1 {
                out.push(GeneratorViolation::BelowLowerBound { i, j, rate: r });
            }
            if r > c2 {
                out.push(GeneratorViolation::AboveUpperBound { i, j, rate: r });
            }
        }
        if sum.is_finite() && sum.abs() > ROW_SUM_TOL {
            out.push(GeneratorViolation::RowSum { i, sum });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_generator_unmasked() {
        let q = build_reference_generator(3, None, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -2.0 } else { 1.0 };
                assert_eq!(q.rate(i, j), want);
            }
        }
        let q2 = build_reference_generator(2, None, false).unwrap();
        assert_eq!(q2.row(0), vec![-1.0, 1.0]);
        assert_eq!(q2.row(1), vec![1.0, -1.0]);
    }

    #[test]
    fn reference_generator_masked_row() {
        let mut mask = TransitionMask::full(3);
        mask.forbid(0, 2);
        let q = build_reference_generator(3, Some(&mask), false).unwrap();
        assert_eq!(q.row(0), vec![-1.0, 1.0, 0.0]);
        assert_eq!(q.row(1), vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn absorbing_state_needs_flag() {
        let mut mask = TransitionMask::full(2);
        mask.forbid(1, 0);
        assert!(build_reference_generator(2, Some(&mask), false).is_err());
        let q = build_reference_generator(2, Some(&mask), true).unwrap();
        assert_eq!(q.row(1), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_single_state() {
        assert!(matches!(
            build_reference_generator(1, None, false),
            Err(MfgError::InvalidDimension(_))
        ));
    }

    #[test]
    fn validation_reports() {
        let q = build_reference_generator(3, None, false).unwrap();
        assert!(validate_generator(&q, 0.5, 2.0).is_empty());

        let bad_sum = RateMatrix::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.1, 1.0, -1.0]),
            TransitionMask::full(2),
        )
        .unwrap();
        let rep = validate_generator(&bad_sum, 0.5, 2.0);
        assert!(rep
            .iter()
            .any(|v| matches!(v, GeneratorViolation::RowSum { i: 0, .. })));

        let neg = RateMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.2, -0.2, 1.0, -1.0]),
            TransitionMask::full(2),
        )
        .unwrap();
        let rep = validate_generator(&neg, 0.0, 2.0);
        assert!(rep
            .iter()
            .any(|v| matches!(v, GeneratorViolation::NegativeRate { i: 0, j: 1, .. })));
    }
}
