use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::markov::generator::{build_reference_generator, RateMatrix, TransitionMask};
use crate::markov::psi::{psi_matrix, seminorm_sq};

pub const MAX_JOINT_DIM: usize = 4096;

/// Product-state index of per-factor states, first factor most significant.
pub fn joint_index(states: &[usize], dims: &[usize]) -> usize {
    states.iter().zip(dims).fold(0, |acc, (&s, &d)| acc * d + s)
}

/// Generator of independent chains run side by side: `sum_n I x .. x Q_n x .. x I`.
pub fn kron_generator(qs: &[RateMatrix]) -> Result<RateMatrix> {
    if qs.len() < 2 {
        return Err(MfgError::InvalidInput(format!(
            "a Kronecker sum needs at least two factors, got {}",
            qs.len()
        )));
    }
    let dims: Vec<usize> = qs.iter().map(|q| q.num_states()).collect();
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&p| p <= MAX_JOINT_DIM))
        .ok_or_else(|| {
            MfgError::InvalidDimension(format!(
                "joint state space {dims:?} exceeds {MAX_JOINT_DIM} states"
            ))
        })?;
    let mut sum = DMatrix::<f64>::zeros(total, total);
    for (n, q) in qs.iter().enumerate() {
        let mut term = DMatrix::<f64>::identity(1, 1);
        for (k, &d) in dims.iter().enumerate() {
            let factor = if k == n {
                q.entries().clone()
            } else {
                DMatrix::identity(d, d)
            };
            term = term.kronecker(&factor);
        }
        sum += term;
    }
    let mut rows = vec![vec![false; total]; total];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, allowed) in row.iter_mut().enumerate() {
            *allowed = i != j && sum[(i, j)] > 0.0;
        }
    }
    let mask = TransitionMask::from_rows(&rows)?;
    RateMatrix::new(sum, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiIdentity {
    /// `z^T psi_joint z` at the joint state.
    pub lhs: f64,
    /// `|(I x X2^T) z|^2_{X1} + |(X1^T x I) z|^2_{X2}`.
    pub rhs: f64,
    /// `max |psi_joint - (psi1 x diag(X2) + diag(X1) x psi2)|` entrywise.
    pub matrix_gap: f64,
}

impl PsiIdentity {
    pub fn holds(&self, tol: f64) -> bool {
        (self.lhs - self.rhs).abs() <= tol * (1.0 + self.lhs.abs()) && self.matrix_gap <= tol
    }
}

/// Both sides of the seminorm splitting for two independent reference chains of sizes
/// `dims` sitting in `states`, evaluated at the joint vector `z`.
pub fn kron_psi_identity(dims: [usize; 2], states: [usize; 2], z: &[f64]) -> Result<PsiIdentity> {
    let [m1, m2] = dims;
    if z.len() != m1 * m2 {
        return Err(MfgError::DimensionMismatch {
            expected: m1 * m2,
            got: z.len(),
            context: "joint vector",
        });
    }
    let q1 = build_reference_generator(m1, None, false)?;
    let q2 = build_reference_generator(m2, None, false)?;
    let joint = kron_generator(&[q1.clone(), q2.clone()])?;
    let x = joint_index(&states, &dims);
    let psi = psi_matrix(x, &joint)?;
    let zv = nalgebra::DVector::from_column_slice(z);
    let lhs = zv.dot(&(&psi * &zv));

    let slice1: Vec<f64> = (0..m1).map(|i| z[i * m2 + states[1]]).collect();
    let slice2: Vec<f64> = (0..m2).map(|j| z[states[0] * m2 + j]).collect();
    let rhs = seminorm_sq(states[0], &slice1)? + seminorm_sq(states[1], &slice2)?;

    let mut e1 = DMatrix::<f64>::zeros(m1, m1);
    e1[(states[0], states[0])] = 1.0;
    let mut e2 = DMatrix::<f64>::zeros(m2, m2);
    e2[(states[1], states[1])] = 1.0;
    let split = psi_matrix(states[0], &q1)?.kronecker(&e2) + e1.kronecker(&psi_matrix(states[1], &q2)?);
    let matrix_gap = (&psi - &split).abs().max();
    Ok(PsiIdentity {
        lhs,
        rhs,
        matrix_gap,
    })
}
