//! Quadratic-variation matrices of the compensated jump martingale.
//!
//! For the chain sitting in state `i`, `psi(i) = diag(Q0 e_i) - Q0 diag(e_i) - diag(e_i) Q0`.
//! Its quadratic form is the seminorm `sum_{j != i} (z_j - z_i)^2` in the unmasked case.

use nalgebra::{DMatrix, DVector};

use crate::error::{MfgError, Result};
use crate::markov::generator::RateMatrix;

fn check_state(i: usize, m: usize) -> Result<()> {
    if i >= m {
        return Err(MfgError::OutOfRange {
            what: "state",
            index: i,
            size: m,
        });
    }
    Ok(())
}

pub fn psi_matrix(i: usize, q0: &RateMatrix) -> Result<DMatrix<f64>> {
    let m = q0.num_states();
    check_state(i, m)?;
    let q = q0.entries();
    let mut psi = DMatrix::zeros(m, m);
    for k in 0..m {
        psi[(k, k)] += q[(k, i)];
        psi[(k, i)] -= q[(k, i)];
        psi[(i, k)] -= q[(i, k)];
    }
    Ok(psi)
}

/// `sum_{j != i} (z_j - z_i)^2`.
pub fn seminorm_sq(i: usize, z: &[f64]) -> Result<f64> {
    check_state(i, z.len())?;
    let zi = z[i];
    Ok(z.iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, zj)| (zj - zi) * (zj - zi))
        .sum())
}

/// `z^T psi z` for an arbitrary (possibly masked) reference generator.
pub fn psi_quadratic_form(i: usize, q0: &RateMatrix, z: &[f64]) -> Result<f64> {
    let m = q0.num_states();
    if z.len() != m {
        return Err(MfgError::DimensionMismatch {
            expected: m,
            got: z.len(),
            context: "seminorm vector",
        });
    }
    let psi = psi_matrix(i, q0)?;
    let v = DVector::from_column_slice(z);
    Ok(v.dot(&(&psi * &v)))
}

/// Closed-form `psi^+ (e_j - e_i)` for the unmasked reference chain:
/// `((m-1)/m) e_j - sum_{k != j} (1/m) e_k`.
pub fn psi_pinv_apply(i: usize, j: usize, m: usize) -> Result<Vec<f64>> {
    check_state(i, m)?;
    check_state(j, m)?;
    if i == j {
        return Err(MfgError::Degenerate(
            "jump direction e_j - e_i vanishes for i = j".into(),
        ));
    }
    let mf = m as f64;
    let mut v = vec![-1.0 / mf; m];
    v[j] = (mf - 1.0) / mf;
    Ok(v)
}

/// Moore-Penrose pseudo-inverse of `psi(i)` by SVD; used for masked generators and as an oracle.
pub fn psi_pinv(i: usize, q0: &RateMatrix) -> Result<DMatrix<f64>> {
    let psi = psi_matrix(i, q0)?;
    psi.pseudo_inverse(1e-12)
        .map_err(|e| MfgError::Degenerate(format!("pseudo-inverse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::generator::build_reference_generator;

    #[test]
    fn psi_three_states() {
        let q0 = build_reference_generator(3, None, false).unwrap();
        let psi = psi_matrix(0, &q0).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 1., 0., -1., 0., 1.]);
        assert_eq!(psi, want);
        for i in 0..3 {
            let p = psi_matrix(i, &q0).unwrap();
            assert_eq!(p.transpose(), p);
            let ones = DVector::from_element(3, 1.0);
            assert_eq!(&p * ones, DVector::zeros(3));
        }
    }

    #[test]
    fn psi_two_states() {
        let q0 = build_reference_generator(2, None, false).unwrap();
        let psi = psi_matrix(0, &q0).unwrap();
        assert_eq!(psi, DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]));
    }

    #[test]
    fn seminorm_examples() {
        assert_eq!(seminorm_sq(0, &[1., 2., 3.]).unwrap(), 5.0);
        assert_eq!(seminorm_sq(1, &[0., 1., 0.]).unwrap(), 2.0);
        assert_eq!(seminorm_sq(2, &[4., 4., 4.]).unwrap(), 0.0);
        assert!(seminorm_sq(3, &[0., 1., 0.]).is_err());
    }

    #[test]
    fn pinv_examples() {
        let v = psi_pinv_apply(0, 1, 3).unwrap();
        let want = [-1. / 3., 2. / 3., -1. / 3.];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(psi_pinv_apply(0, 1, 2).unwrap(), vec![-0.5, 0.5]);
        assert!(matches!(
            psi_pinv_apply(1, 1, 3),
            Err(MfgError::Degenerate(_))
        ));
    }

    #[test]
    fn closed_form_pinv_matches_svd() {
        let q0 = build_reference_generator(4, None, false).unwrap();
        for i in 0..4 {
            let pinv = psi_pinv(i, &q0).unwrap();
            for j in (0..4).filter(|&j| j != i) {
                let mut d = DVector::zeros(4);
                d[j] = 1.0;
                d[i] = -1.0;
                let svd = &pinv * d;
                let closed = psi_pinv_apply(i, j, 4).unwrap();
                for k in 0..4 {
                    assert!((svd[k] - closed[k]).abs() < 1e-12);
                }
            }
        }
    }
}
