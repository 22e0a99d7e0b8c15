use nalgebra::{DMatrix, DVector};

use crate::error::{MfgError, Result};
use crate::markov::generator::RateMatrix;
use crate::markov::grid::TimeGrid;
use crate::markov::simplex::{SimplexFlow, SimplexPoint};
use crate::markov::simulate::RateField;

/// Negative weights down to this level are clipped after each step.
pub const CLIP_TOL: f64 = 1e-10;

/// `dp/dt = Q(t)^T p` evaluated into `out`.
fn kolmogorov_rhs(
    field: &dyn RateField,
    cell: usize,
    t: f64,
    p: &[f64],
    rates: &mut [f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &pi) in p.iter().enumerate() {
        field.rates_in_cell(cell, t, i, rates);
        for (j, &r) in rates.iter().enumerate() {
            if j != i {
                let flux = pi * r;
                out[j] += flux;
                out[i] -= flux;
            }
        }
    }
}

/// Clips tiny negatives and renormalizes; fails below `-CLIP_TOL`.
pub(crate) fn project_to_simplex(t: f64, w: &mut [f64]) -> Result<()> {
    for (state, x) in w.iter_mut().enumerate() {
        if *x < -CLIP_TOL || !x.is_finite() {
            return Err(MfgError::StepSize {
                time: t,
                state,
                weight: *x,
            });
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// Classical RK4 integration of the forward equation on `grid`.
pub fn forward_flow(field: &dyn RateField, p0: &SimplexPoint, grid: TimeGrid) -> Result<SimplexFlow> {
    let m = field.num_states();
    if p0.dim() != m {
        return Err(MfgError::DimensionMismatch {
            expected: m,
            got: p0.dim(),
            context: "initial distribution",
        });
    }
    let dt = grid.dt();
    let mut points = Vec::with_capacity(grid.n_nodes());
    points.push(p0.clone());
    let mut p = p0.weights().to_vec();
    let mut rates = vec![0.0; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for k in 0..grid.n_steps() {
        let t = grid.node(k);
        let th = t + 0.5 * dt;
        let t1 = grid.node(k + 1);
        kolmogorov_rhs(field, k, t, &p, &mut rates, &mut k1);
        for s in 0..m {
            tmp[s] = p[s] + 0.5 * dt * k1[s];
        }
        kolmogorov_rhs(field, k, th, &tmp, &mut rates, &mut k2);
        for s in 0..m {
            tmp[s] = p[s] + 0.5 * dt * k2[s];
        }
        kolmogorov_rhs(field, k, th, &tmp, &mut rates, &mut k3);
        for s in 0..m {
            tmp[s] = p[s] + dt * k3[s];
        }
        kolmogorov_rhs(field, k, t1, &tmp, &mut rates, &mut k4);
        for s in 0..m {
            p[s] += dt / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
        }
        project_to_simplex(t1, &mut p)?;
        points.push(SimplexPoint::from_raw_unchecked(p.clone()));
    }
    SimplexFlow::new(grid, points)
}

/// `exp(t Q^T) p0` by nalgebra's Padé scaling-and-squaring; a test oracle for constant generators.
pub fn matexp_marginal(q: &RateMatrix, p0: &SimplexPoint, t: f64) -> SimplexPoint {
    let a: DMatrix<f64> = q.entries().transpose() * t;
    let v = a.exp() * DVector::from_column_slice(p0.weights());
    let mut w: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    SimplexPoint::from_raw_unchecked(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::generator::build_reference_generator;
    use crate::markov::simulate::ConstantRates;

    #[test]
    fn two_state_closed_form() {
        let q = build_reference_generator(2, None, false).unwrap();
        let p0 = SimplexPoint::vertex(2, 0).unwrap();
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let flow = forward_flow(&ConstantRates::new(q.clone()), &p0, grid).unwrap();
        let want = 0.5 + 0.5 * (-2.0f64).exp();
        assert!((flow.terminal()[0] - want).abs() < 1e-6);
        let me = matexp_marginal(&q, &p0, 1.0);
        assert!((me[0] - want).abs() < 1e-12);
        assert!((me[1] - (1.0 - want)).abs() < 1e-12);
    }

    #[test]
    fn stationary_start_stays_put() {
        let q = build_reference_generator(3, None, false).unwrap();
        let p0 = SimplexPoint::uniform(3).unwrap();
        let flow = forward_flow(&ConstantRates::new(q), &p0, TimeGrid::new(2.0, 50).unwrap()).unwrap();
        for p in flow.points() {
            assert!(p.l1_distance(&p0) < 1e-14);
        }
    }

    #[test]
    fn matexp_limits() {
        let q = build_reference_generator(3, None, false).unwrap();
        let p0 = SimplexPoint::vertex(3, 2).unwrap();
        assert!(matexp_marginal(&q, &p0, 0.0).l1_distance(&p0) < 1e-15);
        let far = matexp_marginal(&q, &p0, 50.0);
        assert!(far.l1_distance(&SimplexPoint::uniform(3).unwrap()) < 1e-12);
    }
}
