//! Hamiltonians `H_i(t,z,a,p,nu) = f(t,i,a,p,nu) + sum_{j != i} (z_j - z_i)(q_ij - q0_ij)`
//! and their minimization over the control box.
//!
//! Because rates are affine in the control, `a -> H_i` equals
//! `f0(t,i,a,p) + tilt . a` plus terms free of `a`, where
//! `tilt = sum_{j != i} (z_j - z_i) q1(t,i,j,p)`. The minimizer therefore never
//! sees `nu`.

use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::measures::{ControlBox, DiscreteMeasure};
use crate::model::spec::ProblemSpec;

pub const PGD_MAX_ITER: usize = 200;
pub const PGD_TOL: f64 = 1e-10;
pub const TIE_TOL: f64 = 1e-9;
const GOLDEN_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianEval {
    pub value: f64,
    pub gradient_alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    ClosedForm,
    ProjectedGradient,
}

/// Result of minimizing a Hamiltonian in the control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimizer {
    pub alpha: Vec<f64>,
    /// `H_i` at `alpha`; NaN when no `nu` was supplied.
    pub h_min: f64,
    pub strategy: Strategy,
    pub converged: bool,
    /// Two box corners tie for the minimum within [`TIE_TOL`].
    pub near_tie: bool,
}

fn coupling(spec: &ProblemSpec, t: f64, i: usize, z: &[f64], a: &[f64], p: &[f64], nu: &DiscreteMeasure) -> f64 {
    let zi = z[i];
    (0..spec.num_states())
        .filter(|&j| spec.admissible(i, j))
        .map(|j| (z[j] - zi) * (spec.rate(t, i, j, a, p, nu) - spec.ref_rate(i, j)))
        .sum()
}

fn check_args(spec: &ProblemSpec, i: usize, z: &[f64], p: &[f64]) -> Result<()> {
    let m = spec.num_states();
    if i >= m {
        return Err(MfgError::OutOfRange {
            what: "state",
            index: i,
            size: m,
        });
    }
    if z.len() != m {
        return Err(MfgError::DimensionMismatch {
            expected: m,
            got: z.len(),
            context: "value vector z",
        });
    }
    if p.len() != m {
        return Err(MfgError::DimensionMismatch {
            expected: m,
            got: p.len(),
            context: "state distribution p",
        });
    }
    Ok(())
}

pub fn hamiltonian(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    z: &[f64],
    alpha: &[f64],
    p: &[f64],
    nu: &DiscreteMeasure,
) -> Result<f64> {
    check_args(spec, i, z, p)?;
    spec.control_box().check(alpha)?;
    Ok(spec.running_cost(t, i, alpha, p, nu) + coupling(spec, t, i, z, alpha, p, nu))
}

/// Value and control gradient of `H_i`.
pub fn hamiltonian_eval(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    z: &[f64],
    alpha: &[f64],
    p: &[f64],
    nu: &DiscreteMeasure,
) -> Result<HamiltonianEval> {
    let value = hamiltonian(spec, t, i, z, alpha, p, nu)?;
    let l = spec.control_dim();
    let mut gradient_alpha = vec![0.0; l];
    spec.control_cost().gradient(t, i, alpha, p, &mut gradient_alpha);
    let tilt = control_tilt(spec, t, i, z, p);
    for (g, s) in gradient_alpha.iter_mut().zip(tilt) {
        *g += s;
    }
    Ok(HamiltonianEval {
        value,
        gradient_alpha,
    })
}

/// `sum_{j != i} (z_j - z_i) q1(t,i,j,p)` over admissible `j`.
pub fn control_tilt(spec: &ProblemSpec, t: f64, i: usize, z: &[f64], p: &[f64]) -> Vec<f64> {
    let l = spec.control_dim();
    let mut tilt = vec![0.0; l];
    let mut s = vec![0.0; l];
    for j in 0..spec.num_states() {
        if !spec.admissible(i, j) {
            continue;
        }
        let dz = z[j] - z[i];
        if dz == 0.0 {
            continue;
        }
        spec.rate_model().slope(t, i, j, p, &mut s);
        for (a, b) in tilt.iter_mut().zip(&s) {
            *a += dz * b;
        }
    }
    tilt
}

pub(crate) struct TiltedMin {
    pub alpha: Vec<f64>,
    pub strategy: Strategy,
    pub converged: bool,
    pub near_tie: bool,
}

fn tilted_objective(spec: &ProblemSpec, t: f64, i: usize, p: &[f64], tilt: &[f64], a: &[f64]) -> f64 {
    spec.control_cost().value(t, i, a, p) + tilt.iter().zip(a).map(|(x, y)| x * y).sum::<f64>()
}

/// Minimizes `f0(t,i,.,p) + tilt . a` over the box.
pub(crate) fn minimize_tilted(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    p: &[f64],
    tilt: &[f64],
) -> Result<TiltedMin> {
    minimize_tilted_with(spec, t, i, p, tilt, false)
}

fn minimize_tilted_with(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    p: &[f64],
    tilt: &[f64],
    force_numeric: bool,
) -> Result<TiltedMin> {
    let bx = spec.control_box();
    let l = bx.dim();
    let mut alpha = vec![0.0; l];
    let f0 = spec.control_cost();
    let (strategy, converged) =
        if !force_numeric && f0.argmin_with_tilt(t, i, p, tilt, bx, &mut alpha) {
            (Strategy::ClosedForm, true)
        } else {
            let obj = |a: &[f64]| tilted_objective(spec, t, i, p, tilt, a);
            let grad = |a: &[f64], out: &mut [f64]| {
                f0.gradient(t, i, a, p, out);
                for (o, s) in out.iter_mut().zip(tilt) {
                    *o += s;
                }
            };
            let x0: Vec<f64> = bx.point_at(&vec![0.5; l]);
            let (x, conv) = projected_gradient(&obj, &grad, bx, x0);
            alpha = x;
            (Strategy::ProjectedGradient, conv)
        };
    if alpha.iter().any(|x| !x.is_finite()) {
        return Err(MfgError::Minimizer {
            time: t,
            state: i,
            reason: format!("non-finite minimizer {alpha:?}"),
        });
    }
    let near_tie = corner_tie(spec, t, i, p, tilt, &mut alpha);
    Ok(TiltedMin {
        alpha,
        strategy,
        converged,
        near_tie,
    })
}

/// Flags two corners tying for the minimum; on a tie the lexicographically smallest corner wins.
fn corner_tie(spec: &ProblemSpec, t: f64, i: usize, p: &[f64], tilt: &[f64], alpha: &mut Vec<f64>) -> bool {
    let bx = spec.control_box();
    if bx.dim() > 4 {
        return false;
    }
    let best = tilted_objective(spec, t, i, p, tilt, alpha);
    let corners = bx.corners();
    let vals: Vec<f64> = corners
        .iter()
        .map(|c| tilted_objective(spec, t, i, p, tilt, c))
        .collect();
    let scale = 1.0 + best.abs();
    let tied: Vec<usize> = (0..corners.len())
        .filter(|&k| (vals[k] - best).abs() <= TIE_TOL * scale)
        .collect();
    if tied.len() < 2 {
        return false;
    }
    log::warn!(
        "hamiltonian minimizer not unique at t={t}, state {}: {} box corners tie",
        i + 1,
        tied.len()
    );
    *alpha = corners[tied[0]].clone();
    true
}

/// Projected gradient descent with backtracking, then a guarded per-coordinate golden-section polish.
///
/// Returns the iterate and whether the projected-gradient residual fell below [`PGD_TOL`].
pub fn projected_gradient(
    obj: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64], &mut [f64]),
    bx: &ControlBox,
    mut x: Vec<f64>,
) -> (Vec<f64>, bool) {
    let l = x.len();
    bx.project(&mut x);
    let mut g = vec![0.0; l];
    let mut gy = vec![0.0; l];
    let mut y = vec![0.0; l];
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..PGD_MAX_ITER {
        grad(&x, &mut g);
        for k in 0..l {
            y[k] = x[k] - g[k];
        }
        bx.project(&mut y);
        let residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if residual < PGD_TOL {
            converged = true;
            break;
        }
        // Backtrack on the local Lipschitz estimate of the gradient; unlike a
        // function-value test it stays meaningful once the decrease is below rounding.
        let mut accepted = false;
        while step > 1e-20 {
            for k in 0..l {
                y[k] = x[k] - step * g[k];
            }
            bx.project(&mut y);
            grad(&y, &mut gy);
            let mut dx = 0.0;
            let mut dg = 0.0;
            for k in 0..l {
                dx += (y[k] - x[k]) * (y[k] - x[k]);
                dg += (gy[k] - g[k]) * (gy[k] - g[k]);
            }
            if step * dg.sqrt() <= dx.sqrt() * (1.0 + 1e-12) {
                x.copy_from_slice(&y);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    if !converged {
        let mut fx = obj(&x);
        golden_polish(obj, bx, &mut x, &mut fx);
    }
    (x, converged)
}

fn golden_polish(obj: &dyn Fn(&[f64]) -> f64, bx: &ControlBox, x: &mut [f64], fx: &mut f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut trial = x.to_vec();
    for k in 0..x.len() {
        let (mut a, mut b) = (bx.lower()[k], bx.upper()[k]);
        let eval = |v: f64, trial: &mut Vec<f64>| {
            trial[k] = v;
            obj(trial)
        };
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = eval(c, &mut trial);
        let mut fd = eval(d, &mut trial);
        for _ in 0..GOLDEN_ITERS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = eval(c, &mut trial);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = eval(d, &mut trial);
            }
        }
        let v = 0.5 * (a + b);
        let fv = eval(v, &mut trial);
        if fv < *fx {
            x[k] = v;
            *fx = fv;
        } else {
            trial[k] = x[k];
        }
    }
}

/// Optimal feedback `a_hat(t, i, z, p)`; `h_min` is left as NaN.
pub fn optimal_control(spec: &ProblemSpec, t: f64, i: usize, z: &[f64], p: &[f64]) -> Result<Minimizer> {
    check_args(spec, i, z, p)?;
    let tilt = control_tilt(spec, t, i, z, p);
    let r = minimize_tilted(spec, t, i, p, &tilt)?;
    Ok(Minimizer {
        alpha: r.alpha,
        h_min: f64::NAN,
        strategy: r.strategy,
        converged: r.converged,
        near_tie: r.near_tie,
    })
}

/// Minimizer and minimum of `H_i` over the control box.
pub fn minimize_hamiltonian(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    z: &[f64],
    p: &[f64],
    nu: &DiscreteMeasure,
) -> Result<Minimizer> {
    let mut r = optimal_control(spec, t, i, z, p)?;
    r.h_min = spec.running_cost(t, i, &r.alpha, p, nu) + coupling(spec, t, i, z, &r.alpha, p, nu);
    Ok(r)
}

/// As [`minimize_hamiltonian`] but always through projected gradient descent.
pub fn minimize_hamiltonian_numeric(
    spec: &ProblemSpec,
    t: f64,
    i: usize,
    z: &[f64],
    p: &[f64],
    nu: &DiscreteMeasure,
) -> Result<Minimizer> {
    check_args(spec, i, z, p)?;
    let tilt = control_tilt(spec, t, i, z, p);
    let r = minimize_tilted_with(spec, t, i, p, &tilt, true)?;
    let h_min = spec.running_cost(t, i, &r.alpha, p, nu) + coupling(spec, t, i, z, &r.alpha, p, nu);
    Ok(Minimizer {
        alpha: r.alpha,
        h_min,
        strategy: r.strategy,
        converged: r.converged,
        near_tie: r.near_tie,
    })
}

/// `min_a [ f + sum_{j != i} q_ij (z_j - z_i) ]`, the driver of the value ODE in HJB form.
pub fn hjb_driver(spec: &ProblemSpec, t: f64, i: usize, z: &[f64], p: &[f64], nu: &DiscreteMeasure) -> Result<f64> {
    let r = optimal_control(spec, t, i, z, p)?;
    let zi = z[i];
    let jumps: f64 = (0..spec.num_states())
        .filter(|&j| spec.admissible(i, j))
        .map(|j| spec.rate(t, i, j, &r.alpha, p, nu) * (z[j] - zi))
        .sum();
    Ok(spec.running_cost(t, i, &r.alpha, p, nu) + jumps)
}
