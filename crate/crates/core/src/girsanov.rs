//! Likelihood ratios of controlled chains against the reference chain, and
//! importance-sampled costs under the reference law.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::hjb::{ControlledDynamics, PolicySurface};
use crate::markov::generator::RateMatrix;
use crate::markov::path::PathRecord;
use crate::markov::rng::derive_stream;
use crate::markov::simplex::{SimplexFlow, SimplexPoint};
use crate::markov::simulate::{simulate_path, ConstantRates, RateField};
use crate::markov::flow::matexp_marginal;
use crate::measures::ControlFlow;
use crate::model::spec::ProblemSpec;
use crate::stats::McEstimate;

const SIMPSON_TOL: f64 = 1e-13;
const SIMPSON_DEPTH: u32 = 40;

/// `log W_T = log_drift + log_jumps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodBreakdown {
    /// `int (q_{XX} - q0_{XX}) ds`, i.e. reference exit rate minus controlled exit rate.
    pub log_drift: f64,
    /// `sum over jumps of log(q_ij / q0_ij)`.
    pub log_jumps: f64,
    pub log_total: f64,
    /// A jump used a transition with zero controlled or reference rate.
    pub impossible: bool,
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (fm, (b - a) / 6.0 * (f(a) + 4.0 * fm + f(b)))
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature; exact on polynomials of degree three.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fm, whole) = simpson(&f, a, b);
    adaptive(&f, a, b, f(a), fm, f(b), whole, SIMPSON_TOL, SIMPSON_DEPTH)
}

/// `int_a^b (exit0_i - exit_i(s)) ds`, split at the field's cell boundaries.
fn drift_integral(field: &dyn RateField, q0: &RateMatrix, i: usize, a: f64, b: f64) -> f64 {
    let exit0 = q0.exit_rate(i);
    if let Some(exit) = field.integrated_exit(i, a, b) {
        return exit0 * (b - a) - exit;
    }
    let m = field.num_states();
    let piece = |cell: Option<usize>, lo: f64, hi: f64| {
        adaptive_simpson(
            |s| {
                let mut row = vec![0.0; m];
                match cell {
                    Some(k) => field.rates_in_cell(k, s, i, &mut row),
                    None => field.rates(s, i, &mut row),
                }
                row[i] = 0.0;
                exit0 - row.iter().sum::<f64>()
            },
            lo,
            hi,
        )
    };
    match field.cell_grid() {
        None => piece(None, a, b),
        Some(grid) => {
            let mut total = 0.0;
            let mut k = grid.cell_of(a);
            let mut lo = a;
            while lo < b {
                let hi = if k + 1 >= grid.n_nodes() - 1 {
                    b
                } else {
                    grid.node(k + 1).min(b)
                };
                total += piece(Some(k), lo, hi);
                lo = hi;
                k += 1;
            }
            total
        }
    }
}

/// Likelihood of `path` under `field` against the reference generator `q0`.
pub fn log_likelihood(path: &PathRecord, field: &dyn RateField, q0: &RateMatrix) -> Result<LikelihoodBreakdown> {
    log_likelihood_from(path, 0.0, field, q0)
}

/// As [`log_likelihood`] for a path whose time 0 is absolute time `start` for `field`.
pub fn log_likelihood_from(
    path: &PathRecord,
    start: f64,
    field: &dyn RateField,
    q0: &RateMatrix,
) -> Result<LikelihoodBreakdown> {
    let m = field.num_states();
    if q0.num_states() != m {
        return Err(MfgError::DimensionMismatch {
            expected: m,
            got: q0.num_states(),
            context: "reference generator",
        });
    }
    let mut log_drift = 0.0;
    for (a, b, i) in path.sojourns() {
        log_drift += drift_integral(field, q0, i, start + a, start + b);
    }
    let mut log_jumps = 0.0;
    let mut impossible = false;
    let mut from = path.initial_state();
    let mut row = vec![0.0; m];
    for jump in path.jumps() {
        field.rates(start + jump.time, from, &mut row);
        let q = row[jump.state];
        let r = q0.rate(from, jump.state);
        if q > 0.0 && r > 0.0 {
            log_jumps += (q / r).ln();
        } else {
            impossible = true;
            log_jumps = f64::NEG_INFINITY;
        }
        from = jump.state;
    }
    Ok(LikelihoodBreakdown {
        log_drift,
        log_jumps,
        log_total: log_drift + log_jumps,
        impossible,
    })
}

/// `E^P[W * Y]` from per-path `(log W, Y)` using a max-log shift.
fn weighted_mean(samples: &[(f64, f64)]) -> McEstimate {
    let shift = samples
        .iter()
        .map(|s| s.0)
        .filter(|l| l.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return McEstimate::from_samples(&vec![0.0; samples.len()]);
    }
    let scaled: Vec<f64> = samples.iter().map(|(l, y)| (l - shift).exp() * y).collect();
    let e = McEstimate::from_samples(&scaled);
    let scale = shift.exp();
    McEstimate {
        mean: e.mean * scale,
        se: e.se * scale,
        n: e.n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub estimate: f64,
    pub se: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// `E^P[W_T]`, which should be 1.
    pub mean_weight: McEstimate,
    /// `E^P[W_T^2]`.
    pub second_moment: McEstimate,
}

/// Expected cost of `policy` estimated under the reference chain and reweighted by `W_T`.
pub fn importance_cost(
    spec: &ProblemSpec,
    policy: &PolicySurface,
    p_flow: &SimplexFlow,
    nu_flow: &ControlFlow,
    n_paths: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if n_paths < 2 {
        return Err(MfgError::InvalidInput(format!(
            "importance sampling needs at least 2 paths, got {n_paths}"
        )));
    }
    let dynamics = ControlledDynamics::new(spec, policy, p_flow, nu_flow)?;
    let reference = ConstantRates::new(spec.reference().clone());
    let horizon = spec.horizon();
    let samples: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[k as u64]);
            let path = simulate_path(&reference, spec.p_init(), horizon, &mut rng)?;
            let lw = log_likelihood(&path, &dynamics, spec.reference())?;
            Ok((lw.log_total, dynamics.path_cost(&path)?))
        })
        .collect::<Result<_>>()?;
    let cost = weighted_mean(&samples);
    let ones: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, 1.0)).collect();
    let squares: Vec<(f64, f64)> = samples.iter().map(|s| (2.0 * s.0, 1.0)).collect();
    Ok(ImportanceReport {
        estimate: cost.mean,
        se: cost.se,
        n_paths,
        seed,
        mean_weight: weighted_mean(&ones),
        second_moment: weighted_mean(&squares),
    })
}

/// Three estimates of the marginal law at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// `E^P[W_t 1{X_t = e_i}]` under the reference chain.
    pub reweighted: Vec<McEstimate>,
    /// Frequencies from direct simulation of the controlled chain.
    pub direct: Vec<McEstimate>,
    /// `exp(t Q^T) p0` with `Q` read off the field at time 0.
    pub exact: Vec<f64>,
    pub mean_weight: McEstimate,
}

impl ConsistencyReport {
    /// Pairwise agreement within `k` combined standard errors, and `abs_tol` for the exact leg.
    pub fn agrees(&self, k: f64, abs_tol: f64) -> bool {
        self.reweighted
            .iter()
            .zip(&self.direct)
            .zip(&self.exact)
            .all(|((r, d), &x)| {
                let combined = (r.se * r.se + d.se * d.se).sqrt();
                (r.mean - d.mean).abs() <= k * combined + abs_tol
                    && (r.mean - x).abs() <= k * r.se + abs_tol
                    && (d.mean - x).abs() <= k * d.se + abs_tol
            })
            && self.mean_weight.within(1.0, k)
    }
}

/// Compares the reweighted reference chain, the directly simulated chain and the
/// matrix exponential at time `t`. The closed-form leg assumes time-constant rates.
pub fn measure_consistency(
    field: &dyn RateField,
    q0: &RateMatrix,
    p0: &SimplexPoint,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let m = field.num_states();
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; m];
            field.rates(0.0, i, &mut row);
            row
        })
        .collect();
    let q = RateMatrix::from_off_diagonal(&rows)?;
    let exact = matexp_marginal(&q, p0, t).into_inner();
    let reference = ConstantRates::new(q0.clone());
    let weighted: Vec<(f64, usize)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[0, k as u64]);
            let path = simulate_path(&reference, p0, t, &mut rng)?;
            let lw = log_likelihood(&path, field, q0)?;
            Ok((lw.log_total, path.final_state()))
        })
        .collect::<Result<_>>()?;
    let direct: Vec<usize> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[1, k as u64]);
            Ok(simulate_path(field, p0, t, &mut rng)?.final_state())
        })
        .collect::<Result<_>>()?;
    let reweighted = (0..m)
        .map(|i| {
            let s: Vec<(f64, f64)> = weighted
                .iter()
                .map(|&(l, x)| (l, if x == i { 1.0 } else { 0.0 }))
                .collect();
            weighted_mean(&s)
        })
        .collect();
    let direct = (0..m)
        .map(|i| {
            let s: Vec<f64> = direct.iter().map(|&x| if x == i { 1.0 } else { 0.0 }).collect();
            McEstimate::from_samples(&s)
        })
        .collect();
    let ones: Vec<(f64, f64)> = weighted.iter().map(|&(l, _)| (l, 1.0)).collect();
    Ok(ConsistencyReport {
        reweighted,
        direct,
        exact,
        mean_weight: weighted_mean(&ones),
    })
}
