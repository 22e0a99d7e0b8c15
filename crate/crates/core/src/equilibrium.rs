//! Damped fixed-point search for the mean field equilibrium and its certificates.

use rand::Rng;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::hjb::{evaluate_policy_cost, solve_value, ControlledDynamics, PolicySurface, ValueSurface};
use crate::markov::flow::forward_flow;
use crate::markov::grid::TimeGrid;
use crate::markov::rng::derive_stream;
use crate::markov::simplex::SimplexFlow;
use crate::measures::{pushforward_policy, w1, ControlFlow, DiscreteMeasure};
use crate::model::spec::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `sup_t |p_t - Phi_p(t)|_1`.
    pub state_res: f64,
    /// `sup_t W1(nu_t, Phi_nu(t))`.
    pub control_res: f64,
    /// `sup_t (|p_t - Phi_p(t)|_1 + W1(nu_t, Phi_nu(t)))`, the stopping criterion.
    pub combined: f64,
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub p_flow: SimplexFlow,
    pub nu_flow: ControlFlow,
    pub value: ValueSurface,
    pub policy: PolicySurface,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

impl EquilibriumSolution {
    pub fn final_residual(&self) -> Option<TraceRow> {
        self.trace.last().copied()
    }
}

/// One application of the best-response map to frozen flows.
#[derive(Debug, Clone)]
pub struct PhiImage {
    pub value: ValueSurface,
    pub policy: PolicySurface,
    pub p_flow: SimplexFlow,
    pub nu_flow: ControlFlow,
}

/// Best response to `(p, nu)` followed by the flows it induces from `p_init`.
pub fn apply_phi(spec: &ProblemSpec, p_flow: &SimplexFlow, nu_flow: &ControlFlow) -> Result<PhiImage> {
    let (value, policy) = solve_value(spec, p_flow, nu_flow)?;
    let dynamics = ControlledDynamics::new(spec, &policy, p_flow, nu_flow)?;
    let grid = *p_flow.grid();
    let p_new = forward_flow(&dynamics, spec.p_init(), grid)?;
    let measures = (0..grid.n_nodes())
        .map(|k| pushforward_policy(&policy.node_controls(k), p_new.node(k)))
        .collect::<Result<Vec<_>>>()?;
    let nu_new = ControlFlow::new(grid, measures)?;
    Ok(PhiImage {
        value,
        policy,
        p_flow: p_new,
        nu_flow: nu_new,
    })
}

fn residuals(iter: usize, p: &SimplexFlow, nu: &ControlFlow, img: &PhiImage) -> Result<TraceRow> {
    let mut row = TraceRow {
        iter,
        state_res: 0.0,
        control_res: 0.0,
        combined: 0.0,
    };
    for k in 0..p.grid().n_nodes() {
        let ds = p.node(k).l1_distance(img.p_flow.node(k));
        let dc = w1(nu.node(k), img.nu_flow.node(k))?;
        row.state_res = row.state_res.max(ds);
        row.control_res = row.control_res.max(dc);
        row.combined = row.combined.max(ds + dc);
    }
    Ok(row)
}

/// `p` frozen at `p_init`, `nu` the law of the per-state minimizers of `f0` under `p_init`.
pub fn default_init(spec: &ProblemSpec, grid: TimeGrid) -> Result<(SimplexFlow, ControlFlow)> {
    let p0 = spec.p_init().clone();
    let a: Vec<Vec<f64>> = (0..spec.num_states())
        .map(|i| spec.argmin_control_cost(0.0, i, p0.weights()))
        .collect::<Result<_>>()?;
    let nu = pushforward_policy(&a, &p0)?;
    Ok((SimplexFlow::constant(grid, p0), ControlFlow::constant(grid, nu)))
}

/// Damped Picard iteration `x <- (1 - theta) x + theta Phi(x)` on `(p, nu)`.
///
/// Stops once the current iterate's residual is below `tol`; the returned flows are that
/// iterate and `value`/`policy` its best response. Running out of iterations is reported
/// through `converged = false`, not as an error.
pub fn picard_solve(
    spec: &ProblemSpec,
    grid: TimeGrid,
    init: Option<(SimplexFlow, ControlFlow)>,
    opts: PicardOptions,
) -> Result<EquilibriumSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(MfgError::InvalidInput(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let (mut p, mut nu) = match init {
        Some(x) => x,
        None => default_init(spec, grid)?,
    };
    let mut trace = Vec::new();
    let mut iter = 0;
    loop {
        let img = apply_phi(spec, &p, &nu)?;
        let row = residuals(iter, &p, &nu, &img)?;
        trace.push(row);
        log::debug!(
            "picard iter {iter}: state {:.3e}, control {:.3e}",
            row.state_res,
            row.control_res
        );
        let converged = row.combined < opts.tol;
        if converged || iter >= opts.max_iter {
            if !converged {
                log::warn!("picard iteration stopped after {iter} steps at residual {:.3e}", row.combined);
            }
            return Ok(EquilibriumSolution {
                p_flow: p,
                nu_flow: nu,
                value: img.value,
                policy: img.policy,
                trace,
                converged,
            });
        }
        p = p.mix(&img.p_flow, opts.damping);
        nu = nu.mix(&img.nu_flow, opts.damping)?;
        iter += 1;
    }
}

/// `(sup_t |p - Phi_p|_1, sup_t W1(nu, Phi_nu))` for the flows stored in `sol`.
pub fn consistency_residual(spec: &ProblemSpec, sol: &EquilibriumSolution) -> Result<(f64, f64)> {
    let img = apply_phi(spec, &sol.p_flow, &sol.nu_flow)?;
    let row = residuals(0, &sol.p_flow, &sol.nu_flow, &img)?;
    Ok((row.state_res, row.control_res))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// `max_c max_{t,i} (V - J_c)^+`.
    pub gap: f64,
    /// Candidate attaining `gap`, when positive.
    pub worst: Option<usize>,
    pub n_candidates: usize,
    /// `min_c sum_i p_init_i (J_c(0, i) - V(0, i))`.
    pub min_margin: f64,
}

/// Candidate policies: corners of the box held constant, shifted copies of the
/// equilibrium policy, and node-wise random controls. Candidate `c` uses stream `[c]`.
pub fn candidate_policies(
    spec: &ProblemSpec,
    policy: &PolicySurface,
    n_candidates: usize,
    seed: u64,
) -> Result<Vec<PolicySurface>> {
    let bx = spec.control_box();
    let grid = *policy.grid();
    let m = spec.num_states();
    let corners = bx.corners();
    let mut out = Vec::with_capacity(n_candidates);
    for c in 0..n_candidates {
        let mut rng = derive_stream(seed, &[c as u64]);
        let cand = match c % 3 {
            0 => {
                let corner = &corners[(c / 3) % corners.len()];
                PolicySurface::constant(grid, m, bx, corner)?
            }
            1 => {
                let shift: Vec<f64> = (0..bx.dim())
                    .map(|d| rng.random_range(-0.5..0.5) * (bx.upper()[d] - bx.lower()[d]))
                    .collect();
                PolicySurface::from_fn(grid, m, bx, |t, i| {
                    let k = (t / grid.dt()).round() as usize;
                    let mut a: Vec<f64> = policy.node(k, i).iter().zip(&shift).map(|(a, s)| a + s).collect();
                    bx.project(&mut a);
                    a
                })?
            }
            _ => PolicySurface::from_fn(grid, m, bx, |_, _| {
                let u: Vec<f64> = (0..bx.dim()).map(|_| rng.random::<f64>()).collect();
                bx.point_at(&u)
            })?,
        };
        out.push(cand);
    }
    Ok(out)
}

/// Largest improvement any candidate achieves over the computed value against `sol`'s flows.
pub fn best_response_gap(
    spec: &ProblemSpec,
    sol: &EquilibriumSolution,
    n_candidates: usize,
    seed: u64,
) -> Result<GapReport> {
    let cands = candidate_policies(spec, &sol.policy, n_candidates, seed)?;
    let p0 = spec.p_init().weights();
    let mut report = GapReport {
        gap: 0.0,
        worst: None,
        n_candidates,
        min_margin: f64::INFINITY,
    };
    for (c, cand) in cands.iter().enumerate() {
        let j = evaluate_policy_cost(spec, cand, &sol.p_flow, &sol.nu_flow)?;
        let mut gap_c = 0.0_f64;
        for k in 0..j.grid().n_nodes() {
            for (v, jv) in sol.value.node(k).iter().zip(j.node(k)) {
                gap_c = gap_c.max(v - jv);
            }
        }
        if gap_c > report.gap {
            report.gap = gap_c;
            report.worst = Some(c);
        }
        let margin: f64 = p0
            .iter()
            .zip(j.initial().iter().zip(sol.value.initial()))
            .map(|(w, (jv, v))| w * (jv - v))
            .sum();
        report.min_margin = report.min_margin.min(margin);
    }
    Ok(report)
}

/// Per-state controls of `policy` at node `k` pushed forward by `p` at that node.
pub fn control_law(policy: &PolicySurface, p_flow: &SimplexFlow, k: usize) -> Result<DiscreteMeasure> {
    pushforward_policy(&policy.node_controls(k), p_flow.node(k))
}
