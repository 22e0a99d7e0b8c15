use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::EquilibriumSolution;
use crate::error::{MfgError, Result};
use crate::girsanov::log_likelihood;
use crate::hjb::{ControlledDynamics, PolicySurface};
use crate::markov::grid::TimeGrid;
use crate::markov::path::PathRecord;
use crate::markov::rng::derive_stream;
use crate::markov::simplex::SimplexFlow;
use crate::markov::simulate::simulate_path;
use crate::measures::{empirical_controls, empirical_states, w1, ControlFlow, DiscreteMeasure};
use crate::model::spec::ProblemSpec;
use crate::stats::{log_log_slope, McEstimate};

/// `N` players each following the equilibrium feedback on their own state.
#[derive(Debug, Clone)]
pub struct NPlayerRun {
    pub n: usize,
    pub paths: Vec<PathRecord>,
    pub empirical_p: SimplexFlow,
    pub empirical_nu: ControlFlow,
    pub seed: u64,
}

fn check_decoupled(spec: &ProblemSpec) -> Result<()> {
    if spec.mean_field_in_q() {
        return Err(MfgError::Structural(
            "the N-player game needs rates that ignore the mean field".into(),
        ));
    }
    Ok(())
}

/// State of `path` at every node of `grid`.
pub fn states_on_grid(path: &PathRecord, grid: &TimeGrid) -> Vec<usize> {
    let mut out = Vec::with_capacity(grid.n_nodes());
    let jumps = path.jumps();
    let mut next = 0;
    let mut state = path.initial_state();
    for t in grid.nodes() {
        while next < jumps.len() && jumps[next].time <= t {
            state = jumps[next].state;
            next += 1;
        }
        out.push(state);
    }
    out
}

/// Player `n` draws from `derive_stream(seed, [n])`.
pub fn simulate_nplayer(spec: &ProblemSpec, sol: &EquilibriumSolution, n: usize, seed: u64) -> Result<NPlayerRun> {
    check_decoupled(spec)?;
    if n == 0 {
        return Err(MfgError::InvalidInput("need at least one player".into()));
    }
    let dynamics = ControlledDynamics::new(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
    let horizon = spec.horizon();
    let paths: Vec<PathRecord> = (0..n)
        .into_par_iter()
        .map(|player| {
            let mut rng = derive_stream(seed, &[player as u64]);
            simulate_path(&dynamics, spec.p_init(), horizon, &mut rng)
        })
        .collect::<Result<_>>()?;
    let grid = *sol.p_flow.grid();
    let states: Vec<Vec<usize>> = paths.iter().map(|p| states_on_grid(p, &grid)).collect();
    let mut points = Vec::with_capacity(grid.n_nodes());
    let mut measures = Vec::with_capacity(grid.n_nodes());
    let mut now = vec![0; n];
    for k in 0..grid.n_nodes() {
        for (slot, s) in now.iter_mut().zip(&states) {
            *slot = s[k];
        }
        points.push(empirical_states(&now, spec.num_states())?);
        let controls: Vec<Vec<f64>> = now.iter().map(|&i| sol.policy.node(k, i).to_vec()).collect();
        measures.push(empirical_controls(&controls)?);
    }
    Ok(NPlayerRun {
        n,
        paths,
        empirical_p: SimplexFlow::new(grid, points)?,
        empirical_nu: ControlFlow::new(grid, measures)?,
        seed,
    })
}

impl NPlayerRun {
    /// `sum_i (p^N_i(t_k) - p*_i(t_k))^2` per node.
    pub fn state_sq_errors(&self, target: &SimplexFlow) -> Vec<f64> {
        (0..target.grid().n_nodes())
            .map(|k| self.empirical_p.node(k).l2_distance_sq(target.node(k)))
            .collect()
    }

    /// `W1(nu^N(t_k), nu*(t_k))^2` per node.
    pub fn control_sq_errors(&self, target: &ControlFlow) -> Result<Vec<f64>> {
        (0..target.grid().n_nodes())
            .map(|k| w1(self.empirical_nu.node(k), target.node(k)).map(|d| d * d))
            .collect()
    }

    /// Average over players of `W_T`, the likelihood ratio of each player's path against
    /// the reference chain. Paths come from the controlled law, so this estimates `E^P[W_T^2]`.
    pub fn likelihood_second_moment(&self, spec: &ProblemSpec, sol: &EquilibriumSolution) -> Result<McEstimate> {
        let dynamics = ControlledDynamics::new(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
        let w: Vec<f64> = self
            .paths
            .iter()
            .map(|p| log_likelihood(p, &dynamics, spec.reference()).map(|l| l.log_total.exp()))
            .collect::<Result<_>>()?;
        Ok(McEstimate::from_samples(&w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    /// `max_k` of the rep-average of `|p^N(t_k) - p*(t_k)|^2`.
    pub mse_state: f64,
    pub se_state: f64,
    /// `max_k` of the rep-average of `W1(nu^N(t_k), nu*(t_k))^2`.
    pub mse_w1: f64,
    pub se_w1: f64,
    /// `m / (4N)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosReport {
    pub rows: Vec<ChaosRow>,
    pub state_slope: f64,
    pub w1_slope: f64,
    pub reps: usize,
}

impl ChaosReport {
    /// `mse_state <= m/(4N) + k * se` at every `N`.
    pub fn within_bound(&self, k: f64) -> bool {
        self.rows.iter().all(|r| r.mse_state <= r.bound + k * r.se_state)
    }
}

fn max_of_node_means(per_rep: &[Vec<f64>]) -> (f64, f64) {
    let nodes = per_rep[0].len();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..nodes {
        let xs: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
        let e = McEstimate::from_samples(&xs);
        if e.mean > best.0 {
            best = (e.mean, e.se);
        }
    }
    best
}

/// Squared distances between empirical and limiting fields over `reps` independent games per `N`.
///
/// Rep `r` at size `N` uses the seed drawn from `derive_stream(seed, [N, r])`.
pub fn chaos_error(
    spec: &ProblemSpec,
    sol: &EquilibriumSolution,
    n_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ChaosReport> {
    if reps < 2 {
        return Err(MfgError::InvalidInput("chaos statistics need at least 2 reps".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MfgError::InvalidInput("player counts must be increasing".into()));
    }
    let m = spec.num_states() as f64;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let errs: Vec<(Vec<f64>, Vec<f64>)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let run_seed: u64 = derive_stream(seed, &[n as u64, r as u64]).random();
                let run = simulate_nplayer(spec, sol, n, run_seed)?;
                Ok((run.state_sq_errors(&sol.p_flow), run.control_sq_errors(&sol.nu_flow)?))
            })
            .collect::<Result<_>>()?;
        let (states, controls): (Vec<_>, Vec<_>) = errs.into_iter().unzip();
        let (mse_state, se_state) = max_of_node_means(&states);
        let (mse_w1, se_w1) = max_of_node_means(&controls);
        rows.push(ChaosRow {
            n,
            mse_state,
            se_state,
            mse_w1,
            se_w1,
            bound: m / (4.0 * n as f64),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let state_slope = log_log_slope(&ns, &rows.iter().map(|r| r.mse_state).collect::<Vec<_>>());
    let w1_slope = log_log_slope(&ns, &rows.iter().map(|r| r.mse_w1).collect::<Vec<_>>());
    Ok(ChaosReport {
        rows,
        state_slope,
        w1_slope,
        reps,
    })
}

/// Empirical field of players `1..N` as seen by player 0, node by node.
struct OthersField {
    counts: Vec<Vec<usize>>,
}

impl OthersField {
    fn sample(
        spec: &ProblemSpec,
        dynamics: &ControlledDynamics<'_>,
        grid: &TimeGrid,
        n: usize,
        seed: u64,
        run: usize,
    ) -> Result<Self> {
        let m = spec.num_states();
        let mut counts = vec![vec![0; m]; grid.n_nodes()];
        for player in 1..n {
            let mut rng = derive_stream(seed, &[run as u64, player as u64]);
            let path = simulate_path(dynamics, spec.p_init(), spec.horizon(), &mut rng)?;
            for (k, s) in states_on_grid(&path, grid).into_iter().enumerate() {
                counts[k][s] += 1;
            }
        }
        Ok(Self { counts })
    }
}

/// Expected cost of player 0 following `policy` given the other players' realized field.
///
/// Player 0's own state enters the empirical measures, so within cell `k` the field seen
/// from state `i` is `(C_k + e_i) / N` with `C_k` the others' counts at `t_k`; the
/// controls are read at the nodes. Solved as a linear backward equation in player 0's state.
fn conditional_cost(
    spec: &ProblemSpec,
    policy: &PolicySurface,
    equilibrium: &PolicySurface,
    others: &OthersField,
    n: usize,
) -> Result<f64> {
    let grid = *policy.grid();
    let m = spec.num_states();
    let l = spec.control_dim();
    let inv = 1.0 / n as f64;
    let field_from = |k: usize, i: usize| -> Result<(Vec<f64>, DiscreteMeasure)> {
        let mut p: Vec<f64> = others.counts[k].iter().map(|&c| c as f64 * inv).collect();
        p[i] += inv;
        let mut atoms: Vec<Vec<f64>> = (0..m).map(|s| equilibrium.node(k, s).to_vec()).collect();
        let mut weights: Vec<f64> = others.counts[k].iter().map(|&c| c as f64 * inv).collect();
        atoms.push(policy.node(k, i).to_vec());
        weights.push(inv);
        Ok((p, DiscreteMeasure::new(atoms, weights)?))
    };
    let n_steps = grid.n_steps();
    let dt = grid.dt();
    let mut v: Vec<f64> = (0..m)
        .map(|i| {
            let mut p: Vec<f64> = others.counts[n_steps].iter().map(|&c| c as f64 * inv).collect();
            p[i] += inv;
            spec.terminal_cost(i, &p)
        })
        .collect();
    let mut a = vec![0.0; l];
    let mut fields = Vec::with_capacity(m);
    let mut rhs = |k: usize, t: f64, z: &[f64], fields: &[(Vec<f64>, DiscreteMeasure)], out: &mut [f64]| {
        for i in 0..m {
            policy.in_cell(k, t, i, &mut a);
            let (p, nu) = &fields[i];
            let mut h = spec.running_cost(t, i, &a, p, nu);
            for j in 0..m {
                if spec.admissible(i, j) {
                    h += spec.rate(t, i, j, &a, p, nu) * (z[j] - z[i]);
                }
            }
            out[i] = -h;
        }
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for k in (0..n_steps).rev() {
        fields.clear();
        for i in 0..m {
            fields.push(field_from(k, i)?);
        }
        let (t0, t1) = (grid.node(k), grid.node(k + 1));
        let th = t0 + 0.5 * dt;
        rhs(k, t1, &v, &fields, &mut k1);
        for s in 0..m {
            tmp[s] = v[s] - 0.5 * dt * k1[s];
        }
        rhs(k, th, &tmp, &fields, &mut k2);
        for s in 0..m {
            tmp[s] = v[s] - 0.5 * dt * k2[s];
        }
        rhs(k, th, &tmp, &fields, &mut k3);
        for s in 0..m {
            tmp[s] = v[s] - dt * k3[s];
        }
        rhs(k, t0, &tmp, &fields, &mut k4);
        for s in 0..m {
            v[s] -= dt / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
        }
    }
    Ok(spec.p_init().weights().iter().zip(&v).map(|(p, x)| p * x).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub id: usize,
    /// `J(equilibrium profile) - J(deviation)` for player 0: positive means the deviation pays.
    pub gain: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub n: usize,
    pub rows: Vec<DeviationRow>,
    /// `max(0, max_d gain_d)`.
    pub max_profitable_gain: f64,
}

/// Unilateral deviations of player 0 with common random numbers for the other players.
///
/// Run `r` draws player `n`'s path from `derive_stream(seed, [r, n])` for every deviation,
/// and player 0's expected cost given the others is computed exactly by a backward equation.
pub fn deviation_gain(
    spec: &ProblemSpec,
    sol: &EquilibriumSolution,
    n: usize,
    deviations: &[PolicySurface],
    n_mc: usize,
    seed: u64,
) -> Result<DeviationReport> {
    check_decoupled(spec)?;
    if n == 0 || n_mc < 2 {
        return Err(MfgError::InvalidInput(format!(
            "deviation test needs N >= 1 and at least 2 runs, got N = {n}, runs = {n_mc}"
        )));
    }
    let grid = *sol.p_flow.grid();
    for d in deviations {
        if !grid.same_as(d.grid()) {
            return Err(MfgError::InvalidInput("deviation policy lives on another grid".into()));
        }
    }
    let dynamics = ControlledDynamics::new(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
    let per_run: Vec<Vec<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let others = OthersField::sample(spec, &dynamics, &grid, n, seed, r)?;
            let base = conditional_cost(spec, &sol.policy, &sol.policy, &others, n)?;
            deviations
                .iter()
                .map(|d| Ok(base - conditional_cost(spec, d, &sol.policy, &others, n)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<DeviationRow> = (0..deviations.len())
        .map(|id| {
            let xs: Vec<f64> = per_run.iter().map(|r| r[id]).collect();
            DeviationRow {
                id,
                gain: McEstimate::from_samples(&xs),
            }
        })
        .collect();
    let max_profitable_gain = rows.iter().map(|r| r.gain.mean).fold(0.0, f64::max);
    Ok(DeviationReport {
        n,
        rows,
        max_profitable_gain,
    })
}

/// Deviations `a -> clamp((1 + s) a + c)` for scalings `s` and offsets `c`; `(0, 0)` is the
/// equilibrium policy itself.
pub fn deviation_grid(
    spec: &ProblemSpec,
    policy: &PolicySurface,
    scalings: &[f64],
    offsets: &[f64],
) -> Result<Vec<PolicySurface>> {
    let grid = *policy.grid();
    let bx = spec.control_box();
    let mut out = Vec::with_capacity(scalings.len() * offsets.len());
    for &s in scalings {
        for &c in offsets {
            out.push(PolicySurface::from_fn(grid, spec.num_states(), bx, |t, i| {
                let k = (t / grid.dt()).round() as usize;
                let mut a: Vec<f64> = policy.node(k, i).iter().map(|x| (1.0 + s) * x + c).collect();
                bx.project(&mut a);
                a
            })?);
        }
    }
    Ok(out)
}

/// Pooled per-state frequencies of all players at node `k`, one estimate per state.
pub fn pooled_marginal(runs: &[NPlayerRun], k: usize, m: usize) -> Vec<McEstimate> {
    (0..m)
        .map(|i| {
            let xs: Vec<f64> = runs
                .iter()
                .flat_map(|r| {
                    let t = r.empirical_p.grid().node(k);
                    r.paths.iter().map(move |p| if p.state_at(t) == i { 1.0 } else { 0.0 })
                })
                .collect();
            McEstimate::from_samples(&xs)
        })
        .collect()
}
