use std::fmt::Write as _;

use crate::error::{MfgError, Result};
use crate::markov::grid::TimeGrid;
use crate::markov::simplex::SimplexFlow;
use crate::measures::{ControlBox, ControlFlow, DiscreteMeasure};
use crate::model::hamiltonian::optimal_control;
use crate::model::spec::ProblemSpec;

/// `V(t_k, i)` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: TimeGrid,
    m: usize,
    values: Vec<f64>,
}

impl ValueSurface {
    pub fn new(grid: TimeGrid, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() * m {
            return Err(MfgError::DimensionMismatch {
                expected: grid.n_nodes() * m,
                got: values.len(),
                context: "value surface entries",
            });
        }
        Ok(Self { grid, m, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.m..(k + 1) * self.m]
    }

    pub fn initial(&self) -> &[f64] {
        self.node(0)
    }

    /// Linear interpolation in time.
    pub fn at(&self, t: f64, i: usize) -> f64 {
        let (k, w) = self.grid.locate(t);
        let a = self.node(k)[i];
        let b = self.node((k + 1).min(self.grid.n_steps()))[i];
        (1.0 - w) * a + w * b
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ValueSurface) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Every node scaled by `factor`; used to build deliberately wrong surfaces.
    pub fn scaled(&self, factor: f64) -> ValueSurface {
        ValueSurface {
            grid: self.grid,
            m: self.m,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// CSV with columns `t,state,V`, states 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,state,V\n");
        for k in 0..self.grid.n_nodes() {
            let t = self.grid.node(k);
            for (i, v) in self.node(k).iter().enumerate() {
                let _ = writeln!(s, "{t},{},{v}", i + 1);
            }
        }
        s
    }
}

/// Feedback control `a(t_k, i)` on the grid, interpolated linearly in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySurface {
    grid: TimeGrid,
    m: usize,
    l: usize,
    controls: Vec<f64>,
}

impl PolicySurface {
    /// `controls` is laid out as `[node][state][coordinate]`; every entry must lie in `bx`.
    pub fn new(grid: TimeGrid, m: usize, bx: &ControlBox, controls: Vec<f64>) -> Result<Self> {
        let l = bx.dim();
        if controls.len() != grid.n_nodes() * m * l {
            return Err(MfgError::DimensionMismatch {
                expected: grid.n_nodes() * m * l,
                got: controls.len(),
                context: "policy surface entries",
            });
        }
        for a in controls.chunks_exact(l) {
            bx.check(a)?;
        }
        Ok(Self {
            grid,
            m,
            l,
            controls,
        })
    }

    /// Policy from a function of `(t, state)`.
    pub fn from_fn(
        grid: TimeGrid,
        m: usize,
        bx: &ControlBox,
        mut f: impl FnMut(f64, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut controls = Vec::with_capacity(grid.n_nodes() * m * bx.dim());
        for k in 0..grid.n_nodes() {
            let t = grid.node(k);
            for i in 0..m {
                controls.extend(f(t, i));
            }
        }
        Self::new(grid, m, bx, controls)
    }

    /// Same control `a` in every state at every time.
    pub fn constant(grid: TimeGrid, m: usize, bx: &ControlBox, a: &[f64]) -> Result<Self> {
        Self::from_fn(grid, m, bx, |_, _| a.to_vec())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn control_dim(&self) -> usize {
        self.l
    }

    pub fn node(&self, k: usize, i: usize) -> &[f64] {
        let s = (k * self.m + i) * self.l;
        &self.controls[s..s + self.l]
    }

    /// Per-state controls at node `k`.
    pub fn node_controls(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.node(k, i).to_vec()).collect()
    }

    /// Control at time `t` inside cell `k`.
    pub fn in_cell(&self, k: usize, t: f64, i: usize, out: &mut [f64]) {
        let w = ((t - self.grid.node(k)) / self.grid.dt()).clamp(0.0, 1.0);
        let w = if w.is_finite() { w } else { 0.0 };
        let a = self.node(k, i);
        let b = self.node((k + 1).min(self.grid.n_steps()), i);
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }

    pub fn at(&self, t: f64, i: usize, out: &mut [f64]) {
        self.in_cell(self.grid.cell_of(t), t, i, out);
    }

    pub fn sup_distance(&self, other: &PolicySurface) -> f64 {
        self.controls
            .iter()
            .zip(&other.controls)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// CSV with columns `t,state,alpha_1..alpha_l`, states 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,state");
        for c in 1..=self.l {
            let _ = write!(s, ",alpha_{c}");
        }
        s.push('\n');
        for k in 0..self.grid.n_nodes() {
            let t = self.grid.node(k);
            for i in 0..self.m {
                let _ = write!(s, "{t},{}", i + 1);
                for a in self.node(k, i) {
                    let _ = write!(s, ",{a}");
                }
                s.push('\n');
            }
        }
        s
    }
}

pub(crate) fn check_flows(spec: &ProblemSpec, p_flow: &SimplexFlow, nu_flow: &ControlFlow) -> Result<TimeGrid> {
    let grid = *p_flow.grid();
    if !grid.same_as(nu_flow.grid()) {
        return Err(MfgError::InvalidInput(
            "state and control flows live on different grids".into(),
        ));
    }
    if (grid.horizon() - spec.horizon()).abs() > 1e-12 {
        return Err(MfgError::InvalidInput(format!(
            "flow horizon {} differs from T = {}",
            grid.horizon(),
            spec.horizon()
        )));
    }
    if p_flow.num_states() != spec.num_states() {
        return Err(MfgError::DimensionMismatch {
            expected: spec.num_states(),
            got: p_flow.num_states(),
            context: "state flow",
        });
    }
    if nu_flow.node(0).dim() != spec.control_dim() {
        return Err(MfgError::DimensionMismatch {
            expected: spec.control_dim(),
            got: nu_flow.node(0).dim(),
            context: "control flow",
        });
    }
    Ok(grid)
}

/// Which control enters the backward equation.
enum Driver<'a> {
    Optimal,
    Policy(&'a PolicySurface),
}

struct Backward<'a> {
    spec: &'a ProblemSpec,
    p_flow: &'a SimplexFlow,
    nu_flow: &'a ControlFlow,
    driver: Driver<'a>,
    p: Vec<f64>,
    a: Vec<f64>,
}

impl Backward<'_> {
    /// `dV/dt` at `(t, z)` inside cell `k`: `-[f + sum_j q_ij (z_j - z_i)]`.
    fn rhs(&mut self, k: usize, t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
        let spec = self.spec;
        let m = spec.num_states();
        self.p_flow.interpolate_in_cell(k, t, &mut self.p);
        let nu: &DiscreteMeasure = self.nu_flow.in_cell(k);
        for i in 0..m {
            match self.driver {
                Driver::Optimal => {
                    let r = optimal_control(spec, t, i, z, &self.p)?;
                    if !r.converged {
                        log::warn!("minimizer hit its iteration cap at t={t}, state {}", i + 1);
                    }
                    self.a.copy_from_slice(&r.alpha);
                }
                Driver::Policy(pol) => pol.in_cell(k, t, i, &mut self.a),
            }
            let mut h = spec.running_cost(t, i, &self.a, &self.p, nu);
            for j in 0..m {
                if spec.admissible(i, j) {
                    h += spec.rate(t, i, j, &self.a, &self.p, nu) * (z[j] - z[i]);
                }
            }
            if !h.is_finite() {
                return Err(MfgError::Minimizer {
                    time: t,
                    state: i,
                    reason: format!("driver evaluated to {h}"),
                });
            }
            out[i] = -h;
        }
        Ok(())
    }

    /// Classical RK4 from `T` down to 0; returns node values.
    fn integrate(&mut self, grid: TimeGrid) -> Result<Vec<f64>> {
        let spec = self.spec;
        let m = spec.num_states();
        let n = grid.n_steps();
        let dt = grid.dt();
        let mut values = vec![0.0; grid.n_nodes() * m];
        let p_t = self.p_flow.terminal().weights().to_vec();
        let mut v: Vec<f64> = (0..m).map(|i| spec.terminal_cost(i, &p_t)).collect();
        values[n * m..].copy_from_slice(&v);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut tmp = vec![0.0; m];
        for k in (0..n).rev() {
            let t1 = grid.node(k + 1);
            let t0 = grid.node(k);
            let th = t0 + 0.5 * dt;
            self.rhs(k, t1, &v, &mut k1)?;
            for s in 0..m {
                tmp[s] = v[s] - 0.5 * dt * k1[s];
            }
            self.rhs(k, th, &tmp, &mut k2)?;
            for s in 0..m {
                tmp[s] = v[s] - 0.5 * dt * k2[s];
            }
            self.rhs(k, th, &tmp, &mut k3)?;
            for s in 0..m {
                tmp[s] = v[s] - dt * k3[s];
            }
            self.rhs(k, t0, &tmp, &mut k4)?;
            for s in 0..m {
                v[s] -= dt / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
            }
            values[k * m..(k + 1) * m].copy_from_slice(&v);
        }
        Ok(values)
    }
}

/// Solves `dV_i/dt + min_a [f + sum_{j != i} q_ij (V_j - V_i)] = 0`, `V_i(T) = g(e_i, p_T)`,
/// against frozen flows, and records the optimal feedback at the nodes.
pub fn solve_value(
    spec: &ProblemSpec,
    p_flow: &SimplexFlow,
    nu_flow: &ControlFlow,
) -> Result<(ValueSurface, PolicySurface)> {
    let grid = check_flows(spec, p_flow, nu_flow)?;
    let m = spec.num_states();
    let l = spec.control_dim();
    let mut bw = Backward {
        spec,
        p_flow,
        nu_flow,
        driver: Driver::Optimal,
        p: vec![0.0; m],
        a: vec![0.0; l],
    };
    let values = bw.integrate(grid)?;
    let mut controls = Vec::with_capacity(grid.n_nodes() * m * l);
    for k in 0..grid.n_nodes() {
        let t = grid.node(k);
        let z = &values[k * m..(k + 1) * m];
        let p = p_flow.node(k).weights();
        for i in 0..m {
            controls.extend(optimal_control(spec, t, i, z, p)?.alpha);
        }
    }
    let value = ValueSurface::new(grid, m, values)?;
    let policy = PolicySurface::new(grid, m, spec.control_box(), controls)?;
    Ok((value, policy))
}

/// Expected cost `J(t, i)` of following `policy` against frozen flows (linear backward equation).
pub fn evaluate_policy_cost(
    spec: &ProblemSpec,
    policy: &PolicySurface,
    p_flow: &SimplexFlow,
    nu_flow: &ControlFlow,
) -> Result<ValueSurface> {
    let grid = check_flows(spec, p_flow, nu_flow)?;
    if !grid.same_as(policy.grid()) || policy.num_states() != spec.num_states() {
        return Err(MfgError::InvalidInput(
            "policy grid or state count differs from the flows".into(),
        ));
    }
    let m = spec.num_states();
    let mut bw = Backward {
        spec,
        p_flow,
        nu_flow,
        driver: Driver::Policy(policy),
        p: vec![0.0; m],
        a: vec![0.0; spec.control_dim()],
    };
    let values = bw.integrate(grid)?;
    ValueSurface::new(grid, m, values)
}

/// `sum_i p_init_i J(0, i)`.
pub fn total_cost(spec: &ProblemSpec, j: &ValueSurface) -> f64 {
    spec.p_init()
        .weights()
        .iter()
        .zip(j.initial())
        .map(|(p, v)| p * v)
        .sum()
}

/// `sup |V_eps - V|` when the terminal cost is moved to `g + eps * direction`.
pub fn stability_probe(
    spec: &ProblemSpec,
    p_flow: &SimplexFlow,
    nu_flow: &ControlFlow,
    eps: f64,
    direction: &[f64],
) -> Result<f64> {
    let (v, _) = solve_value(spec, p_flow, nu_flow)?;
    let shifted = spec.with_terminal_shift(direction.iter().map(|d| eps * d).collect())?;
    let (ve, _) = solve_value(&shifted, p_flow, nu_flow)?;
    Ok(v.sup_distance(&ve))
}
