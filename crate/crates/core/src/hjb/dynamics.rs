use crate::error::{MfgError, Result};
use crate::hjb::value::{check_flows, PolicySurface};
use crate::markov::grid::TimeGrid;
use crate::markov::path::PathRecord;
use crate::markov::simplex::SimplexFlow;
use crate::markov::simulate::RateField;
use crate::measures::ControlFlow;
use crate::model::spec::ProblemSpec;

#[derive(Clone, Copy)]
enum Integrand {
    Cost,
    Exit,
}

/// A representative player following `policy` against frozen flows.
///
/// Supplies the controlled rates for simulation and the running cost along paths.
/// Running cost and exit rate are pre-integrated per state with Simpson's rule on every cell.
pub struct ControlledDynamics<'a> {
    spec: &'a ProblemSpec,
    policy: &'a PolicySurface,
    p_flow: &'a SimplexFlow,
    nu_flow: &'a ControlFlow,
    grid: TimeGrid,
    cumulative: Vec<Vec<f64>>,
    cumulative_exit: Vec<Vec<f64>>,
}

impl<'a> ControlledDynamics<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        policy: &'a PolicySurface,
        p_flow: &'a SimplexFlow,
        nu_flow: &'a ControlFlow,
    ) -> Result<Self> {
        let grid = check_flows(spec, p_flow, nu_flow)?;
        if !grid.same_as(policy.grid()) || policy.num_states() != spec.num_states() {
            return Err(MfgError::InvalidInput(
                "policy grid or state count differs from the flows".into(),
            ));
        }
        let mut dynamics = Self {
            spec,
            policy,
            p_flow,
            nu_flow,
            grid,
            cumulative: Vec::new(),
            cumulative_exit: Vec::new(),
        };
        let m = spec.num_states();
        let n = grid.n_steps();
        let mut cumulative = vec![vec![0.0; grid.n_nodes()]; m];
        let mut cumulative_exit = vec![vec![0.0; grid.n_nodes()]; m];
        for i in 0..m {
            for k in 0..n {
                let (a, b) = (grid.node(k), grid.node(k + 1));
                cumulative[i][k + 1] = cumulative[i][k] + dynamics.simpson(k, a, b, i, Integrand::Cost);
                cumulative_exit[i][k + 1] =
                    cumulative_exit[i][k] + dynamics.simpson(k, a, b, i, Integrand::Exit);
            }
        }
        dynamics.cumulative = cumulative;
        dynamics.cumulative_exit = cumulative_exit;
        Ok(dynamics)
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Running cost `f(t, e_i, a(t, i), p_t, nu_k)` with `t` in cell `k`.
    pub fn running_cost_in_cell(&self, k: usize, t: f64, i: usize) -> f64 {
        let mut a = vec![0.0; self.policy.control_dim()];
        let mut p = vec![0.0; self.spec.num_states()];
        self.policy.in_cell(k, t, i, &mut a);
        self.p_flow.interpolate_in_cell(k, t, &mut p);
        self.spec
            .running_cost(t, i, &a, &p, self.nu_flow.in_cell(k))
    }

    fn exit_rate_in_cell(&self, k: usize, t: f64, i: usize) -> f64 {
        let mut row = vec![0.0; self.spec.num_states()];
        self.rates_in_cell(k, t, i, &mut row);
        row.iter().sum()
    }

    fn eval(&self, what: Integrand, k: usize, t: f64, i: usize) -> f64 {
        match what {
            Integrand::Cost => self.running_cost_in_cell(k, t, i),
            Integrand::Exit => self.exit_rate_in_cell(k, t, i),
        }
    }

    fn simpson(&self, k: usize, a: f64, b: f64, i: usize, what: Integrand) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mid = 0.5 * (a + b);
        (b - a) / 6.0
            * (self.eval(what, k, a, i) + 4.0 * self.eval(what, k, mid, i) + self.eval(what, k, b, i))
    }

    /// `int_0^s` of the integrand while sitting in state `i`.
    fn primitive(&self, i: usize, s: f64, what: Integrand) -> f64 {
        let table = match what {
            Integrand::Cost => &self.cumulative[i],
            Integrand::Exit => &self.cumulative_exit[i],
        };
        if s >= self.grid.horizon() {
            return table[self.grid.n_steps()];
        }
        let k = self.grid.cell_of(s);
        table[k] + self.simpson(k, self.grid.node(k), s, i, what)
    }

    /// `int_a^b f(u, e_i, ...) du` while sitting in state `i`.
    pub fn running_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        self.primitive(i, b, Integrand::Cost) - self.primitive(i, a, Integrand::Cost)
    }

    /// `int_0^T f(t, X_t, ...) dt + g(X_T, p_T)` along a path.
    pub fn path_cost(&self, path: &PathRecord) -> Result<f64> {
        if (path.horizon() - self.grid.horizon()).abs() > 1e-12 {
            return Err(MfgError::InvalidInput(format!(
                "path horizon {} differs from T = {}",
                path.horizon(),
                self.grid.horizon()
            )));
        }
        let running: f64 = path
            .sojourns()
            .map(|(a, b, i)| self.running_integral(i, a, b))
            .sum();
        let p_t = self.p_flow.terminal().weights();
        Ok(running + self.spec.terminal_cost(path.final_state(), p_t))
    }
}

impl RateField for ControlledDynamics<'_> {
    fn num_states(&self) -> usize {
        self.spec.num_states()
    }

    fn rates(&self, t: f64, i: usize, out: &mut [f64]) {
        self.rates_in_cell(self.grid.cell_of(t), t, i, out);
    }

    fn rates_in_cell(&self, cell: usize, t: f64, i: usize, out: &mut [f64]) {
        let mut a = vec![0.0; self.policy.control_dim()];
        let mut p = vec![0.0; self.spec.num_states()];
        self.policy.in_cell(cell, t, i, &mut a);
        self.p_flow.interpolate_in_cell(cell, t, &mut p);
        self.spec
            .rate_row(t, i, &a, &p, self.nu_flow.in_cell(cell), out);
        out[i] = 0.0;
    }

    fn rate_bound(&self) -> f64 {
        self.spec.rate_bounds().1
    }

    fn cell_grid(&self) -> Option<TimeGrid> {
        Some(self.grid)
    }

    fn integrated_exit(&self, i: usize, a: f64, b: f64) -> Option<f64> {
        Some(self.primitive(i, b, Integrand::Exit) - self.primitive(i, a, Integrand::Exit))
    }
}
