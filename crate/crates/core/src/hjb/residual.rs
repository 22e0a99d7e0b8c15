use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::hjb::dynamics::ControlledDynamics;
use crate::hjb::value::{PolicySurface, ValueSurface};
use crate::markov::rng::derive_stream;
use crate::markov::simplex::SimplexFlow;
use crate::markov::simulate::simulate_path;
use crate::measures::ControlFlow;
use crate::model::spec::ProblemSpec;
use crate::stats::McEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub estimate: McEstimate,
    pub max_abs: f64,
}

impl ResidualReport {
    /// Mean within `k` standard errors of zero. A zero-variance sample must be exactly zero.
    pub fn is_consistent(&self, k: f64) -> bool {
        let e = self.estimate;
        if e.se == 0.0 {
            return e.mean.abs() <= 1e-12;
        }
        e.within(0.0, k)
    }
}

/// Per-path `g(X_T, p_T) + int_0^T f dt - V(0, X_0)` under the controlled law.
///
/// Path `k` draws from `derive_stream(seed, [k])`; the reduction runs in path order.
pub fn martingale_residual(
    spec: &ProblemSpec,
    value: &ValueSurface,
    policy: &PolicySurface,
    p_flow: &SimplexFlow,
    nu_flow: &ControlFlow,
    n_paths: usize,
    seed: u64,
) -> Result<ResidualReport> {
    let dynamics = ControlledDynamics::new(spec, policy, p_flow, nu_flow)?;
    let v0 = value.initial();
    let horizon = spec.horizon();
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[k as u64]);
            let path = simulate_path(&dynamics, spec.p_init(), horizon, &mut rng)?;
            Ok(dynamics.path_cost(&path)? - v0[path.initial_state()])
        })
        .collect::<Result<_>>()?;
    let max_abs = samples.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    Ok(ResidualReport {
        estimate: McEstimate::from_samples(&samples),
        max_abs,
    })
}
