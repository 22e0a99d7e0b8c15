//! Small reference models used by tests, benchmarks and the command line.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::markov::simplex::SimplexPoint;
use crate::measures::ControlBox;
use crate::model::families::{
    LinearRates, LinearStateCost, LinearTerminalCost, QuadraticControlCost,
};
use crate::model::spec::ProblemSpec;

/// Two states, `q_12 = q_21 = a`, `f = a^2/2`, `g = (0, 1)`, `A = [0.1, 2]`, `T = 1`.
pub fn quadratic_two_state() -> Result<ProblemSpec> {
    ProblemSpec::builder(2, 1.0, ControlBox::interval(0.1, 2.0)?)
        .rate_bounds(0.05, 2.5)
        .gamma(0.5)
        .rates(Arc::new(LinearRates::uniform(2, 0.0, &[1.0])))
        .control_cost(Arc::new(QuadraticControlCost::new(1.0, vec![], 0.0)))
        .terminal_cost(Arc::new(LinearTerminalCost::constant(vec![0.0, 1.0])))
        .build()
}

/// The quadratic two-state model with congestion `f1 = g = kappa p_i`, started at `(0.9, 0.1)`.
pub fn monotone_congestion(kappa: f64) -> Result<ProblemSpec> {
    quadratic_two_state()?
        .to_builder()
        .state_cost(Arc::new(LinearStateCost::congestion(kappa)))
        .terminal_cost(Arc::new(LinearTerminalCost::congestion(vec![0.0, 0.0], kappa)))
        .p_init(SimplexPoint::new(vec![0.9, 0.1])?)
        .build()
}

/// As [`monotone_congestion`] with `g = -p_i`, which violates monotonicity.
pub fn anti_monotone() -> Result<ProblemSpec> {
    monotone_congestion(1.0)?
        .to_builder()
        .state_cost(Arc::new(LinearStateCost::zero()))
        .terminal_cost(Arc::new(LinearTerminalCost::congestion(vec![0.0, 0.0], -1.0)))
        .build()
}

/// Random model with quadratic control cost, affine rates and linear congestion terms.
///
/// Rates are kept inside `[0.05, 5]` on the whole box so the model validates.
pub fn random_quadratic<R: Rng + ?Sized>(m: usize, l: usize, rng: &mut R) -> Result<ProblemSpec> {
    let lower: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|lo| lo + rng.random_range(0.2..2.0)).collect();
    let bx = ControlBox::new(lower.clone(), upper.clone())?;
    let mut base = Vec::with_capacity(m * m);
    let mut slope = Vec::with_capacity(m * m * l);
    for _ in 0..m * m {
        let s: Vec<f64> = (0..l).map(|_| rng.random_range(-0.5..0.5)).collect();
        // Smallest value of s . a over the box.
        let low: f64 = s
            .iter()
            .zip(lower.iter().zip(&upper))
            .map(|(c, (lo, hi))| (c * lo).min(c * hi))
            .sum();
        base.push(0.2 - low + rng.random_range(0.0..1.0));
        slope.extend(s);
    }
    let curvature = rng.random_range(0.5..3.0);
    let linear: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..l).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let coupling = rng.random_range(-0.5..0.5);
    let kappa = rng.random_range(0.0..1.0);
    let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    ProblemSpec::builder(m, 1.0, bx)
        .rate_bounds(0.05, 5.0)
        .gamma(curvature / 2.0)
        .rates(Arc::new(LinearRates::new(m, l, base, slope)))
        .control_cost(Arc::new(QuadraticControlCost::new(curvature, linear, coupling)))
        .state_cost(Arc::new(LinearStateCost::congestion(kappa)))
        .terminal_cost(Arc::new(LinearTerminalCost::congestion(g, kappa)))
        .build()
}
