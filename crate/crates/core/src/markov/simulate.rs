use rand::Rng;

use crate::error::{MfgError, Result};
use crate::markov::generator::RateMatrix;
use crate::markov::grid::TimeGrid;
use crate::markov::path::{Jump, PathRecord};
use crate::markov::simplex::SimplexPoint;

/// Time-dependent transition rates of a chain.
pub trait RateField: Sync {
    fn num_states(&self) -> usize;

    /// Off-diagonal rates out of state `i` at time `t`; `out[i]` is set to 0.
    fn rates(&self, t: f64, i: usize, out: &mut [f64]);

    /// Rates as seen by a grid integrator working inside cell `cell`.
    ///
    /// Fields with piecewise-constant inputs override this so that stage
    /// evaluations at the right end of a cell still use that cell's data.
    fn rates_in_cell(&self, cell: usize, t: f64, i: usize, out: &mut [f64]) {
        let _ = cell;
        self.rates(t, i, out);
    }

    /// Uniform upper bound on any single off-diagonal rate.
    fn rate_bound(&self) -> f64;

    /// Grid on whose cells the rates are smooth, if they are only piecewise smooth.
    fn cell_grid(&self) -> Option<TimeGrid> {
        None
    }

    /// `int_a^b sum_{j != i} q_ij(s) ds` when the field has it tabulated.
    fn integrated_exit(&self, i: usize, a: f64, b: f64) -> Option<f64> {
        let _ = (i, a, b);
        None
    }
}

/// Time-homogeneous rates given by a generator.
#[derive(Debug, Clone)]
pub struct ConstantRates {
    q: RateMatrix,
    bound: f64,
}

impl ConstantRates {
    pub fn new(q: RateMatrix) -> Self {
        let m = q.num_states();
        let mut bound = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    bound = bound.max(q.rate(i, j));
                }
            }
        }
        Self { q, bound }
    }

    pub fn generator(&self) -> &RateMatrix {
        &self.q
    }
}

impl RateField for ConstantRates {
    fn num_states(&self) -> usize {
        self.q.num_states()
    }

    fn rates(&self, _t: f64, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = if i == j { 0.0 } else { self.q.rate(i, j) };
        }
    }

    fn rate_bound(&self) -> f64 {
        self.bound
    }
}

/// Rates given by a closure `(t, i, out)`.
pub struct FnRates<F> {
    m: usize,
    bound: f64,
    f: F,
}

impl<F> FnRates<F>
where
    F: Fn(f64, usize, &mut [f64]) + Sync,
{
    pub fn new(m: usize, bound: f64, f: F) -> Self {
        Self { m, bound, f }
    }
}

impl<F> RateField for FnRates<F>
where
    F: Fn(f64, usize, &mut [f64]) + Sync,
{
    fn num_states(&self) -> usize {
        self.m
    }

    fn rates(&self, t: f64, i: usize, out: &mut [f64]) {
        (self.f)(t, i, out);
        out[i] = 0.0;
    }

    fn rate_bound(&self) -> f64 {
        self.bound
    }
}

/// Samples an index from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u * total < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Exact sample of the chain on `[0, horizon]` by thinning a Poisson clock of rate `(m-1) * C2`.
pub fn simulate_path<R: Rng + ?Sized>(
    field: &dyn RateField,
    p0: &SimplexPoint,
    horizon: f64,
    rng: &mut R,
) -> Result<PathRecord> {
    if p0.dim() != field.num_states() {
        return Err(MfgError::DimensionMismatch {
            expected: field.num_states(),
            got: p0.dim(),
            context: "initial distribution",
        });
    }
    let x0 = sample_categorical(p0.weights(), rng);
    simulate_path_from(field, x0, horizon, rng)
}

/// As [`simulate_path`] with a fixed initial state.
pub fn simulate_path_from<R: Rng + ?Sized>(
    field: &dyn RateField,
    x0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<PathRecord> {
    let m = field.num_states();
    if x0 >= m {
        return Err(MfgError::OutOfRange {
            what: "state",
            index: x0,
            size: m,
        });
    }
    let c2 = field.rate_bound();
    if !(c2 >= 0.0) || !c2.is_finite() {
        return Err(MfgError::Simulation {
            time: 0.0,
            reason: format!("rate bound {c2} is not a finite nonnegative number"),
        });
    }
    let clock = (m as f64 - 1.0) * c2;
    let mut jumps = Vec::new();
    let mut state = x0;
    let mut t = 0.0;
    let mut rates = vec![0.0; m];
    if clock == 0.0 {
        return PathRecord::new(x0, jumps, horizon);
    }
    loop {
        let e: f64 = rng.random::<f64>();
        t += -(1.0 - e).ln() / clock;
        if t >= horizon {
            break;
        }
        field.rates(t, state, &mut rates);
        let mut total = 0.0;
        for (j, &r) in rates.iter().enumerate() {
            if j == state {
                continue;
            }
            if !(r >= 0.0) || r > c2 * (1.0 + 1e-12) {
                return Err(MfgError::Simulation {
                    time: t,
                    reason: format!(
                        "rate {r} from state {} to {} outside [0, {c2}]",
                        state + 1,
                        j + 1
                    ),
                });
            }
            total += r;
        }
        let u: f64 = rng.random::<f64>() * clock;
        if u >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut next = state;
        for (j, &r) in rates.iter().enumerate() {
            if j == state {
                continue;
            }
            acc += r;
            if u < acc {
                next = j;
                break;
            }
        }
        if next == state {
            // Rounding left u just above the last partial sum.
            next = rates
                .iter()
                .enumerate()
                .rposition(|(j, &r)| j != state && r > 0.0)
                .unwrap_or(state);
            if next == state {
                continue;
            }
        }
        state = next;
        jumps.push(Jump { time: t, state });
    }
    PathRecord::new(x0, jumps, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::generator::build_reference_generator;
    use crate::markov::rng::derive_stream;

    #[test]
    fn zero_horizon_has_no_jumps() {
        let f = ConstantRates::new(build_reference_generator(3, None, false).unwrap());
        let mut rng = derive_stream(1, &[]);
        let p = simulate_path(&f, &SimplexPoint::vertex(3, 1).unwrap(), 0.0, &mut rng).unwrap();
        assert_eq!(p.initial_state(), 1);
        assert_eq!(p.n_jumps(), 0);
    }

    #[test]
    fn reports_rates_above_bound() {
        let f = FnRates::new(2, 1.0, |_t, i, out: &mut [f64]| {
            out[1 - i] = 5.0;
        });
        let mut rng = derive_stream(1, &[]);
        let err = simulate_path_from(&f, 0, 10.0, &mut rng).unwrap_err();
        assert!(matches!(err, MfgError::Simulation { .. }));
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut rng = derive_stream(3, &[]);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
