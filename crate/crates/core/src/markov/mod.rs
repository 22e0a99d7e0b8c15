//! Continuous-time Markov chain primitives on a finite state space.

pub mod flow;
pub mod generator;
pub mod grid;
pub mod path;
pub mod psi;
pub mod rng;
pub mod simplex;
pub mod simulate;

pub use flow::{forward_flow, matexp_marginal};
pub use generator::{
    build_reference_generator, validate_generator, GeneratorViolation, RateMatrix, TransitionMask,
};
pub use grid::TimeGrid;
pub use path::{Jump, PathRecord};
pub use psi::{psi_matrix, psi_pinv, psi_pinv_apply, psi_quadratic_form, seminorm_sq};
pub use rng::{derive_stream, StreamRng};
pub use simplex::{SimplexFlow, SimplexPoint};
pub use simulate::{simulate_path, simulate_path_from, ConstantRates, FnRates, RateField};
