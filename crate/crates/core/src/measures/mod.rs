//! Discrete probability measures on the control set and on states.

pub mod control_box;
pub mod discrete;
pub mod transport;
pub mod wasserstein;

pub use control_box::ControlBox;
pub use discrete::{
    empirical_controls, empirical_states, pushforward_policy, ControlFlow, DiscreteMeasure,
};
pub use wasserstein::{w1, w1_exact_lp};
