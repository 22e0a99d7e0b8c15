//! Backward value equation against frozen mean-field flows, policy cost evaluation,
//! and Monte Carlo checks of the martingale representation.

pub mod dynamics;
pub mod residual;
pub mod value;

pub use dynamics::ControlledDynamics;
pub use residual::{martingale_residual, ResidualReport};
pub use value::{
    evaluate_policy_cost, solve_value, stability_probe, total_cost, PolicySurface, ValueSurface,
};
