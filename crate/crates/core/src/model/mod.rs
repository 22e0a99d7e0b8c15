//! Problem definitions, Hamiltonians and structural diagnostics.

pub mod diagnostics;
pub mod families;
pub mod hamiltonian;
pub mod spec;

pub use diagnostics::{
    check_monotonicity, lipschitz_probe, validate_spec, LipschitzReport, MonotonicityReport,
    SpecReport,
};
pub use families::{
    ControlCost, ControlMeanCost, InteractionCost, LinearRates, LinearStateCost,
    LinearTerminalCost, QuadraticControlCost, QuarticControlCost, RateModel, ShiftedStateCost,
    ShiftedTerminalCost, StateCost, TerminalCost,
};
pub use hamiltonian::{
    control_tilt, hamiltonian, hamiltonian_eval, hjb_driver, minimize_hamiltonian,
    minimize_hamiltonian_numeric, optimal_control, HamiltonianEval, Minimizer, Strategy,
};
pub use spec::{ProblemSpec, ProblemSpecBuilder, SpecConfig};
