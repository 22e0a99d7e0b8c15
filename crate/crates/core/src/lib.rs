pub mod equilibrium;
pub mod error;
pub mod girsanov;
pub mod hjb;
pub mod markov;
pub mod measures;
pub mod model;
pub mod nplayer;
pub mod scenarios;
pub mod stats;

pub use error::{MfgError, Result};
pub use hjb::*;
pub use markov::*;
pub use measures::*;
pub use model::*;
pub use stats::{log_log_slope, ols_slope, McEstimate};
pub use equilibrium::{
    apply_phi, best_response_gap, candidate_policies, consistency_residual, default_init,
    picard_solve, EquilibriumSolution, GapReport, PhiImage, PicardOptions, TraceRow,
};
pub use girsanov::{
    importance_cost, log_likelihood, log_likelihood_from, measure_consistency, ConsistencyReport,
    ImportanceReport, LikelihoodBreakdown,
};
pub use nplayer::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
