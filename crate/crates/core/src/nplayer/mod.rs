//! Finite-player games built from a mean field solution, and the product-chain identities
//! behind them.

pub mod game;
pub mod kron;

pub use game::{
    chaos_error, deviation_gain, deviation_grid, pooled_marginal, simulate_nplayer,
    states_on_grid, ChaosReport, ChaosRow, DeviationReport, DeviationRow, NPlayerRun,
};
pub use kron::{joint_index, kron_generator, kron_psi_identity, PsiIdentity, MAX_JOINT_DIM};
