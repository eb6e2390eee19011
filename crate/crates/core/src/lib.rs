//! Proportional duty: D_total = K[(1 - HI) + HI * g(C_signal)].
//!
//! The crate provides the pure duty equation, a deterministic seeded
//! Monte Carlo validation engine, a ranking-preservation verification
//! suite, and a scenario-evaluation policy with an append-only audit
//! trail.

pub mod decision;
pub mod duty;
pub mod error;
pub mod monte_carlo;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod verification;

pub use duty::{
    conservation_residual, effective_humility, evaluate, BaselineHumility, DutyBreakdown,
    DutyInputs,
};
pub use error::{DutyError, StatsError};
pub use signal::SignalFunction;
