//! Shared fixtures for the criterion benchmarks.

use duty_core::duty::BaselineHumility;
use duty_core::monte_carlo::SimulationConfig;
use duty_core::signal::SignalFunction;

pub fn linear_config(n_trials: u64) -> SimulationConfig {
    SimulationConfig::new(n_trials, 42, SignalFunction::Linear, BaselineHumility::default())
        .expect("valid config")
}
