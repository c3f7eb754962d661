//! Desk-scale experiments: a synthetic decoder whose accuracy and calibration are set
//! directly, sessions whose signal quality degrades on a schedule, the noise-robustness and
//! ablation experiments built on them, and a latency benchmark.

mod experiment;
mod generate;
mod model;
mod scenario;

use thiserror::Error;

pub use experiment::{
    ablation_variants, bench_latency, kitchen_catalog, record_session, run_ablation_suite, run_experiment, scenario_monitor, AblationRow,
    AblationTable, BenchReport, BinResult, ConditionResult, ExperimentResult, RepetitionResult,
};
pub use generate::{generate_session, generate_trials, session_rng, SyntheticEeg, SyntheticTrial, WorldCatalog};
pub use model::{other_action, shaped_posterior, SyntheticDecoderModel, MAX_CONFIDENCE};
pub use scenario::{ScenarioSpec, SnrSchedule, TrialDynamics};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Monitor(#[from] crate::monitor::MonitorError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}
