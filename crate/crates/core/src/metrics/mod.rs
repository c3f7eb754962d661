//! Offline evaluation: calibration error metrics and temperature scaling, safety accounting,
//! single-threshold sweeps with objective-weighted threshold selection, and paired statistics.

mod calibration;
mod safety;
mod stats;
mod sweep;

use thiserror::Error;

pub use calibration::{
    ace, bin_index, ece, equal_count_bins, equal_width_bins, mce, nll, soften, temperature_scale, Bin, CalibrationReport,
    LabeledPrediction, TemperatureFit, TEMPERATURE_RANGE,
};
pub use safety::{classify_outcome, safety_violation, LedgerSummary, Outcome, SafetyLedger};
pub use stats::{paired_t_and_effect, t_statistic, PairedTest};
pub use sweep::{
    default_grid, optimize_threshold, threshold_sweep, NamedOptimum, ObjectiveWeights, SweepPoint, ThresholdSweepResult, NAMED_OBJECTIVES,
    TIE_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no predictions")]
    Empty,
    #[error("bin count must be at least 1, got {0}")]
    InvalidBins(usize),
    #[error("prediction {index}: confidence {value} outside [0, 1]")]
    InvalidConfidence { index: usize, value: f64 },
    #[error("threshold grid must be nonempty and finite")]
    InvalidGrid,
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}
