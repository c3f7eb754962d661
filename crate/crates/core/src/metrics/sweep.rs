use serde::{Deserialize, Serialize};

use super::calibration::LabeledPrediction;
use super::safety::SafetyLedger;
use super::MetricsError;

/// Weights of the threshold objective `α·safety + β·(1 − intervention) + γ·F1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ObjectiveWeights {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn score(&self, p: &SweepPoint) -> f64 {
        self.alpha * p.safety_rate + self.beta * (1.0 - p.intervention_rate) + self.gamma * p.f1
    }
}

pub const NAMED_OBJECTIVES: [(&str, ObjectiveWeights); 4] = [
    ("Safety-First", ObjectiveWeights::new(1.0, 0.0, 0.0)),
    ("Balanced", ObjectiveWeights::new(0.33, 0.33, 0.34)),
    ("Responsiveness", ObjectiveWeights::new(0.2, 0.6, 0.2)),
    ("F1-Optimal", ObjectiveWeights::new(0.0, 0.0, 1.0)),
];

/// Scores within this distance count as tied; ties go to the smallest threshold.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub safety_rate: f64,
    pub intervention_rate: f64,
    pub f1: f64,
    pub ledger: SafetyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOptimum {
    pub name: String,
    pub weights: ObjectiveWeights,
    pub tau: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweepResult {
    pub points: Vec<SweepPoint>,
    pub optima: Vec<NamedOptimum>,
}

/// Thresholds 0.1, 0.2, …, 1.0.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// One ledger per threshold for a gate that intervenes iff confidence < τ.
pub fn threshold_sweep(preds: &[LabeledPrediction], grid: &[f64]) -> Result<ThresholdSweepResult, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(MetricsError::InvalidGrid);
    }
    let points: Vec<SweepPoint> = grid
        .iter()
        .map(|&tau| {
            let mut ledger = SafetyLedger::default();
            for p in preds {
                ledger.record(p.correct(), p.confidence < tau);
            }
            SweepPoint { tau, safety_rate: ledger.safety_rate(), intervention_rate: ledger.intervention_rate(), f1: ledger.f1(), ledger }
        })
        .collect();
    let optima = NAMED_OBJECTIVES
        .iter()
        .map(|(name, w)| {
            let (tau, score) = best(&points, *w).expect("grid is nonempty");
            NamedOptimum { name: name.to_string(), weights: *w, tau, score }
        })
        .collect();
    Ok(ThresholdSweepResult { points, optima })
}

fn best(points: &[SweepPoint], w: ObjectiveWeights) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for p in points {
        let s = w.score(p);
        best = match best {
            None => Some((p.tau, s)),
            Some((bt, bs)) if s > bs + TIE_TOLERANCE || ((s - bs).abs() <= TIE_TOLERANCE && p.tau < bt) => Some((p.tau, s)),
            keep => keep,
        };
    }
    best
}

/// The threshold maximizing the weighted objective; ties go to the smallest τ.
pub fn optimize_threshold(points: &[SweepPoint], weights: ObjectiveWeights) -> Option<f64> {
    best(points, weights).map(|(t, _)| t)
}
