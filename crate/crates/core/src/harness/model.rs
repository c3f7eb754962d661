use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::intent::{Action, NUM_ACTIONS};

/// A stand-in decoder whose accuracy and confidence are set directly.
///
/// Correct decodes draw their confidence from a Beta distribution with mean
/// `correct_confidence`; wrong decodes from one whose mean is chosen so that, at the reference
/// SNR, mean confidence exceeds accuracy by `confidence_gap` (positive = overconfident).
/// Below the reference SNR the wrong decodes' mean confidence falls by
/// `wrong_confidence_drop_per_db` per dB: noise-induced errors come with flatter posteriors.
/// Confidence lives on `(0.25, 1]` and is the posterior's largest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDecoderModel {
    /// Accuracy at or above the reference SNR.
    pub base_accuracy: f64,
    /// Accuracy lost per dB below the reference SNR; accuracy never drops below chance.
    pub noise_sensitivity: f64,
    pub reference_snr_db: f64,
    pub confidence_gap: f64,
    pub correct_confidence: f64,
    /// Beta concentration `a + b`; larger means tighter confidences.
    pub concentration: f64,
    pub wrong_confidence_drop_per_db: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticDecoderModel {
    fn default() -> Self {
        Self {
            base_accuracy: 0.85,
            noise_sensitivity: 0.02,
            reference_snr_db: 20.0,
            confidence_gap: 0.07,
            correct_confidence: 0.93,
            concentration: 20.0,
            wrong_confidence_drop_per_db: 0.01,
            rng_seed: 0,
        }
    }
}

const CHANCE: f64 = 1.0 / NUM_ACTIONS as f64;
const MIN_CONFIDENCE: f64 = 0.2501;
/// Synthetic decoders never emit a hard one-hot posterior.
pub const MAX_CONFIDENCE: f64 = 0.999;

impl SyntheticDecoderModel {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Scenario(m.into()));
        if !(self.base_accuracy > 0.0 && self.base_accuracy <= 1.0) {
            return bad("base_accuracy must lie in (0, 1]");
        }
        if !(self.noise_sensitivity >= 0.0 && self.noise_sensitivity.is_finite()) {
            return bad("noise_sensitivity must be a nonnegative number");
        }
        if !self.reference_snr_db.is_finite() {
            return bad("reference_snr_db must be finite");
        }
        if !(self.correct_confidence > CHANCE && self.correct_confidence < 1.0) {
            return bad("correct_confidence must lie in (0.25, 1)");
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad("concentration must be positive");
        }
        if !(self.wrong_confidence_drop_per_db >= 0.0 && self.wrong_confidence_drop_per_db.is_finite()) {
            return bad("wrong_confidence_drop_per_db must be a nonnegative number");
        }
        if !self.confidence_gap.is_finite() {
            return bad("confidence_gap must be finite");
        }
        Ok(())
    }

    /// Probability that a decode at this SNR is correct.
    pub fn accuracy_at(&self, snr_db: f64) -> f64 {
        let loss = self.noise_sensitivity * (self.reference_snr_db - snr_db).max(0.0);
        (self.base_accuracy - loss).max(self.base_accuracy.min(CHANCE)).min(1.0)
    }

    /// Mean confidence of wrong decodes implied by the gap at the reference accuracy.
    pub fn wrong_confidence(&self) -> f64 {
        let a = self.base_accuracy;
        let m = if a >= 1.0 { self.correct_confidence - 0.2 } else { (a + self.confidence_gap - a * self.correct_confidence) / (1.0 - a) };
        m.clamp(0.26, 0.99)
    }

    /// Mean confidence of wrong decodes at this SNR.
    pub fn wrong_confidence_at(&self, snr_db: f64) -> f64 {
        let drop = self.wrong_confidence_drop_per_db * (self.reference_snr_db - snr_db).max(0.0);
        (self.wrong_confidence() - drop).max(0.26)
    }

    /// Draws a top-class confidence for a correct or wrong decode at this SNR.
    pub fn draw_confidence<R: Rng + ?Sized>(&self, correct: bool, snr_db: f64, rng: &mut R) -> f64 {
        let mean = if correct { self.correct_confidence } else { self.wrong_confidence_at(snr_db) };
        let mu = ((mean - CHANCE) / (1.0 - CHANCE)).clamp(1e-3, 1.0 - 1e-3);
        let beta = Beta::new(self.concentration * mu, self.concentration * (1.0 - mu)).expect("positive shape parameters");
        (CHANCE + (1.0 - CHANCE) * beta.sample(rng)).clamp(MIN_CONFIDENCE, MAX_CONFIDENCE)
    }
}

/// A posterior whose largest entry is `confidence` on `top`, the rest spread randomly but never
/// reaching the top entry.
pub fn shaped_posterior<R: Rng + ?Sized>(top: Action, confidence: f64, rng: &mut R) -> [f64; NUM_ACTIONS] {
    let confidence = confidence.clamp(MIN_CONFIDENCE, 1.0);
    let rest = 1.0 - confidence;
    let w: [f64; NUM_ACTIONS] = std::array::from_fn(|_| rng.random_range(0.5..1.5));
    let wsum: f64 = (0..NUM_ACTIONS).filter(|&i| i != top.index()).map(|i| w[i]).sum();
    let mut p: [f64; NUM_ACTIONS] = std::array::from_fn(|i| if i == top.index() { confidence } else { rest * w[i] / wsum });
    if (0..NUM_ACTIONS).any(|i| i != top.index() && p[i] >= confidence) {
        for (i, x) in p.iter_mut().enumerate() {
            if i != top.index() {
                *x = rest / (NUM_ACTIONS - 1) as f64;
            }
        }
    }
    p
}

/// A uniformly chosen action other than `not`.
pub fn other_action<R: Rng + ?Sized>(not: Action, rng: &mut R) -> Action {
    let k = rng.random_range(0..NUM_ACTIONS - 1);
    Action::ALL.into_iter().filter(|a| *a != not).nth(k).expect("three others")
}
