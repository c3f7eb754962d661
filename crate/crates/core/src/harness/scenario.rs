use serde::{Deserialize, Serialize};

use super::model::SyntheticDecoderModel;
use super::HarnessError;
use crate::monitor::{CheckMask, MonitorConfig};

/// Signal quality over the course of a session: trials are split into `bins` equal blocks,
/// block `b` at `start_db + (end_db − start_db)·b/(bins − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrSchedule {
    pub start_db: f64,
    pub end_db: f64,
    pub bins: usize,
}

impl Default for SnrSchedule {
    fn default() -> Self {
        Self { start_db: 20.0, end_db: -5.0, bins: 6 }
    }
}

impl SnrSchedule {
    pub fn constant(db: f64) -> Self {
        Self { start_db: db, end_db: db, bins: 1 }
    }

    pub fn bin_of(&self, trial: usize, trials: usize) -> usize {
        (trial * self.bins / trials.max(1)).min(self.bins - 1)
    }

    pub fn bin_snr(&self, bin: usize) -> f64 {
        if self.bins <= 1 {
            self.start_db
        } else {
            self.start_db + (self.end_db - self.start_db) * bin as f64 / (self.bins - 1) as f64
        }
    }
}

/// Frame-level behavior of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialDynamics {
    /// Frames per trial; the last one is scored.
    pub dwell_frames: usize,
    /// Per-frame probability that a non-final frame shows a different class, for trials whose
    /// decode is correct / wrong.
    pub flip_rate_correct: f64,
    pub flip_rate_wrong: f64,
    /// Flip probability for any decode during an EMG episode.
    pub artifact_flip_rate: f64,
    /// Standard deviation of frame-to-frame confidence jitter.
    pub frame_jitter: f64,
    /// Probability of an EMG episode per dB below the decoder's reference SNR.
    pub artifact_rate_per_db: f64,
    /// Decode accuracy during an EMG episode.
    pub artifact_accuracy: f64,
    /// Artifact score (z) during an episode: mean and spread; outside episodes: spread around 0.
    pub artifact_z: f64,
    pub artifact_z_sd: f64,
    pub clean_z_sd: f64,
    /// Probability that each context field the true intent does not use names an infeasible
    /// object (unreachable location, unreachable item, invalid orientation).
    pub hazard_rate: f64,
}

impl Default for TrialDynamics {
    fn default() -> Self {
        Self {
            dwell_frames: 10,
            flip_rate_correct: 0.02,
            flip_rate_wrong: 0.35,
            artifact_flip_rate: 0.02,
            frame_jitter: 0.02,
            artifact_rate_per_db: 0.012,
            artifact_accuracy: 0.25,
            artifact_z: 4.5,
            artifact_z_sd: 1.0,
            clean_z_sd: 0.5,
            hazard_rate: 0.5,
        }
    }
}

/// One experiment: how many trials, under which SNR schedule, against which monitor setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub trials: usize,
    /// Independent sessions (seeds `seed`, `seed + 1`, …) for the paired statistics.
    pub repetitions: usize,
    pub seed: u64,
    /// Feed synthetic EEG windows through the artifact scorer instead of sampled scores.
    pub eeg_windows: bool,
    /// Bins for the calibration report.
    pub calibration_bins: usize,
    pub snr: SnrSchedule,
    pub model: SyntheticDecoderModel,
    pub dynamics: TrialDynamics,
    pub monitor: MonitorConfig,
    pub ablation: CheckMask,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "snr-ramp".into(),
            trials: 6000,
            repetitions: 5,
            seed: 42,
            eeg_windows: false,
            calibration_bins: 15,
            snr: SnrSchedule::default(),
            model: SyntheticDecoderModel::default(),
            dynamics: TrialDynamics::default(),
            monitor: MonitorConfig::default(),
            ablation: CheckMask::ALL,
        }
    }
}

fn unit(name: &str, v: f64) -> Result<(), HarnessError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(HarnessError::Scenario(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.snr.bins == 0 || !self.snr.start_db.is_finite() || !self.snr.end_db.is_finite() {
            return bad("snr schedule needs at least one bin and finite endpoints".into());
        }
        if self.calibration_bins == 0 {
            return bad("calibration_bins must be at least 1".into());
        }
        let d = &self.dynamics;
        if d.dwell_frames == 0 {
            return bad("dwell_frames must be at least 1".into());
        }
        for (n, v) in [
            ("flip_rate_correct", d.flip_rate_correct),
            ("flip_rate_wrong", d.flip_rate_wrong),
            ("artifact_flip_rate", d.artifact_flip_rate),
            ("artifact_accuracy", d.artifact_accuracy),
            ("hazard_rate", d.hazard_rate),
        ] {
            unit(n, v)?;
        }
        for (n, v) in [
            ("frame_jitter", d.frame_jitter),
            ("artifact_rate_per_db", d.artifact_rate_per_db),
            ("artifact_z_sd", d.artifact_z_sd),
            ("clean_z_sd", d.clean_z_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{n} must be a nonnegative number"));
            }
        }
        if !d.artifact_z.is_finite() {
            return bad("artifact_z must be finite".into());
        }
        self.model.validate()?;
        self.monitor.validate().map_err(|e| HarnessError::Scenario(e.to_string()))
    }

    /// Monitor configuration with this scenario's ablation mask applied.
    pub fn monitor_config(&self) -> MonitorConfig {
        MonitorConfig { checks: self.ablation, ..self.monitor.clone() }
    }

    /// Probability of an EMG episode at this SNR.
    pub fn artifact_rate(&self, snr_db: f64) -> f64 {
        (self.dynamics.artifact_rate_per_db * (self.model.reference_snr_db - snr_db).max(0.0)).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_bins() {
        let s = SnrSchedule::default();
        let snrs: Vec<f64> = (0..6).map(|b| s.bin_snr(b)).collect();
        assert_eq!(snrs, [20.0, 15.0, 10.0, 5.0, 0.0, -5.0]);
        assert_eq!(s.bin_of(0, 6000), 0);
        assert_eq!(s.bin_of(999, 6000), 0);
        assert_eq!(s.bin_of(1000, 6000), 1);
        assert_eq!(s.bin_of(5999, 6000), 5);
        assert_eq!(SnrSchedule::constant(3.0).bin_snr(0), 3.0);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let spec = ScenarioSpec::default();
        assert_eq!(ScenarioSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let partial = ScenarioSpec::from_toml("trials = 10\n[snr]\nbins = 2\n[ablation]\nlogical_check = false\n").unwrap();
        assert_eq!(partial.trials, 10);
        assert_eq!(partial.snr.bins, 2);
        assert_eq!(partial.snr.start_db, 20.0);
        assert!(!partial.monitor_config().checks.logical_check);
    }

    #[test]
    fn invalid_scenarios() {
        for text in ["trials = 0", "[dynamics]\nhazard_rate = 2.0", "[model]\nbase_accuracy = 0.0", "[monitor]\nk_frames = 1", "bogus = 1"]
        {
            assert!(ScenarioSpec::from_toml(text).is_err(), "{text}");
        }
    }
}
