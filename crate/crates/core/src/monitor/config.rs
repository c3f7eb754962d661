use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::intent::{IntentHistory, ALPHA_EEGNET};
use crate::planner::SearchLimits;

/// Which checks the gate evaluates. Disabled checks always pass; disabling the calibration
/// adjustment feeds the raw posterior (α = 1) to the entropy check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckMask {
    pub entropy_check: bool,
    pub artifact_check: bool,
    pub oscillation_check: bool,
    pub calibration_adjustment: bool,
    pub logical_check: bool,
}

impl Default for CheckMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl CheckMask {
    pub const ALL: Self =
        Self { entropy_check: true, artifact_check: true, oscillation_check: true, calibration_adjustment: true, logical_check: true };

    /// Toggle names accepted by [`CheckMask::disable`].
    pub const NAMES: [&'static str; 5] = ["entropy", "artifact", "oscillation", "calibration", "logical"];

    /// Turns one toggle off by name (`entropy`, `artifact`, `oscillation`, `calibration`,
    /// `logical`; a `_check` / `_adjustment` suffix is accepted).
    pub fn disable(&mut self, name: &str) -> Result<(), MonitorError> {
        let key = name.trim().to_ascii_lowercase().replace('-', "_");
        let key = key.trim_end_matches("_check").trim_end_matches("_adjustment");
        match key {
            "entropy" => self.entropy_check = false,
            "artifact" => self.artifact_check = false,
            "oscillation" => self.oscillation_check = false,
            "calibration" => self.calibration_adjustment = false,
            "logical" => self.logical_check = false,
            _ => return Err(MonitorError::Config(format!("unknown check `{name}` (expected one of {})", Self::NAMES.join(", ")))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    /// Entropy threshold: ψ1 passes iff `Ĥ < tau_h`.
    pub tau_h: f64,
    /// Artifact threshold in z-units: ψ2 passes iff `A < tau_a`.
    pub tau_a: f64,
    /// Oscillation threshold: ψ3 passes iff `Ω < tau_omega`.
    pub tau_omega: f64,
    /// Weight of the decoder posterior against the uniform distribution.
    pub alpha_m: f64,
    /// Oscillation window length, in frames.
    pub k_frames: usize,
    /// Halt the first `k_frames` frames while the oscillation window fills.
    pub warmup_halt: bool,
    pub checks: CheckMask,
    pub limits: SearchLimits,
    /// Distinct (goal, state) searches remembered before the cache is cleared.
    pub plan_cache_capacity: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            tau_h: 0.75,
            tau_a: 2.5,
            tau_omega: 0.3,
            alpha_m: ALPHA_EEGNET,
            k_frames: IntentHistory::DEFAULT_CAPACITY,
            warmup_halt: true,
            checks: CheckMask::ALL,
            limits: SearchLimits::default(),
            plan_cache_capacity: 4096,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), MonitorError> {
        let bad = |m: String| Err(MonitorError::Config(m));
        if !(0.0..=1.0).contains(&self.tau_h) {
            return bad(format!("tau_h must lie in [0, 1], got {}", self.tau_h));
        }
        if !self.tau_a.is_finite() {
            return bad(format!("tau_a must be finite, got {}", self.tau_a));
        }
        if !(0.0..=1.0).contains(&self.tau_omega) {
            return bad(format!("tau_omega must lie in [0, 1], got {}", self.tau_omega));
        }
        if !(0.0..=1.0).contains(&self.alpha_m) {
            return bad(format!("alpha_m must lie in [0, 1], got {}", self.alpha_m));
        }
        if self.k_frames < 2 {
            return bad(format!("k_frames must be at least 2, got {}", self.k_frames));
        }
        if self.limits.max_depth == 0 || self.limits.max_states == 0 {
            return bad("search limits must be positive".into());
        }
        if self.plan_cache_capacity == 0 {
            return bad("plan_cache_capacity must be positive".into());
        }
        Ok(())
    }

    /// Mixing weight actually applied.
    pub fn effective_alpha(&self) -> f64 {
        if self.checks.calibration_adjustment {
            self.alpha_m
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = MonitorConfig::default();
        c.validate().unwrap();
        assert_eq!((c.tau_h, c.tau_a, c.tau_omega, c.k_frames), (0.75, 2.5, 0.3, 10));
        assert_eq!(c.effective_alpha(), 0.8);
    }

    #[test]
    fn rejects_out_of_range() {
        for f in [
            |c: &mut MonitorConfig| c.tau_h = 1.5,
            |c: &mut MonitorConfig| c.tau_omega = -0.1,
            |c: &mut MonitorConfig| c.alpha_m = 2.0,
            |c: &mut MonitorConfig| c.k_frames = 1,
            |c: &mut MonitorConfig| c.tau_a = f64::NAN,
        ] {
            let mut c = MonitorConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
        let c = MonitorConfig { tau_h: 0.0, ..Default::default() };
        c.validate().unwrap();
    }

    #[test]
    fn mask_names() {
        let mut m = CheckMask::ALL;
        m.disable("entropy_check").unwrap();
        m.disable("Calibration").unwrap();
        m.disable("logical").unwrap();
        assert!(!m.entropy_check && !m.calibration_adjustment && !m.logical_check);
        assert!(m.artifact_check && m.oscillation_check);
        assert!(m.disable("bogus").is_err());
        let c = MonitorConfig { checks: m, ..Default::default() };
        assert_eq!(c.effective_alpha(), 1.0);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: MonitorConfig = serde_json::from_str(r#"{"tau_h":0.5,"checks":{"logical_check":false}}"#).unwrap();
        assert_eq!(c.tau_h, 0.5);
        assert_eq!(c.tau_a, 2.5);
        assert!(!c.checks.logical_check && c.checks.entropy_check);
    }
}
