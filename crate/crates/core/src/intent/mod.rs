//! Intent posteriors over the four manipulation primitives, calibration mixing,
//! normalized entropy and the oscillation index.

mod history;
pub mod stream;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use history::IntentHistory;

/// Number of action classes.
pub const NUM_ACTIONS: usize = 4;

/// Per-decoder mixing presets.
pub const ALPHA_EEGNET: f64 = 0.8;
pub const ALPHA_RIEMANNIAN: f64 = 0.5;
pub const ALPHA_DEFAULT: f64 = 0.6;

/// Tolerance within which an almost-normalized vector is renormalized instead of rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntentError {
    #[error("probability {index} is invalid: {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("mixing weight {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("history capacity must be at least 2, got {0}")]
    InvalidCapacity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Grasp,
    Release,
    MoveTo,
    Rotate,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Grasp, Action::Release, Action::MoveTo, Action::Rotate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Grasp => "GRASP",
            Action::Release => "RELEASE",
            Action::MoveTo => "MOVE_TO",
            Action::Rotate => "ROTATE",
        }
    }

    /// Name of the planning schema achieving this intent.
    pub fn schema(self) -> &'static str {
        match self {
            Action::Grasp => "grasp",
            Action::Release => "release",
            Action::MoveTo => "move_to",
            Action::Rotate => "rotate",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = IntentError;

    /// Accepts the canonical names case-insensitively, plus indices `0..4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(i) = t.parse::<usize>() {
            return Self::from_index(i).ok_or_else(|| IntentError::UnknownAction(s.to_string()));
        }
        match t.to_ascii_uppercase().replace('-', "_").as_str() {
            "GRASP" => Ok(Action::Grasp),
            "RELEASE" => Ok(Action::Release),
            "MOVE_TO" | "MOVETO" => Ok(Action::MoveTo),
            "ROTATE" => Ok(Action::Rotate),
            _ => Err(IntentError::UnknownAction(s.to_string())),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64; NUM_ACTIONS]) -> usize {
    let mut best = 0;
    for i in 1..NUM_ACTIONS {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

/// A decoder posterior: a point on the probability simplex over [`Action::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; NUM_ACTIONS]", into = "[f64; NUM_ACTIONS]")]
pub struct IntentPosterior([f64; NUM_ACTIONS]);

impl IntentPosterior {
    pub const UNIFORM: Self = Self([0.25; NUM_ACTIONS]);

    /// Validates entries, renormalizing when the sum is within [`RENORMALIZE_TOLERANCE`] of 1.
    pub fn new(probs: [f64; NUM_ACTIONS]) -> Result<Self, IntentError> {
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(IntentError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(IntentError::NotNormalized { sum });
        }
        Ok(Self(probs.map(|p| p / sum)))
    }

    pub fn one_hot(action: Action) -> Self {
        let mut p = [0.0; NUM_ACTIONS];
        p[action.index()] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64; NUM_ACTIONS] {
        &self.0
    }

    pub fn argmax(&self) -> Action {
        Action::ALL[argmax(&self.0)]
    }

    pub fn max_prob(&self) -> f64 {
        self.0[argmax(&self.0)]
    }
}

impl TryFrom<[f64; NUM_ACTIONS]> for IntentPosterior {
    type Error = IntentError;
    fn try_from(p: [f64; NUM_ACTIONS]) -> Result<Self, Self::Error> {
        Self::new(p)
    }
}

impl From<IntentPosterior> for [f64; NUM_ACTIONS] {
    fn from(p: IntentPosterior) -> Self {
        p.0
    }
}

/// A posterior blended toward the uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPosterior {
    probs: [f64; NUM_ACTIONS],
    alpha_m: f64,
}

impl CalibratedPosterior {
    pub fn probs(&self) -> &[f64; NUM_ACTIONS] {
        &self.probs
    }

    pub fn alpha_m(&self) -> f64 {
        self.alpha_m
    }

    pub fn argmax(&self) -> Action {
        Action::ALL[argmax(&self.probs)]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[argmax(&self.probs)]
    }

    pub fn entropy(&self) -> f64 {
        normalized_entropy(&self.probs)
    }
}

/// `u + α (p − u)` with `u` uniform.
pub fn calibrate(p: &IntentPosterior, alpha_m: f64) -> Result<CalibratedPosterior, IntentError> {
    if !(0.0..=1.0).contains(&alpha_m) {
        return Err(IntentError::InvalidAlpha(alpha_m));
    }
    let u = 1.0 / NUM_ACTIONS as f64;
    let probs = p.0.map(|pi| u + alpha_m * (pi - u));
    Ok(CalibratedPosterior { probs, alpha_m })
}

/// Shannon entropy in nats divided by `ln 4`, clamped to `[0, 1]`; `0 ln 0 = 0`.
pub fn normalized_entropy(p: &[f64; NUM_ACTIONS]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    (h / (NUM_ACTIONS as f64).ln()).clamp(0.0, 1.0)
}
