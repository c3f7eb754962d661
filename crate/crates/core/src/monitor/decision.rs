use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::intent::{Action, NUM_ACTIONS};
use crate::planner::{GroundAction, Invariant};

/// Why the gate halted, or `None` for an executed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Cause {
    None,
    LowConfidence,
    HighArtifact,
    HighOscillation,
    Logical(Invariant),
    Warmup,
}

impl Cause {
    pub const ALL: [Cause; 8] = [
        Cause::None,
        Cause::LowConfidence,
        Cause::HighArtifact,
        Cause::HighOscillation,
        Cause::Logical(Invariant::Phi1),
        Cause::Logical(Invariant::Phi2),
        Cause::Logical(Invariant::Phi3),
        Cause::Warmup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Cause::None => "NONE",
            Cause::LowConfidence => "LOW_CONFIDENCE",
            Cause::HighArtifact => "HIGH_ARTIFACT",
            Cause::HighOscillation => "HIGH_OSCILLATION",
            Cause::Logical(Invariant::Phi1) => "LOGICAL_PHI1",
            Cause::Logical(Invariant::Phi2) => "LOGICAL_PHI2",
            Cause::Logical(Invariant::Phi3) => "LOGICAL_PHI3",
            Cause::Warmup => "WARMUP",
        }
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cause::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown cause `{s}`"))
    }
}

impl From<Cause> for String {
    fn from(c: Cause) -> Self {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for Cause {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Execute,
    Halt,
}

/// Quantities the checks were evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    /// Normalized entropy of the calibrated posterior.
    pub entropy: f64,
    /// Artifact score; `None` when no window or score was supplied (check treated as passing).
    pub artifact: Option<f64>,
    pub oscillation: f64,
    pub argmax: Action,
    pub max_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorDecision {
    pub verdict: Verdict,
    pub cause: Cause,
    /// Plan step executed this frame; `None` on halt or when nothing remains to do.
    pub action: Option<GroundAction>,
    pub measurements: Measurements,
    /// The planner hit its state budget; reported as a φ3 halt.
    #[serde(default)]
    pub budget_exceeded: bool,
}

impl MonitorDecision {
    pub fn is_halt(&self) -> bool {
        self.verdict == Verdict::Halt
    }
}

/// Calibrated posterior copied into traces.
pub type Probs = [f64; NUM_ACTIONS];
