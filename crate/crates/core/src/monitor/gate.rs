//! The pure decision rule: the first failing check, in a fixed order, decides the halt cause.

use serde::{Deserialize, Serialize};

use super::decision::Cause;
use crate::planner::Invariant;

/// Gate checks in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// ψ1: normalized entropy below threshold.
    Entropy,
    /// ψ2: artifact score below threshold.
    Artifact,
    /// ψ3: oscillation index below threshold (and history warmed up).
    Oscillation,
    /// φ1: every referenced location reachable.
    Reachable,
    /// φ2: safe configuration where required.
    SafeConfiguration,
    /// φ3: every step a valid transition.
    ValidTransition,
}

impl Check {
    pub const ORDER: [Check; 6] =
        [Check::Entropy, Check::Artifact, Check::Oscillation, Check::Reachable, Check::SafeConfiguration, Check::ValidTransition];

    pub fn position(self) -> usize {
        Self::ORDER.iter().position(|c| *c == self).expect("listed")
    }

    /// Cause reported when this check is the first to fail.
    pub fn cause(self) -> Cause {
        match self {
            Check::Entropy => Cause::LowConfidence,
            Check::Artifact => Cause::HighArtifact,
            Check::Oscillation => Cause::HighOscillation,
            Check::Reachable => Cause::Logical(Invariant::Phi1),
            Check::SafeConfiguration => Cause::Logical(Invariant::Phi2),
            Check::ValidTransition => Cause::Logical(Invariant::Phi3),
        }
    }

    pub fn for_invariant(inv: Invariant) -> Self {
        match inv {
            Invariant::Phi1 => Check::Reachable,
            Invariant::Phi2 => Check::SafeConfiguration,
            Invariant::Phi3 => Check::ValidTransition,
        }
    }
}

/// Pass/fail of each check, indexed by [`Check::position`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcomes(pub [bool; 6]);

impl CheckOutcomes {
    pub const ALL_PASS: Self = Self([true; 6]);

    pub fn passed(&self, c: Check) -> bool {
        self.0[c.position()]
    }

    pub fn set(&mut self, c: Check, pass: bool) {
        self.0[c.position()] = pass;
    }

    /// The first failing check in evaluation order, if any.
    pub fn first_failure(&self) -> Option<Check> {
        Check::ORDER.into_iter().find(|c| !self.passed(*c))
    }
}

/// `None` means execute; otherwise halt with the returned cause. A failing oscillation check
/// during warm-up reports [`Cause::Warmup`].
pub fn gate(outcomes: &CheckOutcomes, warming_up: bool) -> Option<Cause> {
    outcomes.first_failure().map(|c| match c {
        Check::Oscillation if warming_up => Cause::Warmup,
        c => c.cause(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_matrix() {
        for bits in 0u32..64 {
            let outcomes = CheckOutcomes(std::array::from_fn(|i| bits & (1 << i) == 0));
            let cause = gate(&outcomes, false);
            if bits == 0 {
                assert_eq!(cause, None);
            } else {
                let first = bits.trailing_zeros() as usize;
                assert_eq!(cause, Some(Check::ORDER[first].cause()), "bits {bits:06b}");
            }
        }
    }

    #[test]
    fn warmup_takes_oscillation_slot() {
        let mut o = CheckOutcomes::ALL_PASS;
        o.set(Check::Oscillation, false);
        o.set(Check::Reachable, false);
        assert_eq!(gate(&o, true), Some(Cause::Warmup));
        o.set(Check::Entropy, false);
        assert_eq!(gate(&o, true), Some(Cause::LowConfidence));
    }
}
