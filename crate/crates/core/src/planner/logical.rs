use std::fmt;

use serde::{Deserialize, Serialize};

use super::domain::DomainDef;
use super::state::{Atom, Plan, WorldState};

/// Names the logical checks are phrased in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalRules {
    pub reachable_predicate: String,
    pub safe_predicate: String,
    pub location_type: String,
}

impl Default for LogicalRules {
    fn default() -> Self {
        Self { reachable_predicate: "reachable".into(), safe_predicate: "safe-configuration".into(), location_type: "location".into() }
    }
}

/// The three logical invariants: every referenced location is reachable (φ1), the robot is in
/// a safe configuration wherever an action requires it (φ2), every step is a valid transition (φ3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Phi1,
    Phi2,
    Phi3,
}

impl Invariant {
    pub fn symbol(self) -> &'static str {
        match self {
            Invariant::Phi1 => "φ1",
            Invariant::Phi2 => "φ2",
            Invariant::Phi3 => "φ3",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    /// Zero-based plan step.
    pub step: usize,
    pub detail: String,
}

/// Walks `plan` from `s0` and lists every logical violation. The walk stops at the first step
/// whose preconditions do not hold, since later states are undefined.
pub fn check_logical(domain: &DomainDef, rules: &LogicalRules, s0: &WorldState, plan: &Plan) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut state = s0.clone();
    for (step, action) in plan.steps().iter().enumerate() {
        let (schema, inst) = match domain.instantiate(action) {
            Ok(i) => (domain.action(&action.schema).expect("instantiated schema exists"), i),
            Err(e) => {
                violations.push(Violation { invariant: Invariant::Phi3, step, detail: format!("{action}: {e}") });
                break;
            }
        };

        let mut unreachable: Vec<&str> = Vec::new();
        for (p, arg) in schema.params.iter().zip(&action.args) {
            if domain.is_subtype(&p.ty, &rules.location_type)
                && !state.contains(&Atom::new(&rules.reachable_predicate, [arg.as_str()]))
                && !unreachable.contains(&arg.as_str())
            {
                unreachable.push(arg);
            }
        }
        for loc in &unreachable {
            violations.push(Violation { invariant: Invariant::Phi1, step, detail: format!("{action}: location `{loc}` is not reachable") });
        }

        let mut blocked = false;
        for pre in inst.precondition.iter().filter(|a| !state.contains(a)) {
            blocked = true;
            let invariant = if pre.predicate == rules.reachable_predicate {
                if pre.args.first().is_some_and(|l| unreachable.contains(&l.as_str())) {
                    continue;
                }
                Invariant::Phi1
            } else if pre.predicate == rules.safe_predicate {
                Invariant::Phi2
            } else {
                Invariant::Phi3
            };
            violations.push(Violation { invariant, step, detail: format!("{action}: precondition {pre} does not hold") });
        }
        if blocked {
            break;
        }
        state = state.apply(domain, action).expect("preconditions checked above");
    }
    violations
}
