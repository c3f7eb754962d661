//! STRIPS-with-typing domain model, goal grounding from intents, breadth-first plan
//! synthesis, and the logical checks applied to synthesized plans.

pub mod assets;
mod domain;
mod goal;
mod logical;
mod problem;
mod search;
pub mod sexpr;
mod state;

use thiserror::Error;

pub use domain::{ActionSchema, AtomSchema, DomainDef, PredicateSchema, TypedName, ROOT_TYPE};
pub use goal::{ground_to_goal, TaskContext};
pub use logical::{check_logical, Invariant, LogicalRules, Violation};
pub use problem::ProblemDef;
pub use search::{synthesize_plan, GroundTask, PlanOutcome, SearchLimits, StateBits};
pub use state::{Atom, Goal, GroundAction, Instantiated, Plan, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown action schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("atom {0} is not over the grounded objects")]
    UnknownAtom(String),
    #[error("{action} is not applicable: missing {}", missing.join(", "))]
    Inapplicable { action: String, missing: Vec<String> },
    #[error("intent {intent} needs a {field} in the task context")]
    MissingContext { intent: &'static str, field: &'static str },
}
