//! The bundled assistive-robot domain and default kitchen problem.

use super::domain::DomainDef;
use super::problem::ProblemDef;
use super::PlannerError;

pub const DOMAIN_TEXT: &str = include_str!("../../assets/assistive-robot.pddl");
pub const PROBLEM_TEXT: &str = include_str!("../../assets/kitchen.problem.pddl");

/// A robot is at exactly one location and has exactly one orientation.
pub const SINGLE_VALUED: [&str; 2] = ["at", "oriented"];

/// Parses domain text and applies the single-location / single-orientation constraints
/// for whichever of those predicates it declares.
pub fn load_domain(text: &str) -> Result<DomainDef, PlannerError> {
    let d = DomainDef::parse(text)?;
    let present: Vec<&str> = SINGLE_VALUED.into_iter().filter(|p| d.predicate(p).is_some_and(|s| !s.params.is_empty())).collect();
    d.with_single_valued(present)
}

pub fn domain() -> DomainDef {
    load_domain(DOMAIN_TEXT).expect("bundled domain parses")
}

pub fn problem() -> ProblemDef {
    ProblemDef::parse(PROBLEM_TEXT, &domain()).expect("bundled problem parses")
}
