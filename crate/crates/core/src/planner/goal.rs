use serde::{Deserialize, Serialize};

use super::domain::DomainDef;
use super::problem::ProblemDef;
use super::state::{Atom, Goal};
use super::PlannerError;
use crate::intent::Action;

/// The objects an intent refers to: which robot acts, on which item, where, facing how.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
}

impl TaskContext {
    pub fn new(robot: &str, item: &str, location: &str, orientation: &str) -> Self {
        Self { robot: Some(robot.into()), item: Some(item.into()), location: Some(location.into()), orientation: Some(orientation.into()) }
    }

    /// First declared object of each of the robot, item, location and orientation types.
    pub fn first_objects(problem: &ProblemDef, domain: &DomainDef) -> Self {
        let first = |ty: &str| problem.objects_of(domain, ty).next().map(str::to_string);
        Self { robot: first("robot"), item: first("item"), location: first("location"), orientation: first("orientation") }
    }

    /// Fields set in `other` replace ours.
    pub fn overridden_by(&self, other: &TaskContext) -> Self {
        Self {
            robot: other.robot.clone().or_else(|| self.robot.clone()),
            item: other.item.clone().or_else(|| self.item.clone()),
            location: other.location.clone().or_else(|| self.location.clone()),
            orientation: other.orientation.clone().or_else(|| self.orientation.clone()),
        }
    }
}

fn need<'a>(field: &'a Option<String>, intent: Action, name: &'static str) -> Result<&'a str, PlannerError> {
    field.as_deref().ok_or(PlannerError::MissingContext { intent: intent.as_str(), field: name })
}

/// Goal achieved by the schema the intent names:
///
/// | intent  | goal                                   |
/// |---------|----------------------------------------|
/// | GRASP   | `holding(robot, item)`                 |
/// | RELEASE | `item-at(item, location) ∧ empty-handed(robot)` |
/// | MOVE_TO | `at(robot, location)`                  |
/// | ROTATE  | `oriented(robot, orientation)`         |
pub fn ground_to_goal(intent: Action, ctx: &TaskContext) -> Result<Goal, PlannerError> {
    let robot = need(&ctx.robot, intent, "robot")?;
    let atoms = match intent {
        Action::Grasp => vec![Atom::new("holding", [robot, need(&ctx.item, intent, "item")?])],
        Action::Release => vec![
            Atom::new("item-at", [need(&ctx.item, intent, "item")?, need(&ctx.location, intent, "location")?]),
            Atom::new("empty-handed", [robot]),
        ],
        Action::MoveTo => vec![Atom::new("at", [robot, need(&ctx.location, intent, "location")?])],
        Action::Rotate => vec![Atom::new("oriented", [robot, need(&ctx.orientation, intent, "orientation")?])],
    };
    Goal::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::assets;

    #[test]
    fn grounding_table() {
        let ctx = TaskContext::new("r1", "cup", "table", "side");
        assert_eq!(ground_to_goal(Action::Grasp, &ctx).unwrap().atoms(), [Atom::new("holding", ["r1", "cup"])]);
        assert_eq!(ground_to_goal(Action::MoveTo, &ctx).unwrap().atoms(), [Atom::new("at", ["r1", "table"])]);
        assert_eq!(ground_to_goal(Action::Rotate, &ctx).unwrap().atoms(), [Atom::new("oriented", ["r1", "side"])]);
        let release = ground_to_goal(Action::Release, &ctx).unwrap();
        assert!(release.atoms().contains(&Atom::new("item-at", ["cup", "table"])));
        assert!(release.atoms().contains(&Atom::new("empty-handed", ["r1"])));
    }

    #[test]
    fn grounded_predicates_are_effects_of_the_named_schema() {
        let d = assets::domain();
        let ctx = TaskContext::new("r1", "cup", "table", "side");
        for a in Action::ALL {
            let schema = d.action(a.schema()).unwrap();
            for atom in ground_to_goal(a, &ctx).unwrap().atoms() {
                assert!(schema.add.iter().any(|e| e.predicate == atom.predicate), "{a}: {atom}");
            }
        }
    }

    #[test]
    fn missing_fields_are_errors() {
        let ctx = TaskContext { robot: Some("r1".into()), location: Some("table".into()), ..Default::default() };
        assert_eq!(ground_to_goal(Action::Release, &ctx), Err(PlannerError::MissingContext { intent: "RELEASE", field: "item" }));
        assert!(ground_to_goal(Action::MoveTo, &ctx).is_ok());
        assert!(ground_to_goal(Action::Grasp, &TaskContext::default()).is_err());
    }

    #[test]
    fn default_context_from_problem() {
        let ctx = TaskContext::first_objects(&assets::problem(), &assets::domain());
        assert_eq!(ctx, TaskContext::new("r1", "cup", "table", "up"));
        let o = ctx.overridden_by(&TaskContext { item: Some("cup".into()), ..Default::default() });
        assert_eq!(o.item.as_deref(), Some("cup"));
        assert_eq!(o.robot.as_deref(), Some("r1"));
    }
}
