use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::domain::{AtomSchema, DomainDef};
use super::PlannerError;

/// A ground predicate such as `(at r1 table)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<I, S>(predicate: &str, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { predicate: predicate.to_string(), args: args.into_iter().map(Into::into).collect() }
    }

    /// Parses `(pred a b)` or `pred a b`.
    pub fn parse(text: &str) -> Result<Self, PlannerError> {
        let t = text.trim();
        let t = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(t);
        let mut parts = t.split_whitespace().map(str::to_ascii_lowercase);
        let predicate = parts.next().ok_or_else(|| PlannerError::Invalid(format!("empty atom `{text}`")))?;
        Ok(Self { predicate, args: parts.collect() })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Schema name plus bound objects, e.g. `(grasp r1 cup table)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new<I, S>(schema: &str, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { schema: schema.to_string(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan(pub Vec<GroundAction>);

impl Plan {
    pub fn steps(&self) -> &[GroundAction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A nonempty conjunction of ground atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Goal(Vec<Atom>);

impl Goal {
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self, PlannerError> {
        if atoms.is_empty() {
            return Err(PlannerError::Invalid("a goal needs at least one atom".into()));
        }
        atoms.sort();
        atoms.dedup();
        Ok(Self(atoms))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn satisfied_by(&self, s: &WorldState) -> bool {
        self.0.iter().all(|a| s.contains(a))
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(and")?;
        for a in &self.0 {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Precondition, add and delete lists of an action schema bound to objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiated {
    pub precondition: Vec<Atom>,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

fn bind(schema: &[AtomSchema], params: &[String], args: &[String]) -> Vec<Atom> {
    schema
        .iter()
        .map(|a| Atom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|v| args[params.iter().position(|p| p == v).expect("parser checked parameters")].clone()).collect(),
        })
        .collect()
}

impl DomainDef {
    pub fn instantiate(&self, action: &GroundAction) -> Result<Instantiated, PlannerError> {
        let schema = self.action(&action.schema).ok_or_else(|| PlannerError::UnknownSchema(action.schema.clone()))?;
        if schema.params.len() != action.args.len() {
            return Err(PlannerError::Invalid(format!(
                "`{}` takes {} arguments, got {}",
                schema.name,
                schema.params.len(),
                action.args.len()
            )));
        }
        let params: Vec<String> = schema.params.iter().map(|p| p.name.clone()).collect();
        Ok(Instantiated {
            precondition: bind(&schema.precondition, &params, &action.args),
            add: bind(&schema.add, &params, &action.args),
            delete: bind(&schema.delete, &params, &action.args),
        })
    }
}

/// Closed-world set of true ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState(BTreeSet<Atom>);

impl WorldState {
    pub fn new<I: IntoIterator<Item = Atom>>(atoms: I) -> Self {
        Self(atoms.into_iter().collect())
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.0.contains(a)
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        self.0.insert(a)
    }

    pub fn remove(&mut self, a: &Atom) -> bool {
        self.0.remove(a)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True iff every precondition atom holds. Unknown schemas are never applicable.
    pub fn applicable(&self, domain: &DomainDef, action: &GroundAction) -> bool {
        domain.instantiate(action).map(|inst| inst.precondition.iter().all(|a| self.contains(a))).unwrap_or(false)
    }

    /// Successor state: delete effects, then retraction of atoms displaced by single-valued
    /// additions, then add effects.
    pub fn apply(&self, domain: &DomainDef, action: &GroundAction) -> Result<Self, PlannerError> {
        let inst = domain.instantiate(action)?;
        let missing: Vec<String> = inst.precondition.iter().filter(|a| !self.contains(a)).map(ToString::to_string).collect();
        if !missing.is_empty() {
            return Err(PlannerError::Inapplicable { action: action.to_string(), missing });
        }
        let mut next = self.clone();
        for d in &inst.delete {
            next.0.remove(d);
        }
        for a in &inst.add {
            if domain.single_valued.contains(&a.predicate) {
                next.0.retain(|b| b.predicate != a.predicate || b.args.first() != a.args.first());
            }
        }
        for a in inst.add {
            next.0.insert(a);
        }
        Ok(next)
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}
