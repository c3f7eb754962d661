use std::fmt;

use serde::{Deserialize, Serialize};

use super::domain::{parse_typed_list, DomainDef, TypedName};
use super::sexpr::{self, error_at, Pos, SExpr};
use super::state::{Atom, Goal, WorldState};
use super::PlannerError;

/// Objects, initial state and (optionally) a goal for a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: WorldState,
    pub goal: Option<Goal>,
}

impl ProblemDef {
    pub fn parse(text: &str, domain: &DomainDef) -> Result<Self, PlannerError> {
        let forms = sexpr::parse(text)?;
        let root = match forms.as_slice() {
            [one] => one,
            [] => return Err(error_at(Pos { line: 1, col: 1 }, "empty problem text")),
            [_, second, ..] => return Err(error_at(second.pos(), "expected a single `define` form")),
        };
        let items = root.list().ok_or_else(|| error_at(root.pos(), "expected `(define ...)`"))?;
        if items.first().and_then(SExpr::symbol) != Some("define") {
            return Err(error_at(root.pos(), "expected `(define ...)`"));
        }
        let name = match items.get(1).and_then(SExpr::list) {
            Some([SExpr::Symbol(kw, _), SExpr::Symbol(n, _)]) if kw == "problem" => n.clone(),
            _ => return Err(error_at(root.pos(), "expected `(problem <name>)`")),
        };
        let mut problem = ProblemDef { name, domain: String::new(), objects: Vec::new(), init: WorldState::default(), goal: None };
        for section in &items[2..] {
            let head = section.head().ok_or_else(|| error_at(section.pos(), "expected a `(:section ...)` form"))?;
            let body = &section.list().unwrap()[1..];
            match head {
                ":domain" => {
                    let d = body.first().and_then(SExpr::symbol).ok_or_else(|| error_at(section.pos(), "missing domain name"))?;
                    if d != domain.name {
                        return Err(error_at(section.pos(), format!("problem is for domain `{d}`, not `{}`", domain.name)));
                    }
                    problem.domain = d.to_string();
                }
                ":objects" => {
                    for o in parse_typed_list(body, false)? {
                        if !domain.has_type(&o.ty) {
                            return Err(error_at(section.pos(), format!("object `{}` has undeclared type `{}`", o.name, o.ty)));
                        }
                        if problem.objects.iter().any(|p| p.name == o.name) {
                            return Err(error_at(section.pos(), format!("duplicate object `{}`", o.name)));
                        }
                        problem.objects.push(o);
                    }
                }
                ":init" => {
                    for a in body {
                        if a.head() == Some("not") {
                            return Err(error_at(a.pos(), "negative initial facts are not supported (closed world)"));
                        }
                        let atom = problem.parse_ground(a, domain)?;
                        problem.init.insert(atom);
                    }
                }
                ":goal" => {
                    let g = body.first().ok_or_else(|| error_at(section.pos(), "empty goal"))?;
                    let parts: &[SExpr] = match g.head() {
                        Some("and") => &g.list().unwrap()[1..],
                        Some("not") | Some("or") | Some("forall") | Some("exists") | Some("imply") => {
                            return Err(error_at(g.pos(), format!("`{}` goals are not supported", g.head().unwrap())))
                        }
                        _ => std::slice::from_ref(g),
                    };
                    let atoms = parts.iter().map(|a| problem.parse_ground(a, domain)).collect::<Result<Vec<_>, _>>()?;
                    problem.goal = Some(Goal::new(atoms).map_err(|_| error_at(g.pos(), "empty goal"))?);
                }
                other => return Err(error_at(section.pos(), format!("unsupported construct `{other}`"))),
            }
        }
        if problem.domain.is_empty() {
            return Err(error_at(root.pos(), "missing `(:domain ...)`"));
        }
        Ok(problem)
    }

    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.ty.as_str())
    }

    /// Objects of a type (or its subtypes), in declaration order.
    pub fn objects_of<'a>(&'a self, domain: &'a DomainDef, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects.iter().filter(move |o| domain.is_subtype(&o.ty, ty)).map(|o| o.name.as_str())
    }

    /// Checks that an atom names a declared predicate over declared, type-correct objects.
    pub fn check_atom(&self, atom: &Atom, domain: &DomainDef) -> Result<(), PlannerError> {
        let schema =
            domain.predicate(&atom.predicate).ok_or_else(|| PlannerError::Invalid(format!("undeclared predicate `{}`", atom.predicate)))?;
        if schema.params.len() != atom.args.len() {
            return Err(PlannerError::Invalid(format!(
                "`{}` takes {} arguments, got {}",
                atom.predicate,
                schema.params.len(),
                atom.args.len()
            )));
        }
        for (arg, p) in atom.args.iter().zip(&schema.params) {
            let ty = self.object_type(arg).ok_or_else(|| PlannerError::UnknownObject(arg.clone()))?;
            if !domain.is_subtype(ty, &p.ty) {
                return Err(PlannerError::Invalid(format!("`{arg}` is a `{ty}` but `{}` expects `{}`", atom.predicate, p.ty)));
            }
        }
        Ok(())
    }

    fn parse_ground(&self, expr: &SExpr, domain: &DomainDef) -> Result<Atom, PlannerError> {
        let items = expr.list().ok_or_else(|| error_at(expr.pos(), "expected a ground atom"))?;
        let mut symbols = Vec::with_capacity(items.len());
        for i in items {
            symbols.push(i.symbol().ok_or_else(|| error_at(i.pos(), "nested formula in ground atom"))?.to_string());
        }
        let (predicate, args) = symbols.split_first().ok_or_else(|| error_at(expr.pos(), "empty atom"))?;
        let atom = Atom { predicate: predicate.clone(), args: args.to_vec() };
        self.check_atom(&atom, domain).map_err(|e| error_at(expr.pos(), e.to_string()))?;
        Ok(atom)
    }
}

impl fmt::Display for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(define (problem {})\n  (:domain {})\n  (:objects", self.name, self.domain)?;
        for o in &self.objects {
            write!(f, "\n    {} - {}", o.name, o.ty)?;
        }
        f.write_str(")\n  (:init")?;
        for a in self.init.atoms() {
            write!(f, "\n    {a}")?;
        }
        f.write_str(")")?;
        if let Some(g) = &self.goal {
            write!(f, "\n  (:goal {g})")?;
        }
        f.write_str(")\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::assets;

    #[test]
    fn shipped_problem_parses_and_round_trips() {
        let d = assets::domain();
        let p = assets::problem();
        assert_eq!(p.objects.len(), 12);
        assert!(p.init.contains(&Atom::new("at", ["r1", "table"])));
        assert!(!p.init.contains(&Atom::new("reachable", ["stairs"])));
        assert_eq!(p.objects_of(&d, "location").collect::<Vec<_>>(), ["table", "shelf", "counter", "stairs"]);
        assert_eq!(ProblemDef::parse(&p.to_string(), &d).unwrap(), p);
    }

    #[test]
    fn bad_problems_are_rejected() {
        let d = assets::domain();
        let wrap = |body: &str| format!("(define (problem p) (:domain assistive-robot) (:objects r1 - robot t - location) {body})");
        assert!(ProblemDef::parse(&wrap("(:init (at r1 t))"), &d).is_ok());
        let e = ProblemDef::parse(&wrap("(:init (at r1 ghost))"), &d).unwrap_err().to_string();
        assert!(e.contains("ghost"), "{e}");
        let e = ProblemDef::parse(&wrap("(:init (at t r1))"), &d).unwrap_err().to_string();
        assert!(e.contains("expects"), "{e}");
        let e = ProblemDef::parse(&wrap("(:goal (not (at r1 t)))"), &d).unwrap_err().to_string();
        assert!(e.contains("`not`"), "{e}");
        let e = ProblemDef::parse("(define (problem p) (:domain other))", &d).unwrap_err().to_string();
        assert!(e.contains("other"), "{e}");
    }
}
