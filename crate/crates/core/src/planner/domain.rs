use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::sexpr::{self, error_at, Pos, SExpr};
use super::PlannerError;

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    /// Parameter names without the leading `?`.
    pub params: Vec<TypedName>,
}

/// A predicate applied to action parameters (names without `?`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSchema {
    pub predicate: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<AtomSchema>,
    pub add: Vec<AtomSchema>,
    pub delete: Vec<AtomSchema>,
}

impl ActionSchema {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared types with their parent type.
    pub types: Vec<TypedName>,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
    /// Predicates whose first argument determines the rest: adding such an atom retracts
    /// every other atom of the same predicate with the same first argument. Not part of the
    /// printed domain text.
    #[serde(default)]
    pub single_valued: BTreeSet<String>,
}

const SUPPORTED_REQUIREMENTS: [&str; 2] = [":strips", ":typing"];
const UNSUPPORTED_CONNECTIVES: [&str; 7] = ["or", "forall", "exists", "imply", "when", "=", "either"];

impl DomainDef {
    /// Parses the STRIPS-with-typing subset of the planning language.
    pub fn parse(text: &str) -> Result<Self, PlannerError> {
        let forms = sexpr::parse(text)?;
        let root = match forms.as_slice() {
            [one] => one,
            [] => return Err(error_at(Pos { line: 1, col: 1 }, "empty domain text")),
            [_, second, ..] => return Err(error_at(second.pos(), "expected a single `define` form")),
        };
        let items = root.list().ok_or_else(|| error_at(root.pos(), "expected `(define ...)`"))?;
        if items.first().and_then(SExpr::symbol) != Some("define") {
            return Err(error_at(root.pos(), "expected `(define ...)`"));
        }
        let name = match items.get(1) {
            Some(e) => match e.list() {
                Some([SExpr::Symbol(kw, _), SExpr::Symbol(n, _)]) if kw == "domain" => n.clone(),
                _ => return Err(error_at(e.pos(), "expected `(domain <name>)`")),
            },
            None => return Err(error_at(root.pos(), "missing `(domain <name>)`")),
        };

        let mut domain = DomainDef {
            name,
            requirements: Vec::new(),
            types: Vec::new(),
            predicates: Vec::new(),
            actions: Vec::new(),
            single_valued: BTreeSet::new(),
        };
        for section in &items[2..] {
            let head = section.head().ok_or_else(|| error_at(section.pos(), "expected a `(:section ...)` form"))?;
            let body = &section.list().unwrap()[1..];
            match head {
                ":requirements" => domain.parse_requirements(body)?,
                ":types" => {
                    for t in parse_typed_list(body, false)? {
                        domain.types.push(t);
                    }
                }
                ":predicates" => domain.parse_predicates(body)?,
                ":action" => {
                    let action = domain.parse_action(body, section.pos())?;
                    domain.actions.push(action);
                }
                other => return Err(error_at(section.pos(), format!("unsupported construct `{other}`"))),
            }
        }
        domain.validate_types()?;
        Ok(domain)
    }

    pub fn with_single_valued<I, S>(mut self, predicates: I) -> Result<Self, PlannerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for p in predicates {
            let p = p.into();
            match self.predicate(&p) {
                Some(schema) if !schema.params.is_empty() => {
                    self.single_valued.insert(p);
                }
                Some(_) => return Err(PlannerError::Invalid(format!("`{p}` has no arguments to key on"))),
                None => return Err(PlannerError::Invalid(format!("undeclared predicate `{p}`"))),
            }
        }
        Ok(self)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.types.iter().any(|t| t.name == ty)
    }

    /// Whether `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut current = ty;
        for _ in 0..=self.types.len() {
            if current == ancestor {
                return true;
            }
            match self.types.iter().find(|t| t.name == current) {
                Some(t) => current = &t.ty,
                None => return false,
            }
        }
        false
    }

    fn parse_requirements(&mut self, body: &[SExpr]) -> Result<(), PlannerError> {
        for r in body {
            let s = r.symbol().ok_or_else(|| error_at(r.pos(), "expected a requirement flag"))?;
            if !SUPPORTED_REQUIREMENTS.contains(&s) {
                return Err(error_at(r.pos(), format!("unsupported requirement `{s}`")));
            }
            self.requirements.push(s.to_string());
        }
        Ok(())
    }

    fn parse_predicates(&mut self, body: &[SExpr]) -> Result<(), PlannerError> {
        for p in body {
            let items = p.list().ok_or_else(|| error_at(p.pos(), "expected a predicate declaration"))?;
            let name = items.first().and_then(SExpr::symbol).ok_or_else(|| error_at(p.pos(), "predicate declaration needs a name"))?;
            if self.predicate(name).is_some() {
                return Err(error_at(p.pos(), format!("duplicate predicate `{name}`")));
            }
            let params = parse_typed_list(&items[1..], true)?;
            check_unique(&params, p.pos())?;
            self.predicates.push(PredicateSchema { name: name.to_string(), params });
        }
        Ok(())
    }

    fn parse_action(&self, body: &[SExpr], pos: Pos) -> Result<ActionSchema, PlannerError> {
        let name = body.first().and_then(SExpr::symbol).ok_or_else(|| error_at(pos, "action needs a name"))?.to_string();
        if self.action(&name).is_some() {
            return Err(error_at(pos, format!("duplicate action `{name}`")));
        }
        let mut action = ActionSchema { name, params: Vec::new(), precondition: Vec::new(), add: Vec::new(), delete: Vec::new() };
        let mut rest = body[1..].iter();
        while let Some(key) = rest.next() {
            let k = key.symbol().ok_or_else(|| error_at(key.pos(), "expected an action keyword"))?;
            let value = rest.next().ok_or_else(|| error_at(key.pos(), format!("missing value for `{k}`")))?;
            match k {
                ":parameters" => {
                    let items = value.list().ok_or_else(|| error_at(value.pos(), "expected a parameter list"))?;
                    action.params = parse_typed_list(items, true)?;
                    check_unique(&action.params, value.pos())?;
                }
                ":precondition" => {
                    for lit in conjuncts(value)? {
                        match lit.head() {
                            Some("not") => return Err(error_at(lit.pos(), "negative preconditions are not supported")),
                            _ => action.precondition.push(self.parse_atom(lit, &action)?),
                        }
                    }
                }
                ":effect" => {
                    for lit in conjuncts(value)? {
                        match lit.head() {
                            Some("not") => {
                                let inner = match lit.list().unwrap() {
                                    [_, inner] => inner,
                                    _ => return Err(error_at(lit.pos(), "`not` takes exactly one atom")),
                                };
                                action.delete.push(self.parse_atom(inner, &action)?);
                            }
                            _ => action.add.push(self.parse_atom(lit, &action)?),
                        }
                    }
                }
                other => return Err(error_at(key.pos(), format!("unsupported construct `{other}`"))),
            }
        }
        Ok(action)
    }

    fn parse_atom(&self, expr: &SExpr, action: &ActionSchema) -> Result<AtomSchema, PlannerError> {
        let items = expr.list().ok_or_else(|| error_at(expr.pos(), "expected an atom"))?;
        let head = items.first().and_then(SExpr::symbol).ok_or_else(|| error_at(expr.pos(), "atom needs a predicate name"))?;
        if UNSUPPORTED_CONNECTIVES.contains(&head) || head == "and" || head == "not" {
            return Err(error_at(expr.pos(), format!("`{head}` is not supported here")));
        }
        let schema = self.predicate(head).ok_or_else(|| error_at(expr.pos(), format!("undeclared predicate `{head}`")))?;
        let args = &items[1..];
        if args.len() != schema.params.len() {
            return Err(error_at(expr.pos(), format!("predicate `{head}` takes {} arguments, got {}", schema.params.len(), args.len())));
        }
        let mut names = Vec::with_capacity(args.len());
        for (arg, expected) in args.iter().zip(&schema.params) {
            let s = arg.symbol().ok_or_else(|| error_at(arg.pos(), "expected a variable"))?;
            let var =
                s.strip_prefix('?').ok_or_else(|| error_at(arg.pos(), format!("constant `{s}` is not supported; use a parameter")))?;
            let idx = action
                .param_index(var)
                .ok_or_else(|| error_at(arg.pos(), format!("unknown parameter `?{var}` in action `{}`", action.name)))?;
            let ty = &action.params[idx].ty;
            if !self.is_subtype(ty, &expected.ty) {
                return Err(error_at(arg.pos(), format!("`?{var}` has type `{ty}` but `{head}` expects `{}`", expected.ty)));
            }
            names.push(var.to_string());
        }
        Ok(AtomSchema { predicate: head.to_string(), args: names })
    }

    fn validate_types(&self) -> Result<(), PlannerError> {
        let check = |ty: &str, ctx: &str| {
            if self.has_type(ty) {
                Ok(())
            } else {
                Err(PlannerError::Invalid(format!("undeclared type `{ty}` in {ctx}")))
            }
        };
        for t in &self.types {
            check(&t.ty, &format!("type `{}`", t.name))?;
        }
        for p in &self.predicates {
            for param in &p.params {
                check(&param.ty, &format!("predicate `{}`", p.name))?;
            }
        }
        for a in &self.actions {
            for param in &a.params {
                check(&param.ty, &format!("action `{}`", a.name))?;
            }
        }
        Ok(())
    }
}

fn check_unique(params: &[TypedName], pos: Pos) -> Result<(), PlannerError> {
    let mut seen = HashMap::new();
    for p in params {
        if seen.insert(p.name.as_str(), ()).is_some() {
            return Err(error_at(pos, format!("duplicate parameter `?{}`", p.name)));
        }
    }
    Ok(())
}

/// Flattens `(and a b ...)`, a single atom, or `()` into its literals.
fn conjuncts(expr: &SExpr) -> Result<&[SExpr], PlannerError> {
    let items = expr.list().ok_or_else(|| error_at(expr.pos(), "expected a formula"))?;
    match expr.head() {
        Some("and") => {
            for item in &items[1..] {
                if let Some(h) = item.head() {
                    if UNSUPPORTED_CONNECTIVES.contains(&h) || h == "and" {
                        return Err(error_at(item.pos(), format!("`{h}` is not supported")));
                    }
                }
            }
            Ok(&items[1..])
        }
        Some(h) if UNSUPPORTED_CONNECTIVES.contains(&h) => Err(error_at(expr.pos(), format!("`{h}` is not supported"))),
        None if items.is_empty() => Ok(&[]),
        _ => Ok(std::slice::from_ref(expr)),
    }
}

/// `a b - t1 c - t2 d` → typed names; untyped trailing names default to `object`.
pub(crate) fn parse_typed_list(items: &[SExpr], variables: bool) -> Result<Vec<TypedName>, PlannerError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let s = item.symbol().ok_or_else(|| error_at(item.pos(), "unexpected list in typed list"))?;
        if s == "-" {
            let ty = iter.next().ok_or_else(|| error_at(item.pos(), "missing type after `-`"))?;
            let ty = match ty {
                SExpr::Symbol(t, _) => t.clone(),
                SExpr::List(..) => return Err(error_at(ty.pos(), "`either` types are not supported")),
            };
            if pending.is_empty() {
                return Err(error_at(item.pos(), "type annotation without names"));
            }
            out.extend(pending.drain(..).map(|name| TypedName { name, ty: ty.clone() }));
            continue;
        }
        let name = if variables {
            s.strip_prefix('?')
                .filter(|n| !n.is_empty())
                .ok_or_else(|| error_at(item.pos(), format!("expected a variable, found `{s}`")))?
        } else {
            s
        };
        pending.push(name.to_string());
    }
    out.extend(pending.into_iter().map(|name| TypedName { name, ty: ROOT_TYPE.to_string() }));
    Ok(out)
}

fn write_params(f: &mut fmt::Formatter<'_>, params: &[TypedName]) -> fmt::Result {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "?{} - {}", p.name, p.ty)?;
    }
    Ok(())
}

fn write_atom(f: &mut fmt::Formatter<'_>, a: &AtomSchema) -> fmt::Result {
    write!(f, "({}", a.predicate)?;
    for arg in &a.args {
        write!(f, " ?{arg}")?;
    }
    f.write_str(")")
}

impl fmt::Display for DomainDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            write!(f, "\n  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            f.write_str("\n  (:types")?;
            for t in &self.types {
                write!(f, "\n    {} - {}", t.name, t.ty)?;
            }
            f.write_str(")")?;
        }
        if !self.predicates.is_empty() {
            f.write_str("\n  (:predicates")?;
            for p in &self.predicates {
                write!(f, "\n    ({}", p.name)?;
                if !p.params.is_empty() {
                    f.write_str(" ")?;
                    write_params(f, &p.params)?;
                }
                f.write_str(")")?;
            }
            f.write_str(")")?;
        }
        for a in &self.actions {
            write!(f, "\n  (:action {}\n    :parameters (", a.name)?;
            write_params(f, &a.params)?;
            f.write_str(")\n    :precondition (and")?;
            for p in &a.precondition {
                f.write_str(" ")?;
                write_atom(f, p)?;
            }
            f.write_str(")\n    :effect (and")?;
            for p in &a.add {
                f.write_str(" ")?;
                write_atom(f, p)?;
            }
            for p in &a.delete {
                f.write_str(" (not ")?;
                write_atom(f, p)?;
                f.write_str(")")?;
            }
            f.write_str("))")?;
        }
        f.write_str(")\n")
    }
}
