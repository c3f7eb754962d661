//! Grounded forward search over bitset states.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::{DomainDef, TypedName};
use super::logical::{Invariant, LogicalRules};
use super::state::{Atom, Goal, GroundAction, Plan, WorldState};
use super::PlannerError;

/// Set of ground-atom indices of one [`GroundTask`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateBits(Box<[u64]>);

impl StateBits {
    fn zeros(atoms: usize) -> Self {
        Self(vec![0; atoms.div_ceil(64).max(1)].into_boxed_slice())
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn contains_all(&self, other: &StateBits) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & b == *b)
    }

    fn successor(&self, add: &StateBits, del: &StateBits) -> StateBits {
        StateBits(self.0.iter().zip(add.0.iter()).zip(del.0.iter()).map(|((s, a), d)| (s & !d) | a).collect())
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    pub max_depth: usize,
    /// Cap on distinct visited states; reaching it yields [`PlanOutcome::BudgetExceeded`].
    pub max_states: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_depth: 16, max_states: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "plan", rename_all = "snake_case")]
pub enum PlanOutcome {
    Found(Plan),
    NoPlan,
    BudgetExceeded,
}

#[derive(Debug, Clone)]
struct GroundOp {
    action: GroundAction,
    pre: StateBits,
    add: StateBits,
    del: StateBits,
    /// Indices of `reachable(l)` for each location argument; `None` if that atom does not exist.
    reach: Vec<Option<usize>>,
}

/// A domain grounded over a fixed object set: every type-correct atom and action, indexed.
#[derive(Debug, Clone)]
pub struct GroundTask {
    domain: Arc<DomainDef>,
    objects: Vec<TypedName>,
    rules: LogicalRules,
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
    ops: Vec<GroundOp>,
    safe_atom: Option<usize>,
    reachable_atoms: Vec<usize>,
}

fn product<'a>(choices: &[Vec<&'a str>]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for options in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    out
}

impl GroundTask {
    pub fn new(domain: Arc<DomainDef>, objects: &[TypedName], rules: LogicalRules) -> Result<Self, PlannerError> {
        for o in objects {
            if !domain.has_type(&o.ty) {
                return Err(PlannerError::Invalid(format!("object `{}` has undeclared type `{}`", o.name, o.ty)));
            }
        }
        let of_type = |ty: &str| -> Vec<&str> {
            let mut v: Vec<&str> = objects.iter().filter(|o| domain.is_subtype(&o.ty, ty)).map(|o| o.name.as_str()).collect();
            v.sort_unstable();
            v
        };

        let mut atoms = Vec::new();
        for p in &domain.predicates {
            let choices: Vec<Vec<&str>> = p.params.iter().map(|t| of_type(&t.ty)).collect();
            for args in product(&choices) {
                atoms.push(Atom::new(&p.name, args));
            }
        }
        let index: HashMap<Atom, usize> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let n = atoms.len();
        let bits_of = |list: &[Atom]| {
            let mut b = StateBits::zeros(n);
            for a in list {
                b.set(index[a]);
            }
            b
        };

        let mut ops = Vec::new();
        for schema in &domain.actions {
            let choices: Vec<Vec<&str>> = schema.params.iter().map(|t| of_type(&t.ty)).collect();
            for args in product(&choices) {
                let action = GroundAction::new(&schema.name, args.iter().copied());
                let inst = domain.instantiate(&action)?;
                let mut del = bits_of(&inst.delete);
                for a in &inst.add {
                    if domain.single_valued.contains(&a.predicate) {
                        for (i, b) in atoms.iter().enumerate() {
                            if b.predicate == a.predicate && b.args.first() == a.args.first() && b != a {
                                del.set(i);
                            }
                        }
                    }
                }
                let reach = schema
                    .params
                    .iter()
                    .zip(&args)
                    .filter(|(p, _)| domain.is_subtype(&p.ty, &rules.location_type))
                    .map(|(_, l)| index.get(&Atom::new(&rules.reachable_predicate, [*l])).copied())
                    .collect();
                ops.push(GroundOp { pre: bits_of(&inst.precondition), add: bits_of(&inst.add), del, reach, action });
            }
        }
        ops.sort_by(|a, b| a.action.cmp(&b.action));
        let safe_atom = index.get(&Atom::new(&rules.safe_predicate, Vec::<String>::new())).copied();
        let reachable_atoms = (0..atoms.len()).filter(|&i| atoms[i].predicate == rules.reachable_predicate).collect();
        Ok(Self { domain, objects: objects.to_vec(), rules, atoms, index, ops, safe_atom, reachable_atoms })
    }

    pub fn domain(&self) -> &Arc<DomainDef> {
        &self.domain
    }

    pub fn objects(&self) -> &[TypedName] {
        &self.objects
    }

    pub fn rules(&self) -> &LogicalRules {
        &self.rules
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Ground actions in search order.
    pub fn actions(&self) -> impl Iterator<Item = &GroundAction> {
        self.ops.iter().map(|o| &o.action)
    }

    pub fn encode(&self, s: &WorldState) -> Result<StateBits, PlannerError> {
        self.encode_atoms(s.atoms())
    }

    pub fn encode_goal(&self, g: &Goal) -> Result<StateBits, PlannerError> {
        self.encode_atoms(g.atoms().iter())
    }

    fn encode_atoms<'a>(&self, atoms: impl Iterator<Item = &'a Atom>) -> Result<StateBits, PlannerError> {
        let mut b = StateBits::zeros(self.atoms.len());
        for a in atoms {
            let i = self.index.get(a).ok_or_else(|| PlannerError::UnknownAtom(a.to_string()))?;
            b.set(*i);
        }
        Ok(b)
    }

    pub fn decode(&self, b: &StateBits) -> WorldState {
        WorldState::new((0..self.atoms.len()).filter(|&i| b.get(i)).map(|i| self.atoms[i].clone()))
    }

    fn admissible(&self, op: &GroundOp, s: &StateBits) -> bool {
        op.reach.iter().all(|r| r.is_some_and(|i| s.get(i)))
    }

    /// Successor after a ground action (looked up by value), if applicable.
    pub fn step(&self, s: &StateBits, action: &GroundAction) -> Option<StateBits> {
        let op = self.ops.iter().find(|o| &o.action == action)?;
        s.contains_all(&op.pre).then(|| s.successor(&op.add, &op.del))
    }

    /// Breadth-first search for a shortest plan. With `reachable_only`, actions referring to a
    /// location without `reachable` in the current state are never expanded.
    pub fn search(&self, s0: &StateBits, goal: &StateBits, limits: SearchLimits, reachable_only: bool) -> PlanOutcome {
        if s0.contains_all(goal) {
            return PlanOutcome::Found(Plan::default());
        }
        // Node: (state, parent node, op index, depth).
        let mut nodes: Vec<(StateBits, usize, usize, usize)> = vec![(s0.clone(), usize::MAX, usize::MAX, 0)];
        let mut seen: HashMap<StateBits, ()> = HashMap::new();
        seen.insert(s0.clone(), ());
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            let depth = nodes[n].3;
            if depth >= limits.max_depth {
                continue;
            }
            for (k, op) in self.ops.iter().enumerate() {
                let s = &nodes[n].0;
                if !s.contains_all(&op.pre) || (reachable_only && !self.admissible(op, s)) {
                    continue;
                }
                let next = s.successor(&op.add, &op.del);
                if seen.contains_key(&next) {
                    continue;
                }
                if seen.len() >= limits.max_states {
                    return PlanOutcome::BudgetExceeded;
                }
                seen.insert(next.clone(), ());
                let done = next.contains_all(goal);
                nodes.push((next, n, k, depth + 1));
                if done {
                    let mut steps = Vec::new();
                    let mut cur = nodes.len() - 1;
                    while cur != 0 {
                        steps.push(self.ops[nodes[cur].2].action.clone());
                        cur = nodes[cur].1;
                    }
                    steps.reverse();
                    return PlanOutcome::Found(Plan(steps));
                }
                queue.push_back(nodes.len() - 1);
            }
        }
        PlanOutcome::NoPlan
    }

    /// Which logical invariant explains the absence of a plan: reachability if the goal becomes
    /// attainable once every location is treated as reachable, safe configuration if it becomes
    /// attainable once the safe-configuration fact is assumed, otherwise transition validity.
    pub fn diagnose(&self, s0: &StateBits, goal: &StateBits, limits: SearchLimits) -> Invariant {
        let found = |s: &StateBits, reachable_only: bool| matches!(self.search(s, goal, limits, reachable_only), PlanOutcome::Found(_));
        let mut all_reachable = s0.clone();
        for &i in &self.reachable_atoms {
            all_reachable.set(i);
        }
        if found(&all_reachable, false) {
            return Invariant::Phi1;
        }
        if let Some(i) = self.safe_atom.filter(|&i| !s0.get(i)) {
            let mut safe = s0.clone();
            safe.set(i);
            if found(&safe, true) {
                return Invariant::Phi2;
            }
            all_reachable.set(i);
            if found(&all_reachable, false) {
                return Invariant::Phi1;
            }
        }
        Invariant::Phi3
    }
}

/// Grounds, encodes and searches in one call.
pub fn synthesize_plan(
    domain: &DomainDef,
    objects: &[TypedName],
    s0: &WorldState,
    goal: &Goal,
    limits: SearchLimits,
) -> Result<PlanOutcome, PlannerError> {
    let task = GroundTask::new(Arc::new(domain.clone()), objects, LogicalRules::default())?;
    Ok(task.search(&task.encode(s0)?, &task.encode_goal(goal)?, limits, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{assets, check_logical};

    fn objects(list: &[(&str, &str)]) -> Vec<TypedName> {
        list.iter().map(|(n, t)| TypedName { name: n.to_string(), ty: t.to_string() }).collect()
    }

    fn st(atoms: &[&str]) -> WorldState {
        WorldState::new(atoms.iter().map(|a| Atom::parse(a).unwrap()))
    }

    #[test]
    fn one_step_grasp() {
        let d = assets::domain();
        let objs = objects(&[("r1", "robot"), ("cup", "item"), ("table", "location")]);
        let s0 = st(&["at r1 table", "item-at cup table", "empty-handed r1", "safe-configuration", "reachable table"]);
        let goal = Goal::new(vec![Atom::new("holding", ["r1", "cup"])]).unwrap();
        let out = synthesize_plan(&d, &objs, &s0, &goal, SearchLimits::default()).unwrap();
        assert_eq!(out, PlanOutcome::Found(Plan(vec![GroundAction::new("grasp", ["r1", "cup", "table"])])));
        if let PlanOutcome::Found(p) = out {
            assert!(check_logical(&d, &LogicalRules::default(), &s0, &p).is_empty());
        }
    }

    #[test]
    fn satisfied_goal_gives_empty_plan_and_unreachable_gives_none() {
        let d = assets::domain();
        let objs = objects(&[("r1", "robot"), ("table", "location"), ("shelf", "location")]);
        let s0 = st(&["at r1 table", "safe-configuration", "reachable table"]);
        let here = Goal::new(vec![Atom::new("at", ["r1", "table"])]).unwrap();
        assert_eq!(synthesize_plan(&d, &objs, &s0, &here, SearchLimits::default()).unwrap(), PlanOutcome::Found(Plan::default()));
        let there = Goal::new(vec![Atom::new("at", ["r1", "shelf"])]).unwrap();
        assert_eq!(synthesize_plan(&d, &objs, &s0, &there, SearchLimits::default()).unwrap(), PlanOutcome::NoPlan);

        let task = GroundTask::new(Arc::new(d), &objs, LogicalRules::default()).unwrap();
        let (b0, g) = (task.encode(&s0).unwrap(), task.encode_goal(&there).unwrap());
        assert_eq!(task.diagnose(&b0, &g, SearchLimits::default()), Invariant::Phi1);
    }

    #[test]
    fn diagnosis_distinguishes_safety_and_transitions() {
        let task = GroundTask::new(Arc::new(assets::domain()), &assets::problem().objects, LogicalRules::default()).unwrap();
        let mut init = assets::problem().init;
        let goal = Goal::new(vec![Atom::new("oriented", ["r1", "inverted"])]).unwrap();
        let b = task.encode(&init).unwrap();
        assert_eq!(task.search(&b, &task.encode_goal(&goal).unwrap(), SearchLimits::default(), true), PlanOutcome::NoPlan);
        assert_eq!(task.diagnose(&b, &task.encode_goal(&goal).unwrap(), SearchLimits::default()), Invariant::Phi3);

        init.remove(&Atom::new("safe-configuration", Vec::<String>::new()));
        let side = Goal::new(vec![Atom::new("oriented", ["r1", "side"])]).unwrap();
        let b = task.encode(&init).unwrap();
        assert_eq!(task.diagnose(&b, &task.encode_goal(&side).unwrap(), SearchLimits::default()), Invariant::Phi2);
    }

    #[test]
    fn budget_and_depth_limits() {
        let p = assets::problem();
        let task = GroundTask::new(Arc::new(assets::domain()), &p.objects, LogicalRules::default()).unwrap();
        let s0 = task.encode(&p.init).unwrap();
        // book sits on the shelf: move there, grasp, come back, release → four steps.
        let goal = Goal::new(vec![Atom::new("item-at", ["book", "table"]), Atom::new("empty-handed", ["r1"])]).unwrap();
        let g = task.encode_goal(&goal).unwrap();
        match task.search(&s0, &g, SearchLimits::default(), true) {
            PlanOutcome::Found(plan) => {
                assert_eq!(plan.len(), 4);
                let mut s = p.init.clone();
                for step in plan.steps() {
                    s = s.apply(task.domain(), step).unwrap();
                }
                assert!(goal.satisfied_by(&s));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(task.search(&s0, &g, SearchLimits { max_depth: 3, max_states: 100_000 }, true), PlanOutcome::NoPlan);
        assert_eq!(task.search(&s0, &g, SearchLimits { max_depth: 16, max_states: 5 }, true), PlanOutcome::BudgetExceeded);
    }

    #[test]
    fn bitset_and_set_semantics_agree() {
        let p = assets::problem();
        let task = GroundTask::new(Arc::new(assets::domain()), &p.objects, LogicalRules::default()).unwrap();
        let s0 = task.encode(&p.init).unwrap();
        assert_eq!(task.decode(&s0), p.init);
        for a in task.actions() {
            let bits = task.step(&s0, a);
            assert_eq!(bits.is_some(), p.init.applicable(task.domain(), a), "{a}");
            if let Some(b) = bits {
                assert_eq!(task.decode(&b), p.init.apply(task.domain(), a).unwrap(), "{a}");
            }
        }
    }

    #[test]
    fn unknown_atoms_are_rejected() {
        let p = assets::problem();
        let task = GroundTask::new(Arc::new(assets::domain()), &p.objects, LogicalRules::default()).unwrap();
        let g = Goal::new(vec![Atom::new("holding", ["r1", "spoon"])]).unwrap();
        assert!(matches!(task.encode_goal(&g), Err(PlannerError::UnknownAtom(_))));
    }
}
