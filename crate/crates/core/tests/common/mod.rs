//! Shared by the acceptance suite and the planner integration tests: random small
//! assistive-robot worlds and an exhaustive breadth-first reference planner that shares no
//! code with the library's search.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use intentgate::planner::{assets, Atom, DomainDef, Goal, Plan, TypedName, WorldState};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Fact = (String, Vec<String>);
type State = BTreeSet<Fact>;

/// Every state reachable from `s0` with its breadth-first distance, under the domain's STRIPS
/// semantics with the robot's location and orientation single-valued, and with actions that
/// name an unreachable location never taken.
pub struct Exhaustive {
    pub states: usize,
    /// Length of a shortest plan to the goal, if any state satisfies it.
    pub goal_distance: Option<usize>,
}

struct Op {
    pre: Vec<Fact>,
    add: Vec<Fact>,
    del: Vec<Fact>,
    locations: Vec<String>,
}

fn ground_ops(domain: &DomainDef, objects: &[TypedName]) -> Vec<Op> {
    let mut ops = Vec::new();
    for a in &domain.actions {
        let choices: Vec<Vec<&str>> =
            a.params.iter().map(|p| objects.iter().filter(|o| o.ty == p.ty).map(|o| o.name.as_str()).collect()).collect();
        let mut combos: Vec<Vec<&str>> = vec![vec![]];
        for c in &choices {
            combos = combos.into_iter().flat_map(|prefix| c.iter().map(move |x| [prefix.clone(), vec![*x]].concat())).collect();
        }
        for args in combos {
            let bind: HashMap<&str, &str> = a.params.iter().map(|p| p.name.as_str()).zip(args.iter().copied()).collect();
            let sub = |list: &[intentgate::planner::AtomSchema]| -> Vec<Fact> {
                list.iter()
                    .map(|s| (s.predicate.clone(), s.args.iter().map(|v| bind.get(v.as_str()).copied().unwrap_or(v).to_string()).collect()))
                    .collect()
            };
            let locations = a.params.iter().zip(&args).filter(|(p, _)| p.ty == "location").map(|(_, l)| l.to_string()).collect();
            ops.push(Op { pre: sub(&a.precondition), add: sub(&a.add), del: sub(&a.delete), locations });
        }
    }
    ops
}

fn successor(s: &State, op: &Op) -> Option<State> {
    if !op.pre.iter().all(|f| s.contains(f)) {
        return None;
    }
    if !op.locations.iter().all(|l| s.contains(&("reachable".to_string(), vec![l.clone()]))) {
        return None;
    }
    let mut next = s.clone();
    for d in &op.del {
        next.remove(d);
    }
    for (pred, args) in &op.add {
        if pred == "at" || pred == "oriented" {
            next.retain(|(p, a)| p != pred || a.first() != args.first());
        }
    }
    next.extend(op.add.iter().cloned());
    Some(next)
}

fn to_state(w: &WorldState) -> State {
    w.atoms().map(|a| (a.predicate.clone(), a.args.clone())).collect()
}

pub fn exhaustive(domain: &DomainDef, objects: &[TypedName], s0: &WorldState, goal: &Goal) -> Exhaustive {
    let ops = ground_ops(domain, objects);
    let goal: Vec<Fact> = goal.atoms().iter().map(|a| (a.predicate.clone(), a.args.clone())).collect();
    let start = to_state(s0);
    let mut dist: HashMap<State, usize> = HashMap::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([start]);
    let mut best: Option<usize> = None;
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        if goal.iter().all(|f| s.contains(f)) {
            best = Some(best.map_or(d, |b| b.min(d)));
        }
        for op in &ops {
            if let Some(n) = successor(&s, op) {
                if !dist.contains_key(&n) {
                    dist.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    Exhaustive { states: dist.len(), goal_distance: best }
}

/// Executes `plan` under the reference semantics; true iff every step applies and the goal holds
/// at the end.
pub fn reference_executes(domain: &DomainDef, objects: &[TypedName], s0: &WorldState, goal: &Goal, plan: &Plan) -> bool {
    let ops = ground_ops(domain, objects);
    let names: Vec<(String, Vec<String>)> = domain
        .actions
        .iter()
        .flat_map(|a| {
            let choices: Vec<Vec<&str>> =
                a.params.iter().map(|p| objects.iter().filter(|o| o.ty == p.ty).map(|o| o.name.as_str()).collect()).collect();
            let mut combos: Vec<Vec<String>> = vec![vec![]];
            for c in &choices {
                combos =
                    combos.into_iter().flat_map(|prefix| c.iter().map(move |x| [prefix.clone(), vec![x.to_string()]].concat())).collect();
            }
            combos.into_iter().map(move |args| (a.name.clone(), args))
        })
        .collect();
    let mut s = to_state(s0);
    for step in plan.steps() {
        let Some(k) = names.iter().position(|(n, a)| *n == step.schema && *a == step.args) else {
            return false;
        };
        match successor(&s, &ops[k]) {
            Some(n) => s = n,
            None => return false,
        }
    }
    goal.atoms().iter().all(|a| s.contains(&(a.predicate.clone(), a.args.clone())))
}

pub struct Instance {
    pub objects: Vec<TypedName>,
    pub init: WorldState,
    pub goal: Goal,
}

fn obj(name: String, ty: &str) -> TypedName {
    TypedName { name, ty: ty.into() }
}

/// A random world over the bundled domain: 1–2 robots, 2–4 locations (some unreachable),
/// 1–3 items, 2–3 orientations with random rotation edges, a safe-configuration fact most of
/// the time, and a goal of one or two atoms.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let robots: Vec<String> = (0..rng.random_range(1..=2)).map(|i| format!("r{i}")).collect();
    let locs: Vec<String> = (0..rng.random_range(2..=4)).map(|i| format!("l{i}")).collect();
    let items: Vec<String> = (0..rng.random_range(1..=if robots.len() == 2 { 2 } else { 3 })).map(|i| format!("i{i}")).collect();
    let oris: Vec<String> = (0..rng.random_range(2..=3)).map(|i| format!("o{i}")).collect();

    let mut objects = Vec::new();
    objects.extend(robots.iter().cloned().map(|n| obj(n, "robot")));
    objects.extend(locs.iter().cloned().map(|n| obj(n, "location")));
    objects.extend(items.iter().cloned().map(|n| obj(n, "item")));
    objects.extend(oris.iter().cloned().map(|n| obj(n, "orientation")));

    let mut init = Vec::new();
    for l in &locs {
        if rng.random_bool(0.7) {
            init.push(Atom::new("reachable", [l]));
        }
    }
    if rng.random_bool(0.85) {
        init.push(Atom::new("safe-configuration", Vec::<String>::new()));
    }
    for a in &oris {
        for b in &oris {
            if a != b && rng.random_bool(0.45) {
                init.push(Atom::new("valid-rotation", [a, b]));
            }
        }
    }
    for a in &locs {
        for b in &locs {
            if a != b && rng.random_bool(0.5) {
                init.push(Atom::new("valid-transition", [a, b]));
            }
        }
    }
    let mut free_items: Vec<&String> = items.iter().collect();
    for r in &robots {
        init.push(Atom::new("at", [r, locs.choose(rng).unwrap()]));
        init.push(Atom::new("oriented", [r, oris.choose(rng).unwrap()]));
        if !free_items.is_empty() && rng.random_bool(0.3) {
            let i = free_items.remove(rng.random_range(0..free_items.len()));
            init.push(Atom::new("holding", [r, i]));
        } else {
            init.push(Atom::new("empty-handed", [r]));
        }
    }
    for i in free_items {
        init.push(Atom::new("item-at", [i, locs.choose(rng).unwrap()]));
    }

    let mut goal = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        let r = robots.choose(rng).unwrap();
        let atom = match rng.random_range(0..5) {
            0 => Atom::new("holding", [r, items.choose(rng).unwrap()]),
            1 => Atom::new("item-at", [items.choose(rng).unwrap(), locs.choose(rng).unwrap()]),
            2 => Atom::new("at", [r, locs.choose(rng).unwrap()]),
            3 => Atom::new("oriented", [r, oris.choose(rng).unwrap()]),
            _ => Atom::new("empty-handed", [r]),
        };
        if !goal.contains(&atom) {
            goal.push(atom);
        }
    }
    Instance { objects, init: WorldState::new(init), goal: Goal::new(goal).expect("non-empty goal") }
}

pub struct OracleReport {
    pub instances: usize,
    pub solvable: usize,
    pub max_states: usize,
    pub longest_plan: usize,
    pub failures: Vec<String>,
}

/// Compares the library planner against the exhaustive reference on `count` random worlds of at
/// most `state_cap` reachable states.
pub fn planner_oracle(seed: u64, count: usize, state_cap: usize) -> OracleReport {
    use intentgate::planner::{check_logical, synthesize_plan, LogicalRules, PlanOutcome, SearchLimits};

    let domain = assets::domain();
    let limits = SearchLimits { max_depth: 64, max_states: 1_000_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { instances: 0, solvable: 0, max_states: 0, longest_plan: 0, failures: Vec::new() };
    while report.instances < count {
        let inst = random_instance(&mut rng);
        let truth = exhaustive(&domain, &inst.objects, &inst.init, &inst.goal);
        if truth.states > state_cap {
            continue;
        }
        report.instances += 1;
        report.max_states = report.max_states.max(truth.states);
        let outcome = synthesize_plan(&domain, &inst.objects, &inst.init, &inst.goal, limits).expect("instance grounds");
        let tag =
            format!("instance {} (goal {:?})", report.instances, inst.goal.atoms().iter().map(ToString::to_string).collect::<Vec<_>>());
        match (outcome, truth.goal_distance) {
            (PlanOutcome::Found(plan), Some(d)) => {
                report.solvable += 1;
                report.longest_plan = report.longest_plan.max(d);
                if plan.len() != d {
                    report.failures.push(format!("{tag}: plan length {} but shortest is {d}", plan.len()));
                }
                let v = check_logical(&domain, &LogicalRules::default(), &inst.init, &plan);
                if !v.is_empty() {
                    report.failures.push(format!("{tag}: plan has violations {v:?}"));
                }
                if !reference_executes(&domain, &inst.objects, &inst.init, &inst.goal, &plan) {
                    report.failures.push(format!("{tag}: plan does not reach the goal under the reference semantics"));
                }
            }
            (PlanOutcome::NoPlan, None) => {}
            (o, d) => report.failures.push(format!("{tag}: planner {o:?}, reference distance {d:?}")),
        }
    }
    report
}
