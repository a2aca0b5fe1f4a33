use std::collections::HashSet;
use std::time::Instant;

use crate::pddl::{Domain, FactSet, GroundedAction, SceneGraph};

use super::{Demonstration, Feasibility, MultiGoalSpec, PlanStats, PlannerError, Provenance, TaskPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_expansions: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_expansions: 200_000 }
    }
}

struct Node {
    state: SceneGraph,
    path: Vec<usize>,
}

struct Outcome {
    path: Vec<GroundedAction>,
    states: Vec<SceneGraph>,
    tag: usize,
    expanded: usize,
}

/// Breadth-first search with successors in sorted action order. The goal
/// test runs when a layer is dequeued; if several nodes of the first
/// successful layer pass, the one with the largest tag wins, then the
/// lexicographically first path.
fn layered_search(
    start: &SceneGraph,
    domain: &Domain,
    feasibility: &dyn Feasibility,
    limits: SearchLimits,
    goal_tag: &dyn Fn(&SceneGraph) -> Option<usize>,
) -> Result<Outcome, PlannerError> {
    let actions = domain.groundings(start.objects());
    let mut visited: HashSet<FactSet> = HashSet::new();
    visited.insert(start.facts().clone());
    let mut layer = vec![Node { state: start.clone(), path: Vec::new() }];
    let mut expanded = 0;
    loop {
        let best = layer
            .iter()
            .enumerate()
            .filter_map(|(i, n)| goal_tag(&n.state).map(|tag| (tag, i)))
            .min_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        if let Some((tag, index)) = best {
            let node = &layer[index];
            let path: Vec<GroundedAction> = node.path.iter().map(|&k| actions[k].clone()).collect();
            let mut states = vec![start.clone()];
            for a in &path {
                let next = states.last().expect("non-empty").apply_unchecked(a);
                states.push(next);
            }
            return Ok(Outcome { path, states, tag, expanded });
        }
        if layer.is_empty() {
            return Err(PlannerError::Unsolvable { expanded });
        }
        let mut next_layer = Vec::new();
        for node in &layer {
            if expanded >= limits.max_expansions {
                return Err(PlannerError::Unsolvable { expanded });
            }
            expanded += 1;
            for (k, a) in actions.iter().enumerate() {
                if !node.state.applicable(a) || !feasibility.feasible(&node.state, a) {
                    continue;
                }
                let next = node.state.apply_unchecked(a);
                if visited.insert(next.facts().clone()) {
                    let mut path = node.path.clone();
                    path.push(k);
                    next_layer.push(Node { state: next, path });
                }
            }
        }
        layer = next_layer;
    }
}

/// Single-goal search from scratch.
pub fn plan_full(
    start: &SceneGraph,
    goal: &FactSet,
    domain: &Domain,
    feasibility: &dyn Feasibility,
    limits: SearchLimits,
) -> Result<TaskPlan, PlannerError> {
    let clock = Instant::now();
    let outcome = layered_search(start, domain, feasibility, limits, &|s| s.entails(goal).then_some(0))?;
    let n = outcome.path.len();
    Ok(TaskPlan {
        actions: outcome.path,
        provenance: vec![Provenance::NewPrefix; n],
        states: outcome.states,
        stats: PlanStats { expanded: outcome.expanded, seconds: clock.elapsed().as_secs_f64() },
    })
}

/// True if the demo suffix starting at action `index` can be replayed from
/// `state` (applicable and feasible at every step) and ends in a state that
/// entails the task goal.
pub(crate) fn suffix_replays(
    state: &SceneGraph,
    demo: &Demonstration,
    index: usize,
    goal: &FactSet,
    feasibility: &dyn Feasibility,
) -> bool {
    let mut s = state.clone();
    for a in &demo.actions()[index..] {
        if !s.applicable(a) || !feasibility.feasible(&s, a) {
            return false;
        }
        s = s.apply_unchecked(a);
    }
    s.entails(goal)
}

/// Largest `i` such that the fluents of `state` contain `g_i` and the demo
/// suffix from `i` replays to the task goal.
pub(crate) fn demo_match(
    state: &SceneGraph,
    demo: &Demonstration,
    spec: &MultiGoalSpec,
    domain: &Domain,
    feasibility: &dyn Feasibility,
) -> Option<usize> {
    let fluents = state.fluents(domain);
    (0..spec.goals.len())
        .rev()
        .find(|&i| spec.goals[i].is_subset(&fluents) && suffix_replays(state, demo, i, &spec.task_goal, feasibility))
}

/// Prefix from `start` to the closest demonstration state, and that state's
/// index.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixPlan {
    pub plan: TaskPlan,
    pub matched: usize,
}

pub fn plan_to_any(
    start: &SceneGraph,
    demo: &Demonstration,
    spec: &MultiGoalSpec,
    domain: &Domain,
    feasibility: &dyn Feasibility,
    limits: SearchLimits,
) -> Result<PrefixPlan, PlannerError> {
    let clock = Instant::now();
    let outcome =
        layered_search(start, domain, feasibility, limits, &|s| demo_match(s, demo, spec, domain, feasibility))?;
    let n = outcome.path.len();
    Ok(PrefixPlan {
        plan: TaskPlan {
            actions: outcome.path,
            provenance: vec![Provenance::NewPrefix; n],
            states: outcome.states,
            stats: PlanStats { expanded: outcome.expanded, seconds: clock.elapsed().as_secs_f64() },
        },
        matched: outcome.tag,
    })
}

/// Prefix to the closest demo state followed by the demo suffix from there.
pub fn logic_dmp_plan(
    start: &SceneGraph,
    demo: &Demonstration,
    spec: &MultiGoalSpec,
    domain: &Domain,
    feasibility: &dyn Feasibility,
    limits: SearchLimits,
) -> Result<TaskPlan, PlannerError> {
    let clock = Instant::now();
    let PrefixPlan { mut plan, matched } = plan_to_any(start, demo, spec, domain, feasibility, limits)?;
    for a in &demo.actions()[matched..] {
        let next = plan.final_state().apply_unchecked(a);
        plan.states.push(next);
        plan.actions.push(a.clone());
        plan.provenance.push(Provenance::DemoSuffix);
    }
    plan.stats.seconds = clock.elapsed().as_secs_f64();
    Ok(plan)
}
