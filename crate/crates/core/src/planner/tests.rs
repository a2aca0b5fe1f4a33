use std::collections::BTreeMap;

use super::*;
use crate::pddl::{ActionRef, Domain, Fact, Problem};

const BLOCKS: &str = include_str!("../../scenarios/b1/domain.pddl");
const STACK_FOUR: &str = include_str!("../../scenarios/b1/problem.pddl");

fn setup() -> (Domain, Problem, Demonstration, MultiGoalSpec) {
    let domain = Domain::parse(BLOCKS).unwrap();
    let problem = Problem::parse(STACK_FOUR, &domain).unwrap();
    let actions = [
        ActionRef::new("pick", &["panda", "C"]),
        ActionRef::new("stack", &["panda", "C", "D"]),
        ActionRef::new("pick", &["panda", "B"]),
        ActionRef::new("stack", &["panda", "B", "C"]),
        ActionRef::new("pick", &["panda", "A"]),
        ActionRef::new("stack", &["panda", "A", "B"]),
    ];
    let demo = Demonstration::replay(&domain, problem.initial_scene(), &actions, BTreeMap::new()).unwrap();
    let spec = MultiGoalSpec::build(&demo, &problem.goal_set(), &domain).unwrap();
    (domain, problem, demo, spec)
}

fn scene(problem: &Problem, fluents: &[&str]) -> SceneGraph {
    let mut facts: crate::pddl::FactSet =
        problem.init.iter().filter(|f| ["arm", "cube"].contains(&f.predicate.as_str())).cloned().collect();
    facts.extend(fluents.iter().map(|s| s.parse::<Fact>().unwrap()));
    SceneGraph::new(problem.object_table(), facts).unwrap()
}

#[test]
fn multigoal_has_one_fluent_set_per_demo_state() {
    let (domain, _, demo, spec) = setup();
    assert_eq!(spec.len(), demo.len() + 1);
    let fluent = domain.fluent_predicates();
    for g in &spec.goals {
        assert!(g.iter().all(|f| fluent.contains(&f.predicate)));
    }
}

#[test]
fn goal_missing_from_final_state_is_rejected() {
    let (domain, problem, _, _) = setup();
    let short = Demonstration::replay(&domain, problem.initial_scene(), &[ActionRef::new("pick", &["panda", "C"])], BTreeMap::new()).unwrap();
    assert!(matches!(MultiGoalSpec::build(&short, &problem.goal_set(), &domain), Err(PlannerError::InconsistentDemo(_))));
}

#[test]
fn degenerate_demo_is_single_goal() {
    let (domain, problem, demo, _) = setup();
    let done = Demonstration::replay(&domain, demo.final_state().clone(), &[], BTreeMap::new()).unwrap();
    let spec = MultiGoalSpec::build(&done, &problem.goal_set(), &domain).unwrap();
    assert_eq!(spec.goals, vec![demo.final_state().fluents(&domain)]);
}

#[test]
fn displaced_start_connects_in_one_step() {
    let (domain, problem, demo, spec) = setup();
    // C was put on A instead of being picked from the table
    let start = scene(&problem, &["(handempty panda)", "(on C A)", "(clear C)", "(ontable A)", "(ontable B)", "(clear B)", "(ontable D)", "(clear D)"]);
    let prefix = plan_to_any(&start, &demo, &spec, &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert_eq!(prefix.matched, 1);
    assert_eq!(action_refs(&prefix.plan.actions), vec![ActionRef::new("unstack", &["panda", "C", "A"])]);

    let plan = logic_dmp_plan(&start, &demo, &spec, &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert_eq!(plan.len(), 1 + demo.len() - 1);
    assert_eq!(plan.provenance[0], Provenance::NewPrefix);
    assert!(plan.provenance[1..].iter().all(|p| *p == Provenance::DemoSuffix));
    validate_plan(&start, &plan.actions, &problem.goal_set(), None).unwrap();
}

#[test]
fn start_on_the_demo_needs_no_prefix() {
    let (domain, problem, demo, spec) = setup();
    let plan = logic_dmp_plan(demo.states().first().unwrap(), &demo, &spec, &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert_eq!(plan.actions, demo.actions());
    assert_eq!(plan.stats.expanded, 0);
    for j in 0..demo.states().len() {
        let p = plan_to_any(&demo.states()[j], &demo, &spec, &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
        assert_eq!((p.plan.len(), p.matched), (0, j));
    }
    let full = plan_full(demo.final_state(), &problem.goal_set(), &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert!(full.is_empty());
}

#[test]
fn full_plan_is_optimal_and_valid() {
    let (domain, problem, _, _) = setup();
    let plan = plan_full(&problem.initial_scene(), &problem.goal_set(), &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert_eq!(plan.len(), 6);
    validate_plan(&problem.initial_scene(), &plan.actions, &problem.goal_set(), None).unwrap();
    let again = plan_full(&problem.initial_scene(), &problem.goal_set(), &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    assert_eq!(plan.actions, again.actions);
    assert_eq!(plan.stats.expanded, again.stats.expanded);
}

#[test]
fn feasibility_prunes_expansions() {
    let (domain, problem, _, _) = setup();
    let no_stack_on_d = |_: &SceneGraph, a: &crate::pddl::GroundedAction| !(a.name.as_str() == "stack" && a.args[2].as_str() == "D");
    let err = plan_full(&problem.initial_scene(), &problem.goal_set(), &domain, &no_stack_on_d, SearchLimits::default()).unwrap_err();
    assert!(matches!(err, PlannerError::Unsolvable { expanded } if expanded > 0));
    let limited = plan_full(&problem.initial_scene(), &problem.goal_set(), &domain, &AlwaysFeasible, SearchLimits { max_expansions: 3 });
    assert_eq!(limited.unwrap_err(), PlannerError::Unsolvable { expanded: 3 });
}

#[test]
fn infeasible_suffix_is_not_a_match() {
    let (domain, _, demo, spec) = setup();
    // stacking B on C is forbidden, so no demo state before that step can be reused
    let forbid = |_: &SceneGraph, a: &crate::pddl::GroundedAction| !(a.name.as_str() == "stack" && a.args[1].as_str() == "B");
    let err = plan_to_any(demo.states().first().unwrap(), &demo, &spec, &domain, &forbid, SearchLimits::default()).unwrap_err();
    assert!(matches!(err, PlannerError::Unsolvable { .. }));
}

#[test]
fn validator_reports_the_failing_step() {
    let (domain, problem, demo, _) = setup();
    let mut actions = demo.actions().to_vec();
    actions.swap(0, 1);
    let err = validate_plan(&problem.initial_scene(), &actions, &problem.goal_set(), None).unwrap_err();
    assert_eq!(err, ValidationError::NotApplicable { step: 0, action: "(stack panda C D)".into() });
    let err = validate_plan(&problem.initial_scene(), &demo.actions()[..2], &problem.goal_set(), None).unwrap_err();
    assert!(matches!(err, ValidationError::GoalNotReached { .. }));
    let _ = domain;
}

#[test]
fn plan_record_shape() {
    let (domain, problem, demo, spec) = setup();
    let plan = logic_dmp_plan(&problem.initial_scene(), &demo, &spec, &domain, &AlwaysFeasible, SearchLimits::default()).unwrap();
    let json = serde_json::to_value(plan.to_record()).unwrap();
    assert_eq!(json["actions"][0]["name"], "pick");
    assert_eq!(json["actions"][0]["args"][1], "C");
    assert_eq!(json["actions"][0]["provenance"], "demo-suffix");
    assert!(json["stats"]["expanded"].is_number());
}
