use std::collections::BTreeMap;

use super::*;

const BLOCKS: &str = include_str!("../../scenarios/b1/domain.pddl");
const STACK_FOUR: &str = include_str!("../../scenarios/b1/problem.pddl");

fn fact(s: &str) -> Fact {
    s.parse().unwrap()
}

fn act(domain: &Domain, name: &str, args: &[&str]) -> GroundedAction {
    domain.ground(&ActionRef::new(name, args)).unwrap()
}

#[test]
fn pick_schema_reads_clear_and_adds_inhand() {
    let d = Domain::parse(BLOCKS).unwrap();
    assert_eq!(d.actions.len(), 4);
    let pick = d.action("pick").unwrap();
    assert!(pick.pre_pos.iter().any(|p| p.predicate.as_str() == "clear" && p.args == [Symbol::new("o")]));
    assert!(pick.add.iter().any(|p| p.predicate.as_str() == "inhand"));
    assert!(d.is_subtype("cube", "object"));
    assert!(!d.is_subtype("cube", "arm"));
}

#[test]
fn predicates_only_domain_is_valid() {
    let d = Domain::parse("(define (domain tiny) (:predicates (p ?x)))").unwrap();
    assert!(d.actions.is_empty());
    assert_eq!(d.predicates[0].params[0].ty.as_str(), ROOT_TYPE);
}

#[test]
fn schema_errors_are_located() {
    let unknown = "(define (domain d)\n (:predicates (p ?x))\n (:action a :parameters (?x)\n  :precondition (q ?x)\n  :effect (p ?x)))";
    let e = Domain::parse(unknown).unwrap_err();
    assert_eq!((e.kind, e.line, e.col), (ErrorKind::UnknownPredicate, 4, 18));

    let arity = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :effect (p ?x ?x)))";
    let e = Domain::parse(arity).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Arity);
    assert!(e.has_location());

    let unbound = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :effect (not (p ?y))))";
    let e = Domain::parse(unbound).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UnboundVariable);
    assert!(e.to_string().starts_with("1:"));
}

#[test]
fn unsupported_formulas_are_rejected() {
    let or = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (or (p ?x)) :effect (p ?x)))";
    assert_eq!(Domain::parse(or).unwrap_err().kind, ErrorKind::Syntax);
}

#[test]
fn problem_goal_and_init() {
    let d = Domain::parse(BLOCKS).unwrap();
    let p = Problem::parse(STACK_FOUR, &d).unwrap();
    assert!(p.init.contains(&fact("(ontable A)")));
    let goal = p.goal_set();
    assert_eq!(goal, [fact("(on A B)"), fact("(on B C)"), fact("(on C D)")].into_iter().collect());
    assert_eq!(Problem::parse(&p.to_pddl(), &d).unwrap(), p);
}

#[test]
fn problem_errors_are_located() {
    let d = Domain::parse(BLOCKS).unwrap();
    let undeclared = "(define (problem p) (:domain blocks) (:objects A - cube)\n (:init (ontable Z)) (:goal (and)))";
    let e = Problem::parse(undeclared, &d).unwrap_err();
    assert_eq!((e.kind, e.line, e.col), (ErrorKind::UnknownObject, 2, 9));
    let unknown = "(define (problem p) (:domain blocks) (:objects A - cube) (:init (floating A)) (:goal (and)))";
    assert_eq!(Problem::parse(unknown, &d).unwrap_err().kind, ErrorKind::UnknownPredicate);
    let wrong = "(define (problem p) (:domain other) (:objects) (:init) (:goal (and)))";
    assert!(Problem::parse(wrong, &d).is_err());
}

#[test]
fn static_split_follows_schema_effects() {
    let d = Domain::parse(BLOCKS).unwrap();
    let scene = SceneGraph::from_facts([fact("(cube C)"), fact("(on C D)")].into_iter().collect());
    let (stat, flu) = scene.split_static(&d);
    assert!(stat.contains(&fact("(cube C)")));
    assert!(flu.contains(&fact("(on C D)")));
    let (s, f) = SceneGraph::default().split_static(&d);
    assert!(s.is_empty() && f.is_empty());
}

#[test]
fn pick_then_place_restores_scene() {
    let d = Domain::parse(BLOCKS).unwrap();
    let p = Problem::parse(STACK_FOUR, &d).unwrap();
    let s0 = p.initial_scene();
    let pick = act(&d, "pick", &["panda", "C"]);
    assert!(s0.applicable(&pick));
    let s1 = s0.apply(&pick).unwrap();
    assert!(s1.contains(&fact("(inhand panda C)")));
    assert!(!s1.applicable(&pick));
    assert_eq!(s1.apply(&pick).unwrap_err().kind, ErrorKind::NotApplicable);
    let s2 = s1.apply(&act(&d, "place", &["panda", "C"])).unwrap();
    assert_eq!(s2, s0);
}

#[test]
fn grounding_counts_follow_type_product() {
    let d = Domain::parse(BLOCKS).unwrap();
    let p = Problem::parse(STACK_FOUR, &d).unwrap();
    let all = d.groundings(&p.object_table());
    // pick/place: 1 arm x 4 cubes; stack/unstack: 1 x 4 x 4
    assert_eq!(all.len(), 4 + 4 + 16 + 16);
    let mut sorted = all.clone();
    sorted.sort();
    assert_eq!(all, sorted);
    let mut objects = p.object_table();
    objects.insert(Symbol::new("franka"), Symbol::new("arm"));
    assert_eq!(d.groundings(&objects).len(), 2 * 40);
}

#[test]
fn statics_survive_every_action() {
    let d = Domain::parse(BLOCKS).unwrap();
    let p = Problem::parse(STACK_FOUR, &d).unwrap();
    let s0 = p.initial_scene();
    let mut frontier = vec![s0.clone()];
    let mut seen = std::collections::BTreeSet::new();
    let actions = d.groundings(&p.object_table());
    while let Some(s) = frontier.pop() {
        if !seen.insert(s.facts().clone()) {
            continue;
        }
        for a in &actions {
            if let Ok(next) = s.apply(a) {
                assert_eq!(next.split_static(&d).0, s.split_static(&d).0);
                frontier.push(next);
            }
        }
    }
    // 4 blocks, one arm: 73 stack configurations on the table x held block
    assert!(seen.len() > 100);
}

#[test]
fn scene_new_checks_objects() {
    let mut objects = BTreeMap::new();
    objects.insert(Symbol::new("A"), Symbol::new("cube"));
    let ok = SceneGraph::new(objects.clone(), [fact("(clear A)")].into_iter().collect());
    assert!(ok.is_ok());
    assert!(SceneGraph::new(objects, [fact("(on A B)")].into_iter().collect()).is_err());
}
