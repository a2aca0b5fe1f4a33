use std::collections::BTreeSet;

use ldmp_core::pddl::{ActionRef, Domain, Fact, FactSet, Problem, SceneGraph, Symbol};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BLOCKS: &str = include_str!("../scenarios/b1/domain.pddl");
const STACK_FOUR: &str = include_str!("../scenarios/b1/problem.pddl");

/// Writes a random well-formed domain directly as text.
fn random_domain_text(rng: &mut ChaCha8Rng) -> String {
    let types = ["t0", "t1", "t2"];
    let n_pred = rng.random_range(1..5);
    let mut preds = Vec::new();
    let mut text = String::from("(define (domain rnd)\n (:types t0 - object t1 - t0 t2 - object)\n (:predicates");
    for p in 0..n_pred {
        let arity = rng.random_range(0..3);
        let params: Vec<String> = (0..arity).map(|i| format!("?v{i} - {}", types[rng.random_range(0..3)])).collect();
        text.push_str(&format!(" (p{p} {})", params.join(" ")));
        preds.push(arity);
    }
    text.push(')');
    for a in 0..rng.random_range(0..4) {
        let n_params = rng.random_range(0..4);
        let params: Vec<String> = (0..n_params).map(|i| format!("?x{i} - {}", types[rng.random_range(0..3)])).collect();
        let literal = |rng: &mut ChaCha8Rng| -> Option<String> {
            let p = rng.random_range(0..n_pred);
            if preds[p] > 0 && n_params == 0 {
                return None;
            }
            let args: Vec<String> = (0..preds[p]).map(|_| format!("?x{}", rng.random_range(0..n_params.max(1)))).collect();
            let atom = format!("(p{p} {})", args.join(" "));
            Some(if rng.random_bool(0.3) { format!("(not {atom})") } else { atom })
        };
        let pre: Vec<String> = (0..rng.random_range(0..4)).filter_map(|_| literal(rng)).collect();
        let eff: Vec<String> = (0..rng.random_range(0..4)).filter_map(|_| literal(rng)).collect();
        text.push_str(&format!(
            "\n (:action a{a} :parameters ({}) :precondition (and {}) :effect (and {}))",
            params.join(" "),
            pre.join(" "),
            eff.join(" ")
        ));
    }
    text.push(')');
    text
}

#[test]
fn printed_domains_parse_back_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let text = random_domain_text(&mut rng);
        let d = Domain::parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let printed = d.to_pddl();
        let back = Domain::parse(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(back, d, "{printed}");
    }
    let blocks = Domain::parse(BLOCKS).unwrap();
    assert_eq!(Domain::parse(&blocks.to_pddl()).unwrap(), blocks);
}

#[test]
fn mutated_problems_fail_with_a_location_or_parse() {
    let domain = Domain::parse(BLOCKS).unwrap();
    let base: Vec<char> = STACK_FOUR.chars().collect();
    let alphabet: Vec<char> = "() ?-:abcdXYZ;\n#".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for _ in 0..100 {
        let mut text = base.clone();
        for _ in 0..rng.random_range(1..4) {
            let at = rng.random_range(0..text.len());
            match rng.random_range(0..3) {
                0 => {
                    text.remove(at);
                }
                1 => text.insert(at, alphabet[rng.random_range(0..alphabet.len())]),
                _ => text[at] = alphabet[rng.random_range(0..alphabet.len())],
            }
        }
        let text: String = text.into_iter().collect();
        let outcome = std::panic::catch_unwind(|| Problem::parse(&text, &domain));
        match outcome.expect("parser must not panic") {
            Ok(_) => {}
            Err(e) => {
                failures += 1;
                assert!(e.has_location(), "{e} for\n{text}");
            }
        }
    }
    assert!(failures > 50);
}

fn blocks_scene_facts(rng: &mut ChaCha8Rng, universe: &[Fact]) -> FactSet {
    universe.iter().filter(|_| rng.random_bool(0.4)).cloned().collect()
}

#[test]
fn applicability_agrees_with_set_algebra() {
    let domain = Domain::parse(BLOCKS).unwrap();
    let problem = Problem::parse(STACK_FOUR, &domain).unwrap();
    let objects = problem.object_table();
    let actions = domain.groundings(&objects);
    let universe: Vec<Fact> = {
        let mut u = BTreeSet::new();
        for a in &actions {
            u.extend(a.pre_pos.iter().chain(&a.pre_neg).chain(&a.add).chain(&a.del).cloned());
        }
        u.into_iter().collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut applicable = 0;
    for _ in 0..1000 {
        let facts = blocks_scene_facts(&mut rng, &universe);
        let scene = SceneGraph::new(objects.clone(), facts.clone()).unwrap();
        let a = &actions[rng.random_range(0..actions.len())];
        let expected = a.pre_pos.iter().all(|f| facts.contains(f)) && a.pre_neg.iter().all(|f| !facts.contains(f));
        assert_eq!(scene.applicable(a), expected);
        if expected {
            applicable += 1;
            let next = scene.apply(a).unwrap();
            let mut oracle: Vec<Fact> = facts.iter().filter(|f| !a.del.contains(f)).cloned().collect();
            oracle.extend(a.add.iter().cloned());
            oracle.sort();
            oracle.dedup();
            assert_eq!(next.facts().iter().cloned().collect::<Vec<_>>(), oracle);
        }
    }
    assert!(applicable > 0);
}

proptest! {
    #[test]
    fn ground_facts_round_trip_through_text(pred in "[a-z][a-z0-9_]{0,6}", args in proptest::collection::vec("[A-Za-z][A-Za-z0-9_]{0,5}", 0..4)) {
        let f = Fact::from_symbols(Symbol::from(pred), args.into_iter().map(Symbol::from).collect());
        let back: Fact = f.to_string().parse().unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn apply_never_duplicates(seed in 0u64..10_000) {
        let domain = Domain::parse(BLOCKS).unwrap();
        let problem = Problem::parse(STACK_FOUR, &domain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = problem.initial_scene();
        let actions = domain.groundings(&problem.object_table());
        for _ in 0..20 {
            let options: Vec<_> = actions.iter().filter(|a| scene.applicable(a)).collect();
            if options.is_empty() { break; }
            let a = options[rng.random_range(0..options.len())];
            let next = scene.apply(a).unwrap();
            let list = serde_json::to_value(&next).unwrap();
            let strings: Vec<String> = serde_json::from_value(list).unwrap();
            let mut dedup = strings.clone();
            dedup.dedup();
            prop_assert_eq!(&strings, &dedup);
            prop_assert_eq!(next.split_static(&domain).0, scene.split_static(&domain).0);
            scene = next;
        }
    }
}

#[test]
fn unknown_action_reference_is_an_error() {
    let domain = Domain::parse(BLOCKS).unwrap();
    assert!(domain.ground(&ActionRef::new("fly", &["A"])).is_err());
    assert!(domain.ground(&ActionRef::new("pick", &["A"])).is_err());
}
