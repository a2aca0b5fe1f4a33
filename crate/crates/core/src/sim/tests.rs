use super::*;
use crate::executor::{min_jerk, HORIZON, STEP_DT};
use crate::path::SampledPath;
use crate::pddl::{ActionRef, Fact, FactSet, Symbol};
use crate::scenario::{demo_stroke, Benchmark, Scenario};

fn table_world(blocks: &[(&str, f64, f64)]) -> WorldState {
    let objects = blocks.iter().map(|(n, x, y)| WorldObject::block(n, *x, *y, "table")).collect();
    let arms = vec![Arm::new("panda", [0.0, 0.0], 0.8, [0.3, 0.0])];
    let regions = vec![Region::new("table", RegionKind::Table, [0.3, -0.3], [0.7, 0.3])];
    WorldState::new(objects, arms, regions).unwrap()
}

fn facts(list: &[&str]) -> FactSet {
    list.iter().map(|s| s.parse::<Fact>().unwrap()).collect()
}

fn stroke(task: &MotionTask) -> SampledPath {
    demo_stroke(task)
}

fn run(world: &WorldState, domain: &crate::pddl::Domain, action: &[&str]) -> (WorldState, MotionOutcome) {
    let a = domain.ground(&ActionRef::new(action[0], &action[1..])).unwrap();
    let task = motion_task(world, &a).unwrap();
    execute_motion(world, &task, &stroke(&task), None).unwrap()
}

#[test]
fn scene_graph_of_a_two_block_tower() {
    let mut w = table_world(&[("A", 0.4, 0.1), ("B", 0.5, -0.1)]);
    w = apply_disturbance(&w, &EventKind::MoveObject { object: Symbol::new("A"), pose: Pose::new(0.5, -0.1), support: Symbol::new("B") })
        .unwrap();
    let expected = facts(&[
        "(arm panda)",
        "(region table)",
        "(cube A)",
        "(cube B)",
        "(handempty panda)",
        "(canreach panda table)",
        "(reachable panda A)",
        "(reachable panda B)",
        "(inregion A table)",
        "(inregion B table)",
        "(ontable B)",
        "(on A B)",
        "(clear A)",
    ]);
    assert_eq!(scene_graph(&w).facts(), &expected);
}

#[test]
fn clear_and_ontable_counts_match_the_stacks() {
    // towers built from a fixed table layout; every tower has one clear top
    // and one block on the table
    let layouts: [&[(&str, &str)]; 4] = [
        &[],
        &[("A", "B")],
        &[("A", "B"), ("B", "C")],
        &[("A", "B"), ("C", "D")],
    ];
    for moves in layouts {
        let mut w = table_world(&[("A", 0.4, 0.1), ("B", 0.5, 0.1), ("C", 0.4, -0.1), ("D", 0.6, -0.1)]);
        for (x, y) in moves.iter().rev() {
            let p = w.object(y).unwrap().pose;
            w = apply_disturbance(&w, &EventKind::MoveObject { object: Symbol::new(x), pose: p, support: Symbol::new(y) }).unwrap();
        }
        let towers = 4 - moves.len();
        let g = scene_graph(&w);
        let count = |p: &str| g.facts().iter().filter(|f| f.predicate.as_str() == p).count();
        assert_eq!(count("clear"), towers, "{moves:?}");
        assert_eq!(count("ontable"), towers, "{moves:?}");
        assert_eq!(count("on"), moves.len(), "{moves:?}");
    }
}

#[test]
fn held_objects_stay_reachable_by_their_holder() {
    let s = Scenario::bundled(Benchmark::B2).unwrap();
    let (w, outcome) = run(&s.world, &s.domain, &["pick", "panda", "hook", "table"]);
    assert!(outcome.is_completed());
    let mut far = w.clone();
    let hook = far.object_mut("hook").unwrap();
    hook.pose = Pose::new(0.9, 0.0);
    assert!(scene_graph(&far).contains(&"(reachable panda hook)".parse().unwrap()));
}

#[test]
fn pick_then_place_restores_the_world() {
    let s = Scenario::bundled(Benchmark::B2).unwrap();
    let (held, o1) = run(&s.world, &s.domain, &["pick", "panda", "B", "table"]);
    let (back, o2) = run(&held, &s.domain, &["place", "panda", "B", "table"]);
    assert!(o1.is_completed() && o2.is_completed());
    assert_eq!(back.objects, s.world.objects);
    assert!(back.arms[0].holding.is_none());
}

#[test]
fn pull_via_points_in_the_canonical_frame() {
    // pulling toward −y: top edge midpoint, then the left-down corner
    let v = pull_via_points([0.0, 0.0], 0.02, [0.0, -1.0]);
    assert_eq!(v[0].0, PULL_VIA_FRACTIONS[0]);
    assert!(distance(v[0].1, [0.0, 0.02]) < 1e-15);
    assert!(distance(v[1].1, [-0.02, -0.02]) < 1e-15);
    assert!(distance(pull_tip_goal([0.0, 0.0], 0.02, [0.0, -1.0]), [-0.02, -1.02]) < 1e-15);
}

#[test]
fn pull_via_points_follow_translation_and_rotation() {
    let base = pull_via_points([0.0, 0.0], 0.02, [0.0, -1.0]);
    let shifted = pull_via_points([0.3, 0.4], 0.02, [0.3, -0.6]);
    for (a, b) in base.iter().zip(&shifted) {
        assert!(distance([a.1[0] + 0.3, a.1[1] + 0.4], b.1) < 1e-12);
    }
    // rotations preserve distances to the block centre
    for goal in [[1.0, 0.0], [-0.5, 0.5], [0.2, 0.9]] {
        let v = pull_via_points([0.0, 0.0], 0.02, goal);
        assert!((distance(v[0].1, [0.0, 0.0]) - 0.02).abs() < 1e-12);
        assert!((distance(v[1].1, [0.0, 0.0]) - 0.02 * 2f64.sqrt()).abs() < 1e-12);
        // the top edge midpoint lies on the far side of the block
        let n = (goal[0] * goal[0] + goal[1] * goal[1]).sqrt();
        let along = (v[0].1[0] * goal[0] + v[0].1[1] * goal[1]) / n;
        assert!((along + 0.02).abs() < 1e-12);
    }
}

#[test]
fn pull_along_the_via_polynomial_drags_the_block() {
    let s = Scenario::bundled(Benchmark::B2).unwrap();
    let (held, _) = run(&s.world, &s.domain, &["pick", "panda", "hook", "table"]);
    let (pulled, outcome) = run(&held, &s.domain, &["pull", "panda", "hook", "A"]);
    assert_eq!(outcome, MotionOutcome::Completed);
    let goal = pull_goal(&held, "panda", "A").unwrap();
    assert!(distance(pulled.object("A").unwrap().pose.xy(), goal.xy()) < END_TOLERANCE);
    assert!(scene_graph(&pulled).contains(&"(reachable panda A)".parse().unwrap()));
}

#[test]
fn pull_that_misses_a_via_point_leaves_the_block() {
    let s = Scenario::bundled(Benchmark::B2).unwrap();
    let (held, _) = run(&s.world, &s.domain, &["pick", "panda", "hook", "table"]);
    let a = s.domain.ground(&ActionRef::new("pull", &["panda", "hook", "A"])).unwrap();
    let task = motion_task(&held, &a).unwrap();
    let straight = SampledPath { dt: STEP_DT, positions: min_jerk(&task.start, &task.goal, HORIZON) };
    let (after, outcome) = execute_motion(&held, &task, &straight, None).unwrap();
    assert!(matches!(outcome, MotionOutcome::Failed { .. }), "{outcome:?}");
    assert_eq!(after.object("A").unwrap().pose, held.object("A").unwrap().pose);
}

#[test]
fn interrupted_motion_only_moves_the_effector() {
    let s = Scenario::bundled(Benchmark::B1).unwrap();
    let a = s.domain.ground(&ActionRef::new("pick", &["panda", "C"])).unwrap();
    let task = motion_task(&s.world, &a).unwrap();
    let (w, outcome) = execute_motion(&s.world, &task, &stroke(&task), Some(40)).unwrap();
    assert_eq!(outcome, MotionOutcome::Interrupted { step: 40 });
    assert_eq!(w.objects, s.world.objects);
    assert!((w.time - 0.4).abs() < 1e-12);
}

#[test]
fn demonstrated_actions_agree_with_the_domain() {
    for b in Benchmark::ALL {
        let s = Scenario::bundled(b).unwrap();
        let mut world = s.world.clone();
        let mut scene = scene_graph_for(&world, &s.domain);
        for r in &s.demo_actions {
            let a = s.domain.ground(r).unwrap();
            let task = motion_task(&world, &a).unwrap();
            let (next, outcome) = execute_motion(&world, &task, &stroke(&task), None).unwrap();
            assert!(outcome.is_completed(), "{b} {a}");
            scene = scene.apply(&a).unwrap();
            assert_eq!(scene_graph_for(&next, &s.domain).facts(), scene.facts(), "{b} {a}");
            world = next;
        }
    }
}

#[test]
fn execution_is_deterministic() {
    let s = Scenario::bundled(Benchmark::B3).unwrap();
    let go = || {
        let mut w = s.world.clone();
        for r in &s.demo_actions {
            let a = s.domain.ground(r).unwrap();
            let task = motion_task(&w, &a).unwrap();
            w = execute_motion(&w, &task, &stroke(&task), None).unwrap().0;
        }
        w.to_json()
    };
    assert_eq!(go(), go());
}

#[test]
fn disturbance_levels() {
    let s = Scenario::bundled(Benchmark::B1).unwrap();
    let (_, rec) = s.context().unwrap();
    let demo = &rec.demonstration;
    let w = &s.world;
    let classify = |e: EventKind| classify_level(w, &apply_disturbance(w, &e).unwrap(), demo, &s.domain);
    let mv = |o: &str, x: f64, y: f64, on: &str| EventKind::MoveObject { object: Symbol::new(o), pose: Pose::new(x, y), support: Symbol::new(on) };
    let d = w.object("D").unwrap().pose;
    let c = w.object("C").unwrap().pose;
    assert_eq!(classify(mv("A", 0.42, 0.17, "table")), Level::L1);
    // C on D is the state after the first demonstrated stack
    assert_eq!(classify(mv("C", d.x, d.y, "D")), Level::L2);
    assert_eq!(classify(mv("A", c.x, c.y, "C")), Level::L3);
    let mut e = WorldObject::block("E", 0.6, 0.2, "table");
    e.color = Some("red".into());
    assert_eq!(classify(EventKind::AddObject { object: e }), Level::L4);
}

#[test]
fn invalid_disturbances_are_rejected() {
    let s = Scenario::bundled(Benchmark::B1).unwrap();
    let w = &s.world;
    let d = w.object("D").unwrap().pose;
    let stacked = apply_disturbance(w, &EventKind::MoveObject { object: Symbol::new("C"), pose: d, support: Symbol::new("D") }).unwrap();
    let under = EventKind::MoveObject { object: Symbol::new("D"), pose: Pose::new(0.6, 0.25), support: Symbol::new("table") };
    assert!(apply_disturbance(&stacked, &under).is_err());
    let outside = EventKind::MoveObject { object: Symbol::new("A"), pose: Pose::new(0.9, 0.0), support: Symbol::new("table") };
    assert!(apply_disturbance(w, &outside).is_err());
    let overlap = EventKind::MoveObject { object: Symbol::new("A"), pose: Pose::new(0.51, 0.15), support: Symbol::new("table") };
    assert!(apply_disturbance(w, &overlap).is_err());
    let dup = EventKind::AddObject { object: WorldObject::block("A", 0.6, 0.2, "table") };
    assert!(apply_disturbance(w, &dup).is_err());
}

#[test]
fn world_json_round_trips() {
    let s = Scenario::bundled(Benchmark::B2).unwrap();
    let back = WorldState::from_json(&s.world.to_json()).unwrap();
    assert_eq!(back, s.world);
}
