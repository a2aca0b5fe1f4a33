use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::executor::{TaskContext, HORIZON, STEP_DT};
use crate::pddl::Symbol;
use crate::planner::{logic_dmp_plan, suffix_replays};
use crate::sim::{
    apply_disturbance, classify_level, distance, pull_goal, DisturbanceEvent, EventKind, Level, ObjectKind, Pose,
    Region, Trigger, WorldFeasibility, WorldObject, WorldState,
};

use super::{Benchmark, RecordedDemo, Scenario, ScenarioError};

/// Smallest centre-to-centre distance (per axis) between sampled objects.
pub const MIN_SPACING: f64 = 0.06;
/// Largest displacement of a motion-level disturbance.
pub const L1_MAX_OFFSET: f64 = 0.03;
/// Clearance kept around the hook's approach and drag corridors.
const CORRIDOR_CLEARANCE: f64 = 0.07;
const MAX_ATTEMPTS: usize = 5000;
const SAMPLE_TRIES: usize = 400;
/// Name and colour of the block that extreme disturbances introduce.
const INTRUDER: (&str, &str) = ("E", "red");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    RandomStart,
    L1,
    L2,
    L3,
    L4,
}

impl SuiteKind {
    pub fn level(self) -> Option<Level> {
        match self {
            SuiteKind::RandomStart => None,
            SuiteKind::L1 => Some(Level::L1),
            SuiteKind::L2 => Some(Level::L2),
            SuiteKind::L3 => Some(Level::L3),
            SuiteKind::L4 => Some(Level::L4),
        }
    }

    pub fn from_level(level: Level) -> Self {
        match level {
            Level::L1 => SuiteKind::L1,
            Level::L2 => SuiteKind::L2,
            Level::L3 => SuiteKind::L3,
            Level::L4 => SuiteKind::L4,
        }
    }

    fn tag(self) -> u64 {
        match self {
            SuiteKind::RandomStart => 0,
            SuiteKind::L1 => 1,
            SuiteKind::L2 => 2,
            SuiteKind::L3 => 3,
            SuiteKind::L4 => 4,
        }
    }
}

/// One generated task: a start world and the disturbances scripted on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub benchmark: Benchmark,
    pub kind: SuiteKind,
    pub index: usize,
    /// Logical changes applied to the template (random starts only).
    pub perturbations: usize,
    pub world: WorldState,
    pub script: Vec<DisturbanceEvent>,
}

/// Generator for case `index` of a suite; a pure function of its inputs.
pub fn suite_rng(seed: u64, benchmark: Benchmark, kind: SuiteKind, index: usize) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in benchmark.as_str().bytes().chain(kind.tag().to_le_bytes()).chain((index as u64).to_le_bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn benchmark_of(scenario: &Scenario) -> Result<Benchmark, ScenarioError> {
    scenario
        .benchmark
        .ok_or_else(|| ScenarioError::Generation(format!("{} is not a bundled benchmark", scenario.name)))
}

fn grid(lo: f64, hi: f64) -> Vec<f64> {
    let a = (lo * 100.0 - 1e-6).ceil() as i64;
    let b = (hi * 100.0 + 1e-6).floor() as i64;
    (a..=b).map(|k| k as f64 / 100.0).collect()
}

fn spaced(p: [f64; 2], others: &[[f64; 2]]) -> bool {
    others.iter().all(|o| (p[0] - o[0]).abs().max((p[1] - o[1]).abs()) >= MIN_SPACING - 1e-9)
}

/// Positions of level-1 objects other than `skip`.
fn occupied(world: &WorldState, skip: &[&str]) -> Vec<[f64; 2]> {
    world
        .objects
        .iter()
        .filter(|o| o.level == 1 && !skip.contains(&o.name.as_str()))
        .map(|o| o.pose.xy())
        .collect()
}

/// Random pose on the 0.01 m grid inside `region`, spaced from `others`
/// and accepted by `accept`.
fn sample_pose(
    rng: &mut ChaCha8Rng,
    region: &Region,
    half: [f64; 2],
    others: &[[f64; 2]],
    accept: &dyn Fn([f64; 2]) -> bool,
) -> Option<Pose> {
    let xs = grid(region.min[0] + half[0], region.max[0] - half[0]);
    let ys = grid(region.min[1] + half[1], region.max[1] - half[1]);
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    for _ in 0..SAMPLE_TRIES {
        let p = [*xs.choose(rng)?, *ys.choose(rng)?];
        if spaced(p, others) && accept(p) {
            return Some(Pose::new(p[0], p[1]));
        }
    }
    None
}

/// Placement-grid cells of `region` whose footprint is clear of every
/// level-1 object.
fn free_cells(world: &WorldState, region: &Region, half: [f64; 2]) -> Vec<Pose> {
    region
        .cells()
        .into_iter()
        .map(|c| Pose::new(c[0], c[1]))
        .filter(|p| {
            let fp = crate::sim::Aabb::of(p, half).inflate(crate::sim::COLLISION_MARGIN);
            world.objects.iter().filter(|o| o.level == 1).all(|o| !o.footprint().overlaps(&fp))
        })
        .collect()
}

/// Re-places `names` in `region` one after another, each spaced from the
/// objects placed before it and accepted by its predicate.
/// An object name and the predicate its sampled position must satisfy.
type Placement<'a> = (&'a str, &'a dyn Fn([f64; 2]) -> bool);

fn scatter(
    rng: &mut ChaCha8Rng,
    world: &WorldState,
    region: &str,
    names: &[Placement<'_>],
) -> Option<WorldState> {
    let mut w = world.clone();
    let r = w.region(region)?.clone();
    let moved: Vec<&str> = names.iter().map(|(n, _)| *n).collect();
    let mut placed = occupied(&w, &moved);
    for (name, accept) in names {
        let half = w.object(name)?.half_extents;
        let pose = sample_pose(rng, &r, half, &placed, *accept)?;
        placed.push(pose.xy());
        let o = w.object_mut(name)?;
        o.pose = pose;
        o.support = r.name.clone();
        o.level = 1;
    }
    w.validate().ok()?;
    Some(w)
}

fn move_object(world: &WorldState, object: &str, pose: Pose, support: &str) -> Option<WorldState> {
    apply_disturbance(world, &move_event(object, pose, support)).ok()
}

fn move_event(object: &str, pose: Pose, support: &str) -> EventKind {
    EventKind::MoveObject { object: Symbol::new(object), pose, support: Symbol::new(support) }
}

/// Blocks with nothing on them that no arm holds.
fn clear_blocks(world: &WorldState) -> Vec<Symbol> {
    world
        .objects
        .iter()
        .filter(|o| o.is_block() && o.level >= 1 && world.above(o.name.as_str()).is_none())
        .map(|o| o.name.clone())
        .collect()
}

fn distance_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 < 1e-18 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) };
    distance(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// True if every block an arm would have to pull has a clear approach from
/// the hook and a clear drag path to its pull target. Blocks already pulled
/// rest at their targets, so those count as obstacles too.
pub fn pull_corridor_clear(world: &WorldState) -> bool {
    let Some(hook) = world.objects.iter().find(|o| o.kind == ObjectKind::Hook) else {
        return true;
    };
    let tool = hook.tool_length.unwrap_or(0.0);
    for arm in &world.arms {
        let mut pulls = Vec::new();
        for o in world.objects.iter().filter(|o| o.is_block() && o.level == 1) {
            let d = distance(arm.base, o.pose.xy());
            if d <= arm.reach || d > arm.reach + tool {
                continue;
            }
            let Ok(goal) = pull_goal(world, arm.name.as_str(), o.name.as_str()) else {
                return false;
            };
            pulls.push((o.name.clone(), o.pose.xy(), goal.xy()));
        }
        for (name, from, to) in &pulls {
            let obstacles = world
                .objects
                .iter()
                .filter(|x| x.level == 1 && x.name != *name && x.kind != ObjectKind::Hook)
                .map(|x| x.pose.xy())
                .chain(pulls.iter().filter(|(n, _, _)| n != name).map(|(_, _, g)| *g));
            let blocked = obstacles.into_iter().any(|x| {
                distance_to_segment(x, *from, *to) < CORRIDOR_CLEARANCE
                    || distance_to_segment(x, hook.pose.xy(), *from) < CORRIDOR_CLEARANCE
            });
            if blocked {
                return false;
            }
        }
    }
    true
}

fn solvable(ctx: &TaskContext, world: &WorldState) -> bool {
    let feasibility = WorldFeasibility::new(world);
    logic_dmp_plan(&ctx.scene(world), &ctx.demo, &ctx.spec, &ctx.domain, &feasibility, ctx.limits).is_ok()
}

/// True if the demonstration actions from `from` no longer take `world` to
/// the goal.
fn breaks_demo(ctx: &TaskContext, world: &WorldState, from: usize) -> bool {
    let feasibility = WorldFeasibility::new(world);
    !suffix_replays(&ctx.scene(world), &ctx.demo, from, &ctx.goal, &feasibility)
}

/// `count` random starts: the template's objects re-sampled on the 0.01 m
/// grid, then up to three random logical changes.
pub fn random_starts(scenario: &Scenario, count: usize, seed: u64) -> Result<Vec<SuiteCase>, ScenarioError> {
    let benchmark = benchmark_of(scenario)?;
    (0..count)
        .map(|index| {
            let mut rng = suite_rng(seed, benchmark, SuiteKind::RandomStart, index);
            let k = rng.random_range(0..=3usize);
            for _ in 0..MAX_ATTEMPTS {
                let sampled = match benchmark {
                    Benchmark::B1 => random_b1(&mut rng, &scenario.world, k),
                    Benchmark::B2 => random_b2(&mut rng, &scenario.world, k),
                    Benchmark::B3 => random_b3(&mut rng, &scenario.world, k),
                };
                if let Some((world, perturbations)) = sampled {
                    if pull_corridor_clear(&world) {
                        return Ok(SuiteCase {
                            benchmark,
                            kind: SuiteKind::RandomStart,
                            index,
                            perturbations,
                            world,
                            script: Vec::new(),
                        });
                    }
                }
            }
            Err(ScenarioError::Generation(format!("no random start found for {benchmark} case {index}")))
        })
        .collect()
}

fn anywhere(_: [f64; 2]) -> bool {
    true
}

fn random_b1(rng: &mut ChaCha8Rng, template: &WorldState, k: usize) -> Option<(WorldState, usize)> {
    let names: Vec<Placement<'_>> =
        template.objects.iter().map(|o| (o.name.as_str(), &anywhere as &dyn Fn([f64; 2]) -> bool)).collect();
    let mut w = scatter(rng, template, "table", &names)?;
    for _ in 0..k {
        let clear = clear_blocks(&w);
        let x = clear.choose(rng)?.clone();
        let targets: Vec<&Symbol> = clear.iter().filter(|y| **y != x).collect();
        let y = (*targets.choose(rng)?).clone();
        let pose = w.object(y.as_str())?.pose;
        w = move_object(&w, x.as_str(), Pose::new(pose.x, pose.y), y.as_str())?;
    }
    Some((w, k))
}

fn random_b2(rng: &mut ChaCha8Rng, template: &WorldState, k: usize) -> Option<(WorldState, usize)> {
    let arm = template.arms.first()?.clone();
    let tool = template.objects.iter().filter_map(|o| o.tool_length).fold(0.0, f64::max);
    let near = move |p: [f64; 2]| distance(arm.base, p) <= arm.reach - 0.03;
    let far = move |p: [f64; 2]| {
        let d = distance(arm.base, p);
        d >= arm.reach + 0.03 && d <= arm.reach + tool - 0.05
    };
    let mut w = scatter(rng, template, "table", &[("hook", &near), ("B", &near), ("A", &far)])?;
    let table = w.region("table")?.clone();
    let shelf = w.region("shelf")?.clone();
    #[derive(Clone, Copy)]
    enum Op {
        AReach,
        AShelf,
        BShelf,
        BFar,
    }
    let mut ops = [Op::AReach, Op::AShelf, Op::BShelf, Op::BFar];
    ops.shuffle(rng);
    let mut touched: Vec<&str> = Vec::new();
    let mut applied = 0;
    for op in ops {
        if applied == k {
            break;
        }
        let object = match op {
            Op::AReach | Op::AShelf => "A",
            Op::BShelf | Op::BFar => "B",
        };
        if touched.contains(&object) {
            continue;
        }
        let half = w.object(object)?.half_extents;
        let others = occupied(&w, &[object]);
        let (pose, support) = match op {
            Op::AReach => (sample_pose(rng, &table, half, &others, &near)?, "table"),
            Op::BFar => (sample_pose(rng, &table, half, &others, &far)?, "table"),
            Op::AShelf | Op::BShelf => (*free_cells(&w, &shelf, half).choose(rng)?, "shelf"),
        };
        w = move_object(&w, object, pose, support)?;
        touched.push(object);
        applied += 1;
    }
    Some((w, applied))
}

fn random_b3(rng: &mut ChaCha8Rng, template: &WorldState, k: usize) -> Option<(WorldState, usize)> {
    let mut w = scatter(rng, template, "left", &[("A", &anywhere), ("B", &anywhere)])?;
    #[derive(Clone, Copy)]
    enum Op {
        To(&'static str, &'static str),
        On(&'static str, &'static str),
    }
    let mut ops = [Op::To("B", "middle"), Op::To("A", "middle"), Op::To("B", "right"), Op::On("A", "B"), Op::On("B", "A")];
    ops.shuffle(rng);
    let mut touched: Vec<&str> = Vec::new();
    let mut applied = 0;
    for op in ops {
        if applied == k {
            break;
        }
        let next = match op {
            Op::To(object, region) => {
                if touched.contains(&object) {
                    continue;
                }
                let r = w.region(region)?.clone();
                let half = w.object(object)?.half_extents;
                let pose = sample_pose(rng, &r, half, &occupied(&w, &[object]), &anywhere)?;
                touched.push(object);
                move_object(&w, object, pose, region)
            }
            Op::On(object, base) => {
                if touched.contains(&object) || touched.contains(&base) {
                    continue;
                }
                let p = w.object(base)?.pose;
                touched.push(object);
                touched.push(base);
                move_object(&w, object, Pose::new(p.x, p.y), base)
            }
        };
        if let Some(n) = next {
            w = n;
            applied += 1;
        }
    }
    Some((w, applied))
}

/// `count` scripted disturbance cases on the template world, each hitting
/// the nominal demonstration with one disturbance of `level`.
pub fn disturbance_suite(
    scenario: &Scenario,
    ctx: &TaskContext,
    recorded: &RecordedDemo,
    level: Level,
    count: usize,
    seed: u64,
) -> Result<Vec<SuiteCase>, ScenarioError> {
    let benchmark = benchmark_of(scenario)?;
    let kind = SuiteKind::from_level(level);
    (0..count)
        .map(|index| {
            let mut rng = suite_rng(seed, benchmark, kind, index);
            for _ in 0..MAX_ATTEMPTS {
                let script = match level {
                    Level::L1 => l1_events(&mut rng, ctx, recorded, index),
                    Level::L2 => l2_events(&mut rng, ctx, recorded),
                    Level::L3 => l3_events(&mut rng, ctx, recorded),
                    Level::L4 => l4_events(&mut rng, ctx, recorded),
                };
                if let Some(script) = script {
                    return Ok(SuiteCase {
                        benchmark,
                        kind,
                        index,
                        perturbations: 0,
                        world: scenario.world.clone(),
                        script,
                    });
                }
            }
            Err(ScenarioError::Generation(format!("no {level} disturbance found for {benchmark} case {index}")))
        })
        .collect()
}

fn event(trigger: Trigger, kind: EventKind, level: Level) -> DisturbanceEvent {
    DisturbanceEvent { trigger, kind, level: Some(level) }
}

/// Boundaries between demo actions at which no arm holds anything.
fn hand_empty_boundaries(recorded: &RecordedDemo) -> Vec<usize> {
    let n = recorded.demonstration.len();
    (0..n).filter(|&k| recorded.worlds[k].arms.iter().all(|a| a.holding.is_none())).collect()
}

fn l1_events(rng: &mut ChaCha8Rng, ctx: &TaskContext, recorded: &RecordedDemo, index: usize) -> Option<Vec<DisturbanceEvent>> {
    let n = recorded.demonstration.len();
    let k = rng.random_range(0..n);
    let before = &recorded.worlds[k];
    let candidates: Vec<&WorldObject> = before
        .objects
        .iter()
        .filter(|o| o.level == 1 && before.region(o.support.as_str()).is_some() && before.above(o.name.as_str()).is_none())
        .collect();
    let o = *candidates.choose(rng)?;
    let dx = rng.random_range(-3..=3i32);
    let dy = rng.random_range(-3..=3i32);
    if (dx == 0 && dy == 0) || (dx * dx + dy * dy) as f64 * 1e-4 > L1_MAX_OFFSET * L1_MAX_OFFSET + 1e-12 {
        return None;
    }
    let pose = Pose::new(o.pose.x + f64::from(dx) * 0.01, o.pose.y + f64::from(dy) * 0.01);
    let others: Vec<[f64; 2]> = occupied(before, &[o.name.as_str()]);
    if !others.iter().all(|q| (pose.x - q[0]).abs().max((pose.y - q[1]).abs()) >= 0.05 - 1e-9) {
        return None;
    }
    let kind = move_event(o.name.as_str(), pose, o.support.as_str());
    let after = apply_disturbance(before, &kind).ok()?;
    if classify_level(before, &after, &ctx.demo, &ctx.domain) != Level::L1 || !pull_corridor_clear(&after) {
        return None;
    }
    // Odd cases strike in the middle of action k instead of before it.
    let trigger = if index.is_multiple_of(2) {
        Trigger::AfterAction { index: k }
    } else {
        Trigger::AtTime { time: (k as f64 + 0.5) * HORIZON as f64 * STEP_DT }
    };
    Some(vec![event(trigger, kind, Level::L1)])
}

fn l2_events(rng: &mut ChaCha8Rng, ctx: &TaskContext, recorded: &RecordedDemo) -> Option<Vec<DisturbanceEvent>> {
    let boundaries = hand_empty_boundaries(recorded);
    let pairs: Vec<(usize, usize)> = boundaries
        .iter()
        .flat_map(|&k| boundaries.iter().filter(move |&&j| j < k).map(move |&j| (k, j)))
        .filter(|&(k, j)| ctx.spec.goals[k] != ctx.spec.goals[j])
        .collect();
    let &(k, j) = pairs.choose(rng)?;
    let (current, target) = (&recorded.worlds[k], &recorded.worlds[j]);
    // Undo the objects in reverse order of their last move so that every
    // intermediate world is valid.
    let last_moved = |name: &Symbol| {
        (0..k).rev().find(|&i| recorded.worlds[i].object(name.as_str()) != recorded.worlds[i + 1].object(name.as_str()))
    };
    let mut changed: Vec<(usize, &WorldObject)> = target
        .objects
        .iter()
        .filter(|o| current.object(o.name.as_str()).is_some_and(|c| c.pose != o.pose || c.support != o.support))
        .filter_map(|o| last_moved(&o.name).map(|i| (i, o)))
        .collect();
    changed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.name.cmp(&b.1.name)));
    let mut world = current.clone();
    let mut events = Vec::new();
    for (_, o) in changed {
        let kind = move_event(o.name.as_str(), o.pose, o.support.as_str());
        world = apply_disturbance(&world, &kind).ok()?;
        events.push(event(Trigger::AfterAction { index: k }, kind, Level::L2));
    }
    if ctx.scene(&world).fluents(&ctx.domain) != ctx.spec.goals[j] || !breaks_demo(ctx, &world, k) || !solvable(ctx, &world) {
        return None;
    }
    Some(events)
}

/// A move of a clear block to a free cell of some region or onto another
/// clear block, if the domain knows stacking.
fn random_relocation(rng: &mut ChaCha8Rng, ctx: &TaskContext, world: &WorldState) -> Option<EventKind> {
    let clear = clear_blocks(world);
    let x = clear.choose(rng)?.clone();
    let stacking = ctx.domain.predicate("on").is_some();
    if stacking && rng.random_bool(0.5) {
        let targets: Vec<&Symbol> = clear.iter().filter(|y| **y != x).collect();
        let y = *targets.choose(rng)?;
        let p = world.object(y.as_str())?.pose;
        return Some(move_event(x.as_str(), Pose::new(p.x, p.y), y.as_str()));
    }
    let region = world.regions.choose(rng)?;
    let half = world.object(x.as_str())?.half_extents;
    let cell = *free_cells(world, region, half).choose(rng)?;
    Some(move_event(x.as_str(), cell, region.name.as_str()))
}

fn l3_events(rng: &mut ChaCha8Rng, ctx: &TaskContext, recorded: &RecordedDemo) -> Option<Vec<DisturbanceEvent>> {
    let k = *hand_empty_boundaries(recorded).choose(rng)?;
    let before = &recorded.worlds[k];
    let kind = random_relocation(rng, ctx, before)?;
    let after = apply_disturbance(before, &kind).ok()?;
    let accepted = classify_level(before, &after, &ctx.demo, &ctx.domain) == Level::L3
        && pull_corridor_clear(&after)
        && breaks_demo(ctx, &after, k)
        && solvable(ctx, &after);
    accepted.then(|| vec![event(Trigger::AfterAction { index: k }, kind, Level::L3)])
}

fn l4_events(rng: &mut ChaCha8Rng, ctx: &TaskContext, recorded: &RecordedDemo) -> Option<Vec<DisturbanceEvent>> {
    let k = *hand_empty_boundaries(recorded).choose(rng)?;
    let before = &recorded.worlds[k];
    let (name, color) = INTRUDER;
    let mut block = WorldObject::block(name, 0.0, 0.0, "");
    block.color = Some(color.to_string());
    let stacking = ctx.domain.predicate("on").is_some();
    if stacking && rng.random_bool(0.5) {
        let y = clear_blocks(before).choose(rng)?.clone();
        let base = before.object(y.as_str())?;
        block.pose = Pose::new(base.pose.x, base.pose.y);
        block.level = base.level + 1;
        block.support = y;
    } else {
        let region = before.regions.choose(rng)?;
        block.pose = *free_cells(before, region, block.half_extents).choose(rng)?;
        block.support = region.name.clone();
    }
    let kind = EventKind::AddObject { object: block };
    let after = apply_disturbance(before, &kind).ok()?;
    let accepted = pull_corridor_clear(&after) && breaks_demo(ctx, &after, k) && solvable(ctx, &after);
    accepted.then(|| vec![event(Trigger::AfterAction { index: k }, kind, Level::L4)])
}
