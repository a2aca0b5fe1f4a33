use serde::{Deserialize, Serialize};

use crate::path::SampledPath;
use crate::pddl::{GroundedAction, Symbol};

use super::geometry::{distance, Aabb, Pose};
use super::world::{ObjectKind, RegionKind, WorldState};
use super::SimError;

/// Distance within which a trajectory end counts as reaching its target.
pub const END_TOLERANCE: f64 = 1e-2;
/// Distance within which the hook tip must pass each pull via-point.
pub const VIA_TOLERANCE: f64 = 1e-2;
/// Collision margin added to every footprint.
pub const COLLISION_MARGIN: f64 = 0.005;
/// Fractions of the pull trajectory at which the two via-points sit.
pub const PULL_VIA_FRACTIONS: [f64; 2] = [0.4, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Pick,
    Place,
    Stack,
    Unstack,
    Pull,
}

impl Primitive {
    pub fn of(schema: &str) -> Option<Self> {
        match schema {
            "pick" => Some(Self::Pick),
            "place" => Some(Self::Place),
            "stack" => Some(Self::Stack),
            "unstack" => Some(Self::Unstack),
            "pull" => Some(Self::Pull),
            _ => None,
        }
    }
}

/// Continuous targets for one action in the current world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionTask {
    pub primitive: Primitive,
    pub arm: Symbol,
    pub object: Symbol,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    /// `(fraction of the horizon, position)`; only pulls have via-points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via: Vec<(f64, [f64; 2])>,
    /// Final pose of the manipulated object.
    pub object_pose: Pose,
    /// Region (place) or block (stack) the object ends up on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MotionOutcome {
    Completed,
    Failed { reason: String },
    Interrupted { step: usize },
}

impl MotionOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, MotionOutcome::Completed)
    }
}

/// Rotation of the pull frame: local −y points from the block to its goal.
fn pull_frame(block: [f64; 2], goal: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let d = [goal[0] - block[0], goal[1] - block[1]];
    let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let ey = if n < 1e-12 { [0.0, 1.0] } else { [-d[0] / n, -d[1] / n] };
    let ex = [ey[1], -ey[0]];
    (ex, ey)
}

fn local_to_world(c: [f64; 2], frame: ([f64; 2], [f64; 2]), l: [f64; 2]) -> [f64; 2] {
    let (ex, ey) = frame;
    [c[0] + l[0] * ex[0] + l[1] * ey[0], c[1] + l[0] * ex[1] + l[1] * ey[1]]
}

/// Hook-tip waypoints for pulling a block of half extent `half` from
/// `block` toward `goal`: the midpoint of its far ("top") edge and its
/// left-down corner, both in the pull frame.
pub fn pull_via_points(block: [f64; 2], half: f64, goal: [f64; 2]) -> Vec<(f64, [f64; 2])> {
    let frame = pull_frame(block, goal);
    vec![
        (PULL_VIA_FRACTIONS[0], local_to_world(block, frame, [0.0, half])),
        (PULL_VIA_FRACTIONS[1], local_to_world(block, frame, [-half, -half])),
    ]
}

/// Where the hook tip ends when the block has been dragged to `goal`.
pub fn pull_tip_goal(block: [f64; 2], half: f64, goal: [f64; 2]) -> [f64; 2] {
    let frame = pull_frame(block, goal);
    local_to_world(goal, frame, [-half, -half])
}

/// Via-points for pulling `block` to `goal` in `world`.
pub fn via_points_for_pull(world: &WorldState, block: &str, goal: Pose) -> Result<Vec<(f64, [f64; 2])>, SimError> {
    let b = world.require_object(block)?;
    if !world.objects.iter().any(|o| o.kind == ObjectKind::Hook) {
        return Err(SimError::Invalid("the world has no hook".into()));
    }
    Ok(pull_via_points(b.pose.xy(), b.half_extents[1], goal.xy()))
}

/// Nearest free table cell to `block` that `arm` reaches with some margin.
pub fn pull_goal(world: &WorldState, arm: &str, block: &str) -> Result<Pose, SimError> {
    let a = world.require_arm(arm)?;
    let b = world.require_object(block)?;
    let region = world
        .base_region(block)
        .ok_or_else(|| SimError::NotApplicable(format!("{block} is not on a region")))?;
    let mut best: Option<(f64, Pose)> = None;
    for c in region.cells() {
        let p = Pose::new(c[0], c[1]);
        if distance(a.base, c) > a.reach - 0.05 {
            continue;
        }
        let fp = Aabb::of(&p, b.half_extents);
        let blocked = world
            .objects
            .iter()
            .filter(|o| o.level == 1 && o.name != b.name)
            .any(|o| o.footprint().inflate(COLLISION_MARGIN).overlaps(&fp));
        if blocked {
            continue;
        }
        let d = b.pose.distance_to(c);
        if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
            best = Some((d, p));
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| SimError::NotApplicable(format!("no free pull target for {block}")))
}

fn region_arg(world: &WorldState, action: &GroundedAction) -> Result<Symbol, SimError> {
    if let Some(last) = action.args.last() {
        if world.region(last.as_str()).is_some() {
            return Ok(last.clone());
        }
    }
    world
        .regions
        .iter()
        .find(|r| r.kind == RegionKind::Table)
        .map(|r| r.name.clone())
        .ok_or_else(|| SimError::Invalid("no table region".into()))
}

fn arg(action: &GroundedAction, i: usize) -> Result<&Symbol, SimError> {
    action
        .args
        .get(i)
        .ok_or_else(|| SimError::NotApplicable(format!("{action} lacks argument {i}")))
}

/// Resolves the continuous targets of `action`. Fails if the world cannot
/// host it (nothing reachable, no free cell, wrong holding state).
pub fn motion_task(world: &WorldState, action: &GroundedAction) -> Result<MotionTask, SimError> {
    let primitive = Primitive::of(action.name.as_str())
        .ok_or_else(|| SimError::NotApplicable(format!("no motion primitive for {}", action.name)))?;
    let arm = world.require_arm(arg(action, 0)?.as_str())?;
    let object = arg(action, 1)?;
    let start = arm.effector;
    match primitive {
        Primitive::Pick | Primitive::Unstack => {
            let o = world.require_object(object.as_str())?;
            if arm.holding.is_some() {
                return Err(SimError::NotApplicable(format!("{} already holds something", arm.name)));
            }
            if world.holder(object.as_str()).is_some() || world.above(object.as_str()).is_some() {
                return Err(SimError::NotApplicable(format!("{object} cannot be grasped")));
            }
            if !arm.reaches(o.pose.xy()) {
                return Err(SimError::NotApplicable(format!("{object} is out of reach of {}", arm.name)));
            }
            Ok(MotionTask { primitive, arm: arm.name.clone(), object: object.clone(), start, goal: o.pose.xy(), via: Vec::new(), object_pose: Pose::new(o.pose.x, o.pose.y), support: None })
        }
        Primitive::Place => {
            let o = world.require_object(object.as_str())?;
            if arm.holding.as_ref() != Some(object) {
                return Err(SimError::NotApplicable(format!("{} does not hold {object}", arm.name)));
            }
            let region = world.require_region(region_arg(world, action)?.as_str())?;
            let pose = world
                .free_cell(region, arm, o.half_extents, object.as_str(), arm.grasped_from)
                .ok_or_else(|| SimError::NotApplicable(format!("no free reachable cell in {}", region.name)))?;
            Ok(MotionTask { primitive, arm: arm.name.clone(), object: object.clone(), start, goal: pose.xy(), via: Vec::new(), object_pose: pose, support: Some(region.name.clone()) })
        }
        Primitive::Stack => {
            let target = world.require_object(arg(action, 2)?.as_str())?;
            if arm.holding.as_ref() != Some(object) {
                return Err(SimError::NotApplicable(format!("{} does not hold {object}", arm.name)));
            }
            if !target.is_block() || target.level == 0 || world.above(target.name.as_str()).is_some() {
                return Err(SimError::NotApplicable(format!("cannot stack onto {}", target.name)));
            }
            if !arm.reaches(target.pose.xy()) {
                return Err(SimError::NotApplicable(format!("{} is out of reach of {}", target.name, arm.name)));
            }
            let pose = Pose::new(target.pose.x, target.pose.y);
            Ok(MotionTask { primitive, arm: arm.name.clone(), object: object.clone(), start, goal: pose.xy(), via: Vec::new(), object_pose: pose, support: Some(target.name.clone()) })
        }
        Primitive::Pull => {
            let hook = world.require_object(object.as_str())?;
            if arm.holding.as_ref() != Some(object) || hook.kind != ObjectKind::Hook {
                return Err(SimError::NotApplicable(format!("{} must hold hook {object}", arm.name)));
            }
            let target_name = arg(action, 2)?;
            let target = world.require_object(target_name.as_str())?;
            if world.above(target_name.as_str()).is_some() || target.level != 1 {
                return Err(SimError::NotApplicable(format!("{target_name} cannot be pulled")));
            }
            if distance(arm.base, target.pose.xy()) > world.tool_reach(arm) + 1e-9 {
                return Err(SimError::NotApplicable(format!("{target_name} is beyond the hook")));
            }
            let goal = pull_goal(world, arm.name.as_str(), target_name.as_str())?;
            let half = target.half_extents[1];
            Ok(MotionTask {
                primitive,
                arm: arm.name.clone(),
                object: target_name.clone(),
                start,
                goal: pull_tip_goal(target.pose.xy(), half, goal.xy()),
                via: pull_via_points(target.pose.xy(), half, goal.xy()),
                object_pose: goal,
                support: None,
            })
        }
    }
}

/// Moves the effector along `path` and applies the action's physical
/// effect. `interrupt` stops at that step without completing the action.
/// Invalid requests (wrong holding state, unknown objects) are errors; a
/// motion that misses its target, its via-points or collides is reported
/// as a failed outcome with the effector left at the end of the path.
pub fn execute_motion(
    world: &WorldState,
    task: &MotionTask,
    path: &SampledPath,
    interrupt: Option<usize>,
) -> Result<(WorldState, MotionOutcome), SimError> {
    if path.positions.is_empty() {
        return Err(SimError::Invalid("empty trajectory".into()));
    }
    if path.positions.iter().any(|p| p.len() != 2) {
        return Err(SimError::Invalid("trajectories must be planar".into()));
    }
    let mut next = world.clone();
    let arm_name = task.arm.clone();
    let last = path.positions.len() - 1;
    let stop = interrupt.map_or(last, |s| s.min(last));
    let end = [path.positions[stop][0], path.positions[stop][1]];
    next.time += stop as f64 * path.dt;
    move_effector(&mut next, arm_name.as_str(), end)?;
    if interrupt.is_some_and(|s| s < last) {
        return Ok((next, MotionOutcome::Interrupted { step: stop }));
    }
    if distance(end, task.goal) > END_TOLERANCE {
        return Ok((next, failed(format!("trajectory ends {:.4} m from its target", distance(end, task.goal)))));
    }
    let arm = next.require_arm(arm_name.as_str())?.clone();
    match task.primitive {
        Primitive::Pick | Primitive::Unstack => {
            let o = next.object_mut(task.object.as_str()).ok_or_else(|| SimError::UnknownObject(task.object.to_string()))?;
            let from = o.pose;
            o.support = arm_name.clone();
            o.level = 0;
            o.pose = Pose { x: end[0], y: end[1], yaw: from.yaw };
            let a = next.arm_mut(arm_name.as_str()).expect("arm exists");
            a.holding = Some(task.object.clone());
            a.grasped_from = Some(from);
        }
        Primitive::Place | Primitive::Stack => {
            let support = task.support.clone().ok_or_else(|| SimError::Invalid("place or stack without a support".into()))?;
            if task.primitive == Primitive::Stack && next.above(support.as_str()).is_some() {
                return Ok((next, failed(format!("{support} is no longer clear"))));
            }
            let level = next.object(support.as_str()).map_or(1, |s| s.level + 1);
            let o = next.object_mut(task.object.as_str()).ok_or_else(|| SimError::UnknownObject(task.object.to_string()))?;
            o.pose = task.object_pose;
            o.support = support;
            o.level = level;
            let a = next.arm_mut(arm_name.as_str()).expect("arm exists");
            a.holding = None;
            a.grasped_from = None;
        }
        Primitive::Pull => {
            for (k, (_, v)) in task.via.iter().enumerate() {
                let miss = path.closest_approach(v, 0, last);
                if miss > VIA_TOLERANCE {
                    return Ok((next, failed(format!("hook missed via-point {k} by {miss:.4} m"))));
                }
            }
            let hook = arm.holding.clone().unwrap_or_else(|| Symbol::new(""));
            let obstacles: Vec<Aabb> = world
                .objects
                .iter()
                .filter(|o| o.level >= 1 && o.name != task.object && o.name != hook)
                .map(|o| o.footprint().inflate(COLLISION_MARGIN))
                .collect();
            if let Some(p) = path.positions.iter().find(|p| obstacles.iter().any(|b| b.contains_point([p[0], p[1]]))) {
                return Ok((next, failed(format!("hook collides at ({:.3}, {:.3})", p[0], p[1]))));
            }
            let o = next.object_mut(task.object.as_str()).ok_or_else(|| SimError::UnknownObject(task.object.to_string()))?;
            let offset = [task.object_pose.x - task.goal[0], task.object_pose.y - task.goal[1]];
            o.pose = Pose { x: end[0] + offset[0], y: end[1] + offset[1], yaw: o.pose.yaw };
            if next.validate().is_err() {
                return Ok((world_after_failed_pull(world, path, stop, arm_name.as_str())?, failed("pulled block ends in an invalid pose".into())));
            }
        }
    }
    next.validate()?;
    Ok((next, MotionOutcome::Completed))
}

fn failed(reason: String) -> MotionOutcome {
    MotionOutcome::Failed { reason }
}

fn world_after_failed_pull(world: &WorldState, path: &SampledPath, stop: usize, arm: &str) -> Result<WorldState, SimError> {
    let mut w = world.clone();
    w.time += stop as f64 * path.dt;
    move_effector(&mut w, arm, [path.positions[stop][0], path.positions[stop][1]])?;
    Ok(w)
}

fn move_effector(world: &mut WorldState, arm: &str, p: [f64; 2]) -> Result<(), SimError> {
    let a = world.arm_mut(arm).ok_or_else(|| SimError::UnknownArm(arm.to_string()))?;
    a.effector = p;
    if let Some(h) = a.holding.clone() {
        if let Some(o) = world.object_mut(h.as_str()) {
            o.pose.x = p[0];
            o.pose.y = p[1];
        }
    }
    Ok(())
}
