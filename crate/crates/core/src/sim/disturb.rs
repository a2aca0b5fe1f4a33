use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pddl::{Domain, Symbol};
use crate::planner::Demonstration;

use super::geometry::Pose;
use super::scene::scene_graph_for;
use super::world::{WorldObject, WorldState};
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Level {
    L1,
    L2,
    L3,
    L4,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::L4];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Some(Level::L1),
            "l2" => Some(Level::L2),
            "l3" => Some(Level::L3),
            "l4" => Some(Level::L4),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Trigger {
    /// Between actions, once `index` actions have been executed.
    AfterAction { index: usize },
    /// At the first trajectory step at or after this sim time.
    AtTime { time: f64 },
    Manual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    MoveObject { object: Symbol, pose: Pose, support: Symbol },
    AddObject { object: WorldObject },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub trigger: Trigger,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
}

/// Applies one event. The world is only changed if the result is valid.
/// Moving an object requires nothing to rest on it; a held object is
/// released from its arm.
pub fn apply_disturbance(world: &WorldState, event: &EventKind) -> Result<WorldState, SimError> {
    let mut next = world.clone();
    match event {
        EventKind::MoveObject { object, pose, support } => {
            next.require_object(object.as_str())?;
            if next.above(object.as_str()).is_some() {
                return Err(SimError::Invalid(format!("{object} carries another object")));
            }
            if support == object {
                return Err(SimError::Invalid(format!("{object} cannot rest on itself")));
            }
            let level = if next.region(support.as_str()).is_some() {
                1
            } else {
                let s = next.require_object(support.as_str())?;
                if s.level == 0 {
                    return Err(SimError::Invalid(format!("{support} is held")));
                }
                s.level + 1
            };
            if let Some(arm) = next.arms.iter_mut().find(|a| a.holding.as_ref() == Some(object)) {
                arm.holding = None;
                arm.grasped_from = None;
            }
            let o = next.object_mut(object.as_str()).expect("checked above");
            o.pose = *pose;
            o.support = support.clone();
            o.level = level;
        }
        EventKind::AddObject { object } => {
            if next.object(object.name.as_str()).is_some() {
                return Err(SimError::Invalid(format!("{} already exists", object.name)));
            }
            next.objects.push(object.clone());
            next.objects.sort_by(|a, b| a.name.cmp(&b.name));
        }
    }
    next.validate()?;
    Ok(next)
}

/// L4 if objects were added; otherwise L1 if the fluents are unchanged, L2
/// if they equal those of some demonstration state, L3 if not.
pub fn classify_level(before: &WorldState, after: &WorldState, demo: &Demonstration, domain: &Domain) -> Level {
    if after.objects.len() > before.objects.len() {
        return Level::L4;
    }
    let f_before = scene_graph_for(before, domain).fluents(domain);
    let f_after = scene_graph_for(after, domain).fluents(domain);
    if f_before == f_after {
        Level::L1
    } else if demo.states().iter().any(|s| s.fluents(domain) == f_after) {
        Level::L2
    } else {
        Level::L3
    }
}
