//! Deterministic 2.5D kinematic block world: planar poses with discrete
//! stack levels, circular-reach arms, placement regions and a hook tool.

mod disturb;
mod feasibility;
mod geometry;
mod motion;
mod scene;
mod world;

use thiserror::Error;

pub use disturb::{apply_disturbance, classify_level, DisturbanceEvent, EventKind, Level, Trigger};
pub use feasibility::WorldFeasibility;
pub use geometry::{distance, Aabb, Pose};
pub use motion::{
    execute_motion, motion_task, pull_goal, pull_tip_goal, pull_via_points, via_points_for_pull, MotionOutcome, MotionTask,
    Primitive, COLLISION_MARGIN, END_TOLERANCE, PULL_VIA_FRACTIONS, VIA_TOLERANCE,
};
pub use scene::{scene_graph, scene_graph_for, type_of};
pub use world::{Arm, ObjectKind, Region, RegionKind, WorldObject, WorldState, CELL_PITCH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("unknown arm {0}")]
    UnknownArm(String),
    #[error("unknown region {0}")]
    UnknownRegion(String),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("action cannot be executed: {0}")]
    NotApplicable(String),
}

#[cfg(test)]
mod tests;
