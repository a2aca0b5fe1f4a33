//! Reactive task and motion planning from a single demonstration.
//!
//! * [`lqt`]: optimal-control movement primitives with via-points
//! * [`dmp`]: classical dynamic movement primitive baseline
//! * [`pddl`]: PDDL-lite parsing, scene graphs and action semantics
//! * [`planner`]: multi-goal forward search over a demonstration
//! * [`sim`]: kinematic 2.5D block world
//! * [`executor`]: closed-loop execution and its baselines
//! * [`scenario`]: benchmark templates, suites and experiment matrices

// Parameter guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dmp;
pub mod executor;
pub mod lqt;
pub mod path;
pub mod pddl;
pub mod planner;
pub mod scenario;
pub mod sim;

pub use path::SampledPath;
pub use planner::{Demonstration, MultiGoalSpec, TaskPlan};
pub use sim::WorldState;
pub use pddl::{Fact, GroundedAction, SceneGraph, Symbol};
pub use lqt::{
    ControlPrimitiveController, MotionGenerator, ReferenceTrajectory, ViaPoint, WeightConfig, WeightSchedule,
};



