//! Forward state-space search over grounded actions: a single-goal
//! baseline, and a multi-goal variant that connects an arbitrary start to
//! the closest state of a demonstration and reuses the remaining demo suffix.

mod demo;
mod search;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ActionRef, FactSet, GroundedAction, PddlError, SceneGraph};

pub use demo::{Demonstration, MultiGoalSpec};
pub(crate) use search::{demo_match, suffix_replays};
pub use search::{logic_dmp_plan, plan_full, plan_to_any, PrefixPlan, SearchLimits};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no plan found after {expanded} expansions")]
    Unsolvable { expanded: usize },
    #[error("demonstration is inconsistent: {0}")]
    InconsistentDemo(String),
    #[error("demonstration action {step} {action} cannot be replayed")]
    NotReplayable { step: usize, action: String },
    #[error(transparent)]
    Pddl(#[from] PddlError),
}

/// Geometric check consulted for every action the search expands. Must be a
/// pure function of its arguments.
pub trait Feasibility {
    fn feasible(&self, state: &SceneGraph, action: &GroundedAction) -> bool;
}

/// Accepts every symbolically applicable action.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysFeasible;

impl Feasibility for AlwaysFeasible {
    fn feasible(&self, _: &SceneGraph, _: &GroundedAction) -> bool {
        true
    }
}

impl<F: Fn(&SceneGraph, &GroundedAction) -> bool> Feasibility for F {
    fn feasible(&self, state: &SceneGraph, action: &GroundedAction) -> bool {
        self(state, action)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    NewPrefix,
    DemoSuffix,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::NewPrefix => "new-prefix",
            Provenance::DemoSuffix => "demo-suffix",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub expanded: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskPlan {
    pub actions: Vec<GroundedAction>,
    pub provenance: Vec<Provenance>,
    /// `states[k]` precedes `actions[k]`; one more state than actions.
    pub states: Vec<SceneGraph>,
    pub stats: PlanStats,
}

impl TaskPlan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_state(&self) -> &SceneGraph {
        self.states.last().expect("plans hold their start state")
    }

    pub fn to_record(&self) -> PlanRecord {
        PlanRecord {
            actions: self
                .actions
                .iter()
                .zip(&self.provenance)
                .map(|(a, p)| PlannedAction { name: a.name.to_string(), args: a.args.iter().map(|s| s.to_string()).collect(), provenance: *p })
                .collect(),
            stats: self.stats,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub name: String,
    pub args: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub actions: Vec<PlannedAction>,
    pub stats: PlanStats,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("step {step}: {action} is not applicable")]
    NotApplicable { step: usize, action: String },
    #[error("step {step}: {action} fails the feasibility check")]
    Infeasible { step: usize, action: String },
    #[error("final state misses {missing:?}")]
    GoalNotReached { missing: Vec<String> },
}

/// Replays `actions` from `start` using only set semantics and checks that
/// the result entails `goal`.
pub fn validate_plan(
    start: &SceneGraph,
    actions: &[GroundedAction],
    goal: &FactSet,
    feasibility: Option<&dyn Feasibility>,
) -> Result<SceneGraph, ValidationError> {
    let mut state = start.clone();
    for (step, a) in actions.iter().enumerate() {
        if let Some(f) = feasibility {
            if !f.feasible(&state, a) {
                return Err(ValidationError::Infeasible { step, action: a.to_string() });
            }
        }
        state = state.apply(a).map_err(|_| ValidationError::NotApplicable { step, action: a.to_string() })?;
    }
    if !state.entails(goal) {
        return Err(ValidationError::GoalNotReached {
            missing: goal.difference(state.facts()).map(|f| f.to_string()).collect(),
        });
    }
    Ok(state)
}

pub fn action_refs(actions: &[GroundedAction]) -> Vec<ActionRef> {
    actions.iter().map(|a| a.reference()).collect()
}

#[cfg(test)]
mod tests;
