use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lqt::ReferenceTrajectory;
use crate::pddl::{ActionRef, Domain, FactSet, GroundedAction, SceneGraph, Symbol};

use super::PlannerError;

/// Logical states, the actions between them and one motion segment per
/// action schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    states: Vec<SceneGraph>,
    actions: Vec<GroundedAction>,
    segments: BTreeMap<Symbol, ReferenceTrajectory>,
}

impl Demonstration {
    /// Replays `actions` from `start` to produce the state chain.
    pub fn replay(
        domain: &Domain,
        start: SceneGraph,
        actions: &[ActionRef],
        segments: BTreeMap<Symbol, ReferenceTrajectory>,
    ) -> Result<Self, PlannerError> {
        let mut states = vec![start];
        let mut grounded = Vec::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            let g = domain.ground(a)?;
            let next = states[i].apply(&g).map_err(|_| PlannerError::NotReplayable { step: i, action: a.to_string() })?;
            states.push(next);
            grounded.push(g);
        }
        Self::new(states, grounded, segments)
    }

    pub fn new(
        states: Vec<SceneGraph>,
        actions: Vec<GroundedAction>,
        segments: BTreeMap<Symbol, ReferenceTrajectory>,
    ) -> Result<Self, PlannerError> {
        if states.len() != actions.len() + 1 {
            return Err(PlannerError::InconsistentDemo(format!(
                "{} states for {} actions",
                states.len(),
                actions.len()
            )));
        }
        for (i, a) in actions.iter().enumerate() {
            match states[i].apply(a) {
                Ok(next) if next.facts() == states[i + 1].facts() => {}
                _ => return Err(PlannerError::NotReplayable { step: i, action: a.to_string() }),
            }
            if !segments.is_empty() && !segments.contains_key(&a.name) {
                return Err(PlannerError::InconsistentDemo(format!("no motion segment for {}", a.name)));
            }
        }
        Ok(Self { states, actions, segments })
    }

    pub fn states(&self) -> &[SceneGraph] {
        &self.states
    }

    pub fn actions(&self) -> &[GroundedAction] {
        &self.actions
    }

    pub fn segments(&self) -> &BTreeMap<Symbol, ReferenceTrajectory> {
        &self.segments
    }

    pub fn segment(&self, schema: &str) -> Option<&ReferenceTrajectory> {
        self.segments.get(schema)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_state(&self) -> &SceneGraph {
        self.states.last().expect("at least one state")
    }
}

/// Fluent projection of every demonstration state, in order, plus the task
/// goal the last one entails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiGoalSpec {
    pub goals: Vec<FactSet>,
    pub task_goal: FactSet,
}

impl MultiGoalSpec {
    pub fn build(demo: &Demonstration, goal: &FactSet, domain: &Domain) -> Result<Self, PlannerError> {
        if !demo.final_state().entails(goal) {
            let missing: Vec<String> = goal.difference(demo.final_state().facts()).map(|f| f.to_string()).collect();
            return Err(PlannerError::InconsistentDemo(format!("final state lacks {}", missing.join(" "))));
        }
        let goals = demo.states().iter().map(|s| s.fluents(domain)).collect();
        Ok(Self { goals, task_goal: goal.clone() })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}
