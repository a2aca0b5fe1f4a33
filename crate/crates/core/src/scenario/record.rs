use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::executor::{min_jerk, HORIZON, STEP_DT};
use crate::lqt::{ReferenceTrajectory, ViaPoint, WeightConfig};
use crate::path::SampledPath;
use crate::pddl::{ActionRef, Domain, Symbol};
use crate::planner::Demonstration;
use crate::sim::{execute_motion, motion_task, scene_graph_for, MotionOutcome, MotionTask, WorldState};

use super::ScenarioError;

/// A demonstration executed in the simulator: the logical demonstration
/// with its motion segments, the world after every action and the stroke
/// used for every action.
#[derive(Clone, Debug)]
pub struct RecordedDemo {
    pub demonstration: Demonstration,
    pub worlds: Vec<WorldState>,
    pub strokes: Vec<SampledPath>,
}

/// Degree-7 polynomial from `start` to `end`, at rest at both ends, passing
/// through each `(fraction, point)` pair. Needs exactly two via-points.
pub fn via_polynomial(start: &[f64], end: &[f64], via: &[(f64, [f64; 2])], horizon: usize) -> Vec<Vec<f64>> {
    assert_eq!(via.len(), 2, "the stroke polynomial takes two via-points");
    let dim = start.len();
    let mut m = DMatrix::<f64>::zeros(8, 8);
    let row = |s: f64, derivative: usize| -> Vec<f64> {
        (0..8)
            .map(|k| match derivative {
                0 => s.powi(k),
                1 if k >= 1 => k as f64 * s.powi(k - 1),
                2 if k >= 2 => (k * (k - 1)) as f64 * s.powi(k - 2),
                _ => 0.0,
            })
            .collect()
    };
    let rows = [row(0.0, 0), row(0.0, 1), row(0.0, 2), row(via[0].0, 0), row(via[1].0, 0), row(1.0, 0), row(1.0, 1), row(1.0, 2)];
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let lu = m.lu();
    let coeffs: Vec<DVector<f64>> = (0..dim)
        .map(|d| {
            let b = DVector::from_vec(vec![start[d], 0.0, 0.0, via[0].1[d], via[1].1[d], end[d], 0.0, 0.0]);
            lu.solve(&b).expect("the interpolation matrix is regular")
        })
        .collect();
    (0..=horizon)
        .map(|t| {
            let s = t as f64 / horizon as f64;
            coeffs.iter().map(|c| (0..8).rev().fold(0.0, |acc, k| acc * s + c[k])).collect()
        })
        .collect()
}

/// The demonstrator's stroke for `task`: a minimum-jerk line, or for a pull
/// the polynomial through both via-points.
pub fn demo_stroke(task: &MotionTask) -> SampledPath {
    let positions = if task.via.is_empty() {
        min_jerk(&task.start, &task.goal, HORIZON)
    } else {
        via_polynomial(&task.start, &task.goal, &task.via, HORIZON)
    };
    SampledPath { dt: STEP_DT, positions }
}

/// Executes `actions` from `world` with demonstrator strokes, checking that
/// each one completes and that the simulated scene follows the domain's
/// effects. The first stroke of every schema becomes its motion segment.
pub fn record_demonstration(domain: &Domain, world: &WorldState, actions: &[ActionRef]) -> Result<RecordedDemo, ScenarioError> {
    let precision = WeightConfig::default().via_precision;
    let mut worlds = vec![world.clone()];
    let mut states = vec![scene_graph_for(world, domain)];
    let mut grounded = Vec::with_capacity(actions.len());
    let mut strokes = Vec::with_capacity(actions.len());
    let mut segments: BTreeMap<Symbol, ReferenceTrajectory> = BTreeMap::new();
    for (i, a) in actions.iter().enumerate() {
        let action = domain.ground(a)?;
        let current = worlds.last().expect("non-empty");
        let scene = states.last().expect("non-empty");
        let expected = scene
            .apply(&action)
            .map_err(|_| ScenarioError::Mismatch(format!("demo action {i} {action} is not applicable")))?;
        let task = motion_task(current, &action)?;
        let stroke = demo_stroke(&task);
        let (next, outcome) = execute_motion(current, &task, &stroke, None)?;
        if outcome != MotionOutcome::Completed {
            return Err(ScenarioError::Mismatch(format!("demo action {i} {action}: {outcome:?}")));
        }
        let observed = scene_graph_for(&next, domain);
        if observed.facts() != expected.facts() {
            let diff: Vec<String> = observed.facts().symmetric_difference(expected.facts()).map(|f| f.to_string()).collect();
            return Err(ScenarioError::Mismatch(format!("demo action {i} {action} disagrees with the domain on {}", diff.join(" "))));
        }
        if !segments.contains_key(&action.name) {
            let via = task
                .via
                .iter()
                .map(|(fraction, p)| ViaPoint {
                    step: (fraction * HORIZON as f64).round() as usize,
                    position: p.to_vec(),
                    precision,
                })
                .collect();
            let reference = ReferenceTrajectory::from_positions(&stroke.positions, STEP_DT, &task.goal)?.with_via(via);
            segments.insert(action.name.clone(), reference);
        }
        worlds.push(next);
        states.push(observed);
        grounded.push(action);
        strokes.push(stroke);
    }
    let demonstration = Demonstration::new(states, grounded, segments)?;
    Ok(RecordedDemo { demonstration, worlds, strokes })
}
