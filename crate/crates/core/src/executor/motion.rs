use crate::lqt::{LqtError, MotionGenerator, ReferenceTrajectory, ViaPoint};
use crate::path::SampledPath;
use crate::planner::Demonstration;
use crate::sim::MotionTask;

/// Schemas whose demonstrated segment stands in for a schema that was never
/// demonstrated: grasping motions for grasping, releasing for releasing.
const SEGMENT_ALIASES: [(&str, &str); 4] = [("unstack", "pick"), ("pick", "unstack"), ("place", "stack"), ("stack", "place")];

/// Demonstrated segment for `schema`, falling back to its alias.
pub fn segment_for<'a>(demo: &'a Demonstration, schema: &str) -> Option<&'a ReferenceTrajectory> {
    demo.segment(schema).or_else(|| {
        SEGMENT_ALIASES
            .iter()
            .find(|(s, _)| *s == schema)
            .and_then(|(_, alias)| demo.segment(alias))
    })
}

/// Positions of a minimum-jerk straight line over `horizon` steps.
pub fn min_jerk(start: &[f64], goal: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    (0..=horizon)
        .map(|t| {
            let s = t as f64 / horizon as f64;
            let blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            start.iter().zip(goal).map(|(a, b)| a + (b - a) * blend).collect()
        })
        .collect()
}

/// Reference for `task`: the demonstrated segment re-anchored to the task's
/// start and goal, with the task's via-points written in. Without a
/// demonstrated segment a minimum-jerk line is used.
pub fn task_reference(
    generator: &MotionGenerator,
    demo: &Demonstration,
    schema: &str,
    task: &MotionTask,
) -> Result<ReferenceTrajectory, LqtError> {
    let horizon = generator.basis().horizon();
    let dt = generator.model().dt();
    let via: Vec<ViaPoint> = task
        .via
        .iter()
        .map(|(fraction, p)| ViaPoint {
            step: ((fraction * horizon as f64).round() as usize).clamp(1, horizon - 1),
            position: p.to_vec(),
            precision: generator.config().via_precision,
        })
        .collect();
    match segment_for(demo, schema) {
        Some(segment) if segment.horizon() == horizon => segment.generalize(&task.start, &task.goal, Some(&via)),
        _ => Ok(ReferenceTrajectory::from_positions(&min_jerk(&task.start, &task.goal, horizon), dt, &task.goal)?.with_via(via)),
    }
}

/// LQT-CP rollout for `task`, started at rest at the effector.
pub fn plan_motion(
    generator: &MotionGenerator,
    demo: &Demonstration,
    schema: &str,
    task: &MotionTask,
) -> Result<SampledPath, LqtError> {
    let reference = task_reference(generator, demo, schema, task)?;
    let motion = generator.generate(&reference)?;
    Ok(SampledPath { dt: generator.model().dt(), positions: motion.positions() })
}
