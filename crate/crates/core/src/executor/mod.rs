//! Closed-loop execution: the Logic-DMP loop (reuse the demonstration
//! whenever the scene contains one of its states, plan otherwise) and the
//! Linear, RLDS-lite and open-loop full-plan baselines.

mod motion;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lqt::{LqtError, MotionGenerator, WeightConfig};
use crate::path::SampledPath;
use crate::pddl::{Domain, FactSet, GroundedAction, SceneGraph, Symbol};
use crate::planner::{
    logic_dmp_plan, plan_full, Demonstration, Feasibility, MultiGoalSpec, PlannerError, Provenance, SearchLimits,
};
use crate::sim::{
    apply_disturbance, classify_level, execute_motion, motion_task, scene_graph_for, EventKind, Level, MotionOutcome,
    MotionTask, SimError, Trigger, WorldFeasibility, WorldState,
};

pub use motion::{min_jerk, plan_motion, segment_for, task_reference};

/// Steps per motion segment.
pub const HORIZON: usize = 100;
/// Seconds per trajectory step.
pub const STEP_DT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Lqt(#[from] LqtError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything a run needs besides the world: domain, demonstration, goal,
/// motion generator and search limits. Shared read-only between runs.
#[derive(Clone, Debug)]
pub struct TaskContext {
    pub domain: Domain,
    pub demo: Demonstration,
    pub spec: MultiGoalSpec,
    pub goal: FactSet,
    pub generator: MotionGenerator,
    pub limits: SearchLimits,
}

impl TaskContext {
    pub fn new(domain: Domain, demo: Demonstration, goal: FactSet) -> Result<Self, ExecutorError> {
        let spec = MultiGoalSpec::build(&demo, &goal, &domain)?;
        let generator = MotionGenerator::new(2, STEP_DT, HORIZON, WeightConfig::default())?;
        Ok(Self { domain, demo, spec, goal, generator, limits: SearchLimits::default() })
    }

    pub fn scene(&self, world: &WorldState) -> SceneGraph {
        scene_graph_for(world, &self.domain)
    }
}

/// Largest `id` whose demonstration state is contained in the scene's
/// fluents.
pub fn logic_in(scene: &SceneGraph, spec: &MultiGoalSpec, domain: &Domain) -> Option<usize> {
    let fluents = scene.fluents(domain);
    (0..spec.goals.len()).rev().find(|&i| spec.goals[i].is_subset(&fluents))
}

/// [`logic_in`] restricted to ids whose demonstration suffix still replays
/// to the goal under the current geometry. A scene that contains a demo
/// state but cannot continue the demo (a region filled by an intruder, say)
/// is handed to the planner instead.
pub fn logic_in_replayable(scene: &SceneGraph, ctx: &TaskContext, feasibility: &dyn Feasibility) -> Option<usize> {
    crate::planner::demo_match(scene, &ctx.demo, &ctx.spec, &ctx.domain, feasibility)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LogicDmp,
    Linear,
    RldsLite,
    FullPlan,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LogicDmp, Method::Linear, Method::RldsLite, Method::FullPlan];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::LogicDmp => "logic-dmp",
            Method::Linear => "linear",
            Method::RldsLite => "rlds-lite",
            Method::FullPlan => "full-plan",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    /// Maximum number of motions started before the run counts as failed.
    pub budget: usize,
    /// Record wall-clock planner time. Off by default so reports are
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { budget: 40, timing: false }
    }
}

/// Why an action was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSource {
    /// The scene contained a demonstration state; its next action was reused.
    Demo,
    /// First action of a fresh plan.
    Planner,
    /// Next action of a fixed plan.
    Plan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAction {
    pub name: Symbol,
    pub args: Vec<Symbol>,
    pub source: ActionSource,
    pub start_time: f64,
    pub end_time: f64,
    pub outcome: MotionOutcome,
}

impl ExecutedAction {
    pub fn label(&self) -> String {
        let mut s = self.name.to_string();
        for a in &self.args {
            s.push(' ');
            s.push_str(a.as_str());
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventSource {
    Script,
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedEvent {
    pub time: f64,
    /// Number of actions completed when the event hit.
    pub after_actions: usize,
    pub level: Level,
    pub source: EventSource,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub actions: Vec<ExecutedAction>,
    pub replans: usize,
    pub logic_in_hits: usize,
    pub sim_seconds: f64,
    pub planner_seconds: f64,
    pub planner_expansions: usize,
    pub events: Vec<AppliedEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_events: Vec<String>,
    pub trace: Vec<SceneGraph>,
}

impl RunReport {
    fn new(method: Method) -> Self {
        Self {
            method,
            success: false,
            failure: None,
            actions: Vec::new(),
            replans: 0,
            logic_in_hits: 0,
            sim_seconds: 0.0,
            planner_seconds: 0.0,
            planner_expansions: 0,
            events: Vec::new(),
            rejected_events: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Actions whose motion completed, in execution order.
    pub fn completed_actions(&self) -> impl Iterator<Item = &ExecutedAction> {
        self.actions.iter().filter(|a| a.outcome.is_completed())
    }
}

/// One entry of the plan currently being followed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: Symbol,
    pub args: Vec<Symbol>,
    pub provenance: Provenance,
}

impl PlanEntry {
    fn of(action: &GroundedAction, provenance: Provenance) -> Self {
        Self { name: action.name.clone(), args: action.args.clone(), provenance }
    }
}

/// A motion about to be executed: the action, its continuous targets and
/// the trajectory generated for it.
#[derive(Clone, Debug)]
pub struct ActiveMotion {
    pub action: GroundedAction,
    pub source: ActionSource,
    pub task: MotionTask,
    pub path: SampledPath,
    pub start_time: f64,
}

impl ActiveMotion {
    pub fn steps(&self) -> usize {
        self.path.positions.len().saturating_sub(1)
    }
}

/// A scripted event together with whether it has fired.
#[derive(Clone, Debug)]
struct Pending {
    trigger: Trigger,
    kind: EventKind,
    fired: bool,
}

/// Executor state, advanced one motion at a time. Batch runs drive it with
/// [`Session::run`]; the live server interleaves motions with commands.
#[derive(Clone, Debug)]
pub struct Session {
    ctx: Arc<TaskContext>,
    method: Method,
    config: RunConfig,
    world: WorldState,
    script: Vec<Pending>,
    fixed_plan: Vec<GroundedAction>,
    plan: Vec<PlanEntry>,
    cursor: usize,
    completed: usize,
    started: usize,
    finished: bool,
    report: RunReport,
}

impl Session {
    pub fn new(
        ctx: Arc<TaskContext>,
        method: Method,
        world: WorldState,
        script: Vec<crate::sim::DisturbanceEvent>,
        config: RunConfig,
    ) -> Self {
        let script = script.into_iter().map(|e| Pending { trigger: e.trigger, kind: e.kind, fired: false }).collect();
        let mut session = Self {
            ctx,
            method,
            config,
            world,
            script,
            fixed_plan: Vec::new(),
            plan: Vec::new(),
            cursor: 0,
            completed: 0,
            started: 0,
            finished: false,
            report: RunReport::new(method),
        };
        session.initial_plan();
        session
    }

    fn initial_plan(&mut self) {
        let ctx = Arc::clone(&self.ctx);
        let scene = ctx.scene(&self.world);
        match self.method {
            Method::Linear | Method::RldsLite => {
                self.fixed_plan = ctx.demo.actions().to_vec();
                self.plan = self.fixed_plan.iter().map(|a| PlanEntry::of(a, Provenance::DemoSuffix)).collect();
            }
            Method::LogicDmp => {
                let feasibility = WorldFeasibility::new(&self.world);
                if let Ok(p) = logic_dmp_plan(&scene, &ctx.demo, &ctx.spec, &ctx.domain, &feasibility, ctx.limits) {
                    self.plan = p.actions.iter().zip(&p.provenance).map(|(a, &pr)| PlanEntry::of(a, pr)).collect();
                }
            }
            Method::FullPlan => {
                let feasibility = WorldFeasibility::new(&self.world);
                let clock = Instant::now();
                match plan_full(&scene, &ctx.goal, &ctx.domain, &feasibility, ctx.limits) {
                    Ok(p) => {
                        self.record_planning(p.stats.expanded, clock);
                        self.fixed_plan = p.actions.clone();
                        self.plan = p.actions.iter().map(|a| PlanEntry::of(a, Provenance::NewPrefix)).collect();
                    }
                    Err(e) => {
                        self.record_planning(planner_expansions(&e), clock);
                        self.fail(format!("planner: {e}"));
                    }
                }
            }
        }
    }

    pub fn context(&self) -> &TaskContext {
        &self.ctx
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Plan currently being followed and the index of the next action.
    pub fn plan(&self) -> (&[PlanEntry], usize) {
        (&self.plan, self.cursor)
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn into_report(self) -> RunReport {
        self.report
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn last_event(&self) -> Option<&AppliedEvent> {
        self.report.events.last()
    }

    fn fail(&mut self, reason: String) {
        self.finished = true;
        self.report.success = false;
        self.report.failure = Some(reason);
        self.report.sim_seconds = self.world.time;
    }

    fn succeed(&mut self) {
        self.finished = true;
        self.report.success = true;
        self.report.sim_seconds = self.world.time;
    }

    fn record_planning(&mut self, expanded: usize, clock: Instant) {
        self.report.planner_expansions += expanded;
        if self.config.timing {
            self.report.planner_seconds += clock.elapsed().as_secs_f64();
        }
    }

    /// Applies a disturbance now. Invalid events leave the world unchanged
    /// and are listed in the report.
    pub fn inject(&mut self, kind: EventKind, source: EventSource) -> Result<Level, SimError> {
        match apply_disturbance(&self.world, &kind) {
            Ok(next) => {
                let level = classify_level(&self.world, &next, &self.ctx.demo, &self.ctx.domain);
                self.world = next;
                self.report.events.push(AppliedEvent {
                    time: self.world.time,
                    after_actions: self.completed,
                    level,
                    source,
                    kind,
                });
                Ok(level)
            }
            Err(e) => {
                self.report.rejected_events.push(e.to_string());
                Err(e)
            }
        }
    }

    fn fire_due_events(&mut self) {
        for i in 0..self.script.len() {
            let due = !self.script[i].fired
                && match self.script[i].trigger {
                    Trigger::AfterAction { index } => self.completed >= index,
                    Trigger::AtTime { time } => time <= self.world.time + 1e-9,
                    Trigger::Manual => false,
                };
            if due {
                self.script[i].fired = true;
                let kind = self.script[i].kind.clone();
                let _ = self.inject(kind, EventSource::Script);
            }
        }
    }

    /// First unfired timed event falling inside the motion, as a step index
    /// and the script position.
    fn timed_interrupt(&self, motion: &ActiveMotion) -> Option<(usize, usize)> {
        let end = motion.start_time + motion.path.duration();
        self.script
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.fired)
            .filter_map(|(i, p)| match p.trigger {
                Trigger::AtTime { time } if time > motion.start_time + 1e-9 && time < end - 1e-9 => {
                    Some((((time - motion.start_time) / motion.path.dt - 1e-9).ceil() as usize, i))
                }
                _ => None,
            })
            .min()
    }

    /// Reads the scene, checks for termination and picks the next action
    /// with its trajectory. Returns `None` once the run is over.
    pub fn next_motion(&mut self) -> Option<ActiveMotion> {
        if self.finished {
            return None;
        }
        self.fire_due_events();
        let ctx = Arc::clone(&self.ctx);
        let scene = ctx.scene(&self.world);
        self.report.trace.push(scene.clone());
        if self.reached_goal(&scene) {
            self.succeed();
            return None;
        }
        if self.started >= self.config.budget {
            self.fail(format!("budget of {} motions exhausted", self.config.budget));
            return None;
        }
        let (action, source) = match self.choose_action(&scene) {
            Ok(choice) => choice,
            Err(reason) => {
                self.fail(reason);
                return None;
            }
        };
        if !scene.applicable(&action) {
            self.fail(format!("{action} is not applicable"));
            return None;
        }
        let task = match motion_task(&self.world, &action) {
            Ok(t) => t,
            Err(e) => {
                self.fail(format!("{action}: {e}"));
                return None;
            }
        };
        let path = match plan_motion(&ctx.generator, &ctx.demo, action.name.as_str(), &task) {
            Ok(p) => p,
            Err(e) => {
                self.fail(format!("{action}: motion generation failed: {e}"));
                return None;
            }
        };
        self.started += 1;
        Some(ActiveMotion { action, source, task, path, start_time: self.world.time })
    }

    /// Termination test. Logic-DMP stops as soon as the goal holds; the
    /// baselines only stop at the end of their fixed sequence.
    fn reached_goal(&self, scene: &SceneGraph) -> bool {
        let ctx = &self.ctx;
        match self.method {
            Method::LogicDmp => scene.entails(&ctx.goal),
            Method::Linear | Method::FullPlan => self.cursor >= self.fixed_plan.len() && scene.entails(&ctx.goal),
            Method::RldsLite => {
                let last = ctx.spec.goals.len() - 1;
                scene.entails(&ctx.goal) && ctx.spec.goals[last] == scene.fluents(&ctx.domain)
            }
        }
    }

    fn choose_action(&mut self, scene: &SceneGraph) -> Result<(GroundedAction, ActionSource), String> {
        let ctx = Arc::clone(&self.ctx);
        match self.method {
            Method::Linear | Method::FullPlan => match self.fixed_plan.get(self.cursor) {
                Some(a) => Ok((a.clone(), ActionSource::Plan)),
                None => Err("plan exhausted without reaching the goal".into()),
            },
            Method::RldsLite => {
                let fluents = scene.fluents(&ctx.domain);
                let j = (0..ctx.spec.goals.len())
                    .rev()
                    .find(|&j| ctx.spec.goals[j] == fluents)
                    .ok_or_else(|| "scene matches no expected state of the plan".to_string())?;
                self.cursor = j;
                self.fixed_plan
                    .get(j)
                    .map(|a| (a.clone(), ActionSource::Plan))
                    .ok_or_else(|| "plan exhausted without reaching the goal".into())
            }
            Method::LogicDmp => {
                let feasibility = WorldFeasibility::new(&self.world);
                if let Some(id) = logic_in_replayable(scene, &ctx, &feasibility) {
                    if id < ctx.demo.len() {
                        self.report.logic_in_hits += 1;
                        self.plan = ctx.demo.actions()[id..].iter().map(|a| PlanEntry::of(a, Provenance::DemoSuffix)).collect();
                        self.cursor = 0;
                        return Ok((ctx.demo.actions()[id].clone(), ActionSource::Demo));
                    }
                }
                self.report.replans += 1;
                let clock = Instant::now();
                match logic_dmp_plan(scene, &ctx.demo, &ctx.spec, &ctx.domain, &feasibility, ctx.limits) {
                    Ok(p) => {
                        self.record_planning(p.stats.expanded, clock);
                        self.plan = p.actions.iter().zip(&p.provenance).map(|(a, &pr)| PlanEntry::of(a, pr)).collect();
                        self.cursor = 0;
                        p.actions
                            .first()
                            .map(|a| (a.clone(), ActionSource::Planner))
                            .ok_or_else(|| "planner returned an empty plan away from the goal".into())
                    }
                    Err(e) => {
                        self.record_planning(planner_expansions(&e), clock);
                        Err(format!("planner: {e}"))
                    }
                }
            }
        }
    }

    /// World as it would be after `step` steps of `motion`, for display.
    pub fn preview(&self, motion: &ActiveMotion, step: usize) -> WorldState {
        match execute_motion(&self.world, &motion.task, &motion.path, Some(step)) {
            Ok((w, _)) => w,
            Err(_) => self.world.clone(),
        }
    }

    /// Executes `motion`, stopping at `interrupt` if given.
    pub fn complete_motion(&mut self, motion: ActiveMotion, interrupt: Option<usize>) {
        let (next, outcome) = match execute_motion(&self.world, &motion.task, &motion.path, interrupt) {
            Ok(r) => r,
            Err(e) => {
                self.fail(format!("{}: {e}", motion.action));
                return;
            }
        };
        self.world = next;
        self.report.sim_seconds = self.world.time;
        let completed = outcome.is_completed();
        let failed = matches!(outcome, MotionOutcome::Failed { .. });
        self.report.actions.push(ExecutedAction {
            name: motion.action.name.clone(),
            args: motion.action.args.clone(),
            source: motion.source,
            start_time: motion.start_time,
            end_time: self.world.time,
            outcome: outcome.clone(),
        });
        if completed {
            self.completed += 1;
            self.cursor += 1;
        } else if failed && matches!(self.method, Method::Linear | Method::FullPlan) {
            if let MotionOutcome::Failed { reason } = outcome {
                self.fail(format!("{}: {reason}", motion.action));
            }
        }
    }

    /// Runs to completion, applying scripted events at their triggers.
    pub fn run(mut self) -> RunReport {
        while let Some(motion) = self.next_motion() {
            match self.timed_interrupt(&motion) {
                Some((step, index)) => {
                    self.complete_motion(motion, Some(step));
                    self.script[index].fired = true;
                    let kind = self.script[index].kind.clone();
                    let _ = self.inject(kind, EventSource::Script);
                }
                None => self.complete_motion(motion, None),
            }
        }
        self.report
    }
}

fn planner_expansions(e: &PlannerError) -> usize {
    match e {
        PlannerError::Unsolvable { expanded } => *expanded,
        _ => 0,
    }
}

/// Runs `method` from `world` with a disturbance script.
pub fn run_method(
    ctx: &Arc<TaskContext>,
    method: Method,
    world: &WorldState,
    script: &[crate::sim::DisturbanceEvent],
    config: RunConfig,
) -> RunReport {
    Session::new(Arc::clone(ctx), method, world.clone(), script.to_vec(), config).run()
}

pub fn run_logic_dmp(
    ctx: &Arc<TaskContext>,
    world: &WorldState,
    script: &[crate::sim::DisturbanceEvent],
    config: RunConfig,
) -> RunReport {
    run_method(ctx, Method::LogicDmp, world, script, config)
}

pub fn run_linear(
    ctx: &Arc<TaskContext>,
    world: &WorldState,
    script: &[crate::sim::DisturbanceEvent],
    config: RunConfig,
) -> RunReport {
    run_method(ctx, Method::Linear, world, script, config)
}

pub fn run_rlds_lite(
    ctx: &Arc<TaskContext>,
    world: &WorldState,
    script: &[crate::sim::DisturbanceEvent],
    config: RunConfig,
) -> RunReport {
    run_method(ctx, Method::RldsLite, world, script, config)
}

/// Checks every attempted action against the scene recorded when it was
/// chosen and returns the first one that was not applicable.
pub fn audit(report: &RunReport, domain: &Domain) -> Option<String> {
    for (i, a) in report.actions.iter().enumerate() {
        let Some(scene) = report.trace.get(i) else {
            return Some(format!("no scene recorded before action {i}"));
        };
        let g = match domain.ground(&crate::pddl::ActionRef { name: a.name.clone(), args: a.args.clone() }) {
            Ok(g) => g,
            Err(e) => return Some(e.to_string()),
        };
        if !scene.applicable(&g) {
            return Some(format!("{g} was executed while inapplicable"));
        }
    }
    None
}
