//! The three bundled benchmarks, demonstration recording and the random
//! start and disturbance suites built on them.

mod record;
mod suite;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{ExecutorError, TaskContext};
use crate::lqt::{LqtError, ReferenceTrajectory};
use crate::pddl::{ActionRef, Domain, FactSet, PddlError, Problem, Symbol};
use crate::planner::{Demonstration, PlannerError};
use crate::sim::{SimError, WorldState};

pub use record::{demo_stroke, record_demonstration, via_polynomial, RecordedDemo};
pub use suite::{
    disturbance_suite, pull_corridor_clear, random_starts, suite_rng, SuiteCase, SuiteKind, L1_MAX_OFFSET,
    MIN_SPACING,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {message}")]
    Json { context: String, message: String },
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Lqt(#[from] LqtError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("inconsistent scenario: {0}")]
    Mismatch(String),
    #[error("suite generation failed: {0}")]
    Generation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    B1,
    B2,
    B3,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::B1, Benchmark::B2, Benchmark::B3];

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::B1 => "b1",
            Benchmark::B2 => "b2",
            Benchmark::B3 => "b3",
        }
    }

    fn bundled(self) -> [&'static str; 4] {
        match self {
            Benchmark::B1 => [
                include_str!("../../scenarios/b1/domain.pddl"),
                include_str!("../../scenarios/b1/problem.pddl"),
                include_str!("../../scenarios/b1/world.json"),
                include_str!("../../scenarios/b1/demo.json"),
            ],
            Benchmark::B2 => [
                include_str!("../../scenarios/b2/domain.pddl"),
                include_str!("../../scenarios/b2/problem.pddl"),
                include_str!("../../scenarios/b2/world.json"),
                include_str!("../../scenarios/b2/demo.json"),
            ],
            Benchmark::B3 => [
                include_str!("../../scenarios/b3/domain.pddl"),
                include_str!("../../scenarios/b3/problem.pddl"),
                include_str!("../../scenarios/b3/world.json"),
                include_str!("../../scenarios/b3/demo.json"),
            ],
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(Benchmark::B1),
            "b2" => Ok(Benchmark::B2),
            "b3" => Ok(Benchmark::B3),
            other => Err(format!("unknown benchmark {other:?} (expected b1, b2 or b3)")),
        }
    }
}

/// On-disk demonstration: the problem it was recorded in, the action
/// sequence and one trajectory file per action schema. Paths are relative
/// to the demo file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoFile {
    pub domain: String,
    pub problem: String,
    pub world: String,
    pub actions: Vec<ActionRef>,
    #[serde(default)]
    pub segments: BTreeMap<String, String>,
}

fn json<T: for<'de> Deserialize<'de>>(text: &str, context: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Json { context: context.to_string(), message: e.to_string() })
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

/// A template task: domain, problem, the world it lives in and the
/// demonstrated action sequence.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub benchmark: Option<Benchmark>,
    pub domain: Domain,
    pub problem: Problem,
    pub world: WorldState,
    pub demo_actions: Vec<ActionRef>,
    pub demo_file: DemoFile,
}

impl Scenario {
    pub fn bundled(benchmark: Benchmark) -> Result<Self, ScenarioError> {
        let [domain, problem, world, demo] = benchmark.bundled();
        let mut s = Self::parse(benchmark.as_str(), domain, problem, world, demo)?;
        s.benchmark = Some(benchmark);
        Ok(s)
    }

    fn parse(name: &str, domain: &str, problem: &str, world: &str, demo: &str) -> Result<Self, ScenarioError> {
        let domain = Domain::parse(domain)?;
        let problem = Problem::parse(problem, &domain)?;
        let world = WorldState::from_json(world)?;
        let demo_file: DemoFile = json(demo, "demo file")?;
        Ok(Self {
            name: name.to_string(),
            benchmark: None,
            domain,
            problem,
            world,
            demo_actions: demo_file.actions.clone(),
            demo_file,
        })
    }

    /// Loads a demo file and the domain, problem and world it names.
    pub fn load(demo_path: &Path) -> Result<Self, ScenarioError> {
        let dir = demo_path.parent().unwrap_or(Path::new("."));
        let demo = read(demo_path)?;
        let file: DemoFile = json(&demo, &demo_path.display().to_string())?;
        let name = demo_path.display().to_string();
        Self::parse(
            &name,
            &read(&dir.join(&file.domain))?,
            &read(&dir.join(&file.problem))?,
            &read(&dir.join(&file.world))?,
            &demo,
        )
    }

    /// Trajectory files named by the demo file, resolved against `dir`.
    pub fn load_segments(&self, dir: &Path) -> Result<BTreeMap<Symbol, ReferenceTrajectory>, ScenarioError> {
        let mut out = BTreeMap::new();
        for (schema, file) in &self.demo_file.segments {
            let path = dir.join(file);
            out.insert(Symbol::new(schema), json(&read(&path)?, &path.display().to_string())?);
        }
        Ok(out)
    }

    /// Writes the recorded motion segments to the files named by the demo
    /// file, resolved against `dir`. Returns the paths written.
    pub fn write_segments(&self, recorded: &RecordedDemo, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        let mut written = Vec::new();
        for (schema, file) in &self.demo_file.segments {
            let segment = recorded
                .demonstration
                .segment(schema)
                .ok_or_else(|| ScenarioError::Mismatch(format!("the demonstration has no {schema} segment")))?;
            let path = dir.join(file);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| ScenarioError::Io { path: parent.to_path_buf(), source })?;
            }
            let text = serde_json::to_string_pretty(segment).expect("segments serialize") + "\n";
            std::fs::write(&path, text).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn goal(&self) -> FactSet {
        self.problem.goal_set()
    }

    /// Executes the demonstration in the template world and checks that the
    /// resulting logical states agree with the problem file.
    pub fn record(&self) -> Result<RecordedDemo, ScenarioError> {
        let recorded = record_demonstration(&self.domain, &self.world, &self.demo_actions)?;
        let init = self.problem.initial_scene();
        let first = &recorded.demonstration.states()[0];
        if init.objects() != first.objects() {
            return Err(ScenarioError::Mismatch("problem objects and world objects differ".into()));
        }
        if init.facts() != first.facts() {
            let a: Vec<String> = init.facts().symmetric_difference(first.facts()).map(|f| f.to_string()).collect();
            return Err(ScenarioError::Mismatch(format!("problem init and world disagree on {}", a.join(" "))));
        }
        Ok(recorded)
    }

    /// Executor context built from a fresh recording of the demonstration.
    pub fn context(&self) -> Result<(Arc<TaskContext>, RecordedDemo), ScenarioError> {
        let recorded = self.record()?;
        let ctx = TaskContext::new(self.domain.clone(), recorded.demonstration.clone(), self.goal())?;
        Ok((Arc::new(ctx), recorded))
    }

    /// Executor context whose motion segments come from trajectory files.
    pub fn context_with_segments(
        &self,
        segments: BTreeMap<Symbol, ReferenceTrajectory>,
    ) -> Result<Arc<TaskContext>, ScenarioError> {
        let demo = Demonstration::replay(&self.domain, self.problem.initial_scene(), &self.demo_actions, segments)?;
        Ok(Arc::new(TaskContext::new(self.domain.clone(), demo, self.goal())?))
    }
}
