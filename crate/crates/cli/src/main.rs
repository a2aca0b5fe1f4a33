use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ldmp_cli::experiments::{self, PullGoal};
use ldmp_cli::output;
use ldmp_cli::serve::{self, ServeConfig};
use ldmp_core::executor::{run_method, Method, RunConfig};
use ldmp_core::scenario::{Benchmark, Scenario};
use ldmp_core::sim::{DisturbanceEvent, Level, WorldState};

#[derive(Parser)]
#[command(name = "ldmp", version, about = "Reactive task and motion planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

fn parse_benchmark(s: &str) -> Result<Benchmark, String> {
    s.parse().map_err(|_| format!("unknown benchmark `{s}` (expected b1, b2 or b3)"))
}

fn parse_level(s: &str) -> Result<Level, String> {
    Level::parse(s).ok_or_else(|| format!("unknown level `{s}` (expected l1 to l4)"))
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::ALL
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown method `{s}` (expected logic-dmp, linear, rlds-lite or full-plan)"))
}

#[derive(Subcommand)]
enum Cmd {
    /// Success rates and planning effort over random initial states.
    Generalize {
        #[arg(long, value_parser = parse_benchmark)]
        benchmark: Benchmark,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Record wall-clock planning time (makes reports non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Reaction to scripted disturbances of one level.
    React {
        #[arg(long, value_parser = parse_benchmark)]
        benchmark: Benchmark,
        #[arg(long, value_parser = parse_level)]
        level: Level,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        timing: bool,
    },
    /// Pulling trajectories of LQT-CP and a classical DMP for one goal cube.
    Viapoint {
        #[arg(long, value_enum)]
        goal: PullGoal,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Runs one task from a demo file, optionally with a disturbance script.
    Run {
        #[arg(long)]
        demo: PathBuf,
        /// Start world; defaults to the one named by the demo file.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, value_parser = parse_method, default_value = "logic-dmp")]
        method: Method,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Records the demonstration and writes its motion segment files.
    Record {
        #[arg(long)]
        demo: PathBuf,
        /// Directory the segment paths are resolved against; defaults to the
        /// demo file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Live session over newline-delimited JSON on a local TCP socket.
    Serve {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Sim seconds per wall second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Where the report, journal and replay script go on exit.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures that are not the user's or the experiment's fault.
#[derive(Debug)]
struct Environment(anyhow::Error);

impl std::fmt::Display for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Environment {}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn print_checks(checks: &[experiments::Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.pass)
}

fn load_world(path: &Path) -> Result<WorldState> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(WorldState::from_json(&text)?)
}

fn load_task(demo: &Path, world: Option<&Path>) -> Result<(Scenario, WorldState)> {
    let scenario = Scenario::load(demo)?;
    let start = match world {
        Some(w) => load_world(w)?,
        None => scenario.world.clone(),
    };
    start.validate()?;
    Ok((scenario, start))
}

fn execute(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Generalize { benchmark, count, seed, out, timing } => {
            let report = experiments::generalize(benchmark, count, seed, timing)?;
            report_paths(&output::write_generalize(&out, &report)?);
            Ok(print_checks(&report.checks))
        }
        Cmd::React { benchmark, level, count, seed, out, timing } => {
            let report = experiments::react(benchmark, level, count, seed, timing)?;
            report_paths(&output::write_react(&out, &report)?);
            Ok(print_checks(&report.checks))
        }
        Cmd::Viapoint { goal, out } => {
            let report = experiments::viapoint(goal)?;
            report_paths(&output::write_viapoint(&out, &report)?);
            Ok(print_checks(&report.checks()))
        }
        Cmd::Run { demo, world, script, method, out } => {
            let (scenario, start) = load_task(&demo, world.as_deref())?;
            let script: Vec<DisturbanceEvent> = match script {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => Vec::new(),
            };
            let (ctx, _) = scenario.context()?;
            let report = run_method(&ctx, method, &start, &script, RunConfig::default());
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("run_{method}.json"));
            output::write_json(&path, &report)?;
            report_paths(&[path]);
            match &report.failure {
                None => println!("PASS {method}: {} actions, {} replans", report.actions.len(), report.replans),
                Some(f) => println!("FAIL {method}: {f}"),
            }
            Ok(report.success)
        }
        Cmd::Record { demo, out } => {
            let scenario = Scenario::load(&demo)?;
            let dir = out.unwrap_or_else(|| demo.parent().unwrap_or(Path::new(".")).to_path_buf());
            let recorded = scenario.record()?;
            report_paths(&scenario.write_segments(&recorded, &dir)?);
            Ok(true)
        }
        Cmd::Serve { world, demo, port, speed, out } => {
            anyhow::ensure!(speed > 0.0 && speed.is_finite(), "speed must be positive");
            let (scenario, start) = load_task(&demo, world.as_deref())?;
            let (ctx, _) = scenario.context()?;
            let listener = serve::bind(port).map_err(Environment)?;
            let addr = listener.local_addr()?;
            println!("listening on {addr}");
            use std::io::Write;
            std::io::stdout().flush()?;
            let log = serve::serve(listener, ctx, start, &ServeConfig { speed, out }).map_err(Environment)?;
            println!("{}", serde_json::to_string(&log.report)?);
            Ok(log.report.success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Environment>() || c.is::<std::io::Error>()) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
