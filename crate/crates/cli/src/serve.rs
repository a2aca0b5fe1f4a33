//! Live session server: one Logic-DMP executor driven step by step,
//! publishing snapshots and taking disturbance commands over
//! newline-delimited JSON on a TCP socket.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use crossbeam::channel::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use serde::{Deserialize, Serialize};

use ldmp_core::executor::{ActiveMotion, AppliedEvent, EventSource, Method, PlanEntry, RunConfig, RunReport, Session, TaskContext};
use ldmp_core::sim::{DisturbanceEvent, EventKind, Pose, Trigger, WorldObject, WorldState};
use ldmp_core::Symbol;

use crate::output::write_json;

/// Largest frame accepted or sent, newline excluded.
pub const MAX_FRAME: usize = 64 * 1024;
/// Trajectory steps between snapshots (20 Hz at 0.01 s steps).
pub const SNAPSHOT_EVERY: usize = 5;
/// Speeds at or above this run without pacing.
const UNPACED_SPEED: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    MoveObject,
    AddObject,
    Pause,
    Resume,
    Speed,
    Reset,
}

/// Client to server frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Cmd {
        cmd: CommandName,
        #[serde(default)]
        args: serde_json::Value,
    },
}

/// Server to client frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // frames are serialized immediately
pub enum Outbound {
    Snapshot {
        time: f64,
        world: WorldState,
        plan: Vec<PlanEntry>,
        cursor: usize,
        last_event: Option<AppliedEvent>,
        paused: bool,
    },
    Error {
        msg: String,
    },
    /// The executor has stopped; the full report is written on exit.
    Done {
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<String>,
        actions: usize,
        replans: usize,
        logic_in_hits: usize,
        sim_seconds: f64,
    },
}

#[derive(Deserialize)]
struct MoveArgs {
    object: Symbol,
    x: f64,
    y: f64,
    #[serde(default)]
    yaw: f64,
    support: Symbol,
}

#[derive(Deserialize)]
struct AddArgs {
    object: WorldObject,
}

#[derive(Deserialize)]
struct SpeedArgs {
    factor: f64,
}

/// A decoded command.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Disturb(EventKind),
    Pause,
    Resume,
    Speed(f64),
    Reset,
}

impl Command {
    /// Decodes one frame. Errors are meant for an error frame.
    pub fn parse(line: &str) -> Result<Command, String> {
        if line.len() > MAX_FRAME {
            return Err(format!("frame of {} bytes exceeds {MAX_FRAME}", line.len()));
        }
        let Inbound::Cmd { cmd, args } = serde_json::from_str(line).map_err(|e| format!("malformed frame: {e}"))?;
        let bad = |e: serde_json::Error| format!("bad args for {cmd:?}: {e}");
        Ok(match cmd {
            CommandName::MoveObject => {
                let a: MoveArgs = serde_json::from_value(args).map_err(bad)?;
                Command::Disturb(EventKind::MoveObject { object: a.object, pose: Pose { x: a.x, y: a.y, yaw: a.yaw }, support: a.support })
            }
            CommandName::AddObject => {
                let a: AddArgs = serde_json::from_value(args).map_err(bad)?;
                Command::Disturb(EventKind::AddObject { object: a.object })
            }
            CommandName::Pause => Command::Pause,
            CommandName::Resume => Command::Resume,
            CommandName::Speed => {
                let a: SpeedArgs = serde_json::from_value(args).map_err(bad)?;
                if !(a.factor > 0.0 && a.factor.is_finite()) {
                    return Err(format!("speed factor must be positive, got {}", a.factor));
                }
                Command::Speed(a.factor)
            }
            CommandName::Reset => Command::Reset,
        })
    }
}

/// One journal line: every accepted command with the sim time it took
/// effect at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: usize,
    pub time: f64,
    pub frame: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub speed: f64,
    /// Directory for the report, journal and replay script.
    pub out: Option<PathBuf>,
}

/// What the session has produced so far.
#[derive(Clone, Debug)]
pub struct SessionLog {
    pub report: RunReport,
    pub journal: Vec<JournalEntry>,
    /// Disturbances applied since the last reset, as a replayable script.
    pub script: Vec<DisturbanceEvent>,
}

enum Poll {
    Continue,
    Disturb(Vec<EventKind>),
    Reset,
    Disconnected,
}

/// The executor side of a session.
pub struct Driver {
    ctx: Arc<TaskContext>,
    start: WorldState,
    session: Session,
    paused: bool,
    speed: f64,
    ticks: usize,
    deadline: Instant,
    journal: Vec<JournalEntry>,
    script: Vec<DisturbanceEvent>,
    inbox: Receiver<(Command, serde_json::Value)>,
    outbox: Sender<Outbound>,
}

impl Driver {
    pub fn new(
        ctx: Arc<TaskContext>,
        start: WorldState,
        speed: f64,
        inbox: Receiver<(Command, serde_json::Value)>,
        outbox: Sender<Outbound>,
    ) -> Self {
        let session = Session::new(Arc::clone(&ctx), Method::LogicDmp, start.clone(), Vec::new(), RunConfig::default());
        Self {
            ctx,
            start,
            session,
            paused: true,
            speed,
            ticks: 0,
            deadline: Instant::now(),
            journal: Vec::new(),
            script: Vec::new(),
            inbox,
            outbox,
        }
    }

    fn send(&self, frame: Outbound) {
        let _ = self.outbox.send(frame);
    }

    fn error(&self, msg: String) {
        self.send(Outbound::Error { msg });
    }

    fn snapshot(&self, world: WorldState) {
        let (plan, cursor) = self.session.plan();
        self.send(Outbound::Snapshot {
            time: world.time,
            world,
            plan: plan.to_vec(),
            cursor,
            last_event: self.session.last_event().cloned(),
            paused: self.paused,
        });
    }

    fn pace(&mut self) {
        if self.speed >= UNPACED_SPEED {
            return;
        }
        let step = Duration::from_secs_f64(ldmp_core::executor::STEP_DT / self.speed);
        self.deadline += step;
        let now = Instant::now();
        if self.deadline > now {
            thread::sleep(self.deadline - now);
        } else {
            self.deadline = now;
        }
    }

    fn journal(&mut self, time: f64, frame: serde_json::Value) {
        self.journal.push(JournalEntry { seq: self.journal.len(), time, frame });
    }

    /// Handles one command; disturbances are returned for the caller to
    /// apply at the right point of the motion.
    fn handle(&mut self, command: Command, frame: serde_json::Value, time: f64, events: &mut Vec<EventKind>) -> Option<Poll> {
        self.journal(time, frame);
        match command {
            Command::Disturb(kind) => events.push(kind),
            Command::Pause => self.paused = true,
            Command::Resume => {
                self.paused = false;
                self.deadline = Instant::now();
            }
            Command::Speed(f) => {
                self.speed = f;
                self.deadline = Instant::now();
            }
            Command::Reset => return Some(Poll::Reset),
        }
        None
    }

    /// Drains pending commands. While paused, blocks until resumed, reset,
    /// disconnected or, mid-motion, until a disturbance arrives.
    fn poll(&mut self, time: f64, at: Option<(&ActiveMotion, usize)>) -> Poll {
        let mid_motion = at.is_some();
        let mut events = Vec::new();
        loop {
            let next = if self.paused && !(mid_motion && !events.is_empty()) {
                match self.inbox.recv_timeout(Duration::from_millis(200)) {
                    Ok(m) => Some(m),
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => return Poll::Disconnected,
                }
            } else {
                match self.inbox.try_recv() {
                    Ok(m) => Some(m),
                    Err(TryRecvError::Empty) => None,
                    Err(TryRecvError::Disconnected) => return Poll::Disconnected,
                }
            };
            let Some((command, frame)) = next else { break };
            let was_paused = self.paused;
            if let Some(p) = self.handle(command, frame, time, &mut events) {
                return p;
            }
            if !mid_motion && !events.is_empty() {
                self.apply(std::mem::take(&mut events));
                self.snapshot(self.session.world().clone());
            } else if was_paused != self.paused {
                let world = match at {
                    Some((motion, step)) => self.session.preview(motion, step),
                    None => self.session.world().clone(),
                };
                self.snapshot(world);
            }
        }
        if events.is_empty() {
            Poll::Continue
        } else {
            Poll::Disturb(events)
        }
    }

    fn apply(&mut self, events: Vec<EventKind>) {
        for kind in events {
            let time = self.session.world().time;
            // rejected events stay in the script: they still interrupted the
            // running motion, and a replay must do the same
            let level = match self.session.inject(kind.clone(), EventSource::Live) {
                Ok(level) => Some(level),
                Err(e) => {
                    self.error(format!("disturbance rejected: {e}"));
                    None
                }
            };
            self.script.push(DisturbanceEvent { trigger: Trigger::AtTime { time }, kind, level });
        }
    }

    fn reset(&mut self) {
        self.session = Session::new(Arc::clone(&self.ctx), Method::LogicDmp, self.start.clone(), Vec::new(), RunConfig::default());
        self.paused = true;
        self.ticks = 0;
        self.script.clear();
        self.snapshot(self.start.clone());
    }

    /// Runs one motion step by step. Returns false on disconnect.
    fn run_motion(&mut self, motion: ActiveMotion) -> Option<bool> {
        let last = motion.steps();
        for step in 1..=last {
            self.pace();
            self.ticks += 1;
            let time = motion.start_time + step as f64 * motion.path.dt;
            if self.ticks.is_multiple_of(SNAPSHOT_EVERY) {
                self.snapshot(self.session.preview(&motion, step));
            }
            match self.poll(time, (step < last).then_some((&motion, step))) {
                Poll::Continue => {}
                Poll::Disturb(events) => {
                    let at = (step < last).then_some(step);
                    self.session.complete_motion(motion, at);
                    self.apply(events);
                    self.snapshot(self.session.world().clone());
                    return Some(true);
                }
                Poll::Reset => {
                    self.reset();
                    return Some(true);
                }
                Poll::Disconnected => return None,
            }
        }
        self.session.complete_motion(motion, None);
        Some(true)
    }

    fn done_frame(&self) -> Outbound {
        let r = self.session.report();
        Outbound::Done {
            success: r.success,
            failure: r.failure.clone(),
            actions: r.completed_actions().count(),
            replans: r.replans,
            logic_in_hits: r.logic_in_hits,
            sim_seconds: r.sim_seconds,
        }
    }

    /// Drives the session until the client goes away.
    pub fn run(mut self) -> SessionLog {
        self.snapshot(self.session.world().clone());
        'session: loop {
            while !self.session.is_finished() {
                let time = self.session.world().time;
                match self.poll(time, None) {
                    Poll::Continue => {}
                    Poll::Disturb(_) => unreachable!("boundary disturbances are applied while polling"),
                    Poll::Reset => {
                        self.reset();
                        continue;
                    }
                    Poll::Disconnected => break 'session,
                }
                if self.paused {
                    continue;
                }
                match self.session.next_motion() {
                    Some(motion) => {
                        if self.run_motion(motion).is_none() {
                            break 'session;
                        }
                    }
                    None => break,
                }
            }
            self.snapshot(self.session.world().clone());
            self.send(self.done_frame());
            // a finished session only answers resets
            loop {
                match self.inbox.recv() {
                    Ok((Command::Reset, frame)) => {
                        let time = self.session.world().time;
                        self.journal(time, frame);
                        self.reset();
                        continue 'session;
                    }
                    Ok(_) => self.error("the session has finished; send reset to start over".into()),
                    Err(_) => break 'session,
                }
            }
        }
        SessionLog { report: self.session.into_report(), journal: self.journal, script: self.script }
    }
}

fn encode(frame: &Outbound) -> String {
    let text = serde_json::to_string(frame).expect("frames serialize");
    if text.len() > MAX_FRAME {
        let msg = format!("frame of {} bytes dropped (limit {MAX_FRAME})", text.len());
        return serde_json::to_string(&Outbound::Error { msg }).expect("frames serialize");
    }
    text
}

fn writer(stream: TcpStream, frames: Receiver<Outbound>) {
    let mut out = std::io::BufWriter::new(stream);
    for frame in frames {
        let mut line = encode(&frame);
        line.push('\n');
        if out.write_all(line.as_bytes()).and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}

fn reader(stream: TcpStream, commands: Sender<(Command, serde_json::Value)>, frames: Sender<Outbound>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match Command::parse(&line) {
            Ok(c) => {
                let frame = serde_json::from_str(&line).unwrap_or(serde_json::Value::Null);
                if commands.send((c, frame)).is_err() {
                    break;
                }
            }
            Err(msg) => {
                let _ = frames.send(Outbound::Error { msg });
            }
        }
    }
}

/// Binds the listener; a busy port is an environment error.
pub fn bind(port: u16) -> Result<TcpListener> {
    TcpListener::bind(("127.0.0.1", port)).with_context(|| format!("cannot listen on 127.0.0.1:{port}"))
}

/// Serves one client connection, then writes the report, journal and replay
/// script.
pub fn serve(listener: TcpListener, ctx: Arc<TaskContext>, start: WorldState, config: &ServeConfig) -> Result<SessionLog> {
    let (stream, peer) = listener.accept().context("accepting a client")?;
    eprintln!("client connected from {peer}");
    stream.set_nodelay(true).ok();
    let (cmd_tx, cmd_rx) = channel::unbounded();
    let (out_tx, out_rx) = channel::unbounded();
    let write_half = stream.try_clone()?;
    let writer_thread = thread::spawn(move || writer(write_half, out_rx));
    let read_half = stream.try_clone()?;
    let errors = out_tx.clone();
    let reader_thread = thread::spawn(move || reader(read_half, cmd_tx, errors));
    let log = Driver::new(ctx, start, config.speed, cmd_rx, out_tx).run();
    let _ = stream.shutdown(std::net::Shutdown::Both);
    if writer_thread.join().is_err() || reader_thread.join().is_err() {
        bail!("connection thread panicked");
    }
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("serve_report.json"), &log.report)?;
        write_json(&dir.join("serve_script.json"), &log.script)?;
        let mut journal = String::new();
        for entry in &log.journal {
            journal.push_str(&serde_json::to_string(entry)?);
            journal.push('\n');
        }
        std::fs::write(dir.join("serve_journal.ndjson"), journal)?;
    }
    Ok(log)
}
