//! JSON-lines protocol between the harness and an out-of-process debugger.
//!
//! Every message is one JSON object on one line. The debugger side speaks
//! first with `hello`; after that the harness sends one request at a time
//! and reads responses until `ack` or `error`. The README lists the exact
//! message shapes.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::hdl::{parse_set, render_set, SourceUnit};
use crate::sim::{start_session, DebugSession, FaultSet, Session, SimConfig, Value};
use crate::trace::{DebugAction, FailureKind, PauseReason, RunFailure, TraceEvent, Waveform};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFile {
    pub path: String,
    pub text: String,
}

/// Simulation settings sent with `load`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireConfig {
    pub clock_period: u64,
    pub total_time: u64,
    pub loop_cap: u32,
    pub step_into_instances: bool,
}

impl From<&SimConfig> for WireConfig {
    fn from(c: &SimConfig) -> Self {
        Self {
            clock_period: c.clock_period,
            total_time: c.total_time,
            loop_cap: c.loop_cap,
            step_into_instances: c.step_into_instances,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Load { files: Vec<WireFile>, config: WireConfig },
    AddBp { line: u32 },
    RunAll,
    Step,
    Fold { start: u32, end: u32 },
    Unfold { start: u32 },
    Waveform,
    Quit,
}

impl From<DebugAction> for Request {
    fn from(a: DebugAction) -> Self {
        match a {
            DebugAction::AddBp { line } => Request::AddBp { line },
            DebugAction::RunAll => Request::RunAll,
            DebugAction::Step => Request::Step,
            DebugAction::Fold { start, end } => Request::Fold { start, end },
            DebugAction::Unfold { start } => Request::Unfold { start },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireEvent {
    BreakpointSet { requested: u32, actual: Option<u32> },
    Paused { line: u32, reason: PauseReason, time: u64 },
    WaveOutput { time: u64, values: Vec<(String, String)> },
    Finished { time: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Hello {
        protocol: u32,
        target: String,
    },
    Ack,
    Error {
        msg: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<FailureKind>,
    },
    Event(WireEvent),
    Waveform {
        names: Vec<String>,
        samples: Vec<(u64, Vec<String>)>,
    },
}

impl From<&TraceEvent> for WireEvent {
    fn from(e: &TraceEvent) -> Self {
        match e {
            TraceEvent::BreakpointSet { requested, actual } => WireEvent::BreakpointSet {
                requested: *requested,
                actual: *actual,
            },
            TraceEvent::Paused { line, reason, time } => WireEvent::Paused {
                line: *line,
                reason: *reason,
                time: *time,
            },
            TraceEvent::WaveOutput { time, values } => WireEvent::WaveOutput {
                time: *time,
                values: values.iter().map(|(n, v)| (n.clone(), v.to_string())).collect(),
            },
            TraceEvent::Finished { time } => WireEvent::Finished { time: *time },
        }
    }
}

fn parse_value(s: &str) -> Result<Value, String> {
    Value::parse(s).ok_or_else(|| format!("bad value literal '{s}'"))
}

impl TryFrom<WireEvent> for TraceEvent {
    type Error = String;

    fn try_from(e: WireEvent) -> Result<Self, String> {
        Ok(match e {
            WireEvent::BreakpointSet { requested, actual } => TraceEvent::BreakpointSet { requested, actual },
            WireEvent::Paused { line, reason, time } => TraceEvent::Paused { line, reason, time },
            WireEvent::WaveOutput { time, values } => TraceEvent::WaveOutput {
                time,
                values: values
                    .into_iter()
                    .map(|(n, v)| Ok((n, parse_value(&v)?)))
                    .collect::<Result<_, String>>()?,
            },
            WireEvent::Finished { time } => TraceEvent::Finished { time },
        })
    }
}

fn send_line(out: &mut impl Write, msg: &impl Serialize) -> io::Result<()> {
    let mut s = serde_json::to_string(msg).map_err(io::Error::other)?;
    s.push('\n');
    out.write_all(s.as_bytes())?;
    out.flush()
}

/// Serve the reference debugger (with `faults` injected) over the protocol.
pub fn serve(input: impl BufRead, mut output: impl Write, faults: &FaultSet) -> io::Result<()> {
    let target = if faults.is_empty() {
        "reference".to_string()
    } else {
        let ids: Vec<&str> = faults.iter().map(|f| f.id()).collect();
        format!("fault:{}", ids.join(","))
    };
    send_line(
        &mut output,
        &Response::Hello {
            protocol: PROTOCOL_VERSION,
            target,
        },
    )?;
    let mut session: Option<Session> = None;
    let error = |msg: String, failure: Option<FailureKind>| Response::Error { msg, failure };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                send_line(&mut output, &error(format!("malformed request: {e}"), None))?;
                continue;
            }
        };
        let reply = match req {
            Request::Quit => {
                send_line(&mut output, &Response::Ack)?;
                return Ok(());
            }
            Request::Load { files, config } => {
                let files: Vec<(String, String)> = files.into_iter().map(|f| (f.path, f.text)).collect();
                let cfg = SimConfig {
                    clock_period: config.clock_period,
                    total_time: config.total_time,
                    loop_cap: config.loop_cap,
                    step_into_instances: config.step_into_instances,
                    ..SimConfig::default()
                };
                match parse_set(&files) {
                    Err(e) => error(e.to_string(), Some(FailureKind::Elaboration)),
                    Ok(unit) => match start_session(&unit, &cfg, faults) {
                        Ok(s) => {
                            session = Some(s);
                            Response::Ack
                        }
                        Err(e) => error(e.to_string(), Some(FailureKind::Elaboration)),
                    },
                }
            }
            Request::Waveform => match &session {
                Some(s) => {
                    let w = s.waveform();
                    send_line(
                        &mut output,
                        &Response::Waveform {
                            names: w.names,
                            samples: w
                                .samples
                                .into_iter()
                                .map(|(t, row)| (t, row.iter().map(|v| v.to_string()).collect()))
                                .collect(),
                        },
                    )?;
                    Response::Ack
                }
                None => error("no design loaded".into(), None),
            },
            action => {
                let a = match action {
                    Request::AddBp { line } => DebugAction::AddBp { line },
                    Request::RunAll => DebugAction::RunAll,
                    Request::Step => DebugAction::Step,
                    Request::Fold { start, end } => DebugAction::Fold { start, end },
                    Request::Unfold { start } => DebugAction::Unfold { start },
                    _ => unreachable!("handled above"),
                };
                match session.as_mut() {
                    None => error("no design loaded".into(), None),
                    Some(s) => match DebugSession::apply(s, a) {
                        Ok(events) => {
                            for e in &events {
                                send_line(&mut output, &Response::Event(e.into()))?;
                            }
                            Response::Ack
                        }
                        Err(f) => error(f.message, Some(f.kind)),
                    },
                }
            }
        };
        send_line(&mut output, &reply)?;
    }
    Ok(())
}

/// A debugger running in a child process.
pub struct ExternalSession {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<String>,
    deadline: Instant,
    finished: bool,
    dead: bool,
    /// Identity the adapter announced in its hello message.
    pub target: String,
}

fn crash(msg: impl Into<String>) -> RunFailure {
    RunFailure::new(FailureKind::Crash, msg)
}

impl ExternalSession {
    /// Spawn `command` through the shell, wait for its hello, and load `unit`.
    /// `budget` bounds the whole session's wall time.
    pub fn launch(command: &str, unit: &SourceUnit, cfg: &SimConfig, budget: Duration) -> Result<Self, RunFailure> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| crash(format!("cannot spawn adapter '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut s = ExternalSession {
            child,
            stdin,
            rx,
            deadline: Instant::now() + budget,
            finished: false,
            dead: false,
            target: String::new(),
        };
        match s.recv()? {
            Response::Hello { protocol, target } if protocol == PROTOCOL_VERSION => s.target = target,
            Response::Hello { protocol, .. } => return Err(s.fail(crash(format!("unsupported protocol version {protocol}")))),
            other => return Err(s.fail(crash(format!("expected hello, got {other:?}")))),
        }
        let files = render_set(unit)
            .into_iter()
            .map(|(path, text)| WireFile { path, text })
            .collect();
        s.send(&Request::Load {
            files,
            config: cfg.into(),
        })?;
        match s.recv()? {
            Response::Ack => Ok(s),
            Response::Error { msg, failure } => {
                let kind = failure.unwrap_or(FailureKind::Elaboration);
                Err(s.fail(RunFailure::new(kind, msg)))
            }
            other => Err(s.fail(crash(format!("unexpected reply to load: {other:?}")))),
        }
    }

    fn fail(&mut self, f: RunFailure) -> RunFailure {
        self.dead = true;
        let _ = self.child.kill();
        let _ = self.child.wait();
        f
    }

    fn send(&mut self, req: &Request) -> Result<(), RunFailure> {
        if self.dead {
            return Err(crash("adapter session already failed"));
        }
        if let Err(e) = send_line(&mut self.stdin, req) {
            return Err(self.fail(crash(format!("adapter closed its input: {e}"))));
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Response, RunFailure> {
        let left = self.deadline.saturating_duration_since(Instant::now());
        match self.rx.recv_timeout(left) {
            Ok(line) => serde_json::from_str(&line).map_err(|e| self.fail(crash(format!("protocol violation: {e}: {line}")))),
            Err(RecvTimeoutError::Timeout) => Err(self.fail(RunFailure::new(FailureKind::Timeout, "adapter did not answer in time"))),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().ok();
                Err(self.fail(crash(format!("adapter exited ({status:?})"))))
            }
        }
    }
}

impl DebugSession for ExternalSession {
    fn apply(&mut self, action: DebugAction) -> Result<Vec<TraceEvent>, RunFailure> {
        self.send(&action.into())?;
        let mut events = Vec::new();
        loop {
            match self.recv()? {
                Response::Event(e) => {
                    let e = TraceEvent::try_from(e).map_err(|m| self.fail(crash(format!("protocol violation: {m}"))))?;
                    if matches!(e, TraceEvent::Finished { .. }) {
                        self.finished = true;
                    }
                    events.push(e);
                }
                Response::Ack => return Ok(events),
                Response::Error { msg, failure } => {
                    return Err(self.fail(RunFailure::new(failure.unwrap_or(FailureKind::Crash), msg)));
                }
                other => return Err(self.fail(crash(format!("protocol violation: unexpected {other:?}")))),
            }
        }
    }

    fn is_finished(&self) -> bool {
        self.finished
    }

    fn waveform(&mut self) -> Option<Waveform> {
        self.send(&Request::Waveform).ok()?;
        let Ok(Response::Waveform { names, samples }) = self.recv() else { return None };
        let samples = samples
            .into_iter()
            .map(|(t, row)| Some((t, row.iter().map(|v| Value::parse(v)).collect::<Option<Vec<_>>>()?)))
            .collect::<Option<Vec<_>>>()?;
        matches!(self.recv(), Ok(Response::Ack)).then_some(Waveform { names, samples })
    }
}

impl Drop for ExternalSession {
    fn drop(&mut self) {
        if !self.dead {
            let _ = send_line(&mut self.stdin, &Request::Quit);
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
