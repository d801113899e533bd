//! Debug actions, trace events, and their line-oriented text forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DebugAction {
    AddBp { line: u32 },
    RunAll,
    Step,
    Fold { start: u32, end: u32 },
    Unfold { start: u32 },
}

impl fmt::Display for DebugAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DebugAction::AddBp { line } => write!(f, "add_bp {line}"),
            DebugAction::RunAll => write!(f, "run_all"),
            DebugAction::Step => write!(f, "step"),
            DebugAction::Fold { start, end } => write!(f, "fold {start} {end}"),
            DebugAction::Unfold { start } => write!(f, "unfold {start}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextFormatError(pub String);

impl fmt::Display for TextFormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed record: {}", self.0)
    }
}

impl std::error::Error for TextFormatError {}

fn bad(s: &str) -> TextFormatError {
    TextFormatError(s.to_string())
}

fn num<T: FromStr>(s: Option<&str>, line: &str) -> Result<T, TextFormatError> {
    s.and_then(|x| x.parse().ok()).ok_or_else(|| bad(line))
}

impl FromStr for DebugAction {
    type Err = TextFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = s.split_whitespace();
        let a = match w.next() {
            Some("add_bp") => DebugAction::AddBp { line: num(w.next(), s)? },
            Some("run_all") => DebugAction::RunAll,
            Some("step") => DebugAction::Step,
            Some("fold") => DebugAction::Fold {
                start: num(w.next(), s)?,
                end: num(w.next(), s)?,
            },
            Some("unfold") => DebugAction::Unfold { start: num(w.next(), s)? },
            _ => return Err(bad(s)),
        };
        if w.next().is_some() {
            return Err(bad(s));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauseReason {
    Breakpoint,
    StepDone,
}

impl PauseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PauseReason::Breakpoint => "breakpoint",
            PauseReason::StepDone => "step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    BreakpointSet { requested: u32, actual: Option<u32> },
    Paused { line: u32, reason: PauseReason, time: u64 },
    /// Snapshot of the top-level signals, in declaration order.
    WaveOutput { time: u64, values: Vec<(String, Value)> },
    Finished { time: u64 },
}

impl TraceEvent {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TraceEvent::BreakpointSet { .. } => "bp_set",
            TraceEvent::Paused { .. } => "paused",
            TraceEvent::WaveOutput { .. } => "wave",
            TraceEvent::Finished { .. } => "finished",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::BreakpointSet { requested, actual } => match actual {
                Some(a) => write!(f, "bp_set {requested} {a}"),
                None => write!(f, "bp_set {requested} -"),
            },
            TraceEvent::Paused { line, reason, time } => write!(f, "paused {line} {} {time}", reason.as_str()),
            TraceEvent::WaveOutput { time, values } => {
                write!(f, "wave {time}")?;
                for (n, v) in values {
                    write!(f, " {n}={v}")?;
                }
                Ok(())
            }
            TraceEvent::Finished { time } => write!(f, "finished {time}"),
        }
    }
}

impl FromStr for TraceEvent {
    type Err = TextFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = s.split_whitespace();
        let ev = match w.next() {
            Some("bp_set") => {
                let requested = num(w.next(), s)?;
                let actual = match w.next() {
                    Some("-") => None,
                    x => Some(num(x, s)?),
                };
                TraceEvent::BreakpointSet { requested, actual }
            }
            Some("paused") => {
                let line = num(w.next(), s)?;
                let reason = match w.next() {
                    Some("breakpoint") => PauseReason::Breakpoint,
                    Some("step") => PauseReason::StepDone,
                    _ => return Err(bad(s)),
                };
                TraceEvent::Paused {
                    line,
                    reason,
                    time: num(w.next(), s)?,
                }
            }
            Some("wave") => {
                let time = num(w.next(), s)?;
                let mut values = Vec::new();
                for kv in w.by_ref() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad(s))?;
                    values.push((k.to_string(), Value::parse(v).ok_or_else(|| bad(s))?));
                }
                TraceEvent::WaveOutput { time, values }
            }
            Some("finished") => TraceEvent::Finished { time: num(w.next(), s)? },
            _ => return Err(bad(s)),
        };
        if w.next().is_some() {
            return Err(bad(s));
        }
        Ok(ev)
    }
}

/// Per-edge samples of every non-integer signal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Waveform {
    pub names: Vec<String>,
    pub samples: Vec<(u64, Vec<Value>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Crash,
    Timeout,
    Elaboration,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Crash => "crash",
            FailureKind::Timeout => "timeout",
            FailureKind::Elaboration => "elaboration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "crash" => Some(FailureKind::Crash),
            "timeout" => Some(FailureKind::Timeout),
            "elaboration" => Some(FailureKind::Elaboration),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl RunFailure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for RunFailure {}

/// Everything one debugger run produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub waveform: Option<Waveform>,
    pub failure: Option<RunFailure>,
}

impl Trace {
    pub fn is_finished(&self) -> bool {
        matches!(self.events.last(), Some(TraceEvent::Finished { .. }))
    }

    /// Line-oriented text form: one event per line, then the waveform table
    /// (`signals` header plus `sample` rows), then an optional `failure` line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        if let Some(w) = &self.waveform {
            out.push_str("signals");
            for n in &w.names {
                out.push(' ');
                out.push_str(n);
            }
            out.push('\n');
            for (t, row) in &w.samples {
                out.push_str(&format!("sample {t}"));
                for v in row {
                    out.push_str(&format!(" {v}"));
                }
                out.push('\n');
            }
        }
        if let Some(f) = &self.failure {
            out.push_str(&format!("failure {} {}\n", f.kind.as_str(), f.message.replace('\n', " ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Trace, TextFormatError> {
        let mut t = Trace::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some(rest) = line.strip_prefix("signals") {
                t.waveform = Some(Waveform {
                    names: rest.split_whitespace().map(str::to_string).collect(),
                    samples: Vec::new(),
                });
            } else if let Some(rest) = line.strip_prefix("sample ") {
                let w = t.waveform.as_mut().ok_or_else(|| bad(line))?;
                let mut it = rest.split_whitespace();
                let time = num(it.next(), line)?;
                let row = it
                    .map(|v| Value::parse(v).ok_or_else(|| bad(line)))
                    .collect::<Result<Vec<_>, _>>()?;
                w.samples.push((time, row));
            } else if let Some(rest) = line.strip_prefix("failure ") {
                let (k, msg) = rest.split_once(' ').unwrap_or((rest, ""));
                let kind = FailureKind::parse(k).ok_or_else(|| bad(line))?;
                t.failure = Some(RunFailure::new(kind, msg));
            } else {
                t.events.push(line.parse()?);
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let t = Trace {
            events: vec![
                TraceEvent::BreakpointSet { requested: 2, actual: Some(3) },
                TraceEvent::BreakpointSet { requested: 90, actual: None },
                TraceEvent::Paused { line: 3, reason: PauseReason::Breakpoint, time: 5 },
                TraceEvent::WaveOutput {
                    time: 5,
                    values: vec![("clk".into(), Value::known(1, 1)), ("q".into(), Value::x(2))],
                },
                TraceEvent::Finished { time: 400 },
            ],
            waveform: Some(Waveform {
                names: vec!["clk".into(), "q".into()],
                samples: vec![(0, vec![Value::known(1, 0), Value::z(2)])],
            }),
            failure: None,
        };
        let text = t.to_text();
        assert_eq!(
            text,
            "bp_set 2 3\nbp_set 90 -\npaused 3 breakpoint 5\nwave 5 clk=1'b1 q=2'bxx\nfinished 400\nsignals clk q\nsample 0 1'b0 2'bzz\n"
        );
        assert_eq!(Trace::from_text(&text).unwrap(), t);
    }

    #[test]
    fn actions_round_trip() {
        for a in [
            DebugAction::AddBp { line: 7 },
            DebugAction::RunAll,
            DebugAction::Step,
            DebugAction::Fold { start: 1, end: 10 },
            DebugAction::Unfold { start: 1 },
        ] {
            assert_eq!(a.to_string().parse::<DebugAction>().unwrap(), a);
        }
    }
}
