//! Interactive debugger session over the reference simulator.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use super::elab::{elaborate, Design, ElabError};
use super::machine::{Cursor, Machine, SimError};
use super::{Fault, FaultSet, SimConfig};
use crate::hdl::ast::{LineClass, SourceLoc, SourceUnit};
use crate::hdl::layout::{line_classes, slide_target, LineClassTable};
use crate::trace::{DebugAction, PauseReason, RunFailure, Trace, TraceEvent, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmState {
    PausedNotStarted,
    /// Only observable from inside `apply`.
    Running,
    PausedAtBreakpoint,
    PausedAfterStep,
    Finished,
}

impl FsmState {
    pub fn is_paused(self) -> bool {
        matches!(
            self,
            FsmState::PausedNotStarted | FsmState::PausedAtBreakpoint | FsmState::PausedAfterStep
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("action rejected: {0}")]
    ActionRejected(String),
    #[error("simulation exceeded its wall-clock budget")]
    SimTimeout,
    #[error("simulation error: {0}")]
    Sim(#[from] SimError),
}

#[derive(Clone)]
pub struct Session {
    unit: Arc<SourceUnit>,
    classes: LineClassTable,
    machine: Machine,
    cfg: SimConfig,
    faults: FaultSet,
    fsm: FsmState,
    /// (requested, actual) in the order they were added.
    breakpoints: Vec<(u32, Option<u32>)>,
    bp_lines: BTreeSet<u32>,
    folds: Vec<(u32, u32)>,
    cursor: Option<Cursor>,
}

pub fn start_session(unit: &SourceUnit, cfg: &SimConfig, faults: &FaultSet) -> Result<Session, ElabError> {
    let design = Arc::new(elaborate(unit)?);
    let machine = Machine::new(
        Arc::clone(&design),
        cfg.clock_period,
        cfg.total_time,
        cfg.loop_cap,
        faults.contains(&Fault::NonBlockingAsBlocking),
    );
    Ok(Session {
        classes: line_classes(unit.main()),
        unit: Arc::new(unit.clone()),
        machine,
        cfg: cfg.clone(),
        faults: faults.clone(),
        fsm: FsmState::PausedNotStarted,
        breakpoints: Vec::new(),
        bp_lines: BTreeSet::new(),
        folds: Vec::new(),
        cursor: None,
    })
}

impl Session {
    pub fn state(&self) -> FsmState {
        self.fsm
    }

    pub fn sim_time(&self) -> u64 {
        self.machine.time()
    }

    pub fn design(&self) -> &Arc<Design> {
        self.machine.design()
    }

    pub fn breakpoints(&self) -> &[(u32, Option<u32>)] {
        &self.breakpoints
    }

    pub fn folds(&self) -> &[(u32, u32)] {
        &self.folds
    }

    /// Location of the statement that will execute next, when paused at one.
    pub fn statement_cursor(&self) -> Option<SourceLoc> {
        self.cursor.map(|c| self.machine.design().points[c.point].loc)
    }

    /// Top-level signal values as shown in a pause snapshot.
    pub fn top_values(&self) -> Vec<(String, super::Value)> {
        let d = self.machine.design();
        d.top_signals
            .iter()
            .map(|&s| (d.signals[s].name.clone(), self.machine.value(s)))
            .collect()
    }

    pub fn waveform(&self) -> Waveform {
        let d = self.machine.design();
        Waveform {
            names: d.wave_signals.iter().map(|&s| d.signals[s].name.clone()).collect(),
            samples: self.machine.waves().to_vec(),
        }
    }

    fn has(&self, f: Fault) -> bool {
        self.faults.contains(&f)
    }

    /// Translate a line shown in the folded view to its source line.
    pub fn view_to_source(&self, view: u32) -> u32 {
        let mut outer: Vec<(u32, u32)> = self
            .folds
            .iter()
            .copied()
            .filter(|&(s, e)| !self.folds.iter().any(|&(s2, e2)| (s2, e2) != (s, e) && s2 <= s && e <= e2))
            .collect();
        outer.sort();
        let mut src = view;
        for (s, e) in outer {
            if s < src {
                src += e - s;
            } else {
                break;
            }
        }
        src
    }

    pub fn apply(&mut self, action: DebugAction) -> Result<Vec<TraceEvent>, SessionError> {
        if !self.fsm.is_paused() {
            return Err(SessionError::ActionRejected(format!("{action} while {:?}", self.fsm)));
        }
        match action {
            DebugAction::AddBp { line } => self.add_breakpoint(line),
            DebugAction::RunAll => self.resume(false),
            DebugAction::Step => self.resume(true),
            DebugAction::Fold { start, end } => {
                if start == 0 || start >= end {
                    return Err(SessionError::ActionRejected(format!("bad fold region {start}..{end}")));
                }
                let clash = self.folds.iter().any(|&(s, e)| {
                    let nested = (s <= start && end <= e) || (start <= s && e <= end);
                    let disjoint = end < s || e < start;
                    s == start || !(nested || disjoint)
                });
                if clash {
                    return Err(SessionError::ActionRejected(format!(
                        "fold {start}..{end} overlaps an existing fold"
                    )));
                }
                self.folds.push((start, end));
                Ok(Vec::new())
            }
            DebugAction::Unfold { start } => match self.folds.iter().position(|&(s, _)| s == start) {
                Some(i) => {
                    self.folds.remove(i);
                    Ok(Vec::new())
                }
                None => Err(SessionError::ActionRejected(format!("no fold starts at line {start}"))),
            },
        }
    }

    fn add_breakpoint(&mut self, requested: u32) -> Result<Vec<TraceEvent>, SessionError> {
        if requested == 0 {
            return Err(SessionError::ActionRejected("line 0".into()));
        }
        let src = if self.has(Fault::FoldIgnoresView) {
            requested
        } else {
            self.view_to_source(requested)
        };
        let actual = if self.has(Fault::NoSliding) {
            (self.classes.get(src as usize - 1) == Some(&LineClass::Executable)).then_some(src)
        } else {
            slide_target(self.unit.main(), &self.classes, src)
        };
        self.breakpoints.push((requested, actual));
        if let Some(a) = actual {
            self.bp_lines.insert(a);
        }
        Ok(vec![TraceEvent::BreakpointSet { requested, actual }])
    }

    fn hits_breakpoint(&self, c: Cursor) -> bool {
        let loc = self.machine.design().points[c.point].loc;
        loc.file == 0
            && self.bp_lines.contains(&loc.line)
            && !(self.has(Fault::LoopFirstHitSkipped) && c.loop_iter == Some(0))
    }

    fn stops_step(&self, c: Cursor) -> bool {
        let p = &self.machine.design().points[c.point];
        p.loc.file == 0 && (self.cfg.step_into_instances || p.in_top)
    }

    fn resume(&mut self, step: bool) -> Result<Vec<TraceEvent>, SessionError> {
        let started = Instant::now();
        let prev = self.fsm;
        self.fsm = FsmState::Running;
        if prev != FsmState::PausedNotStarted && self.cursor.take().is_some() {
            self.machine.exec_point();
        }
        let mut n: u64 = 0;
        loop {
            n += 1;
            if n % 1024 == 0 && started.elapsed() > self.cfg.action_budget {
                self.fsm = prev;
                return Err(SessionError::SimTimeout);
            }
            let next = match self.machine.peek() {
                Ok(x) => x,
                Err(e) => {
                    self.fsm = FsmState::Finished;
                    return Err(e.into());
                }
            };
            let Some(c) = next else {
                self.fsm = FsmState::Finished;
                return Ok(vec![TraceEvent::Finished { time: self.machine.time() }]);
            };
            let reason = if step && self.stops_step(c) {
                Some(PauseReason::StepDone)
            } else if !step && self.hits_breakpoint(c) {
                Some(PauseReason::Breakpoint)
            } else {
                None
            };
            match reason {
                Some(reason) => return Ok(self.pause(c, reason)),
                None => self.machine.exec_point(),
            }
        }
    }

    fn pause(&mut self, c: Cursor, reason: PauseReason) -> Vec<TraceEvent> {
        self.cursor = Some(c);
        self.fsm = match reason {
            PauseReason::Breakpoint => FsmState::PausedAtBreakpoint,
            PauseReason::StepDone => FsmState::PausedAfterStep,
        };
        let mut line = self.machine.design().points[c.point].loc.line;
        if self.has(Fault::PauseLineOffByOne) {
            line += 1;
        }
        let time = self.machine.time();
        vec![
            TraceEvent::Paused { line, reason, time },
            TraceEvent::WaveOutput {
                time,
                values: self.top_values(),
            },
        ]
    }
}

/// What a policy may see of the session when choosing its next action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionView {
    pub finished: bool,
    pub actions_taken: usize,
}

/// Interactive source of debug actions. `None` ends the run.
pub trait ActionPolicy {
    fn next(&mut self, view: &SessionView, trace: &[TraceEvent]) -> Option<DebugAction>;
}

/// A running debugger, in-process or behind an adapter.
pub trait DebugSession {
    fn apply(&mut self, action: DebugAction) -> Result<Vec<TraceEvent>, RunFailure>;
    fn is_finished(&self) -> bool;
    /// Per-edge waveform log, when the target exposes one.
    fn waveform(&mut self) -> Option<Waveform>;
}

impl DebugSession for Session {
    fn apply(&mut self, action: DebugAction) -> Result<Vec<TraceEvent>, RunFailure> {
        Session::apply(self, action).map_err(|e| match e {
            SessionError::SimTimeout => RunFailure::new(crate::trace::FailureKind::Timeout, e.to_string()),
            _ => RunFailure::new(crate::trace::FailureKind::Crash, e.to_string()),
        })
    }

    fn is_finished(&self) -> bool {
        self.fsm == FsmState::Finished
    }

    fn waveform(&mut self) -> Option<Waveform> {
        Some(Session::waveform(self))
    }
}

/// Upper bound on actions sent in one run, including ones a policy adds on
/// its own while the run is in progress.
pub const HARD_ACTION_CAP: usize = 1 << 16;

/// Drive `session` with `policy` until the policy stops, the session
/// finishes, or a failure occurs.
pub fn run_to_completion(session: &mut dyn DebugSession, policy: &mut dyn ActionPolicy) -> Trace {
    let mut trace = Trace::default();
    let mut taken = 0;
    while !session.is_finished() && taken < HARD_ACTION_CAP {
        let view = SessionView {
            finished: false,
            actions_taken: taken,
        };
        let Some(a) = policy.next(&view, &trace.events) else { break };
        taken += 1;
        match session.apply(a) {
            Ok(evs) => trace.events.extend(evs),
            Err(f) => {
                trace.failure = Some(f);
                break;
            }
        }
    }
    if trace.failure.is_none() {
        trace.waveform = session.waveform();
    }
    trace
}

/// Replays a fixed list of actions.
#[derive(Debug, Clone)]
pub struct ScriptPolicy {
    actions: Vec<DebugAction>,
    pos: usize,
}

impl ScriptPolicy {
    pub fn new(actions: Vec<DebugAction>) -> Self {
        Self { actions, pos: 0 }
    }
}

impl ActionPolicy for ScriptPolicy {
    fn next(&mut self, _view: &SessionView, _trace: &[TraceEvent]) -> Option<DebugAction> {
        let a = self.actions.get(self.pos).copied();
        self.pos += 1;
        a
    }
}
