//! Resumable cycle executor.
//!
//! Time advances in clock edges at `period/2 + k*period`. At every edge each
//! always block runs against the pre-edge state plus its own blocking writes;
//! blocking writes commit at the end of the edge, then non-blocking writes in
//! program order, then continuous assignments settle in topological order.
//! Execution stops in front of every execution point so the debugger can
//! decide whether to pause there.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::elab::{CExpr, CStmt, Design, PointId, SigId, StmtId};
use super::value::Value;
use crate::hdl::ast::AssignKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("for loop exceeded {0} iterations")]
    LoopLimit(u32),
}

/// Where execution is about to continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    pub point: PointId,
    /// Iteration index of the innermost enclosing `for`, if any.
    pub loop_iter: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
enum Frame {
    Exec(StmtId),
    ForCond(StmtId, u32),
    ForStep(StmtId, u32),
}

#[derive(Clone)]
enum Phase {
    Settle {
        idx: usize,
    },
    Procs {
        proc: usize,
        stack: Vec<Frame>,
        overlay: HashMap<SigId, Value>,
        pending: Vec<(SigId, Value)>,
        nba: Vec<(SigId, Value)>,
    },
    Done,
}

#[derive(Clone)]
pub struct Machine {
    d: Arc<Design>,
    state: Vec<Value>,
    time: u64,
    next_edge: u64,
    period: u64,
    total: u64,
    loop_cap: u32,
    /// Commit non-blocking writes immediately (a deliberate scheduler bug).
    nba_immediate: bool,
    phase: Phase,
    waves: Vec<(u64, Vec<Value>)>,
}

impl Machine {
    pub fn new(d: Arc<Design>, period: u64, total: u64, loop_cap: u32, nba_immediate: bool) -> Self {
        Self {
            state: d.signals.iter().map(|s| s.init).collect(),
            d,
            time: 0,
            next_edge: 0,
            period,
            total,
            loop_cap,
            nba_immediate,
            phase: Phase::Settle { idx: 0 },
            waves: Vec::new(),
        }
    }

    pub fn design(&self) -> &Arc<Design> {
        &self.d
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done)
    }

    pub fn waves(&self) -> &[(u64, Vec<Value>)] {
        &self.waves
    }

    fn clock_value(&self, t: u64) -> Value {
        let half = self.period / 2;
        Value::known(1, (t >= half && (t - half) % self.period < self.period - half) as u64)
    }

    /// Committed value of a signal as a waveform viewer would show it now.
    pub fn value(&self, s: SigId) -> Value {
        if Some(s) == self.d.clock {
            self.clock_value(self.time)
        } else {
            self.state[s]
        }
    }

    fn sample(&mut self) {
        let row = self.d.wave_signals.iter().map(|&s| self.value(s)).collect();
        self.waves.push((self.time, row));
    }

    fn read(&self, s: SigId) -> Value {
        if let Phase::Procs { overlay, .. } = &self.phase {
            if let Some(v) = overlay.get(&s) {
                return *v;
            }
        }
        self.state[s]
    }

    fn write(&mut self, s: SigId, v: Value, kind: AssignKind) {
        let v = v.resize(self.d.signals[s].width);
        let immediate = self.nba_immediate;
        match &mut self.phase {
            Phase::Procs { overlay, nba, .. } => match kind {
                AssignKind::Blocking => {
                    overlay.insert(s, v);
                }
                AssignKind::NonBlocking if immediate => self.state[s] = v,
                AssignKind::NonBlocking => nba.push((s, v)),
            },
            _ => self.state[s] = v,
        }
    }

    fn eval(&self, e: &CExpr) -> Value {
        e.eval(&|s| self.read(s))
    }

    fn start_edge_or_finish(&mut self) {
        let t = self.period / 2 + self.next_edge * self.period;
        if t < self.total && !self.d.processes.is_empty() {
            self.time = t;
            self.next_edge += 1;
            if let Some(c) = self.d.clock {
                self.state[c] = Value::known(1, 1);
            }
            self.phase = Phase::Procs {
                proc: 0,
                stack: vec![Frame::Exec(self.d.processes[0])],
                overlay: HashMap::new(),
                pending: Vec::new(),
                nba: Vec::new(),
            };
        } else {
            self.time = self.total;
            self.phase = Phase::Done;
            self.sample();
        }
    }

    /// Run silent work until an execution point is next. `None` once the
    /// simulation has reached its end time.
    pub fn peek(&mut self) -> Result<Option<Cursor>, SimError> {
        let d = Arc::clone(&self.d);
        loop {
            match &mut self.phase {
                Phase::Done => return Ok(None),
                Phase::Settle { idx } => {
                    let i = *idx;
                    if i == d.cassigns.len() {
                        self.sample();
                        self.start_edge_or_finish();
                        continue;
                    }
                    let ca = &d.cassigns[i];
                    if let Some(p) = ca.point {
                        return Ok(Some(Cursor {
                            point: p,
                            loop_iter: None,
                        }));
                    }
                    *idx += 1;
                    let v = self.eval(&ca.rhs);
                    self.write(ca.lhs, v, AssignKind::Blocking);
                }
                Phase::Procs {
                    proc,
                    stack,
                    overlay,
                    pending,
                    nba,
                } => {
                    let Some(top) = stack.last().copied() else {
                        pending.extend(overlay.drain());
                        *proc += 1;
                        if *proc < d.processes.len() {
                            stack.push(Frame::Exec(d.processes[*proc]));
                            continue;
                        }
                        let pending = std::mem::take(pending);
                        let nba = std::mem::take(nba);
                        for (s, v) in pending.into_iter().chain(nba) {
                            self.state[s] = v;
                        }
                        self.phase = Phase::Settle { idx: 0 };
                        continue;
                    };
                    match top {
                        Frame::Exec(id) => match &d.stmts[id] {
                            CStmt::Assign { point, .. } | CStmt::If { point, .. } => {
                                let loop_iter = stack.iter().rev().find_map(|f| match f {
                                    Frame::ForStep(_, n) => Some(*n),
                                    _ => None,
                                });
                                return Ok(Some(Cursor {
                                    point: *point,
                                    loop_iter,
                                }));
                            }
                            CStmt::Block(v) => {
                                stack.pop();
                                stack.extend(v.iter().rev().map(|&c| Frame::Exec(c)));
                            }
                            CStmt::For { var, init, .. } => {
                                stack.pop();
                                stack.push(Frame::ForCond(id, 0));
                                let v = self.eval(init);
                                self.write(*var, v, AssignKind::Blocking);
                            }
                        },
                        Frame::ForCond(id, n) => {
                            let CStmt::For { cond, body, .. } = &d.stmts[id] else { unreachable!() };
                            stack.pop();
                            if n >= self.loop_cap {
                                return Err(SimError::LoopLimit(self.loop_cap));
                            }
                            if self.eval(cond).truth() == Some(true) {
                                if let Phase::Procs { stack, .. } = &mut self.phase {
                                    stack.push(Frame::ForStep(id, n));
                                    stack.push(Frame::Exec(*body));
                                }
                            }
                        }
                        Frame::ForStep(id, n) => {
                            let CStmt::For { var, step, .. } = &d.stmts[id] else { unreachable!() };
                            stack.pop();
                            stack.push(Frame::ForCond(id, n + 1));
                            let v = self.eval(step);
                            self.write(*var, v, AssignKind::Blocking);
                        }
                    }
                }
            }
        }
    }

    /// Execute the point returned by the last `peek`.
    pub fn exec_point(&mut self) {
        let d = Arc::clone(&self.d);
        match &mut self.phase {
            Phase::Settle { idx } => {
                let ca = &d.cassigns[*idx];
                *idx += 1;
                let v = self.eval(&ca.rhs);
                self.write(ca.lhs, v, AssignKind::Blocking);
            }
            Phase::Procs { stack, .. } => {
                let Some(Frame::Exec(id)) = stack.pop() else {
                    panic!("exec_point without a pending point")
                };
                match &d.stmts[id] {
                    CStmt::Assign { kind, lhs, rhs, .. } => {
                        let v = self.eval(rhs);
                        self.write(*lhs, v, *kind);
                    }
                    CStmt::If {
                        cond,
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        // X and Z conditions take the else branch
                        let taken = if self.eval(cond).truth() == Some(true) {
                            Some(*then_branch)
                        } else {
                            *else_branch
                        };
                        if let (Some(b), Phase::Procs { stack, .. }) = (taken, &mut self.phase) {
                            stack.push(Frame::Exec(b));
                        }
                    }
                    _ => panic!("exec_point on a non-point statement"),
                }
            }
            Phase::Done => panic!("exec_point after the end of simulation"),
        }
    }
}
