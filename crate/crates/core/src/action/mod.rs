//! Debug-action plans, the base policy, and the interactive policy that
//! executes transformed plans.

mod xf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::diff::Expectation;
use crate::hdl::ast::SourceUnit;
use crate::hdl::layout::{executable_lines, line_classes};
use crate::hdl::linemap::LineMap;
use crate::sim::{ActionPolicy, SessionView};
use crate::trace::{DebugAction, PauseReason, TraceEvent};

pub use xf::{act_pipeline, apply_act, branch_sites, fold_regions, loop_sites, ActError, ActKind, ActRecord, ActWeights, UNIFORM_ACT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Base,
    /// A breakpoint a transformation added; its pauses are not base behavior.
    Extra,
    /// A base breakpoint moved onto a non-executable line that slides to `to`.
    Slid { to: u32 },
    /// A base breakpoint expressed in folded-view coordinates.
    View { source: u32 },
    /// Fold or unfold around a view breakpoint.
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Planned {
    pub action: DebugAction,
    pub role: Role,
}

impl Planned {
    pub fn base(action: DebugAction) -> Self {
        Self { action, role: Role::Base }
    }
}

/// Checks a transformation attaches to the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunCheck {
    /// At most one of the two branch heads pauses in any time step.
    Branch { then_line: u32, else_line: u32 },
    /// The loop body head pauses `count` times in every step it pauses at all.
    LoopCount { line: u32, count: u64 },
}

/// An ordered action script plus the checks that come with it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<Planned>,
    pub checks: Vec<RunCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Actions in a base plan.
    pub cap: usize,
    /// Probability that a base run action is RunAll rather than Step.
    pub run_all_ratio: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            cap: 256,
            run_all_ratio: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("the design has no executable lines")]
    NoExecutableLines,
}

/// 1 to 4 breakpoints on distinct executable lines, then RunAll/Step up to the cap.
pub fn base_policy(unit: &SourceUnit, cfg: &PolicyConfig, rng: &mut impl Rng) -> Result<Plan, PolicyError> {
    let lines = executable_lines(&line_classes(unit.main()));
    if lines.is_empty() {
        return Err(PolicyError::NoExecutableLines);
    }
    let n = rng.gen_range(1..=4).min(lines.len());
    let mut steps: Vec<Planned> = lines
        .choose_multiple(rng, n)
        .map(|&line| Planned::base(DebugAction::AddBp { line }))
        .collect();
    while steps.len() < cfg.cap.max(n + 1) {
        let a = if rng.gen_bool(cfg.run_all_ratio) {
            DebugAction::RunAll
        } else {
            DebugAction::Step
        };
        steps.push(Planned::base(a));
    }
    Ok(Plan { steps, checks: Vec::new() })
}

impl Plan {
    pub fn actions(&self) -> Vec<DebugAction> {
        self.steps.iter().map(|p| p.action).collect()
    }

    pub fn is_base_only(&self) -> bool {
        self.checks.is_empty() && self.steps.iter().all(|p| p.role == Role::Base)
    }

    /// Carry the plan over to a variant whose lines relate through `map`.
    /// Breakpoints on deleted lines are dropped.
    pub fn remap(&self, map: &LineMap) -> Plan {
        let mut steps = Vec::new();
        let mut fold = None;
        for p in &self.steps {
            let action = match (p.action, p.role) {
                // view lines are folded-view coordinates; rebuild them from the source line
                (DebugAction::AddBp { .. }, Role::View { source }) => match (map.map(source), fold) {
                    (Some(s), Some((start, end))) if s > end => DebugAction::AddBp { line: s - (end - start) },
                    _ => continue,
                },
                (DebugAction::AddBp { line }, _) => match map.map(line) {
                    Some(line) => DebugAction::AddBp { line },
                    None => continue,
                },
                (DebugAction::Fold { start, end }, _) => match (map.map(start), map.map(end)) {
                    (Some(start), Some(end)) => {
                        fold = Some((start, end));
                        DebugAction::Fold { start, end }
                    }
                    _ => {
                        fold = None;
                        continue;
                    }
                },
                (DebugAction::Unfold { start }, _) => match map.map(start) {
                    Some(start) => DebugAction::Unfold { start },
                    None => continue,
                },
                (a, _) => a,
            };
            let role = match p.role {
                Role::Slid { to } => Role::Slid {
                    to: map.map(to).unwrap_or(to),
                },
                Role::View { source } => Role::View {
                    source: map.map(source).unwrap_or(source),
                },
                r => r,
            };
            steps.push(Planned { action, role });
        }
        let checks = self
            .checks
            .iter()
            .filter_map(|c| match *c {
                RunCheck::Branch { then_line, else_line } => Some(RunCheck::Branch {
                    then_line: map.map(then_line)?,
                    else_line: map.map(else_line)?,
                }),
                RunCheck::LoopCount { line, count } => Some(RunCheck::LoopCount {
                    line: map.map(line)?,
                    count,
                }),
            })
            .collect();
        Plan { steps, checks }
    }

    /// One planned action per line (`<action> [extra|slide N|view N|bracket]`),
    /// then `expect branch A B` / `expect count L N` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.steps {
            out.push_str(&p.action.to_string());
            match p.role {
                Role::Base => {}
                Role::Extra => out.push_str(" extra"),
                Role::Slid { to } => out.push_str(&format!(" slide {to}")),
                Role::View { source } => out.push_str(&format!(" view {source}")),
                Role::Bracket => out.push_str(" bracket"),
            }
            out.push('\n');
        }
        for c in &self.checks {
            match c {
                RunCheck::Branch { then_line, else_line } => out.push_str(&format!("expect branch {then_line} {else_line}\n")),
                RunCheck::LoopCount { line, count } => out.push_str(&format!("expect count {line} {count}\n")),
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Plan, String> {
        let mut plan = Plan::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || format!("malformed plan line '{line}'");
            if let Some(rest) = line.strip_prefix("expect ") {
                let w: Vec<&str> = rest.split_whitespace().collect();
                let num = |i: usize| w.get(i).and_then(|x| x.parse::<u64>().ok()).ok_or_else(bad);
                plan.checks.push(match w.first() {
                    Some(&"branch") if w.len() == 3 => RunCheck::Branch {
                        then_line: num(1)? as u32,
                        else_line: num(2)? as u32,
                    },
                    Some(&"count") if w.len() == 3 => RunCheck::LoopCount {
                        line: num(1)? as u32,
                        count: num(2)?,
                    },
                    _ => return Err(bad()),
                });
                continue;
            }
            let w: Vec<&str> = line.split_whitespace().collect();
            let arity = match w[0] {
                "add_bp" | "unfold" => 2,
                "fold" => 3,
                _ => 1,
            };
            if w.len() < arity {
                return Err(bad());
            }
            let action: DebugAction = w[..arity].join(" ").parse().map_err(|_| bad())?;
            let num = |i: usize| w.get(i).and_then(|x| x.parse::<u32>().ok()).ok_or_else(bad);
            let role = match &w[arity..] {
                [] => Role::Base,
                ["extra"] => Role::Extra,
                ["bracket"] => Role::Bracket,
                ["slide", _] => Role::Slid { to: num(arity + 1)? },
                ["view", _] => Role::View { source: num(arity + 1)? },
                _ => return Err(bad()),
            };
            plan.steps.push(Planned { action, role });
        }
        Ok(plan)
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Plan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Plan::from_text(s)
    }
}

/// Breakpoint roles in the order their BreakpointSet events appear.
fn bp_roles(plan: &Plan) -> Vec<(Role, u32)> {
    plan.steps
        .iter()
        .filter_map(|p| match p.action {
            DebugAction::AddBp { line } => Some((p.role, line)),
            _ => None,
        })
        .collect()
}

/// Lines whose breakpoint pauses come only from added breakpoints.
fn extra_lines(roles: &[(Role, u32)], actuals: &[Option<u32>]) -> BTreeSet<u32> {
    let mut base = BTreeSet::new();
    let mut extra = BTreeSet::new();
    for ((role, _), actual) in roles.iter().zip(actuals) {
        if let Some(a) = actual {
            if *role == Role::Extra {
                extra.insert(*a);
            } else {
                base.insert(*a);
            }
        }
    }
    extra.difference(&base).copied().collect()
}

/// Executes a plan. Breakpoint pauses caused only by added breakpoints are
/// resumed with RunAll at once, so the base actions see the same states as
/// in the untransformed run.
#[derive(Debug, Clone)]
pub struct PlanPolicy {
    plan: Plan,
    roles: Vec<(Role, u32)>,
    pos: usize,
    seen: usize,
    actuals: Vec<Option<u32>>,
    extra: BTreeSet<u32>,
}

impl PlanPolicy {
    pub fn new(plan: Plan) -> Self {
        Self {
            roles: bp_roles(&plan),
            plan,
            pos: 0,
            seen: 0,
            actuals: Vec::new(),
            extra: BTreeSet::new(),
        }
    }
}

impl ActionPolicy for PlanPolicy {
    fn next(&mut self, _view: &SessionView, trace: &[TraceEvent]) -> Option<DebugAction> {
        let mut grew = false;
        for e in &trace[self.seen..] {
            if let TraceEvent::BreakpointSet { actual, .. } = e {
                self.actuals.push(*actual);
                grew = true;
            }
        }
        self.seen = trace.len();
        if grew {
            self.extra = extra_lines(&self.roles, &self.actuals);
        }
        let last_pause = trace.iter().rev().take(2).find_map(|e| match e {
            TraceEvent::Paused { line, reason, .. } => Some((*line, *reason)),
            _ => None,
        });
        if let Some((line, PauseReason::Breakpoint)) = last_pause {
            if self.extra.contains(&line) {
                return Some(DebugAction::RunAll);
            }
        }
        let a = self.plan.steps.get(self.pos).map(|p| p.action);
        self.pos += 1;
        a
    }
}

/// Turn a plan's annotations into expectations, using what the run produced.
pub fn resolve_expectations(plan: &Plan, trace: &[TraceEvent]) -> Vec<Expectation> {
    let roles = bp_roles(plan);
    let actuals: Vec<Option<u32>> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::BreakpointSet { actual, .. } => Some(*actual),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (k, (role, line)) in roles.iter().enumerate() {
        if k >= actuals.len() {
            if *role != Role::Base {
                out.push(Expectation::Unresolved {
                    what: format!("breakpoint #{k} requested at line {line} was never confirmed"),
                });
            }
            continue;
        }
        match *role {
            Role::Extra => out.push(Expectation::ExcludeBreakpointSet { ordinal: k }),
            Role::Slid { to } => out.push(Expectation::ExpectSlideEquivalence { ordinal: k, from: *line, to }),
            Role::View { source } => out.push(Expectation::ViewBreakpoint {
                ordinal: k,
                view: *line,
                source,
            }),
            Role::Base | Role::Bracket => {}
        }
    }
    let n = roles.len().min(actuals.len());
    let extra = extra_lines(&roles[..n], &actuals[..n]);
    if !extra.is_empty() {
        out.push(Expectation::ExcludePausesAt { lines: extra });
    }
    let mut pause_times: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
    for e in trace {
        if let TraceEvent::Paused { line, time, .. } = e {
            pause_times.entry(*line).or_default().insert(*time);
        }
    }
    for c in &plan.checks {
        match *c {
            RunCheck::LoopCount { line, count } => out.push(Expectation::ExpectPauseCount { line, count }),
            RunCheck::Branch { then_line, else_line } => {
                let taken = |l: u32| pause_times.get(&l).cloned().unwrap_or_default();
                out.push(Expectation::ExpectNoPauseAt {
                    line: else_line,
                    times: taken(then_line),
                });
                out.push(Expectation::ExpectNoPauseAt {
                    line: then_line,
                    times: taken(else_line),
                });
            }
        }
    }
    out
}
