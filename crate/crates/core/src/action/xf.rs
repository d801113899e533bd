use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use super::{Plan, Planned, Role, RunCheck};
use crate::hdl::ast::*;
use crate::hdl::layout::{line_classes, points_on_line, slide_target};
use crate::hdl::linemap::LineMap;
use crate::hdl::parser::signal_table;
use crate::rtl::sites::const_trip_count;
use crate::trace::DebugAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActKind {
    AddBreakpoint,
    BreakpointSlide,
    IfElseProbe,
    StepForLoop,
    CodeFold,
}

impl ActKind {
    pub const ALL: [ActKind; 5] = [
        ActKind::AddBreakpoint,
        ActKind::BreakpointSlide,
        ActKind::IfElseProbe,
        ActKind::StepForLoop,
        ActKind::CodeFold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActKind::AddBreakpoint => "add-breakpoint",
            ActKind::BreakpointSlide => "breakpoint-slide",
            ActKind::IfElseProbe => "if-else-probe",
            ActKind::StepForLoop => "step-for-loop",
            ActKind::CodeFold => "code-fold",
        }
    }
}

impl fmt::Display for ActKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown action transformation '{s}'"))
    }
}

/// One applied action transformation. `detail` holds its line numbers:
/// `[l]`, `[p, l]`, `[then, else]`, `[body, count]` or `[start, end, l]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActRecord {
    pub kind: ActKind,
    pub detail: Vec<u64>,
}

impl ActRecord {
    /// Carry the record's line numbers through `map`; lines the map drops
    /// stay as they were.
    pub fn remap(&self, map: &LineMap) -> ActRecord {
        let lines = match self.kind {
            ActKind::AddBreakpoint | ActKind::StepForLoop => 1,
            ActKind::BreakpointSlide | ActKind::IfElseProbe => 2,
            ActKind::CodeFold => 3,
        };
        let detail = self
            .detail
            .iter()
            .enumerate()
            .map(|(i, &d)| match (i < lines, u32::try_from(d)) {
                (true, Ok(l)) => map.map(l).map_or(d, u64::from),
                _ => d,
            })
            .collect();
        ActRecord { kind: self.kind, detail }
    }
}

impl fmt::Display for ActRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for d in &self.detail {
            write!(f, " {d}")?;
        }
        Ok(())
    }
}

impl FromStr for ActRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = s.split_whitespace();
        let kind = w.next().ok_or("empty record")?.parse()?;
        let detail = w
            .map(|x| x.parse().map_err(|_| format!("bad number in '{s}'")))
            .collect::<Result<_, _>>()?;
        Ok(ActRecord { kind, detail })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error("no breakpoint has a comment or blank line that slides onto it")]
    NoSlideSite,
    #[error("no if statement with two probe-able branches")]
    NoBranchSite,
    #[error("no for loop with a constant trip count")]
    NoLoopSite,
    #[error("no foldable region above a planned breakpoint")]
    NoFoldSite,
}

pub type ActWeights = [u32; 5];

pub const UNIFORM_ACT: ActWeights = [1; 5];

/// Trip counts above this are not probed.
const MAX_PROBED_TRIPS: u64 = 4096;

/// Positions in the breakpoint prefix where a new action can go without
/// splitting a fold bracket.
fn insertion_points(plan: &Plan) -> Vec<usize> {
    let prefix = plan
        .steps
        .iter()
        .position(|p| matches!(p.action, DebugAction::RunAll | DebugAction::Step))
        .unwrap_or(plan.steps.len());
    let mut depth = 0i32;
    let mut out = vec![0];
    for (i, p) in plan.steps[..prefix].iter().enumerate() {
        match (p.role, p.action) {
            (Role::Bracket, DebugAction::Fold { .. }) => depth += 1,
            (Role::Bracket, DebugAction::Unfold { .. }) => depth -= 1,
            _ => {}
        }
        if depth == 0 {
            out.push(i + 1);
        }
    }
    out
}

fn insert_extra(plan: &mut Plan, line: u32, rng: &mut impl Rng) {
    let pts = insertion_points(plan);
    let at = pts[rng.gen_range(0..pts.len())];
    plan.steps.insert(
        at,
        Planned {
            action: DebugAction::AddBp { line },
            role: Role::Extra,
        },
    );
}

/// Untouched base breakpoints: (step index, line).
fn base_breakpoints(plan: &Plan) -> Vec<(usize, u32)> {
    plan.steps
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match (p.role, p.action) {
            (Role::Base, DebugAction::AddBp { line }) => Some((i, line)),
            _ => None,
        })
        .collect()
}

fn instance_counts(unit: &SourceUnit) -> BTreeMap<String, usize> {
    let mut n = BTreeMap::new();
    for m in unit.files.iter().flat_map(|f| f.modules.iter()) {
        for it in &m.items {
            if let ItemKind::Instance { module, .. } = &it.kind {
                *n.entry(module.clone()).or_default() += 1;
            }
        }
    }
    n
}

/// Statements of main-file modules that run at most once per activation of
/// their block: not inside a loop, in a module instantiated at most once.
fn single_activation_stmts(unit: &SourceUnit) -> Vec<(&Module, &Stmt)> {
    fn go<'a>(m: &'a Module, s: &'a Stmt, in_for: bool, out: &mut Vec<(&'a Module, &'a Stmt)>) {
        if !in_for {
            out.push((m, s));
        }
        let inner = in_for || matches!(s.kind, StmtKind::For { .. });
        for c in s.children() {
            go(m, c, inner, out);
        }
    }
    let counts = instance_counts(unit);
    let mut out = Vec::new();
    for m in &unit.main().modules {
        if counts.get(&m.name).copied().unwrap_or(0) > 1 {
            continue;
        }
        for it in &m.items {
            if let ItemKind::Always { body, .. } = &it.kind {
                go(m, body, false, &mut out);
            }
        }
    }
    out
}

fn first_point_line(s: &Stmt) -> Option<u32> {
    let mut found = None;
    s.walk(&mut |x| {
        if found.is_none() && x.is_point() {
            found = Some(x.loc.line);
        }
    });
    found
}

/// (then head, else head) of every if/else whose two branch heads can be
/// told apart by line.
pub fn branch_sites(unit: &SourceUnit) -> Vec<(u32, u32)> {
    let main = unit.main();
    let mut out = Vec::new();
    for (_, s) in single_activation_stmts(unit) {
        let StmtKind::If {
            then_branch,
            else_branch: Some(e),
            ..
        } = &s.kind
        else {
            continue;
        };
        let (Some(a), Some(b)) = (first_point_line(then_branch), first_point_line(&e.stmt)) else {
            continue;
        };
        if a != b && points_on_line(main, a) == 1 && points_on_line(main, b) == 1 {
            out.push((a, b));
        }
    }
    out
}

/// (body head line, trip count) of every loop with a constant trip count.
pub fn loop_sites(unit: &SourceUnit) -> Vec<(u32, u64)> {
    let main = unit.main();
    let mut out = Vec::new();
    for (m, s) in single_activation_stmts(unit) {
        let StmtKind::For {
            var,
            init,
            cond,
            step,
            body,
        } = &s.kind
        else {
            continue;
        };
        let head = match &body.kind {
            StmtKind::Block { stmts, .. } => stmts.first().filter(|x| x.is_point()),
            _ => Some(body.as_ref()).filter(|x| x.is_point()),
        };
        let Some(head) = head else { continue };
        let mut writes_var = false;
        body.walk(&mut |x| match &x.kind {
            StmtKind::Assign { lhs, .. } if lhs == var => writes_var = true,
            StmtKind::For { var: v, .. } if v == var => writes_var = true,
            _ => {}
        });
        let Some(width) = signal_table(m).ok().and_then(|t| t.get(var).map(|x| x.1)) else { continue };
        if writes_var || points_on_line(main, head.loc.line) != 1 {
            continue;
        }
        if let Some(n) = const_trip_count(var, width, init, cond, step, MAX_PROBED_TRIPS) {
            out.push((head.loc.line, n));
        }
    }
    out
}

/// Regions of at least three lines: module bodies and begin/end blocks.
pub fn fold_regions(unit: &SourceUnit) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for m in &unit.main().modules {
        out.push((m.loc.line, m.end_loc.line));
        for it in &m.items {
            if let ItemKind::Always { body, .. } = &it.kind {
                body.walk(&mut |s| {
                    if let StmtKind::Block { end_loc, .. } = &s.kind {
                        out.push((s.loc.line, end_loc.line));
                    }
                });
            }
        }
    }
    out.retain(|(s, e)| e - s >= 2);
    out.sort();
    out.dedup();
    out
}

/// Apply one action transformation to a plan.
pub fn apply_act(plan: &Plan, unit: &SourceUnit, kind: ActKind, rng: &mut impl Rng) -> Result<(Plan, ActRecord), ActError> {
    let mut p = plan.clone();
    let main = unit.main();
    let detail = match kind {
        ActKind::AddBreakpoint => {
            let line = rng.gen_range(1..=main.line_count.max(1));
            insert_extra(&mut p, line, rng);
            vec![line as u64]
        }
        ActKind::BreakpointSlide => {
            let table = line_classes(main);
            let mut cands = Vec::new();
            for (i, l) in base_breakpoints(&p) {
                if table.get(l as usize - 1) != Some(&LineClass::Executable) {
                    continue;
                }
                let mut q = l - 1;
                while q >= 1 && table[q as usize - 1] != LineClass::Executable {
                    let quiet = matches!(table[q as usize - 1], LineClass::Comment | LineClass::Blank);
                    if quiet && slide_target(main, &table, q) == Some(l) {
                        cands.push((i, q, l));
                    }
                    q -= 1;
                }
            }
            if cands.is_empty() {
                return Err(ActError::NoSlideSite);
            }
            let (i, from, to) = cands[rng.gen_range(0..cands.len())];
            p.steps[i] = Planned {
                action: DebugAction::AddBp { line: from },
                role: Role::Slid { to },
            };
            vec![from as u64, to as u64]
        }
        ActKind::IfElseProbe => {
            let sites = branch_sites(unit);
            if sites.is_empty() {
                return Err(ActError::NoBranchSite);
            }
            let (a, b) = sites[rng.gen_range(0..sites.len())];
            insert_extra(&mut p, a, rng);
            insert_extra(&mut p, b, rng);
            p.checks.push(RunCheck::Branch {
                then_line: a,
                else_line: b,
            });
            vec![a as u64, b as u64]
        }
        ActKind::StepForLoop => {
            let sites = loop_sites(unit);
            if sites.is_empty() {
                return Err(ActError::NoLoopSite);
            }
            let (line, count) = sites[rng.gen_range(0..sites.len())];
            insert_extra(&mut p, line, rng);
            p.checks.push(RunCheck::LoopCount { line, count });
            vec![line as u64, count]
        }
        ActKind::CodeFold => {
            let regions = fold_regions(unit);
            let mut cands = Vec::new();
            // the bracket may not displace the plan's leading breakpoint
            for (i, l) in base_breakpoints(&p).into_iter().filter(|&(i, _)| i > 0) {
                for &(s, e) in &regions {
                    if e < l {
                        cands.push((i, s, e, l));
                    }
                }
            }
            if cands.is_empty() {
                return Err(ActError::NoFoldSite);
            }
            let (i, s, e, l) = cands[rng.gen_range(0..cands.len())];
            let view = l - (e - s);
            p.steps.splice(
                i..=i,
                [
                    Planned {
                        action: DebugAction::Fold { start: s, end: e },
                        role: Role::Bracket,
                    },
                    Planned {
                        action: DebugAction::AddBp { line: view },
                        role: Role::View { source: l },
                    },
                    Planned {
                        action: DebugAction::Unfold { start: s },
                        role: Role::Bracket,
                    },
                ],
            );
            vec![s as u64, e as u64, l as u64]
        }
    };
    Ok((p, ActRecord { kind, detail }))
}

/// Apply up to `m` randomly chosen applicable action transformations.
/// Returns the transformed plan, the records, and whether it stopped early.
pub fn act_pipeline(
    plan: &Plan,
    unit: &SourceUnit,
    m: usize,
    weights: &ActWeights,
    rng: &mut impl Rng,
) -> (Plan, Vec<ActRecord>, bool) {
    assert!(m >= 1, "iteration count must be at least 1");
    let mut cur = plan.clone();
    let mut records = Vec::new();
    for _ in 0..m {
        let mut open: Vec<ActKind> = ActKind::ALL
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0)
            .map(|(&k, _)| k)
            .collect();
        let mut applied = false;
        while !open.is_empty() {
            let total: u32 = open.iter().map(|k| weights[*k as usize]).sum();
            let mut pick = rng.gen_range(0..total);
            let idx = open
                .iter()
                .position(|k| {
                    let w = weights[*k as usize];
                    let hit = pick < w;
                    if !hit {
                        pick -= w;
                    }
                    hit
                })
                .expect("weighted pick in range");
            let kind = open.remove(idx);
            if let Ok((next, rec)) = apply_act(&cur, unit, kind, rng) {
                cur = next;
                records.push(rec);
                applied = true;
                break;
            }
        }
        if !applied {
            return (cur, records, true);
        }
    }
    (cur, records, false)
}
