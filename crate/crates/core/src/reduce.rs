//! Shrinks a bug-triggering case to a small reproducer.
//!
//! The design is reduced first by removing halves of every child list
//! (blank lines, comments, modules, module items, block statements,
//! identifier operands) and re-splitting on failure, to a fixed point. The base action plan is reduced next with
//! the same scheme. A candidate counts only if it parses, elaborates, keeps
//! its transformation records replayable, and reproduces the original
//! classification, category included.

use std::collections::BTreeSet;
use std::time::Duration;

use thiserror::Error;

use crate::action::{Plan, Role};
use crate::campaign::{execute_case, CaseInputs, Classification, Target};
use crate::hdl::ast::*;
use crate::hdl::edit::{delete_lines, occupied_lines};
use crate::hdl::{parse_set, render_set, LineMap};
use crate::rtl::{apply_record, RtlRecord, SiteTarget, TransformResult};
use crate::sim::{elaborate, SimConfig};
use crate::trace::DebugAction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("the case does not reproduce: expected {expected}, got {got}")]
    NonReproducible { expected: Classification, got: Classification },
}

#[derive(Debug, Clone)]
pub struct ReduceConfig {
    pub target: Target,
    pub sim: SimConfig,
    pub run_budget: Duration,
    /// Upper bound on predicate evaluations.
    pub max_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Reduced {
    pub inputs: CaseInputs,
    /// Original seed lines to reduced seed lines.
    pub line_map: LineMap,
    pub evaluations: usize,
    /// The evaluation budget ran out; `inputs` is the best found so far.
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ListAddr {
    /// Lines holding nothing.
    Blank,
    /// Identifier operands outside loop headers; removing one replaces it
    /// with a zero literal.
    Operands,
    Comments,
    Modules,
    Items(usize),
    /// Statements of a begin/end block: module, item, then the child path
    /// from the always body (block: statement index, if: 0 then / 1 else,
    /// for: 0 body).
    Stmts(usize, usize, Vec<usize>),
}

fn child_mut(s: &mut Stmt, i: usize) -> Option<&mut Stmt> {
    match &mut s.kind {
        StmtKind::Block { stmts, .. } => stmts.get_mut(i),
        StmtKind::If {
            then_branch, else_branch, ..
        } => match i {
            0 => Some(then_branch),
            1 => else_branch.as_mut().map(|e| e.stmt.as_mut()),
            _ => None,
        },
        StmtKind::For { body, .. } if i == 0 => Some(body),
        _ => None,
    }
}

fn block_at<'a>(unit: &'a mut SourceUnit, m: usize, it: usize, path: &[usize]) -> Option<&'a mut Vec<Stmt>> {
    let ItemKind::Always { body, .. } = &mut unit.files[0].modules.get_mut(m)?.items.get_mut(it)?.kind else {
        return None;
    };
    let mut s: &mut Stmt = body;
    for &i in path {
        s = child_mut(s, i)?;
    }
    match &mut s.kind {
        StmtKind::Block { stmts, .. } => Some(stmts),
        _ => None,
    }
}

fn all_lists(unit: &SourceUnit) -> Vec<ListAddr> {
    fn blocks(s: &Stmt, path: &mut Vec<usize>, m: usize, it: usize, out: &mut Vec<ListAddr>) {
        if matches!(s.kind, StmtKind::Block { .. }) {
            out.push(ListAddr::Stmts(m, it, path.clone()));
        }
        let kids: Vec<(usize, &Stmt)> = match &s.kind {
            StmtKind::Block { stmts, .. } => stmts.iter().enumerate().collect(),
            StmtKind::If {
                then_branch, else_branch, ..
            } => {
                let mut v = vec![(0, then_branch.as_ref())];
                if let Some(e) = else_branch {
                    v.push((1, e.stmt.as_ref()));
                }
                v
            }
            StmtKind::For { body, .. } => vec![(0, body.as_ref())],
            StmtKind::Assign { .. } => Vec::new(),
        };
        for (i, c) in kids {
            path.push(i);
            blocks(c, path, m, it, out);
            path.pop();
        }
    }
    let mut out = vec![ListAddr::Blank, ListAddr::Comments, ListAddr::Modules];
    for (m, module) in unit.main().modules.iter().enumerate() {
        out.push(ListAddr::Items(m));
        for (it, item) in module.items.iter().enumerate() {
            if let ItemKind::Always { body, .. } = &item.kind {
                blocks(body, &mut Vec::new(), m, it, &mut out);
            }
        }
    }
    out.push(ListAddr::Operands);
    out
}

/// Visit identifier operands in a fixed order.
fn for_each_operand(unit: &mut SourceUnit, f: &mut dyn FnMut(&mut Expr)) {
    fn expr(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
        match &mut e.kind {
            ExprKind::Ident(_) => f(e),
            ExprKind::Literal(_) => {}
            ExprKind::Unary(_, x) | ExprKind::Paren(x) => expr(x, f),
            ExprKind::Binary(_, l, r) => {
                expr(l, f);
                expr(r, f);
            }
        }
    }
    fn stmt(s: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
        match &mut s.kind {
            StmtKind::Assign { rhs, .. } => expr(rhs, f),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                expr(cond, f);
                stmt(then_branch, f);
                if let Some(e) = else_branch {
                    stmt(&mut e.stmt, f);
                }
            }
            StmtKind::For { body, .. } => stmt(body, f),
            StmtKind::Block { stmts, .. } => stmts.iter_mut().for_each(|s| stmt(s, f)),
        }
    }
    for m in &mut unit.files[0].modules {
        for it in &mut m.items {
            match &mut it.kind {
                ItemKind::ContinuousAssign { rhs, .. } => expr(rhs, f),
                ItemKind::Always { body, .. } => stmt(body, f),
                ItemKind::Instance { conns, .. } => conns.iter_mut().filter_map(|c| c.expr.as_mut()).for_each(|e| expr(e, f)),
                _ => {}
            }
        }
    }
}

fn operand_count(unit: &SourceUnit) -> usize {
    let mut n = 0;
    for_each_operand(&mut unit.clone(), &mut |_| n += 1);
    n
}

fn blank_lines(unit: &SourceUnit) -> Vec<u32> {
    let occupied = occupied_lines(unit.main());
    (1..=unit.main().line_count).filter(|l| !occupied.contains(l)).collect()
}

fn list_len(unit: &SourceUnit, addr: &ListAddr) -> usize {
    let mut u = unit.clone();
    match addr {
        ListAddr::Blank => blank_lines(unit).len(),
        ListAddr::Operands => operand_count(unit),
        ListAddr::Comments => unit.main().comments.len(),
        ListAddr::Modules => unit.main().modules.len(),
        ListAddr::Items(m) => unit.main().modules.get(*m).map_or(0, |x| x.items.len()),
        ListAddr::Stmts(m, it, p) => block_at(&mut u, *m, *it, p).map_or(0, |v| v.len()),
    }
}

/// Remove `range` of the list and the lines it leaves empty.
fn remove_range(unit: &SourceUnit, addr: &ListAddr, range: std::ops::Range<usize>) -> Option<(SourceUnit, LineMap)> {
    let mut u = unit.clone();
    if *addr == ListAddr::Blank {
        let lines: BTreeSet<u32> = blank_lines(unit).get(range)?.iter().copied().collect();
        let map = delete_lines(&mut u, 0, &lines);
        return Some((u, map));
    }
    if *addr == ListAddr::Operands {
        if range.end > operand_count(unit) {
            return None;
        }
        let mut k = 0;
        for_each_operand(&mut u, &mut |e| {
            if range.contains(&k) {
                *e = Expr::literal(Literal::sized(1, 0, LiteralBase::Hex), e.loc);
            }
            k += 1;
        });
        return Some((u, LineMap::identity()));
    }
    let before = occupied_lines(u.main());
    match addr {
        ListAddr::Blank | ListAddr::Operands => unreachable!(),
        ListAddr::Comments => {
            let keys: Vec<u32> = u.files[0].comments.keys().copied().collect();
            for k in keys.get(range)? {
                u.files[0].comments.remove(k);
            }
        }
        ListAddr::Modules => {
            // instances of a removed module go with it
            let gone: BTreeSet<String> = u.files[0].modules.drain(range).map(|m| m.name).collect();
            for m in &mut u.files[0].modules {
                m.items
                    .retain(|it| !matches!(&it.kind, ItemKind::Instance { module, .. } if gone.contains(module)));
            }
        }
        ListAddr::Items(m) => {
            u.files[0].modules.get_mut(*m)?.items.drain(range);
        }
        ListAddr::Stmts(m, it, p) => {
            block_at(&mut u, *m, *it, p)?.drain(range);
        }
    }
    let after = occupied_lines(u.main());
    let freed: BTreeSet<u32> = before.difference(&after).copied().collect();
    let map = delete_lines(&mut u, 0, &freed);
    Some((u, map))
}

fn with_line(t: SiteTarget, line: u32) -> SiteTarget {
    match t {
        SiteTarget::Stmt { col, .. } => SiteTarget::Stmt { line, col },
        SiteTarget::Expr { col, index, .. } => SiteTarget::Expr { line, col, index },
        SiteTarget::Include { .. } => SiteTarget::Include { line },
        SiteTarget::Unit => SiteTarget::Unit,
    }
}

fn target_line(t: SiteTarget) -> Option<u32> {
    match t {
        SiteTarget::Stmt { line, .. } | SiteTarget::Expr { line, .. } | SiteTarget::Include { line } => Some(line),
        SiteTarget::Unit => None,
    }
}

/// Re-express records in the coordinates of `new_unit`, which is `old_unit`
/// with the lines `deleted` removed, and replay them there. Records listed
/// in `drop`, or whose site was deleted, are left out.
fn carry_records(
    old_unit: &SourceUnit,
    records: &[RtlRecord],
    deleted: &BTreeSet<u32>,
    drop: &BTreeSet<usize>,
    new_unit: &SourceUnit,
) -> Option<TransformResult> {
    let first = LineMap::deletion(deleted);
    // old round-k line (index l - 1) to new round-k line
    let mut trans: Vec<Option<u32>> = (1..=old_unit.main().line_count).map(|l| first.map(l)).collect();
    let mut old_variant = old_unit.clone();
    let mut cur = TransformResult {
        variant: new_unit.clone(),
        line_map: LineMap::identity(),
        records: Vec::new(),
        stopped_early: false,
    };
    for (k, r) in records.iter().enumerate() {
        let moved = match target_line(r.target) {
            Some(l) => trans.get(l as usize - 1).copied().flatten().map(|t| with_line(r.target, t)),
            None => Some(r.target),
        };
        let new_step = match moved {
            Some(target) if !drop.contains(&k) => {
                let moved = RtlRecord {
                    kind: r.kind,
                    target,
                    params: r.params.clone(),
                };
                let step = apply_record(&cur.variant, &moved).ok()?;
                cur.variant = step.variant;
                cur.line_map = cur.line_map.compose(&step.line_map);
                cur.records.push(moved);
                Some(step.line_map)
            }
            _ => None,
        };
        let old_step = apply_record(&old_variant, r).ok()?;
        old_variant = old_step.variant;
        let mut next = Vec::with_capacity(old_variant.main().line_count as usize);
        for l in 1..=old_variant.main().line_count {
            let t = match old_step.line_map.unmap(l) {
                Some(p) => trans.get(p as usize - 1).copied().flatten().and_then(|t| match &new_step {
                    Some(m) => m.map(t),
                    None => Some(t),
                }),
                // a line the record inserted: follow its predecessor
                None if new_step.is_some() => next.last().copied().flatten().map(|t: u32| t + 1),
                None => None,
            };
            next.push(t);
        }
        trans = next;
    }
    Some(cur)
}

/// Base steps of a plan line up one-to-one with the non-extra,
/// non-bracket steps of its transformed plan.
fn aligned(base: &Plan, act: &Plan) -> bool {
    let n = act.steps.iter().filter(|p| !matches!(p.role, Role::Extra | Role::Bracket)).count();
    n == base.steps.len()
}

fn starts_with_breakpoint(p: &Plan) -> bool {
    matches!(p.steps.first().map(|s| s.action), Some(DebugAction::AddBp { .. }))
}

/// Drop base steps `drop` from the transformed plan, with the fold
/// brackets around any view breakpoint that goes.
fn drop_counterparts(act: &Plan, drop: &BTreeSet<usize>) -> Plan {
    let mut gone = BTreeSet::new();
    let mut k = 0;
    for (i, p) in act.steps.iter().enumerate() {
        if matches!(p.role, Role::Extra | Role::Bracket) {
            continue;
        }
        if drop.contains(&k) {
            gone.insert(i);
            if matches!(p.role, Role::View { .. }) {
                gone.insert(i - 1);
                gone.insert(i + 1);
            }
        }
        k += 1;
    }
    Plan {
        steps: act
            .steps
            .iter()
            .enumerate()
            .filter(|(i, _)| !gone.contains(i))
            .map(|(_, p)| *p)
            .collect(),
        checks: act.checks.clone(),
    }
}

/// Build the case for a design with lines removed; `None` if invalid.
fn candidate(cur: &CaseInputs, unit: SourceUnit, step: &LineMap) -> Option<CaseInputs> {
    let unit = parse_set(&render_set(&unit)).ok()?;
    elaborate(&unit).ok()?;
    let base = cur.base.remap(step);
    if !starts_with_breakpoint(&base) {
        return None;
    }
    let pro = match &cur.pro {
        Some(p) => Some(carry_records(&cur.unit, &p.records, step.deleted(), &BTreeSet::new(), &unit)?),
        None => None,
    };
    let act = match &cur.act {
        Some((plan, recs)) => {
            let plan = plan.remap(step);
            if !starts_with_breakpoint(&plan) || !aligned(&base, &plan) {
                return None;
            }
            Some((plan, recs.iter().map(|r| r.remap(step)).collect()))
        }
        None => None,
    };
    Some(CaseInputs { unit, base, pro, act })
}

fn without_record(cur: &CaseInputs, k: usize) -> Option<CaseInputs> {
    let pro = cur.pro.as_ref()?;
    if k >= pro.records.len() {
        return None;
    }
    let carried = carry_records(&cur.unit, &pro.records, &BTreeSet::new(), &BTreeSet::from([k]), &cur.unit)?;
    Some(CaseInputs {
        pro: Some(carried),
        ..cur.clone()
    })
}

fn without_steps(cur: &CaseInputs, drop: &BTreeSet<usize>) -> Option<CaseInputs> {
    let base = Plan {
        steps: cur
            .base
            .steps
            .iter()
            .enumerate()
            .filter(|(j, _)| !drop.contains(j))
            .map(|(_, p)| *p)
            .collect(),
        checks: cur.base.checks.clone(),
    };
    let act = cur.act.as_ref().map(|(p, r)| (drop_counterparts(p, drop), r.clone()));
    let ok = starts_with_breakpoint(&base) && act.as_ref().is_none_or(|(p, _)| starts_with_breakpoint(p));
    ok.then(|| CaseInputs {
        unit: cur.unit.clone(),
        base,
        pro: cur.pro.clone(),
        act,
    })
}

fn without_extra(cur: &CaseInputs, i: usize) -> Option<CaseInputs> {
    let (plan, recs) = cur.act.as_ref()?;
    if plan.steps.get(i)?.role != Role::Extra {
        return None;
    }
    let mut steps = plan.steps.clone();
    steps.remove(i);
    let plan = Plan {
        steps,
        checks: plan.checks.clone(),
    };
    starts_with_breakpoint(&plan).then(|| CaseInputs {
        act: Some((plan, recs.clone())),
        ..cur.clone()
    })
}

/// Every well-formed case one removal away from `inputs`: one list element
/// of the design, one transformation record, one base step or one extra
/// breakpoint. A reduced case is 1-minimal when none of these reproduces.
pub fn single_removals(inputs: &CaseInputs) -> Vec<CaseInputs> {
    let mut out = Vec::new();
    for addr in all_lists(&inputs.unit) {
        for i in 0..list_len(&inputs.unit, &addr) {
            if let Some(c) = remove_range(&inputs.unit, &addr, i..i + 1).and_then(|(u, step)| candidate(inputs, u, &step)) {
                out.push(c);
            }
        }
    }
    let records = inputs.pro.as_ref().map_or(0, |p| p.records.len());
    out.extend((0..records).filter_map(|k| without_record(inputs, k)));
    out.extend((0..inputs.base.steps.len()).filter_map(|i| without_steps(inputs, &BTreeSet::from([i]))));
    let extras = inputs.act.as_ref().map_or(0, |(p, _)| p.steps.len());
    out.extend((0..extras).filter_map(|i| without_extra(inputs, i)));
    out
}

struct Reducer<'a> {
    cfg: &'a ReduceConfig,
    expected: Classification,
    cur: CaseInputs,
    map: LineMap,
    evaluations: usize,
    exhausted: bool,
}

impl Reducer<'_> {
    fn holds(&mut self, c: &CaseInputs) -> bool {
        if self.evaluations >= self.cfg.max_evaluations {
            self.exhausted = true;
            return false;
        }
        self.evaluations += 1;
        execute_case(c, &self.cfg.target, &self.cfg.sim, self.cfg.run_budget).classification == self.expected
    }

    fn accept(&mut self, unit: SourceUnit, step: LineMap) -> bool {
        let Some(c) = candidate(&self.cur, unit, &step) else { return false };
        if !self.holds(&c) {
            return false;
        }
        self.cur = c;
        self.map = self.map.compose(&step);
        true
    }

    fn halve(&mut self, addr: &ListAddr) -> bool {
        let mut progress = false;
        let mut size = list_len(&self.cur.unit, addr);
        while size >= 1 && !self.exhausted {
            let mut i = 0;
            while i < list_len(&self.cur.unit, addr) && !self.exhausted {
                let end = (i + size).min(list_len(&self.cur.unit, addr));
                let removed = remove_range(&self.cur.unit, addr, i..end).is_some_and(|(u, step)| self.accept(u, step));
                if removed {
                    progress = true;
                } else {
                    i += size;
                }
            }
            if size == 1 {
                break;
            }
            size = size.div_ceil(2);
        }
        progress
    }

    fn reduce_design(&mut self) -> bool {
        let mut any = false;
        loop {
            let mut progress = false;
            let mut k = 0;
            loop {
                let lists = all_lists(&self.cur.unit);
                let Some(addr) = lists.get(k) else { break };
                progress |= self.halve(addr);
                k += 1;
            }
            any |= progress;
            if !progress || self.exhausted {
                return any;
            }
        }
    }

    fn reduce_records(&mut self) -> bool {
        let mut progress = false;
        let Some(pro) = self.cur.pro.clone() else { return false };
        let mut k = pro.records.len();
        while k > 0 && !self.exhausted {
            k -= 1;
            let Some(c) = without_record(&self.cur, k) else { continue };
            if self.holds(&c) {
                self.cur = c;
                progress = true;
            }
        }
        progress
    }

    fn reduce_actions(&mut self) -> bool {
        let mut progress = false;
        let mut size = self.cur.base.steps.len();
        while size >= 1 && !self.exhausted {
            let mut i = 0;
            while i < self.cur.base.steps.len() && !self.exhausted {
                let end = (i + size).min(self.cur.base.steps.len());
                let drop: BTreeSet<usize> = (i..end).collect();
                let c = without_steps(&self.cur, &drop);
                if let Some(c) = c.filter(|c| self.holds(c)) {
                    self.cur = c;
                    progress = true;
                } else {
                    i += size;
                }
            }
            if size == 1 {
                break;
            }
            size = size.div_ceil(2);
        }
        progress | self.reduce_extras()
    }

    /// Breakpoints that exist only in the transformed plan.
    fn reduce_extras(&mut self) -> bool {
        let mut progress = false;
        let mut i = 0;
        while let Some((plan, _)) = &self.cur.act {
            if i >= plan.steps.len() || self.exhausted {
                break;
            }
            match without_extra(&self.cur, i).filter(|c| self.holds(c)) {
                Some(c) => {
                    self.cur = c;
                    progress = true;
                }
                None => i += 1,
            }
        }
        progress
    }
}

/// Reduce a case while its classification stays `expected`.
pub fn reduce(inputs: &CaseInputs, expected: Classification, cfg: &ReduceConfig) -> Result<Reduced, ReduceError> {
    let got = execute_case(inputs, &cfg.target, &cfg.sim, cfg.run_budget).classification;
    if got != expected {
        return Err(ReduceError::NonReproducible { expected, got });
    }
    let mut r = Reducer {
        cfg,
        expected,
        cur: inputs.clone(),
        map: LineMap::identity(),
        evaluations: 1,
        exhausted: false,
    };
    loop {
        let design = r.reduce_design();
        let records = r.reduce_records();
        let actions = r.reduce_actions();
        if !(design || records || actions) || r.exhausted {
            break;
        }
    }
    Ok(Reduced {
        inputs: r.cur,
        line_map: r.map,
        evaluations: r.evaluations,
        budget_exceeded: r.exhausted,
    })
}
