//! Eligibility analyses and site enumeration.

use std::collections::{BTreeMap, BTreeSet};

use crate::hdl::ast::*;
use crate::hdl::edit::{line_usage_outside, owners};
use crate::hdl::parser::{signal_table, SignalClass};
use crate::sim::value::Value;

use super::{RtlKind, SiteTarget, TransformSite};

pub fn enumerate_sites(unit: &SourceUnit, kind: RtlKind) -> Vec<TransformSite> {
    match kind {
        RtlKind::AssignConv => assign_conv_sites(unit),
        RtlKind::LiteralExpr => literal_sites(unit),
        RtlKind::BitMutate => bit_mutate_sites(unit),
        RtlKind::DeadLoop => dead_loop_sites(unit),
        RtlKind::IncludeInject => vec![TransformSite {
            kind,
            target: SiteTarget::Unit,
            evidence: "always eligible".into(),
        }],
        RtlKind::IncludeRemove => include_remove_sites(unit),
    }
}

// ---------------------------------------------------------------------------
// Assignment conversion
// ---------------------------------------------------------------------------

/// Names written (assignment targets and loop variables) and read anywhere
/// in a procedural body, with multiplicity.
pub(crate) struct BlockUsage {
    pub writes: BTreeMap<String, usize>,
    pub reads: BTreeMap<String, usize>,
}

pub(crate) fn block_usage(body: &Stmt) -> BlockUsage {
    let mut u = BlockUsage {
        writes: BTreeMap::new(),
        reads: BTreeMap::new(),
    };
    body.walk(&mut |s| {
        match &s.kind {
            StmtKind::Assign { lhs, .. } => *u.writes.entry(lhs.clone()).or_default() += 1,
            // the loop variable is written by both init and step
            StmtKind::For { var, .. } => *u.writes.entry(var.clone()).or_default() += 2,
            _ => {}
        }
        for e in s.exprs() {
            for n in e.idents() {
                *u.reads.entry(n.to_string()).or_default() += 1;
            }
        }
    });
    u
}

/// The assignment's target occurs nowhere else in the block and its
/// right-hand side reads nothing the block writes.
pub(crate) fn assign_isolated(usage: &BlockUsage, lhs: &str, rhs: &Expr) -> bool {
    usage.writes.get(lhs) == Some(&1)
        && !usage.reads.contains_key(lhs)
        && rhs.idents().iter().all(|n| !usage.writes.contains_key(*n))
}

fn assign_conv_sites(unit: &SourceUnit) -> Vec<TransformSite> {
    let mut out = Vec::new();
    for m in &unit.main().modules {
        for it in &m.items {
            let ItemKind::Always { body, .. } = &it.kind else { continue };
            let usage = block_usage(body);
            body.walk(&mut |s| {
                if let StmtKind::Assign { kind, lhs, rhs } = &s.kind {
                    if assign_isolated(&usage, lhs, rhs) {
                        out.push(TransformSite {
                            kind: RtlKind::AssignConv,
                            target: SiteTarget::Stmt { line: s.loc.line, col: s.loc.col },
                            evidence: format!(
                                "'{lhs}' ({}) is isolated in the block at line {}",
                                kind.op(),
                                it.loc.line
                            ),
                        });
                    }
                }
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Literal splitting
// ---------------------------------------------------------------------------

fn literal_sites(unit: &SourceUnit) -> Vec<TransformSite> {
    let mut out = Vec::new();
    for o in owners(unit.main()) {
        let mut index = 0;
        for e in &o.slots {
            e.walk(&mut |x| {
                if let ExprKind::Literal(l) = &x.kind {
                    if l.base != LiteralBase::Unsized {
                        out.push(TransformSite {
                            kind: RtlKind::LiteralExpr,
                            target: SiteTarget::Expr {
                                line: o.loc.line,
                                col: o.loc.col,
                                index,
                            },
                            evidence: format!("{}-bit literal with value {}", l.width, l.value),
                        });
                    }
                }
                index += 1;
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Double negation
// ---------------------------------------------------------------------------

/// Per module, the signals whose value may carry Z bits at some point.
///
/// A signal can be Z when it is an undriven net, an input of an instantiated
/// module, or a plain copy of such a signal. Any operator turns Z into X, so
/// only identifier chains propagate it.
pub fn may_be_z(unit: &SourceUnit) -> BTreeMap<String, BTreeSet<String>> {
    let modules: BTreeMap<&str, &Module> = unit
        .files
        .iter()
        .flat_map(|f| f.modules.iter())
        .map(|m| (m.name.as_str(), m))
        .collect();
    let instantiated: BTreeSet<&str> = modules
        .values()
        .flat_map(|m| m.items.iter())
        .filter_map(|it| match &it.kind {
            ItemKind::Instance { module, .. } => Some(module.as_str()),
            _ => None,
        })
        .collect();
    let mut memo: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for name in modules.keys() {
        module_may_z(name, &modules, &instantiated, &mut memo, &mut BTreeSet::new());
    }
    memo
}

fn module_may_z(
    name: &str,
    modules: &BTreeMap<&str, &Module>,
    instantiated: &BTreeSet<&str>,
    memo: &mut BTreeMap<String, BTreeSet<String>>,
    visiting: &mut BTreeSet<String>,
) -> BTreeSet<String> {
    if let Some(s) = memo.get(name) {
        return s.clone();
    }
    let Some(m) = modules.get(name) else { return BTreeSet::new() };
    if !visiting.insert(name.to_string()) {
        return BTreeSet::new();
    }
    let Ok(table) = signal_table(m) else { return BTreeSet::new() };

    let mut driven: BTreeSet<&str> = BTreeSet::new();
    // signal -> right-hand sides that may copy into it
    let mut copies: Vec<(&str, &Expr)> = Vec::new();
    // parent net driven by a child output port
    let mut child_outputs: Vec<(&str, bool)> = Vec::new();
    for it in &m.items {
        match &it.kind {
            ItemKind::ContinuousAssign { lhs, rhs } => {
                driven.insert(lhs);
                copies.push((lhs, rhs));
            }
            ItemKind::Always { body, .. } => body.walk(&mut |s| {
                if let StmtKind::Assign { lhs, rhs, .. } = &s.kind {
                    copies.push((lhs, rhs));
                }
            }),
            ItemKind::Instance { module, conns, .. } => {
                let child = module_may_z(module, modules, instantiated, memo, visiting);
                let child_m = modules.get(module.as_str());
                for c in conns {
                    let is_output = child_m
                        .and_then(|cm| cm.ports.iter().find(|p| p.name == c.port))
                        .is_some_and(|p| p.dir == Direction::Output);
                    if let (true, Some(Expr { kind: ExprKind::Ident(n), .. })) = (is_output, &c.expr) {
                        driven.insert(n);
                        child_outputs.push((n, child.contains(&c.port)));
                    }
                }
            }
            _ => {}
        }
    }

    let is_top = !instantiated.contains(name);
    let mut z: BTreeSet<String> = BTreeSet::new();
    for (sig, (class, _)) in &table {
        let undriven_net = class.is_net() && !driven.contains(sig.as_str());
        let floating_input = *class == SignalClass::InputPort && !is_top;
        if undriven_net || floating_input {
            z.insert(sig.clone());
        }
    }
    for (n, child_z) in &child_outputs {
        if *child_z {
            z.insert(n.to_string());
        }
    }
    loop {
        let before = z.len();
        for (lhs, rhs) in &copies {
            if copies_z(rhs, &z) {
                z.insert(lhs.to_string());
            }
        }
        if z.len() == before {
            break;
        }
    }
    visiting.remove(name);
    memo.insert(name.to_string(), z.clone());
    z
}

/// The expression may evaluate to a value with Z bits.
pub fn copies_z(e: &Expr, z: &BTreeSet<String>) -> bool {
    match &e.kind {
        ExprKind::Ident(n) => z.contains(n),
        ExprKind::Paren(inner) => copies_z(inner, z),
        _ => false,
    }
}

fn bit_mutate_sites(unit: &SourceUnit) -> Vec<TransformSite> {
    let zmap = may_be_z(unit);
    let empty = BTreeSet::new();
    let mut out = Vec::new();
    for o in owners(unit.main()) {
        let is_assign = match o.stmt {
            Some(s) => matches!(s.kind, StmtKind::Assign { .. }),
            None => matches!(o.item.kind, ItemKind::ContinuousAssign { .. }),
        };
        if !is_assign {
            continue;
        }
        let z = zmap.get(o.module).unwrap_or(&empty);
        let rhs = o.slots[0];
        let mut index = 0;
        rhs.walk(&mut |x| {
            let candidate = index == 0 || matches!(x.kind, ExprKind::Ident(_));
            if candidate && !copies_z(x, z) {
                out.push(TransformSite {
                    kind: RtlKind::BitMutate,
                    target: SiteTarget::Expr {
                        line: o.loc.line,
                        col: o.loc.col,
                        index,
                    },
                    evidence: if index == 0 { "assignment right-hand side".into() } else { "signal read".into() },
                });
            }
            index += 1;
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Unreachable loops
// ---------------------------------------------------------------------------

/// Evaluate with 4-state semantics, resolving identifiers through `env`.
pub fn eval_with(e: &Expr, env: &dyn Fn(&str) -> Option<Value>) -> Option<Value> {
    Some(match &e.kind {
        ExprKind::Literal(l) => Value::known(l.width, l.value),
        ExprKind::Ident(n) => env(n)?,
        ExprKind::Paren(x) => eval_with(x, env)?,
        ExprKind::Unary(op, x) => Value::unary(*op, eval_with(x, env)?),
        ExprKind::Binary(op, l, r) => Value::binary(*op, eval_with(l, env)?, eval_with(r, env)?),
    })
}

/// Iteration count of a loop whose header only involves constants and its
/// own variable, or `None` when it cannot be determined within `cap`.
pub fn const_trip_count(var: &str, width: u32, init: &Expr, cond: &Expr, step: &Expr, cap: u64) -> Option<u64> {
    let mut v = eval_with(init, &|_| None)?.resize(width);
    let mut n = 0;
    loop {
        let cur = v.clone();
        let env = move |name: &str| (name == var).then(|| cur.clone());
        if !eval_with(cond, &env)?.truth()? {
            return Some(n);
        }
        n += 1;
        if n > cap {
            return None;
        }
        v = eval_with(step, &env)?.resize(width);
    }
}

/// Every `for` statement in a body, with whether it sits under a `begin` block.
fn for_loops(body: &Stmt) -> Vec<(&Stmt, bool)> {
    fn go<'a>(s: &'a Stmt, in_block: bool, out: &mut Vec<(&'a Stmt, bool)>) {
        if let StmtKind::For { .. } = s.kind {
            out.push((s, in_block));
        }
        let block = matches!(s.kind, StmtKind::Block { .. });
        for c in s.children() {
            go(c, block, out);
        }
    }
    let mut out = Vec::new();
    go(body, false, &mut out);
    out
}

/// Reads of `var` in the module outside `for` loops over `var` itself.
fn read_outside_own_loops(m: &Module, var: &str) -> bool {
    fn stmt_reads(s: &Stmt, var: &str) -> bool {
        if let StmtKind::For { var: v, .. } = &s.kind {
            if v == var {
                return false;
            }
        }
        s.exprs().iter().any(|e| e.idents().contains(&var)) || s.children().iter().any(|c| stmt_reads(c, var))
    }
    m.items.iter().any(|it| match &it.kind {
        ItemKind::ContinuousAssign { rhs, .. } => rhs.idents().contains(&var),
        ItemKind::Instance { conns, .. } => conns
            .iter()
            .any(|c| c.expr.as_ref().is_some_and(|e| e.idents().contains(&var))),
        ItemKind::Always { body, .. } => stmt_reads(body, var),
        _ => false,
    })
}

/// Whether `var` is assigned before `target` in pre-order within `body`.
fn written_before(body: &Stmt, target: &Stmt, var: &str) -> bool {
    let mut found = false;
    let mut written = false;
    body.walk(&mut |s| {
        if found || std::ptr::eq(s, target) {
            found = true;
            return;
        }
        match &s.kind {
            StmtKind::Assign { lhs, .. } if lhs == var => written = true,
            StmtKind::For { var: v, .. } if v == var => written = true,
            _ => {}
        }
    });
    written
}

fn dead_loop_sites(unit: &SourceUnit) -> Vec<TransformSite> {
    let file = unit.main();
    let mut out = Vec::new();
    for m in &file.modules {
        let Ok(table) = signal_table(m) else { continue };
        for it in &m.items {
            let ItemKind::Always { body, .. } = &it.kind else { continue };
            for (s, in_block) in for_loops(body) {
                let StmtKind::For { var, init, cond, .. } = &s.kind else { continue };
                if !in_block || table.get(var).map(|x| x.0) != Some(SignalClass::Integer) {
                    continue;
                }
                let Some(v0) = eval_with(init, &|_| None) else { continue };
                let v0 = v0.resize(32);
                let guard = eval_with(cond, &|n| (n == var).then(|| v0.clone()));
                if guard.and_then(|g| g.truth()) != Some(false) {
                    continue;
                }
                if written_before(body, s, var) || read_outside_own_loops(m, var) {
                    continue;
                }
                if !line_usage_outside(file, s).is_empty() {
                    continue;
                }
                let (lo, hi) = stmt_line_span(s);
                out.push(TransformSite {
                    kind: RtlKind::DeadLoop,
                    target: SiteTarget::Stmt { line: s.loc.line, col: s.loc.col },
                    evidence: format!("guard false at entry ({var} = {v0}); lines {lo}-{hi}"),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Includes
// ---------------------------------------------------------------------------

pub(crate) fn instantiated_modules(unit: &SourceUnit) -> BTreeSet<String> {
    unit.files
        .iter()
        .flat_map(|f| f.modules.iter())
        .flat_map(|m| m.items.iter())
        .filter_map(|it| match &it.kind {
            ItemKind::Instance { module, .. } => Some(module.clone()),
            _ => None,
        })
        .collect()
}

fn include_remove_sites(unit: &SourceUnit) -> Vec<TransformSite> {
    let used = instantiated_modules(unit);
    let main = unit.main();
    let mut line_users: BTreeMap<u32, usize> = BTreeMap::new();
    let mut u = SourceUnit { files: vec![main.clone()] };
    u.for_each_loc_mut(0, &mut |l| *line_users.entry(l.line).or_default() += 1);
    let mut out = Vec::new();
    for inc in &main.includes {
        let Some(fi) = unit.file_index(&inc.path).filter(|&i| i > 0) else { continue };
        let defines: Vec<&str> = unit.files[fi].modules.iter().map(|m| m.name.as_str()).collect();
        if defines.iter().any(|d| used.contains(*d)) {
            continue;
        }
        if line_users.get(&inc.loc.line) != Some(&1) || main.comments.contains_key(&inc.loc.line) {
            continue;
        }
        out.push(TransformSite {
            kind: RtlKind::IncludeRemove,
            target: SiteTarget::Include { line: inc.loc.line },
            evidence: format!("\"{}\" defines nothing in use", inc.path),
        });
    }
    out
}
