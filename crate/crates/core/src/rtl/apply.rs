use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::hdl::ast::*;
use crate::hdl::edit::{delete_lines, insert_lines, nth_expr, nth_expr_mut, owner_slots_mut, owners, remove_file, stmt_at_mut};
use crate::hdl::linemap::LineMap;

use super::sites::enumerate_sites;
use super::{RtlKind, RtlParams, RtlRecord, SiteTarget, SplitOp, TransformError, TransformResult, TransformSite};

fn ineligible(kind: RtlKind, target: SiteTarget, reason: impl Into<String>) -> TransformError {
    TransformError::IneligibleSite {
        kind,
        target,
        reason: reason.into(),
    }
}

fn target_loc(t: SiteTarget) -> Option<SourceLoc> {
    match t {
        SiteTarget::Stmt { line, col } | SiteTarget::Expr { line, col, .. } => Some(SourceLoc::new(0, line, col)),
        _ => None,
    }
}

fn literal_at(unit: &SourceUnit, target: SiteTarget) -> Option<Literal> {
    let SiteTarget::Expr { index, .. } = target else { return None };
    let loc = target_loc(target)?;
    let all = owners(unit.main());
    let o = all.iter().find(|o| o.loc == loc)?;
    match nth_expr(&o.slots, index)?.kind {
        ExprKind::Literal(l) => Some(l),
        _ => None,
    }
}

/// Draw the random parameters for `site` and apply it.
pub fn apply_site(unit: &SourceUnit, site: &TransformSite, rng: &mut impl Rng) -> Result<TransformResult, TransformError> {
    let params = match site.kind {
        RtlKind::LiteralExpr => {
            let l = literal_at(unit, site.target).ok_or_else(|| ineligible(site.kind, site.target, "no literal at site"))?;
            let n = l.value;
            if rng.gen_bool(0.5) {
                let a = rng.gen_range(0..=n);
                RtlParams::Split { op: SplitOp::Add, a, b: n - a }
            } else {
                let c = rng.gen_range(n..=mask(l.width));
                RtlParams::Split { op: SplitOp::Sub, a: c, b: c - n }
            }
        }
        RtlKind::IncludeInject => {
            let count = rng.gen_range(1..=3);
            let mut taken = taken_names(unit);
            let mut names = Vec::new();
            while names.len() < count {
                let n = format!("inc_{:06x}", rng.gen_range(0..0x100_0000u32));
                if taken.insert(n.clone()) {
                    names.push(n);
                }
            }
            RtlParams::Inject { names }
        }
        _ => RtlParams::None,
    };
    apply_record(
        unit,
        &RtlRecord {
            kind: site.kind,
            target: site.target,
            params,
        },
    )
}

/// Module names and include stems already present in the unit.
fn taken_names(unit: &SourceUnit) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = unit
        .files
        .iter()
        .flat_map(|f| f.modules.iter().map(|m| m.name.clone()))
        .collect();
    for f in &unit.files {
        s.insert(f.path.trim_end_matches(".vh").to_string());
    }
    s
}

/// Apply a fully specified transformation, re-checking eligibility.
pub fn apply_record(unit: &SourceUnit, r: &RtlRecord) -> Result<TransformResult, TransformError> {
    let (kind, target) = (r.kind, r.target);
    if kind != RtlKind::IncludeInject && !enumerate_sites(unit, kind).iter().any(|s| s.target == target) {
        return Err(ineligible(kind, target, "eligibility check failed"));
    }
    let mut v = unit.clone();
    let line_map = match (kind, &r.params) {
        (RtlKind::AssignConv, RtlParams::None) => {
            let s = find_stmt(&mut v, target).ok_or_else(|| ineligible(kind, target, "no statement"))?;
            if let StmtKind::Assign { kind: k, .. } = &mut s.kind {
                *k = k.flipped();
            }
            LineMap::identity()
        }
        (RtlKind::LiteralExpr, RtlParams::Split { op, a, b }) => {
            let lit = literal_at(unit, target).ok_or_else(|| ineligible(kind, target, "no literal at site"))?;
            let m = mask(lit.width);
            let exact = match op {
                SplitOp::Add => a.checked_add(*b) == Some(lit.value),
                SplitOp::Sub => a >= b && a - b == lit.value,
            };
            if !exact || *a > m || *b > m {
                return Err(ineligible(kind, target, format!("split does not equal {} exactly", lit.value)));
            }
            let e = site_expr(&mut v, target).ok_or_else(|| ineligible(kind, target, "no literal at site"))?;
            let loc = e.loc;
            let bop = match op {
                SplitOp::Add => BinaryOp::Add,
                SplitOp::Sub => BinaryOp::Sub,
            };
            let mk = |x: u64| Expr::literal(Literal::sized(lit.width, x, lit.base), loc);
            *e = Expr::paren(Expr::binary(bop, mk(*a), mk(*b)));
            LineMap::identity()
        }
        (RtlKind::BitMutate, RtlParams::None) => {
            let e = site_expr(&mut v, target).ok_or_else(|| ineligible(kind, target, "no expression at site"))?;
            let inner = std::mem::replace(e, Expr::ident("", e.loc));
            let inner = if inner.is_atomic() { inner } else { Expr::paren(inner) };
            *e = Expr::unary(UnaryOp::Not, Expr::paren(Expr::unary(UnaryOp::Not, inner)));
            LineMap::identity()
        }
        (RtlKind::DeadLoop, RtlParams::None) => {
            let loc = target_loc(target).expect("statement site");
            let mut span = None;
            for m in &mut v.files[0].modules {
                for it in &mut m.items {
                    if let ItemKind::Always { body, .. } = &mut it.kind {
                        if let Some(s) = remove_child(body, loc) {
                            span = Some(stmt_line_span(&s));
                        }
                    }
                }
            }
            let (lo, hi) = span.ok_or_else(|| ineligible(kind, target, "loop not found in a block"))?;
            delete_lines(&mut v, 0, &(lo..=hi).collect())
        }
        (RtlKind::IncludeInject, RtlParams::Inject { names }) => {
            let taken = taken_names(unit);
            if names.iter().any(|n| taken.contains(n)) || names.iter().collect::<BTreeSet<_>>().len() != names.len() {
                return Err(ineligible(kind, target, "generated names collide with existing ones"));
            }
            let k = names.len() as u32;
            let map = insert_lines(&mut v, 0, 1, k);
            let mut fresh = Vec::new();
            for (i, n) in names.iter().enumerate() {
                let path = format!("{n}.vh");
                fresh.push(Include {
                    path: path.clone(),
                    loc: SourceLoc::new(0, i as u32 + 1, 1),
                });
                let fi = v.files.len() as u32;
                v.files.push(SourceFile {
                    path,
                    includes: Vec::new(),
                    modules: vec![Module {
                        name: n.clone(),
                        ports: Vec::new(),
                        items: Vec::new(),
                        loc: SourceLoc::new(fi, 1, 1),
                        end_loc: SourceLoc::new(fi, 2, 1),
                    }],
                    comments: BTreeMap::new(),
                    line_count: 2,
                });
            }
            fresh.append(&mut v.files[0].includes);
            v.files[0].includes = fresh;
            map
        }
        (RtlKind::IncludeRemove, RtlParams::None) => {
            let SiteTarget::Include { line } = target else {
                return Err(ineligible(kind, target, "not an include site"));
            };
            let idx = v.files[0]
                .includes
                .iter()
                .position(|i| i.loc.line == line)
                .ok_or_else(|| ineligible(kind, target, "no include on that line"))?;
            let inc = v.files[0].includes.remove(idx);
            if v.files[0].includes.iter().all(|i| i.path != inc.path) {
                if let Some(fi) = v.file_index(&inc.path).filter(|&i| i > 0) {
                    remove_file(&mut v, fi);
                }
            }
            delete_lines(&mut v, 0, &BTreeSet::from([line]))
        }
        _ => return Err(ineligible(kind, target, "parameters do not match the transformation")),
    };
    Ok(TransformResult {
        variant: v,
        line_map,
        records: vec![r.clone()],
        stopped_early: false,
    })
}

fn find_stmt(unit: &mut SourceUnit, target: SiteTarget) -> Option<&mut Stmt> {
    let loc = target_loc(target)?;
    for m in &mut unit.files[0].modules {
        for it in &mut m.items {
            if let ItemKind::Always { body, .. } = &mut it.kind {
                if let Some(s) = stmt_at_mut(body, loc) {
                    return Some(s);
                }
            }
        }
    }
    None
}

fn site_expr(unit: &mut SourceUnit, target: SiteTarget) -> Option<&mut Expr> {
    let SiteTarget::Expr { index, .. } = target else { return None };
    nth_expr_mut(owner_slots_mut(unit, target_loc(target)?)?, index)
}

/// Detach the statement at `loc` from the `begin` block that holds it.
fn remove_child(s: &mut Stmt, loc: SourceLoc) -> Option<Stmt> {
    match &mut s.kind {
        StmtKind::Block { stmts, .. } => {
            if let Some(i) = stmts.iter().position(|c| c.loc == loc) {
                return Some(stmts.remove(i));
            }
            stmts.iter_mut().find_map(|c| remove_child(c, loc))
        }
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => remove_child(then_branch, loc).or_else(|| else_branch.as_mut().and_then(|e| remove_child(&mut e.stmt, loc))),
        StmtKind::For { body, .. } => remove_child(body, loc),
        StmtKind::Assign { .. } => None,
    }
}
