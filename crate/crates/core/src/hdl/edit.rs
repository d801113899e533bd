//! In-place editing helpers shared by the transformations and the reducer.

use std::collections::BTreeSet;

use super::ast::*;
use super::linemap::LineMap;

/// Remove whole lines from a file. Nodes must already be gone from those
/// lines; comments on them are dropped. Returns the old-to-new line map.
pub fn delete_lines(unit: &mut SourceUnit, file: usize, lines: &BTreeSet<u32>) -> LineMap {
    let lines: BTreeSet<u32> = lines.iter().copied().filter(|&l| l >= 1).collect();
    let shift = |l: u32| l - lines.range(..l).count() as u32;
    unit.for_each_loc_mut(file, &mut |loc| loc.line = shift(loc.line));
    let f = &mut unit.files[file];
    let old = std::mem::take(&mut f.comments);
    for (l, segs) in old {
        if !lines.contains(&l) {
            f.comments.insert(shift(l), segs);
        }
    }
    let removed = lines.range(..=f.line_count).count() as u32;
    f.line_count = (f.line_count - removed).max(1);
    LineMap::deletion(&lines)
}

/// Insert `count` empty lines before line `at`.
pub fn insert_lines(unit: &mut SourceUnit, file: usize, at: u32, count: u32) -> LineMap {
    let shift = |l: u32| if l >= at { l + count } else { l };
    unit.for_each_loc_mut(file, &mut |loc| loc.line = shift(loc.line));
    let f = &mut unit.files[file];
    let old = std::mem::take(&mut f.comments);
    f.comments = old.into_iter().map(|(l, s)| (shift(l), s)).collect();
    f.line_count += count;
    LineMap::insertion(at, count)
}

/// Drop an auxiliary file and renumber the file indices after it.
pub fn remove_file(unit: &mut SourceUnit, file: usize) {
    assert!(file > 0, "the main file cannot be removed");
    unit.files.remove(file);
    for i in file..unit.files.len() {
        unit.for_each_loc_mut(i, &mut |loc| loc.file = i as u32);
    }
}

/// A node that directly holds expression slots.
#[derive(Debug, Clone)]
pub struct Owner<'a> {
    pub loc: SourceLoc,
    pub module: &'a str,
    pub slots: Vec<&'a Expr>,
    /// Procedural statement (as opposed to a module item).
    pub stmt: Option<&'a Stmt>,
    pub item: &'a Item,
}

/// Every expression owner of a file, in document order.
pub fn owners(file: &SourceFile) -> Vec<Owner<'_>> {
    let mut out = Vec::new();
    for m in &file.modules {
        for it in &m.items {
            match &it.kind {
                ItemKind::ContinuousAssign { rhs, .. } => out.push(Owner {
                    loc: it.loc,
                    module: &m.name,
                    slots: vec![rhs],
                    stmt: None,
                    item: it,
                }),
                ItemKind::Reg { init: Some(e), .. } => out.push(Owner {
                    loc: it.loc,
                    module: &m.name,
                    slots: vec![e],
                    stmt: None,
                    item: it,
                }),
                ItemKind::Instance { conns, .. } => out.push(Owner {
                    loc: it.loc,
                    module: &m.name,
                    slots: conns.iter().filter_map(|c| c.expr.as_ref()).collect(),
                    stmt: None,
                    item: it,
                }),
                ItemKind::Always { body, .. } => body.walk(&mut |s| {
                    let slots = s.exprs();
                    if !slots.is_empty() {
                        out.push(Owner {
                            loc: s.loc,
                            module: &m.name,
                            slots,
                            stmt: Some(s),
                            item: it,
                        });
                    }
                }),
                _ => {}
            }
        }
    }
    out
}

/// Mutable expression slots of the owner at `loc`.
pub fn owner_slots_mut(unit: &mut SourceUnit, loc: SourceLoc) -> Option<Vec<&mut Expr>> {
    let f = unit.files.get_mut(loc.file as usize)?;
    for m in &mut f.modules {
        for it in &mut m.items {
            if it.loc == loc {
                return match &mut it.kind {
                    ItemKind::ContinuousAssign { rhs, .. } => Some(vec![rhs]),
                    ItemKind::Reg { init: Some(e), .. } => Some(vec![e]),
                    ItemKind::Instance { conns, .. } => Some(conns.iter_mut().filter_map(|c| c.expr.as_mut()).collect()),
                    _ => None,
                };
            }
            if let ItemKind::Always { body, .. } = &mut it.kind {
                if let Some(s) = stmt_at_mut(body, loc) {
                    return Some(s.exprs_mut());
                }
            }
        }
    }
    None
}

/// The `index`-th expression node (pre-order, across slots) of an owner.
pub fn nth_expr_mut(slots: Vec<&mut Expr>, mut index: usize) -> Option<&mut Expr> {
    for e in slots {
        let n = e.node_count();
        if index < n {
            return e.nth_mut(index);
        }
        index -= n;
    }
    None
}

/// The `index`-th expression node (pre-order, across slots).
pub fn nth_expr<'a>(slots: &[&'a Expr], mut index: usize) -> Option<&'a Expr> {
    for e in slots {
        let mut found = None;
        let mut i = 0;
        e.walk(&mut |x| {
            if i == index && found.is_none() {
                found = Some(x);
            }
            i += 1;
        });
        if found.is_some() {
            return found;
        }
        index -= i;
    }
    None
}

pub fn stmt_at_mut(s: &mut Stmt, loc: SourceLoc) -> Option<&mut Stmt> {
    if s.loc == loc {
        return Some(s);
    }
    match &mut s.kind {
        StmtKind::Assign { .. } => None,
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => stmt_at_mut(then_branch, loc).or_else(|| else_branch.as_mut().and_then(|e| stmt_at_mut(&mut e.stmt, loc))),
        StmtKind::For { body, .. } => stmt_at_mut(body, loc),
        StmtKind::Block { stmts, .. } => stmts.iter_mut().find_map(|c| stmt_at_mut(c, loc)),
    }
}

/// Every line in a file that holds some node location, include, or comment.
pub fn occupied_lines(file: &SourceFile) -> BTreeSet<u32> {
    let mut u = SourceUnit { files: vec![file.clone()] };
    let mut out = BTreeSet::new();
    u.for_each_loc_mut(0, &mut |l| {
        out.insert(l.line);
    });
    out.extend(file.comments.keys().copied());
    out
}

/// Lines touched by a statement, or by anything other than it.
pub fn line_usage_outside(file: &SourceFile, target: &Stmt) -> BTreeSet<u32> {
    let (lo, hi) = stmt_line_span(target);
    let mut u = SourceUnit { files: vec![file.clone()] };
    // mark the target's own locations so they can be told apart
    let mut own = Vec::new();
    let mut t = target.clone();
    stmt_locs_mut(&mut t, &mut |l| own.push(*l));
    let own: BTreeSet<SourceLoc> = own.into_iter().collect();
    let mut out = BTreeSet::new();
    u.for_each_loc_mut(0, &mut |l| {
        let mut probe = *l;
        probe.file = target.loc.file;
        if l.line >= lo && l.line <= hi && !own.contains(&probe) {
            out.insert(l.line);
        }
    });
    for &l in file.comments.keys() {
        if l >= lo && l <= hi {
            out.insert(l);
        }
    }
    out
}
