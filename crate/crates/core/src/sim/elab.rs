//! Elaboration: flatten the instance tree into signals, processes and
//! continuous assignments with resolved signal ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::value::Value;
use crate::hdl::ast::*;

pub type SigId = usize;
pub type PointId = usize;
pub type StmtId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("no top module: every module in the main file is instantiated")]
    NoTop,
    #[error("ambiguous top module: {0:?} are all uninstantiated")]
    AmbiguousTop(Vec<String>),
    #[error("module '{0}' is defined more than once")]
    DuplicateModule(String),
    #[error("line {line}: instance of unknown module '{module}'")]
    UnresolvedInstance { module: String, line: u32 },
    #[error("module '{0}' instantiates itself")]
    RecursiveInstance(String),
    #[error("line {line}: module '{module}' has no port '{port}'")]
    UnknownPort { module: String, port: String, line: u32 },
    #[error("line {line}: output port '{port}' must connect to a net")]
    BadOutputConnection { port: String, line: u32 },
    #[error("signal '{0}' has more than one driver")]
    MultipleDrivers(String),
    #[error("combinational loop through '{0}'")]
    CombinationalLoop(String),
    #[error("clock of an always block does not resolve to a top-level input")]
    BadClock,
    #[error("always blocks use more than one clock")]
    MultipleClocks,
}

#[derive(Debug, Clone)]
pub struct Signal {
    /// Hierarchical name; top-level signals carry no prefix.
    pub name: String,
    pub width: u32,
    pub is_integer: bool,
    pub in_top: bool,
    /// Value at time 0 before any process runs.
    pub init: Value,
}

#[derive(Debug, Clone)]
pub enum CExpr {
    Const(Value),
    Sig(SigId),
    Unary(UnaryOp, Box<CExpr>),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub fn eval(&self, read: &impl Fn(SigId) -> Value) -> Value {
        match self {
            CExpr::Const(v) => *v,
            CExpr::Sig(s) => read(*s),
            CExpr::Unary(op, e) => Value::unary(*op, e.eval(read)),
            CExpr::Binary(op, l, r) => Value::binary(*op, l.eval(read), r.eval(read)),
        }
    }

    pub fn reads(&self, out: &mut Vec<SigId>) {
        match self {
            CExpr::Const(_) => {}
            CExpr::Sig(s) => out.push(*s),
            CExpr::Unary(_, e) => e.reads(out),
            CExpr::Binary(_, l, r) => {
                l.reads(out);
                r.reads(out);
            }
        }
    }
}

/// A place the debugger can stop: a procedural assignment, an `if`, or an
/// explicit continuous assignment.
#[derive(Debug, Clone)]
pub struct Point {
    pub loc: SourceLoc,
    pub in_top: bool,
}

#[derive(Debug, Clone)]
pub enum CStmt {
    Assign {
        kind: AssignKind,
        lhs: SigId,
        rhs: CExpr,
        point: PointId,
    },
    If {
        cond: CExpr,
        then_branch: StmtId,
        else_branch: Option<StmtId>,
        point: PointId,
    },
    For {
        var: SigId,
        init: CExpr,
        cond: CExpr,
        step: CExpr,
        body: StmtId,
    },
    Block(Vec<StmtId>),
}

#[derive(Debug, Clone)]
pub struct CAssign {
    pub lhs: SigId,
    pub rhs: CExpr,
    /// `None` for implicit port connections.
    pub point: Option<PointId>,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub signals: Vec<Signal>,
    pub points: Vec<Point>,
    /// Statement arena; processes and compound statements refer into it.
    pub stmts: Vec<CStmt>,
    /// Root statement of each always block, in elaboration order.
    pub processes: Vec<StmtId>,
    /// Continuous assignments in evaluation (topological) order.
    pub cassigns: Vec<CAssign>,
    pub clock: Option<SigId>,
    /// Top-level signals shown in pause snapshots, declaration order.
    pub top_signals: Vec<SigId>,
    /// Signals recorded in the per-edge waveform log.
    pub wave_signals: Vec<SigId>,
}

struct Ctx<'u> {
    modules: HashMap<&'u str, &'u Module>,
    signals: Vec<Signal>,
    points: Vec<Point>,
    stmts: Vec<CStmt>,
    processes: Vec<StmtId>,
    /// in declaration order
    cassigns: Vec<CAssign>,
    clocks: Vec<SigId>,
    stack: Vec<String>,
}

pub fn elaborate(unit: &SourceUnit) -> Result<Design, ElabError> {
    let mut modules: HashMap<&str, &Module> = HashMap::new();
    for f in &unit.files {
        for m in &f.modules {
            if modules.insert(&m.name, m).is_some() {
                return Err(ElabError::DuplicateModule(m.name.clone()));
            }
        }
    }
    let mut instantiated = BTreeSet::new();
    for f in &unit.files {
        for m in &f.modules {
            for it in &m.items {
                if let ItemKind::Instance { module, .. } = &it.kind {
                    instantiated.insert(module.as_str());
                }
            }
        }
    }
    let tops: Vec<&Module> = unit
        .main()
        .modules
        .iter()
        .filter(|m| !instantiated.contains(m.name.as_str()))
        .collect();
    let top = match tops.as_slice() {
        [] => return Err(ElabError::NoTop),
        [t] => *t,
        many => return Err(ElabError::AmbiguousTop(many.iter().map(|m| m.name.clone()).collect())),
    };
    let mut cx = Ctx {
        modules,
        signals: Vec::new(),
        points: Vec::new(),
        stmts: Vec::new(),
        processes: Vec::new(),
        cassigns: Vec::new(),
        clocks: Vec::new(),
        stack: Vec::new(),
    };
    let top_scope = instantiate(&mut cx, top, "", true)?;

    // every clock must trace back through port connections to one top input
    let alias: HashMap<SigId, SigId> = cx
        .cassigns
        .iter()
        .filter(|c| c.point.is_none())
        .filter_map(|c| match c.rhs {
            CExpr::Sig(s) => Some((c.lhs, s)),
            _ => None,
        })
        .collect();
    let top_inputs: BTreeSet<SigId> = top
        .ports
        .iter()
        .filter(|p| p.dir == Direction::Input)
        .map(|p| top_scope[&p.name])
        .collect();
    let mut clock = None;
    for &c in &cx.clocks {
        let mut s = c;
        let mut hops = 0;
        while let Some(&n) = alias.get(&s) {
            s = n;
            hops += 1;
            if hops > cx.signals.len() {
                return Err(ElabError::BadClock);
            }
        }
        if !top_inputs.contains(&s) {
            return Err(ElabError::BadClock);
        }
        match clock {
            None => clock = Some(s),
            Some(k) if k == s => {}
            Some(_) => return Err(ElabError::MultipleClocks),
        }
    }
    // the clock starts low; other top inputs are tied to zero
    for &i in &top_inputs {
        cx.signals[i].init = Value::known(cx.signals[i].width, 0);
    }

    check_drivers(&cx)?;
    let cassigns = topo_sort(&cx)?;

    let top_signals = (0..cx.signals.len())
        .filter(|&s| cx.signals[s].in_top && !cx.signals[s].is_integer)
        .collect();
    let wave_signals = (0..cx.signals.len()).filter(|&s| !cx.signals[s].is_integer).collect();
    Ok(Design {
        signals: cx.signals,
        points: cx.points,
        stmts: cx.stmts,
        processes: cx.processes,
        cassigns,
        clock,
        top_signals,
        wave_signals,
    })
}

fn instantiate(cx: &mut Ctx<'_>, m: &Module, prefix: &str, in_top: bool) -> Result<HashMap<String, SigId>, ElabError> {
    if cx.stack.contains(&m.name) {
        return Err(ElabError::RecursiveInstance(m.name.clone()));
    }
    cx.stack.push(m.name.clone());
    let mut scope: HashMap<String, SigId> = HashMap::new();
    let mut add = |cx: &mut Ctx<'_>, name: &str, width: u32, is_integer: bool, init: Value| {
        let id = cx.signals.len();
        cx.signals.push(Signal {
            name: format!("{prefix}{name}"),
            width,
            is_integer,
            in_top,
            init,
        });
        scope.insert(name.to_string(), id);
    };
    for p in &m.ports {
        let init = match (p.dir, p.kind) {
            (Direction::Output, NetKind::Reg) => Value::x(p.width),
            _ => Value::z(p.width),
        };
        add(cx, &p.name, p.width, false, init);
    }
    for it in &m.items {
        match &it.kind {
            ItemKind::Wire { name, width } => add(cx, name, *width, false, Value::z(*width)),
            ItemKind::Reg { name, width, init } => {
                let v = match init {
                    Some(e) => compile_expr(e, &HashMap::new()).eval(&|_| Value::x(1)).resize(*width),
                    None => Value::x(*width),
                };
                add(cx, name, *width, false, v)
            }
            ItemKind::Integer { name } => add(cx, name, 32, true, Value::x(32)),
            _ => {}
        }
    }
    for it in &m.items {
        match &it.kind {
            ItemKind::ContinuousAssign { lhs, rhs } => {
                let point = cx.points.len();
                cx.points.push(Point { loc: it.loc, in_top });
                cx.cassigns.push(CAssign {
                    lhs: scope[lhs],
                    rhs: compile_expr(rhs, &scope),
                    point: Some(point),
                });
            }
            ItemKind::Always { clock, body } => {
                cx.clocks.push(scope[clock]);
                let c = compile_stmt(cx, body, &scope, in_top);
                cx.processes.push(c);
            }
            ItemKind::Instance {
                module,
                name,
                conns,
            } => {
                let child = *cx.modules.get(module.as_str()).ok_or_else(|| ElabError::UnresolvedInstance {
                    module: module.clone(),
                    line: it.loc.line,
                })?;
                let child_scope = instantiate(cx, child, &format!("{prefix}{name}."), false)?;
                for c in conns {
                    let port = child.ports.iter().find(|p| p.name == c.port).ok_or_else(|| ElabError::UnknownPort {
                        module: module.clone(),
                        port: c.port.clone(),
                        line: it.loc.line,
                    })?;
                    let Some(expr) = &c.expr else { continue };
                    let child_sig = child_scope[&c.port];
                    match port.dir {
                        Direction::Input => cx.cassigns.push(CAssign {
                            lhs: child_sig,
                            rhs: compile_expr(expr, &scope),
                            point: None,
                        }),
                        Direction::Output => {
                            let target = match &expr.kind {
                                ExprKind::Ident(n) if is_net(m, n) => scope[n],
                                _ => {
                                    return Err(ElabError::BadOutputConnection {
                                        port: c.port.clone(),
                                        line: it.loc.line,
                                    })
                                }
                            };
                            cx.cassigns.push(CAssign {
                                lhs: target,
                                rhs: CExpr::Sig(child_sig),
                                point: None,
                            });
                        }
                    }
                }
            }
            _ => {}
        }
    }
    cx.stack.pop();
    Ok(scope)
}

fn is_net(m: &Module, name: &str) -> bool {
    m.ports
        .iter()
        .any(|p| p.name == name && p.dir == Direction::Output && p.kind == NetKind::Wire)
        || m.items
            .iter()
            .any(|it| matches!(&it.kind, ItemKind::Wire { name: n, .. } if n == name))
}

pub(crate) fn compile_expr(e: &Expr, scope: &HashMap<String, SigId>) -> CExpr {
    match &e.kind {
        ExprKind::Literal(l) => CExpr::Const(Value::known(l.width, l.value)),
        ExprKind::Ident(n) => CExpr::Sig(scope[n]),
        ExprKind::Paren(inner) => compile_expr(inner, scope),
        ExprKind::Unary(op, inner) => CExpr::Unary(*op, Box::new(compile_expr(inner, scope))),
        ExprKind::Binary(op, l, r) => CExpr::Binary(
            *op,
            Box::new(compile_expr(l, scope)),
            Box::new(compile_expr(r, scope)),
        ),
    }
}

fn compile_stmt(cx: &mut Ctx<'_>, s: &Stmt, scope: &HashMap<String, SigId>, in_top: bool) -> StmtId {
    let c = match &s.kind {
        StmtKind::Assign { kind, lhs, rhs } => {
            let point = cx.points.len();
            cx.points.push(Point { loc: s.loc, in_top });
            CStmt::Assign {
                kind: *kind,
                lhs: scope[lhs],
                rhs: compile_expr(rhs, scope),
                point,
            }
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let point = cx.points.len();
            cx.points.push(Point { loc: s.loc, in_top });
            let then_branch = compile_stmt(cx, then_branch, scope, in_top);
            let else_branch = else_branch
                .as_ref()
                .map(|e| compile_stmt(cx, &e.stmt, scope, in_top));
            CStmt::If {
                cond: compile_expr(cond, scope),
                then_branch,
                else_branch,
                point,
            }
        }
        StmtKind::For {
            var,
            init,
            cond,
            step,
            body,
        } => CStmt::For {
            var: scope[var],
            init: compile_expr(init, scope),
            cond: compile_expr(cond, scope),
            step: compile_expr(step, scope),
            body: compile_stmt(cx, body, scope, in_top),
        },
        StmtKind::Block { stmts, .. } => {
            CStmt::Block(stmts.iter().map(|st| compile_stmt(cx, st, scope, in_top)).collect())
        }
    };
    cx.stmts.push(c);
    cx.stmts.len() - 1
}

fn stmt_writes(stmts: &[CStmt], s: StmtId, out: &mut BTreeSet<SigId>) {
    match &stmts[s] {
        CStmt::Assign { lhs, .. } => {
            out.insert(*lhs);
        }
        CStmt::If {
            then_branch,
            else_branch,
            ..
        } => {
            stmt_writes(stmts, *then_branch, out);
            if let Some(e) = else_branch {
                stmt_writes(stmts, *e, out);
            }
        }
        CStmt::For { var, body, .. } => {
            out.insert(*var);
            stmt_writes(stmts, *body, out);
        }
        CStmt::Block(v) => v.iter().for_each(|st| stmt_writes(stmts, *st, out)),
    }
}

fn check_drivers(cx: &Ctx<'_>) -> Result<(), ElabError> {
    let mut drivers: BTreeMap<SigId, usize> = BTreeMap::new();
    for &p in &cx.processes {
        let mut w = BTreeSet::new();
        stmt_writes(&cx.stmts, p, &mut w);
        for s in w {
            *drivers.entry(s).or_default() += 1;
        }
    }
    for c in &cx.cassigns {
        *drivers.entry(c.lhs).or_default() += 1;
    }
    if let Some((&s, _)) = drivers.iter().find(|(_, &n)| n > 1) {
        return Err(ElabError::MultipleDrivers(cx.signals[s].name.clone()));
    }
    Ok(())
}

fn topo_sort(cx: &Ctx<'_>) -> Result<Vec<CAssign>, ElabError> {
    let n = cx.cassigns.len();
    let driver: HashMap<SigId, usize> = cx.cassigns.iter().enumerate().map(|(i, c)| (c.lhs, i)).collect();
    let mut indeg = vec![0usize; n];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in cx.cassigns.iter().enumerate() {
        let mut r = Vec::new();
        c.rhs.reads(&mut r);
        r.sort_unstable();
        r.dedup();
        for s in r {
            if let Some(&d) = driver.get(&s) {
                indeg[i] += 1;
                users[d].push(i);
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &u in &users[i] {
            indeg[u] -= 1;
            if indeg[u] == 0 {
                ready.insert(u);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap();
        return Err(ElabError::CombinationalLoop(cx.signals[cx.cassigns[stuck].lhs].name.clone()));
    }
    Ok(order.into_iter().map(|i| cx.cassigns[i].clone()).collect())
}
