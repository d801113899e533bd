//! AST for the accepted Verilog subset.
//!
//! Every node carries a [`SourceLoc`]. Rendering places nodes by location, so
//! the locations are the layout: a node's line is the line it is printed on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A position in a source file. Lines and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLoc {
    pub file: u32,
    pub line: u32,
    pub col: u32,
}

impl SourceLoc {
    pub const fn new(file: u32, line: u32, col: u32) -> Self {
        Self { file, line, col }
    }
}

impl std::fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

// ============================================================================
// Units and files
// ============================================================================

/// A parsed design: the main file (index 0) plus any auxiliary include files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub files: Vec<SourceFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Path label used by include directives.
    pub path: String,
    pub includes: Vec<Include>,
    pub modules: Vec<Module>,
    /// Comment text keyed by line. A line may carry several comment segments.
    pub comments: BTreeMap<u32, Vec<Comment>>,
    pub line_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Include {
    pub path: String,
    pub loc: SourceLoc,
}

/// A comment segment confined to one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub col: u32,
    pub text: String,
}

/// Classification of a single source line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineClass {
    /// An execution point (procedural assignment, `if`, continuous assign) starts here.
    Executable,
    Comment,
    Blank,
    /// Code that is not an execution point: headers, declarations, `begin`/`end`.
    DeclarationOnly,
}

// ============================================================================
// Modules
// ============================================================================

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
    pub loc: SourceLoc,
    /// Location of `endmodule`.
    pub end_loc: SourceLoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetKind {
    Wire,
    Reg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub dir: Direction,
    pub kind: NetKind,
    /// Whether the net keyword was written explicitly (`input wire a` vs `input a`).
    pub explicit_kind: bool,
    pub width: u32,
    pub name: String,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemKind {
    Wire {
        name: String,
        width: u32,
    },
    Reg {
        name: String,
        width: u32,
        init: Option<Expr>,
    },
    /// 32-bit loop index.
    Integer {
        name: String,
    },
    ContinuousAssign {
        lhs: String,
        rhs: Expr,
    },
    Always {
        clock: String,
        body: Stmt,
    },
    Instance {
        module: String,
        name: String,
        conns: Vec<Connection>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub port: String,
    pub expr: Option<Expr>,
}

impl ItemKind {
    /// Name declared by this item, if it is a declaration.
    pub fn declared_name(&self) -> Option<&str> {
        match self {
            ItemKind::Wire { name, .. } | ItemKind::Reg { name, .. } | ItemKind::Integer { name } => {
                Some(name)
            }
            _ => None,
        }
    }
}

// ============================================================================
// Statements
// ============================================================================

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssignKind {
    Blocking,
    NonBlocking,
}

impl AssignKind {
    pub fn flipped(self) -> Self {
        match self {
            AssignKind::Blocking => AssignKind::NonBlocking,
            AssignKind::NonBlocking => AssignKind::Blocking,
        }
    }

    pub fn op(self) -> &'static str {
        match self {
            AssignKind::Blocking => "=",
            AssignKind::NonBlocking => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign {
        kind: AssignKind,
        lhs: String,
        rhs: Expr,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<ElseBranch>,
    },
    /// `for (var = init; cond; var = step) body`
    For {
        var: String,
        init: Expr,
        cond: Expr,
        step: Expr,
        body: Box<Stmt>,
    },
    Block {
        stmts: Vec<Stmt>,
        end_loc: SourceLoc,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElseBranch {
    /// Location of the `else` keyword.
    pub loc: SourceLoc,
    pub stmt: Box<Stmt>,
}

impl Stmt {
    /// Whether this statement is an execution point (a place a debugger can stop).
    pub fn is_point(&self) -> bool {
        matches!(self.kind, StmtKind::Assign { .. } | StmtKind::If { .. })
    }

    /// Direct child statements in a fixed order: then/else, loop body, block members.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Assign { .. } => Vec::new(),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v = vec![then_branch.as_ref()];
                if let Some(e) = else_branch {
                    v.push(e.stmt.as_ref());
                }
                v
            }
            StmtKind::For { body, .. } => vec![body.as_ref()],
            StmtKind::Block { stmts, .. } => stmts.iter().collect(),
        }
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Expressions held directly by this statement (not by children), in slot order.
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { rhs, .. } => vec![rhs],
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::For {
                init, cond, step, ..
            } => vec![init, cond, step],
            StmtKind::Block { .. } => Vec::new(),
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Assign { rhs, .. } => vec![rhs],
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::For {
                init, cond, step, ..
            } => vec![init, cond, step],
            StmtKind::Block { .. } => Vec::new(),
        }
    }
}

// ============================================================================
// Expressions
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiteralBase {
    Bin,
    Hex,
    Dec,
    /// Plain decimal with no size prefix; 32 bits wide.
    Unsized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub width: u32,
    pub value: u64,
    pub base: LiteralBase,
}

impl Literal {
    pub fn sized(width: u32, value: u64, base: LiteralBase) -> Self {
        debug_assert!(width >= 1 && width <= 64);
        Self {
            width,
            value: value & mask(width),
            base,
        }
    }
}

/// All-ones mask of the given width (1..=64).
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Not,
    Neg,
    LogicalNot,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "~",
            UnaryOp::Neg => "-",
            UnaryOp::LogicalNot => "!",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Eq,
    Ne,
    Lt,
    Gt,
    Shl,
    Shr,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 11] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Xor,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Gt,
        BinaryOp::Shl,
        BinaryOp::Shr,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
        }
    }

    /// Verilog binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 6,
            BinaryOp::Shl | BinaryOp::Shr => 5,
            BinaryOp::Lt | BinaryOp::Gt => 4,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::And => 2,
            BinaryOp::Xor => 1,
            BinaryOp::Or => 0,
        }
    }

    /// Result is a single bit.
    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Gt
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(Literal),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Paren(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SourceLoc) -> Self {
        Self { kind, loc }
    }

    pub fn literal(lit: Literal, loc: SourceLoc) -> Self {
        Self::new(ExprKind::Literal(lit), loc)
    }

    pub fn ident(name: impl Into<String>, loc: SourceLoc) -> Self {
        Self::new(ExprKind::Ident(name.into()), loc)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        let loc = e.loc;
        Self::new(ExprKind::Unary(op, Box::new(e)), loc)
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Self {
        let loc = l.loc;
        Self::new(ExprKind::Binary(op, Box::new(l), Box::new(r)), loc)
    }

    pub fn paren(e: Expr) -> Self {
        let loc = e.loc;
        Self::new(ExprKind::Paren(Box::new(e)), loc)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Literal(_) | ExprKind::Ident(_) => Vec::new(),
            ExprKind::Unary(_, e) | ExprKind::Paren(e) => vec![e],
            ExprKind::Binary(_, l, r) => vec![l, r],
        }
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Identifiers read by this expression, in pre-order.
    pub fn idents(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Ident(n) = &e.kind {
                out.push(n.as_str());
            }
        });
        out
    }

    /// The `index`-th node in pre-order, mutably.
    pub fn nth_mut(&mut self, index: usize) -> Option<&mut Expr> {
        fn go<'a>(e: &'a mut Expr, remaining: &mut usize) -> Option<&'a mut Expr> {
            if *remaining == 0 {
                return Some(e);
            }
            *remaining -= 1;
            match &mut e.kind {
                ExprKind::Literal(_) | ExprKind::Ident(_) => None,
                ExprKind::Unary(_, c) | ExprKind::Paren(c) => go(c, remaining),
                ExprKind::Binary(_, l, r) => {
                    if let Some(found) = go(l, remaining) {
                        return Some(found);
                    }
                    go(r, remaining)
                }
            }
        }
        let mut remaining = index;
        go(self, &mut remaining)
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Literal, identifier or parenthesised expression: safe to nest without parentheses.
    pub fn is_atomic(&self) -> bool {
        matches!(
            self.kind,
            ExprKind::Literal(_) | ExprKind::Ident(_) | ExprKind::Paren(_)
        )
    }
}

// ============================================================================
// Location visitors
// ============================================================================

impl SourceUnit {
    pub fn main(&self) -> &SourceFile {
        &self.files[0]
    }

    pub fn file_index(&self, path: &str) -> Option<usize> {
        self.files.iter().position(|f| f.path == path)
    }

    /// Visit every location in one file, including comment columns.
    pub fn for_each_loc_mut(&mut self, file: usize, f: &mut impl FnMut(&mut SourceLoc)) {
        let sf = &mut self.files[file];
        for inc in &mut sf.includes {
            f(&mut inc.loc);
        }
        for m in &mut sf.modules {
            module_locs_mut(m, f);
        }
    }

    /// Copy of the unit with every column set to 0, for structure-only comparison.
    pub fn without_columns(&self) -> SourceUnit {
        let mut u = self.clone();
        for i in 0..u.files.len() {
            u.for_each_loc_mut(i, &mut |l| l.col = 0);
            for segs in u.files[i].comments.values_mut() {
                for c in segs {
                    c.col = 0;
                }
            }
        }
        u
    }

    /// Equality up to column positions.
    pub fn same_structure(&self, other: &SourceUnit) -> bool {
        self.without_columns() == other.without_columns()
    }
}

fn module_locs_mut(m: &mut Module, f: &mut impl FnMut(&mut SourceLoc)) {
    f(&mut m.loc);
    f(&mut m.end_loc);
    for p in &mut m.ports {
        f(&mut p.loc);
    }
    for it in &mut m.items {
        f(&mut it.loc);
        match &mut it.kind {
            ItemKind::Wire { .. } | ItemKind::Integer { .. } => {}
            ItemKind::Reg { init, .. } => {
                if let Some(e) = init {
                    expr_locs_mut(e, f);
                }
            }
            ItemKind::ContinuousAssign { rhs, .. } => expr_locs_mut(rhs, f),
            ItemKind::Always { body, .. } => stmt_locs_mut(body, f),
            ItemKind::Instance { conns, .. } => {
                for c in conns {
                    if let Some(e) = &mut c.expr {
                        expr_locs_mut(e, f);
                    }
                }
            }
        }
    }
}

pub(crate) fn stmt_locs_mut(s: &mut Stmt, f: &mut impl FnMut(&mut SourceLoc)) {
    f(&mut s.loc);
    match &mut s.kind {
        StmtKind::Assign { rhs, .. } => expr_locs_mut(rhs, f),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            expr_locs_mut(cond, f);
            stmt_locs_mut(then_branch, f);
            if let Some(e) = else_branch {
                f(&mut e.loc);
                stmt_locs_mut(&mut e.stmt, f);
            }
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
            ..
        } => {
            expr_locs_mut(init, f);
            expr_locs_mut(cond, f);
            expr_locs_mut(step, f);
            stmt_locs_mut(body, f);
        }
        StmtKind::Block { stmts, end_loc } => {
            for st in stmts {
                stmt_locs_mut(st, f);
            }
            f(end_loc);
        }
    }
}

fn expr_locs_mut(e: &mut Expr, f: &mut impl FnMut(&mut SourceLoc)) {
    f(&mut e.loc);
    match &mut e.kind {
        ExprKind::Literal(_) | ExprKind::Ident(_) => {}
        ExprKind::Unary(_, c) | ExprKind::Paren(c) => expr_locs_mut(c, f),
        ExprKind::Binary(_, l, r) => {
            expr_locs_mut(l, f);
            expr_locs_mut(r, f);
        }
    }
}

/// Smallest and largest line touched by any location inside a statement.
pub fn stmt_line_span(s: &Stmt) -> (u32, u32) {
    let mut s2 = s.clone();
    let mut lo = u32::MAX;
    let mut hi = 0;
    stmt_locs_mut(&mut s2, &mut |l| {
        lo = lo.min(l.line);
        hi = hi.max(l.line);
    });
    (lo, hi)
}

/// Smallest and largest line touched by an item.
pub fn item_line_span(it: &Item) -> (u32, u32) {
    let mut lo = it.loc.line;
    let mut hi = it.loc.line;
    if let ItemKind::Always { body, .. } = &it.kind {
        let (a, b) = stmt_line_span(body);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}
