//! Recursive-descent parser for the Verilog subset. The grammar is listed in the README.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;

const KEYWORDS: [&str; 15] = [
    "module", "endmodule", "input", "output", "wire", "reg", "integer", "assign", "always",
    "posedge", "begin", "end", "if", "else", "for",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: u32,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn loc(&self) -> SourceLoc {
        let t = self.peek();
        SourceLoc::new(self.file, t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::new(t.line, t.col, msg))
    }

    fn describe(&self) -> String {
        match &self.peek().tok {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number(_) => "number".into(),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Directive(d) => format!("`{d}"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{s}', found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{kw}', found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    // ------------------------------------------------------------------------

    fn file(&mut self) -> Result<(Vec<Include>, Vec<Module>), ParseError> {
        let mut includes = Vec::new();
        let mut modules = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Eof => break,
                Tok::Directive(d) if d == "include" => {
                    let loc = self.loc();
                    self.bump();
                    match self.bump().tok {
                        Tok::Str(path) => includes.push(Include { path, loc }),
                        _ => return Err(ParseError::new(loc.line, loc.col, "expected quoted path after `include")),
                    }
                }
                Tok::Directive(d) => {
                    let d = d.clone();
                    return self.err(format!("directive `{d} is outside the subset"));
                }
                _ if self.is_kw("module") => modules.push(self.module()?),
                _ => return self.err(format!("expected 'module' or `include, found {}", self.describe())),
            }
        }
        Ok((includes, modules))
    }

    fn range(&mut self) -> Result<u32, ParseError> {
        if !self.is_sym("[") {
            return Ok(1);
        }
        self.bump();
        let msb = self.small_number()?;
        self.expect_sym(":")?;
        let lsb = self.small_number()?;
        self.expect_sym("]")?;
        if lsb != 0 {
            return self.err("only [N:0] ranges are supported");
        }
        if msb >= 64 {
            return self.err("widths above 64 bits are outside the subset");
        }
        Ok(msb as u32 + 1)
    }

    fn small_number(&mut self) -> Result<u64, ParseError> {
        match self.peek().tok.clone() {
            Tok::Number(l) => {
                self.bump();
                Ok(l.value)
            }
            _ => self.err(format!("expected number, found {}", self.describe())),
        }
    }

    fn module(&mut self) -> Result<Module, ParseError> {
        let loc = self.loc();
        self.expect_kw("module")?;
        let name = self.ident()?;
        let mut ports = Vec::new();
        if self.is_sym("(") {
            self.bump();
            if !self.is_sym(")") {
                let mut prev: Option<(Direction, NetKind, bool, u32)> = None;
                loop {
                    let ploc = self.loc();
                    let (dir, kind, explicit, width) = if self.is_kw("input") || self.is_kw("output") {
                        let dir = if self.is_kw("input") {
                            Direction::Input
                        } else {
                            Direction::Output
                        };
                        self.bump();
                        let (kind, explicit) = if self.is_kw("wire") {
                            self.bump();
                            (NetKind::Wire, true)
                        } else if self.is_kw("reg") {
                            self.bump();
                            (NetKind::Reg, true)
                        } else {
                            (NetKind::Wire, false)
                        };
                        if dir == Direction::Input && kind == NetKind::Reg {
                            return Err(ParseError::new(ploc.line, ploc.col, "input ports cannot be reg"));
                        }
                        let width = self.range()?;
                        (dir, kind, explicit, width)
                    } else if let Some(p) = prev {
                        p
                    } else {
                        return self.err(format!("expected port direction, found {}", self.describe()));
                    };
                    prev = Some((dir, kind, explicit, width));
                    let pname = self.ident()?;
                    ports.push(Port {
                        dir,
                        kind,
                        explicit_kind: explicit,
                        width,
                        name: pname,
                        loc: ploc,
                    });
                    if self.is_sym(",") {
                        self.bump();
                        continue;
                    }
                    break;
                }
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(";")?;
        let mut items = Vec::new();
        while !self.is_kw("endmodule") {
            if matches!(self.peek().tok, Tok::Eof) {
                return self.err("expected 'endmodule', found end of input");
            }
            self.items(&mut items)?;
        }
        let end_loc = self.loc();
        self.bump();
        Ok(Module {
            name,
            ports,
            items,
            loc,
            end_loc,
        })
    }

    fn items(&mut self, out: &mut Vec<Item>) -> Result<(), ParseError> {
        let loc = self.loc();
        if self.is_kw("wire") || self.is_kw("reg") || self.is_kw("integer") {
            let kw = match &self.bump().tok {
                Tok::Ident(s) => s.clone(),
                _ => unreachable!(),
            };
            let width = if kw == "integer" { 32 } else { self.range()? };
            let mut first = true;
            loop {
                let iloc = if first { loc } else { self.loc() };
                first = false;
                let name = self.ident()?;
                let kind = match kw.as_str() {
                    "wire" => ItemKind::Wire { name, width },
                    "reg" => {
                        let init = if self.is_sym("=") {
                            self.bump();
                            Some(self.expr()?)
                        } else {
                            None
                        };
                        ItemKind::Reg { name, width, init }
                    }
                    _ => ItemKind::Integer { name },
                };
                out.push(Item { kind, loc: iloc });
                if self.is_sym(",") {
                    self.bump();
                    continue;
                }
                break;
            }
            self.expect_sym(";")?;
            return Ok(());
        }
        if self.is_kw("assign") {
            self.bump();
            let lhs = self.ident()?;
            self.expect_sym("=")?;
            let rhs = self.expr()?;
            self.expect_sym(";")?;
            out.push(Item {
                kind: ItemKind::ContinuousAssign { lhs, rhs },
                loc,
            });
            return Ok(());
        }
        if self.is_kw("always") {
            self.bump();
            self.expect_sym("@")?;
            self.expect_sym("(")?;
            self.expect_kw("posedge")?;
            let clock = self.ident()?;
            self.expect_sym(")")?;
            let body = self.stmt()?;
            out.push(Item {
                kind: ItemKind::Always { clock, body },
                loc,
            });
            return Ok(());
        }
        if let Tok::Ident(s) = &self.peek().tok {
            if !KEYWORDS.contains(&s.as_str()) && matches!(&self.peek_at(1).tok, Tok::Ident(_)) {
                let module = self.ident()?;
                let name = self.ident()?;
                self.expect_sym("(")?;
                let mut conns = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        self.expect_sym(".")?;
                        let port = self.ident()?;
                        self.expect_sym("(")?;
                        let expr = if self.is_sym(")") { None } else { Some(self.expr()?) };
                        self.expect_sym(")")?;
                        conns.push(Connection { port, expr });
                        if self.is_sym(",") {
                            self.bump();
                            continue;
                        }
                        break;
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                out.push(Item {
                    kind: ItemKind::Instance {
                        module,
                        name,
                        conns,
                    },
                    loc,
                });
                return Ok(());
            }
        }
        self.err(format!("expected module item, found {}", self.describe()))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let loc = self.loc();
        if self.is_kw("begin") {
            self.bump();
            let mut stmts = Vec::new();
            while !self.is_kw("end") {
                if matches!(self.peek().tok, Tok::Eof) {
                    return self.err("expected 'end', found end of input");
                }
                stmts.push(self.stmt()?);
            }
            let end_loc = self.loc();
            self.bump();
            return Ok(Stmt {
                kind: StmtKind::Block { stmts, end_loc },
                loc,
            });
        }
        if self.is_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then_branch = Box::new(self.stmt()?);
            let else_branch = if self.is_kw("else") {
                let eloc = self.loc();
                self.bump();
                Some(ElseBranch {
                    loc: eloc,
                    stmt: Box::new(self.stmt()?),
                })
            } else {
                None
            };
            return Ok(Stmt {
                kind: StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                },
                loc,
            });
        }
        if self.is_kw("for") {
            self.bump();
            self.expect_sym("(")?;
            let var = self.ident()?;
            self.expect_sym("=")?;
            let init = self.expr()?;
            self.expect_sym(";")?;
            let cond = self.expr()?;
            self.expect_sym(";")?;
            let step_loc = self.loc();
            let step_var = self.ident()?;
            if step_var != var {
                return Err(ParseError::new(
                    step_loc.line,
                    step_loc.col,
                    format!("for-loop step assigns '{step_var}' but the loop variable is '{var}'"),
                ));
            }
            self.expect_sym("=")?;
            let step = self.expr()?;
            self.expect_sym(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt {
                kind: StmtKind::For {
                    var,
                    init,
                    cond,
                    step,
                    body,
                },
                loc,
            });
        }
        let lhs = self.ident()?;
        let kind = if self.is_sym("<=") {
            AssignKind::NonBlocking
        } else if self.is_sym("=") {
            AssignKind::Blocking
        } else {
            return self.err(format!("expected '=' or '<=', found {}", self.describe()));
        };
        self.bump();
        let rhs = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt {
            kind: StmtKind::Assign { kind, lhs, rhs },
            loc,
        })
    }

    fn binop(&self) -> Option<BinaryOp> {
        match &self.peek().tok {
            Tok::Sym(s) => BinaryOp::ALL.iter().copied().find(|op| op.symbol() == *s),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.expr_prec(0)
    }

    fn expr_prec(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.bump();
            let rhs = self.expr_prec(p + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let loc = self.loc();
        let op = if self.is_sym("~") {
            Some(UnaryOp::Not)
        } else if self.is_sym("-") {
            Some(UnaryOp::Neg)
        } else if self.is_sym("!") {
            Some(UnaryOp::LogicalNot)
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(op, Box::new(inner)), loc));
        }
        match self.peek().tok.clone() {
            Tok::Number(l) => {
                self.bump();
                Ok(Expr::literal(l, loc))
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::new(ExprKind::Paren(Box::new(inner)), loc))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                Ok(Expr::ident(name, loc))
            }
            _ => self.err(format!("expected expression, found {}", self.describe())),
        }
    }
}

/// Parse one file. `file` is the index the file will have in its unit.
pub fn parse_file(path: &str, text: &str, file: u32) -> Result<SourceFile, ParseError> {
    let lexed = lex(text)?;
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
        file,
    };
    let (includes, mut modules) = p.file()?;
    for m in &mut modules {
        pin_expr_lines(m);
    }
    for m in &modules {
        validate_module(m)?;
    }
    let mut names: HashMap<&str, SourceLoc> = HashMap::new();
    for m in &modules {
        if let Some(prev) = names.insert(&m.name, m.loc) {
            return Err(ParseError::new(
                m.loc.line,
                m.loc.col,
                format!("module '{}' already defined at line {}", m.name, prev.line),
            ));
        }
    }
    let mut comments = lexed.comments;
    // comments sharing a line with code stay attached to that line; nothing to do
    comments.retain(|_, v| !v.is_empty());
    Ok(SourceFile {
        path: path.to_string(),
        includes,
        modules,
        comments,
        line_count: lexed.line_count,
    })
}

/// Expressions render on the line of the node that owns them, so a statement
/// split over several lines collapses onto its first line. Pinning at parse time
/// keeps `parse(render(parse(x))) == parse(x)`.
fn pin_expr_lines(m: &mut Module) {
    fn pin(e: &mut Expr, line: u32) {
        e.loc.line = line;
        match &mut e.kind {
            ExprKind::Literal(_) | ExprKind::Ident(_) => {}
            ExprKind::Unary(_, c) | ExprKind::Paren(c) => pin(c, line),
            ExprKind::Binary(_, l, r) => {
                pin(l, line);
                pin(r, line);
            }
        }
    }
    fn pin_stmt(s: &mut Stmt) {
        let line = s.loc.line;
        for e in s.exprs_mut() {
            pin(e, line);
        }
        match &mut s.kind {
            StmtKind::Assign { .. } => {}
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                pin_stmt(then_branch);
                if let Some(e) = else_branch {
                    pin_stmt(&mut e.stmt);
                }
            }
            StmtKind::For { body, .. } => pin_stmt(body),
            StmtKind::Block { stmts, .. } => stmts.iter_mut().for_each(pin_stmt),
        }
    }
    for it in &mut m.items {
        let line = it.loc.line;
        match &mut it.kind {
            ItemKind::Wire { .. } | ItemKind::Integer { .. } => {}
            ItemKind::Reg { init, .. } => {
                if let Some(e) = init {
                    pin(e, line);
                }
            }
            ItemKind::ContinuousAssign { rhs, .. } => pin(rhs, line),
            ItemKind::Always { body, .. } => pin_stmt(body),
            ItemKind::Instance { conns, .. } => {
                for c in conns.iter_mut() {
                    if let Some(e) = &mut c.expr {
                        pin(e, line);
                    }
                }
            }
        }
    }
}

/// Signal table entry used by module validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalClass {
    InputPort,
    OutputWire,
    OutputReg,
    Wire,
    Reg,
    Integer,
}

impl SignalClass {
    pub fn is_variable(self) -> bool {
        matches!(self, SignalClass::OutputReg | SignalClass::Reg | SignalClass::Integer)
    }

    pub fn is_net(self) -> bool {
        matches!(self, SignalClass::OutputWire | SignalClass::Wire)
    }
}

/// Name → (class, width) for every port and declaration of a module.
pub fn signal_table(m: &Module) -> Result<BTreeMap<String, (SignalClass, u32)>, ParseError> {
    let mut table = BTreeMap::new();
    let mut add = |name: &str, class: SignalClass, width: u32, loc: SourceLoc| {
        if table.insert(name.to_string(), (class, width)).is_some() {
            Err(ParseError::new(loc.line, loc.col, format!("'{name}' is declared more than once")))
        } else {
            Ok(())
        }
    };
    for p in &m.ports {
        let class = match (p.dir, p.kind) {
            (Direction::Input, _) => SignalClass::InputPort,
            (Direction::Output, NetKind::Wire) => SignalClass::OutputWire,
            (Direction::Output, NetKind::Reg) => SignalClass::OutputReg,
        };
        add(&p.name, class, p.width, p.loc)?;
    }
    for it in &m.items {
        match &it.kind {
            ItemKind::Wire { name, width } => add(name, SignalClass::Wire, *width, it.loc)?,
            ItemKind::Reg { name, width, .. } => add(name, SignalClass::Reg, *width, it.loc)?,
            ItemKind::Integer { name } => add(name, SignalClass::Integer, 32, it.loc)?,
            _ => {}
        }
    }
    Ok(table)
}

fn validate_module(m: &Module) -> Result<(), ParseError> {
    let table = signal_table(m)?;
    let check_expr = |e: &Expr| -> Result<(), ParseError> {
        let mut res = Ok(());
        e.walk(&mut |x| {
            if let ExprKind::Ident(n) = &x.kind {
                if res.is_ok() && !table.contains_key(n) {
                    res = Err(ParseError::new(x.loc.line, x.loc.col, format!("undeclared identifier '{n}'")));
                }
            }
        });
        res
    };
    let mut inst_names = std::collections::HashSet::new();
    for it in &m.items {
        match &it.kind {
            ItemKind::Wire { .. } | ItemKind::Integer { .. } => {}
            ItemKind::Reg { init, .. } => {
                if let Some(e) = init {
                    if !e.idents().is_empty() {
                        return Err(ParseError::new(e.loc.line, e.loc.col, "register initializer must be constant"));
                    }
                }
            }
            ItemKind::ContinuousAssign { lhs, rhs } => {
                match table.get(lhs) {
                    Some((c, _)) if c.is_net() => {}
                    Some(_) => {
                        return Err(ParseError::new(it.loc.line, it.loc.col, format!("continuous assignment to non-net '{lhs}'")))
                    }
                    None => {
                        return Err(ParseError::new(it.loc.line, it.loc.col, format!("undeclared identifier '{lhs}'")))
                    }
                }
                check_expr(rhs)?;
            }
            ItemKind::Always { clock, body } => {
                match table.get(clock) {
                    Some((SignalClass::InputPort, 1)) => {}
                    _ => {
                        return Err(ParseError::new(
                            it.loc.line,
                            it.loc.col,
                            format!("clock '{clock}' must be a 1-bit input port"),
                        ))
                    }
                }
                let mut res = Ok(());
                body.walk(&mut |s| {
                    if res.is_err() {
                        return;
                    }
                    let lhs = match &s.kind {
                        StmtKind::Assign { lhs, .. } => Some(lhs),
                        StmtKind::For { var, .. } => Some(var),
                        _ => None,
                    };
                    if let Some(lhs) = lhs {
                        match table.get(lhs) {
                            Some((c, _)) if c.is_variable() => {}
                            Some(_) => {
                                res = Err(ParseError::new(
                                    s.loc.line,
                                    s.loc.col,
                                    format!("procedural assignment to non-variable '{lhs}'"),
                                ))
                            }
                            None => {
                                res = Err(ParseError::new(s.loc.line, s.loc.col, format!("undeclared identifier '{lhs}'")))
                            }
                        }
                    }
                    for e in s.exprs() {
                        if res.is_ok() {
                            res = check_expr(e);
                        }
                    }
                });
                res?;
            }
            ItemKind::Instance { name, conns, .. } => {
                if !inst_names.insert(name.clone()) || table.contains_key(name) {
                    return Err(ParseError::new(it.loc.line, it.loc.col, format!("'{name}' is declared more than once")));
                }
                for c in conns {
                    if let Some(e) = &c.expr {
                        check_expr(e)?;
                    }
                }
            }
        }
    }
    Ok(())
}
