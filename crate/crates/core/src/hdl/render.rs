//! Location-driven renderer. Every node is emitted as a text fragment at its
//! recorded (line, column); lines with no fragment come out empty.

use super::ast::*;

struct Frag {
    line: u32,
    col: u32,
    seq: usize,
    text: String,
}

#[derive(Default)]
struct Frags(Vec<Frag>);

impl Frags {
    fn push(&mut self, loc: SourceLoc, text: impl Into<String>) {
        let seq = self.0.len();
        self.0.push(Frag {
            line: loc.line,
            col: loc.col,
            seq,
            text: text.into(),
        });
    }
}

/// Render the main file of a unit.
pub fn render(unit: &SourceUnit) -> String {
    render_file(unit.main())
}

pub fn render_file(file: &SourceFile) -> String {
    let mut frags = Frags::default();
    for inc in &file.includes {
        frags.push(inc.loc, format!("`include \"{}\"", inc.path));
    }
    for m in &file.modules {
        module_frags(m, &mut frags);
    }
    for (&line, segs) in &file.comments {
        for c in segs {
            frags.push(SourceLoc::new(0, line, c.col), c.text.clone());
        }
    }
    let mut v = frags.0;
    v.sort_by_key(|f| (f.line, f.col, f.seq));
    let last = v.iter().map(|f| f.line).max().unwrap_or(0).max(file.line_count);
    let mut out = String::new();
    let mut it = v.into_iter().peekable();
    for line in 1..=last {
        let mut cur = String::new();
        let mut width = 0u32;
        while let Some(f) = it.next_if(|f| f.line == line) {
            let target = f.col.max(1) - 1;
            if width < target {
                cur.extend(std::iter::repeat(' ').take((target - width) as usize));
                width = target;
            } else if width > target {
                cur.push(' ');
                width += 1;
            }
            width += f.text.chars().count() as u32;
            cur.push_str(&f.text);
        }
        out.push_str(&cur);
        out.push('\n');
    }
    out
}

fn module_frags(m: &Module, out: &mut Frags) {
    if m.ports.is_empty() {
        out.push(m.loc, format!("module {};", m.name));
    } else {
        out.push(m.loc, format!("module {}(", m.name));
        let n = m.ports.len();
        for (i, p) in m.ports.iter().enumerate() {
            let dir = match p.dir {
                Direction::Input => "input",
                Direction::Output => "output",
            };
            let mut s = dir.to_string();
            if p.explicit_kind {
                s.push_str(match p.kind {
                    NetKind::Wire => " wire",
                    NetKind::Reg => " reg",
                });
            }
            if p.width > 1 {
                s.push_str(&format!(" [{}:0]", p.width - 1));
            }
            s.push(' ');
            s.push_str(&p.name);
            s.push_str(if i + 1 == n { ");" } else { "," });
            out.push(p.loc, s);
        }
    }
    for it in &m.items {
        item_frags(it, out);
    }
    out.push(m.end_loc, "endmodule");
}

fn range(width: u32) -> String {
    if width > 1 {
        format!("[{}:0] ", width - 1)
    } else {
        String::new()
    }
}

fn item_frags(it: &Item, out: &mut Frags) {
    match &it.kind {
        ItemKind::Wire { name, width } => out.push(it.loc, format!("wire {}{name};", range(*width))),
        ItemKind::Reg { name, width, init } => {
            let init = init
                .as_ref()
                .map(|e| format!(" = {}", render_expr(e)))
                .unwrap_or_default();
            out.push(it.loc, format!("reg {}{name}{init};", range(*width)))
        }
        ItemKind::Integer { name } => out.push(it.loc, format!("integer {name};")),
        ItemKind::ContinuousAssign { lhs, rhs } => {
            out.push(it.loc, format!("assign {lhs} = {};", render_expr(rhs)))
        }
        ItemKind::Always { clock, body } => {
            out.push(it.loc, format!("always @(posedge {clock})"));
            stmt_frags(body, out);
        }
        ItemKind::Instance {
            module,
            name,
            conns,
        } => {
            let conns: Vec<String> = conns
                .iter()
                .map(|c| {
                    format!(
                        ".{}({})",
                        c.port,
                        c.expr.as_ref().map(render_expr).unwrap_or_default()
                    )
                })
                .collect();
            out.push(it.loc, format!("{module} {name}({});", conns.join(", ")));
        }
    }
}

fn stmt_frags(s: &Stmt, out: &mut Frags) {
    match &s.kind {
        StmtKind::Assign { kind, lhs, rhs } => {
            out.push(s.loc, format!("{lhs} {} {};", kind.op(), render_expr(rhs)))
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            out.push(s.loc, format!("if ({})", render_expr(cond)));
            stmt_frags(then_branch, out);
            if let Some(e) = else_branch {
                out.push(e.loc, "else");
                stmt_frags(&e.stmt, out);
            }
        }
        StmtKind::For {
            var,
            init,
            cond,
            step,
            body,
        } => {
            out.push(
                s.loc,
                format!(
                    "for ({var} = {}; {}; {var} = {})",
                    render_expr(init),
                    render_expr(cond),
                    render_expr(step)
                ),
            );
            stmt_frags(body, out);
        }
        StmtKind::Block { stmts, end_loc } => {
            out.push(s.loc, "begin");
            for st in stmts {
                stmt_frags(st, out);
            }
            out.push(*end_loc, "end");
        }
    }
}

/// Canonical literal text: lowercase digits, no leading zeros.
pub fn render_literal(l: &Literal) -> String {
    match l.base {
        LiteralBase::Bin => format!("{}'b{:b}", l.width, l.value),
        LiteralBase::Hex => format!("{}'h{:x}", l.width, l.value),
        LiteralBase::Dec => format!("{}'d{}", l.width, l.value),
        LiteralBase::Unsized => format!("{}", l.value),
    }
}

/// Render an expression on one line. Explicit `Paren` nodes are kept;
/// parentheses are added only where precedence would otherwise regroup.
pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, &mut s);
    s
}

fn write_expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Literal(l) => out.push_str(&render_literal(l)),
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Paren(inner) => {
            out.push('(');
            write_expr(inner, out);
            out.push(')');
        }
        ExprKind::Unary(op, inner) => {
            out.push_str(op.symbol());
            if matches!(inner.kind, ExprKind::Binary(..)) {
                out.push('(');
                write_expr(inner, out);
                out.push(')');
            } else {
                write_expr(inner, out);
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let wrap_l = matches!(&l.kind, ExprKind::Binary(o, ..) if o.precedence() < p);
            let wrap_r = matches!(&r.kind, ExprKind::Binary(o, ..) if o.precedence() <= p);
            write_wrapped(l, wrap_l, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_wrapped(r, wrap_r, out);
        }
    }
}

fn write_wrapped(e: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn renders_statements_on_their_lines() {
        let src = "module m(input wire clk, output reg q);\n\n  // note\n  always @(posedge clk)\n    q <= 1'b1;\nendmodule\n";
        let u = parse(src).unwrap();
        assert_eq!(render(&u), src);
    }

    #[test]
    fn multi_line_statement_collapses_to_first_line() {
        let src = "module m(output wire o);\n  assign o =\n    1'b0;\nendmodule\n";
        let u = parse(src).unwrap();
        let out = render(&u);
        assert_eq!(out.lines().nth(1).unwrap().trim(), "assign o = 1'b0;");
        assert_eq!(out.lines().nth(2).unwrap(), "");
        assert!(parse(&out).unwrap().same_structure(&u));
    }

    #[test]
    fn precedence_parens_added_for_synthesized_trees() {
        let l = SourceLoc::new(0, 1, 1);
        let a = Expr::ident("a", l);
        let b = Expr::ident("b", l);
        let c = Expr::ident("c", l);
        let sum = Expr::binary(BinaryOp::Add, a, b);
        let e = Expr::binary(BinaryOp::Sub, c, sum);
        assert_eq!(render_expr(&e), "c - (a + b)");
        let e2 = Expr::unary(UnaryOp::Not, Expr::binary(BinaryOp::And, Expr::ident("x", l), Expr::ident("y", l)));
        assert_eq!(render_expr(&e2), "~(x & y)");
    }

    #[test]
    fn literal_rendering_is_canonical() {
        let u = parse("module m(output wire [7:0] o);\n assign o = 8'H0A + 8'b0011 + 8'd07 + 3;\nendmodule").unwrap();
        let out = render(&u);
        assert!(out.contains("8'ha + 8'b11 + 8'd7 + 3"), "{out}");
    }
}
