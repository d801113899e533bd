//! Per-line classification derived from the AST and stored comments.

use super::ast::*;

/// `table[line - 1]` is the class of `line`. Covers every line of the file.
pub type LineClassTable = Vec<LineClass>;

pub fn line_classes(file: &SourceFile) -> LineClassTable {
    let mut max_line = file.line_count;
    let mut marks: Vec<(u32, LineClass)> = Vec::new();
    let mut mark = |line: u32, c: LineClass| marks.push((line, c));
    for inc in &file.includes {
        mark(inc.loc.line, LineClass::DeclarationOnly);
    }
    for m in &file.modules {
        mark(m.loc.line, LineClass::DeclarationOnly);
        mark(m.end_loc.line, LineClass::DeclarationOnly);
        for p in &m.ports {
            mark(p.loc.line, LineClass::DeclarationOnly);
        }
        for it in &m.items {
            match &it.kind {
                ItemKind::ContinuousAssign { .. } => mark(it.loc.line, LineClass::Executable),
                ItemKind::Always { body, .. } => {
                    mark(it.loc.line, LineClass::DeclarationOnly);
                    body.walk(&mut |s| stmt_marks(s, &mut mark));
                }
                _ => mark(it.loc.line, LineClass::DeclarationOnly),
            }
        }
    }
    for &(l, _) in &marks {
        max_line = max_line.max(l);
    }
    if let Some((&l, _)) = file.comments.last_key_value() {
        max_line = max_line.max(l);
    }
    let mut table = vec![LineClass::Blank; max_line as usize];
    for (&l, segs) in &file.comments {
        if !segs.is_empty() {
            table[l as usize - 1] = LineClass::Comment;
        }
    }
    for &(l, c) in &marks {
        let slot = &mut table[l as usize - 1];
        if *slot != LineClass::Executable {
            *slot = c;
        }
    }
    table
}

fn stmt_marks(s: &Stmt, mark: &mut impl FnMut(u32, LineClass)) {
    match &s.kind {
        StmtKind::Assign { .. } => mark(s.loc.line, LineClass::Executable),
        StmtKind::If { else_branch, .. } => {
            mark(s.loc.line, LineClass::Executable);
            if let Some(e) = else_branch {
                mark(e.loc.line, LineClass::DeclarationOnly);
            }
        }
        StmtKind::For { .. } => mark(s.loc.line, LineClass::DeclarationOnly),
        StmtKind::Block { end_loc, .. } => {
            mark(s.loc.line, LineClass::DeclarationOnly);
            mark(end_loc.line, LineClass::DeclarationOnly);
        }
    }
}

/// Number of execution points starting on `line`.
pub fn points_on_line(file: &SourceFile, line: u32) -> usize {
    let mut n = 0;
    for m in &file.modules {
        for it in &m.items {
            match &it.kind {
                ItemKind::ContinuousAssign { .. } if it.loc.line == line => n += 1,
                ItemKind::Always { body, .. } => body.walk(&mut |s| {
                    if s.is_point() && s.loc.line == line {
                        n += 1
                    }
                }),
                _ => {}
            }
        }
    }
    n
}

/// The module whose `module ... endmodule` span contains `line`.
pub fn enclosing_module(file: &SourceFile, line: u32) -> Option<&Module> {
    file.modules
        .iter()
        .find(|m| m.loc.line <= line && line <= m.end_loc.line)
}

/// Where a breakpoint requested at `line` lands: the line itself when it is
/// executable, else the nearest executable line below it in the same module.
pub fn slide_target(file: &SourceFile, table: &LineClassTable, line: u32) -> Option<u32> {
    let m = enclosing_module(file, line)?;
    let is_exec = |l: u32| table.get(l as usize - 1) == Some(&LineClass::Executable);
    if is_exec(line) {
        return Some(line);
    }
    (line + 1..=m.end_loc.line).find(|&l| is_exec(l))
}

/// All executable lines, ascending.
pub fn executable_lines(table: &LineClassTable) -> Vec<u32> {
    table
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == LineClass::Executable)
        .map(|(i, _)| i as u32 + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    const SRC: &str = "module top(input wire clk, output reg q);\n  // c\n\n  always @(posedge clk) begin\n    q <= 1'b1;\n  end\nendmodule\n";

    #[test]
    fn classes() {
        let u = parse(SRC).unwrap();
        let t = line_classes(u.main());
        use LineClass::*;
        assert_eq!(t, vec![DeclarationOnly, Comment, Blank, DeclarationOnly, Executable, DeclarationOnly, DeclarationOnly]);
    }

    #[test]
    fn sliding() {
        let u = parse(SRC).unwrap();
        let t = line_classes(u.main());
        assert_eq!(slide_target(u.main(), &t, 2), Some(5));
        assert_eq!(slide_target(u.main(), &t, 5), Some(5));
        assert_eq!(slide_target(u.main(), &t, 6), None);
        assert_eq!(slide_target(u.main(), &t, 40), None);
    }
}
