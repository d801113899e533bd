//! Random seed designs in the supported subset.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::hdl::{parse, render, SourceUnit};
use crate::sim::elaborate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("line budget must start at 20 or more, got {0:?}")]
    BudgetTooSmall(RangeInclusive<u32>),
    #[error("no design within {budget:?} lines after {attempts} attempts")]
    GenerationRetryExceeded { budget: RangeInclusive<u32>, attempts: u32 },
}

const ATTEMPTS: u32 = 32;

#[derive(Debug, Clone)]
struct Sig {
    name: String,
    width: u32,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    lines: Vec<String>,
    next_comment: u32,
    next_loop: u32,
}

impl<R: Rng> Gen<'_, R> {
    fn line(&mut self, indent: usize, text: impl AsRef<str>) {
        self.lines.push(format!("{}{}", " ".repeat(indent), text.as_ref()));
    }

    /// Sometimes a comment line or a blank line.
    fn filler(&mut self, indent: usize) {
        let r: f64 = self.rng.gen();
        if r < 0.12 {
            self.next_comment += 1;
            let n = self.next_comment;
            self.line(indent, format!("// note {n}"));
        } else if r < 0.2 {
            self.lines.push(String::new());
        }
    }

    fn literal(&mut self, width: u32) -> String {
        let v = self.rng.gen_range(0..=crate::hdl::mask(width).min(255));
        format!("{width}'h{v:x}")
    }

    fn leaf(&mut self, width: u32, reads: &[Sig]) -> String {
        if reads.is_empty() || self.rng.gen_bool(0.3) {
            self.literal(width)
        } else {
            reads.choose(self.rng).unwrap().name.clone()
        }
    }

    fn expr(&mut self, width: u32, reads: &[Sig], depth: u32) -> String {
        let r: f64 = self.rng.gen();
        if depth == 0 || r < 0.35 {
            return self.leaf(width, reads);
        }
        if r < 0.45 {
            let inner = self.expr(width, reads, depth - 1);
            return format!("~{}", paren(&inner));
        }
        let op = ["+", "-", "&", "|", "^"].choose(self.rng).unwrap();
        let a = self.expr(width, reads, depth - 1);
        let b = self.expr(width, reads, depth - 1);
        format!("{} {op} {}", paren(&a), paren(&b))
    }

    fn cond(&mut self, reads: &[Sig]) -> String {
        let s = reads.choose(self.rng).unwrap().clone();
        let lit = self.literal(s.width);
        match self.rng.gen_range(0..3) {
            0 => format!("({} & {lit}) == {lit}", s.name),
            1 => format!("{} < {lit}", s.name),
            _ => format!("{} != {lit}", s.name),
        }
    }

    fn assign(&mut self, indent: usize, owned: &[Sig], reads: &[Sig], blocking: bool) {
        let t = owned.choose(self.rng).unwrap().clone();
        let rhs = self.expr(t.width, reads, 2);
        let op = if blocking { "=" } else { "<=" };
        self.line(indent, format!("{} {op} {rhs};", t.name));
    }

    fn stmts(&mut self, indent: usize, n: usize, owned: &[Sig], reads: &[Sig], depth: u32, loops: &mut Vec<String>) {
        for _ in 0..n {
            self.filler(indent);
            let r: f64 = self.rng.gen();
            if depth > 0 && r < 0.2 {
                let c = self.cond(reads);
                self.line(indent, format!("if ({c}) begin"));
                let k = self.rng.gen_range(1..=2);
                self.stmts(indent + 2, k, owned, reads, depth - 1, loops);
                if self.rng.gen_bool(0.7) {
                    self.line(indent, "end");
                    self.line(indent, "else begin");
                    let k = self.rng.gen_range(1..=2);
                    self.stmts(indent + 2, k, owned, reads, depth - 1, loops);
                }
                self.line(indent, "end");
            } else if depth > 0 && r < 0.3 {
                self.next_loop += 1;
                let v = format!("i{}", self.next_loop);
                loops.push(v.clone());
                let (init, bound) = if self.rng.gen_bool(0.25) {
                    (self.rng.gen_range(4..9), self.rng.gen_range(1..4))
                } else {
                    (0, self.rng.gen_range(1..9))
                };
                self.line(indent, format!("for ({v} = {init}; {v} < {bound}; {v} = {v} + 1)"));
                let t = owned.choose(self.rng).unwrap().clone();
                let step = self.leaf(t.width, reads);
                let op = if self.rng.gen_bool(0.5) { "<=" } else { "=" };
                self.line(indent + 2, format!("{} {op} {} ^ {step};", t.name, t.name));
            } else {
                let blocking = self.rng.gen_bool(0.25);
                self.assign(indent, owned, reads, blocking);
            }
        }
    }
}

fn paren(s: &str) -> String {
    if s.contains(' ') {
        format!("({s})")
    } else {
        s.to_string()
    }
}

/// Submodule: registered transform of its input.
fn submodule(g: &mut Gen<'_, impl Rng>, name: &str, width: u32) {
    g.line(0, format!("module {name}(input wire clk, input wire [{}:0] d, output reg [{}:0] q);", width - 1, width - 1));
    let init = g.literal(width);
    g.line(2, format!("reg [{}:0] s = {init};", width - 1));
    g.filler(2);
    g.line(2, "always @(posedge clk) begin");
    let k = g.literal(width);
    g.line(4, format!("s <= d ^ {k};"));
    let k = g.literal(width);
    g.line(4, format!("q <= s + {k};"));
    g.line(2, "end");
    g.line(0, "endmodule");
}

fn generate_text(rng: &mut impl Rng, target: u32) -> String {
    let mut g = Gen {
        rng,
        lines: Vec::new(),
        next_comment: 0,
        next_loop: 0,
    };
    g.line(0, "// generated seed design");
    let n_sub = if target < 60 { 0 } else { 1 + (target / 300) as usize };
    let mut subs = Vec::new();
    for k in 0..n_sub {
        let width = g.rng.gen_range(2..=8);
        submodule(&mut g, &format!("sub{k}"), width);
        g.filler(0);
        subs.push(width);
    }
    let n_out = 2;
    let ports: Vec<String> = (0..n_out).map(|k| format!("output wire [7:0] o{k}")).collect();
    g.line(0, format!("module top(input wire clk, input wire rst, {});", ports.join(", ")));

    let mut regs = Vec::new();
    for k in 0..6 + target / 60 {
        let width = *[1u32, 2, 4, 4, 8, 8].choose(g.rng).unwrap();
        let init = g.literal(width);
        let name = format!("r{k}");
        g.line(2, format!("reg [{}:0] {name} = {init};", width - 1));
        regs.push(Sig { name, width });
    }
    let mut reads = regs.clone();
    reads.push(Sig {
        name: "rst".into(),
        width: 1,
    });
    for (k, &width) in subs.iter().enumerate() {
        let w = format!("w{k}");
        g.line(2, format!("wire [{}:0] {w};", width - 1));
        let d = g.expr(width, &regs, 1);
        g.line(2, format!("sub{k} u{k}(.clk(clk), .d({d}), .q({w}));"));
        reads.push(Sig { name: w, width });
    }
    let decl_at = g.lines.len();
    for k in 0..n_out {
        let e = g.expr(8, &reads, 1);
        g.line(2, format!("assign o{k} = {e};"));
    }

    // always blocks own disjoint register sets, so every register has one driver
    let mut order: Vec<usize> = (0..regs.len()).collect();
    order.shuffle(g.rng);
    let mut loops = Vec::new();
    let mut block = 0;
    while (g.lines.len() + loops.len()) as u32 + 4 < target && block < regs.len() {
        let take = g.rng.gen_range(1..=2).min(regs.len() - block);
        let owned: Vec<Sig> = order[block..block + take].iter().map(|&i| regs[i].clone()).collect();
        block += take;
        g.filler(2);
        if take == 1 && g.rng.gen_bool(0.4) {
            // a plain pipeline register fed from other blocks' state
            let others: Vec<Sig> = reads.iter().filter(|s| s.name != owned[0].name).cloned().collect();
            let rhs = g.expr(owned[0].width, &others, 2);
            g.line(2, format!("always @(posedge clk) {} <= {rhs};", owned[0].name));
            continue;
        }
        g.line(2, "always @(posedge clk) begin");
        let room = target.saturating_sub((g.lines.len() + loops.len()) as u32 + 3) as usize;
        let blocks_left = (regs.len() - block) / 2 + 1;
        let budget = room / blocks_left;
        let start = g.lines.len();
        while g.lines.len() - start + 4 < budget.max(4) || g.lines.len() == start {
            let n = g.rng.gen_range(1..=3);
            g.stmts(4, n, &owned, &reads, 2, &mut loops);
        }
        g.line(2, "end");
    }
    let ints: Vec<String> = loops.iter().map(|v| format!("  integer {v};")).collect();
    for (i, d) in ints.into_iter().enumerate() {
        g.lines.insert(decl_at + i, d);
    }
    g.line(0, "endmodule");
    let mut text = g.lines.join("\n");
    text.push('\n');
    text
}

/// A random design whose rendered line count lies within `budget`.
pub fn generate_seed(rng: &mut impl Rng, budget: RangeInclusive<u32>) -> Result<SourceUnit, GenError> {
    if *budget.start() < 20 || budget.is_empty() {
        return Err(GenError::BudgetTooSmall(budget));
    }
    for _ in 0..ATTEMPTS {
        let target = rng.gen_range(budget.clone());
        let text = generate_text(rng, target);
        let Ok(unit) = parse(&text) else { continue };
        let n = render(&unit).lines().count() as u32;
        if budget.contains(&n) && elaborate(&unit).is_ok() {
            return Ok(unit);
        }
    }
    Err(GenError::GenerationRetryExceeded {
        budget,
        attempts: ATTEMPTS,
    })
}
