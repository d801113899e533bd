//! Equivalence-preserving design transformations and the PRO pipeline.

mod apply;
pub mod sites;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hdl::ast::SourceUnit;
use crate::hdl::linemap::LineMap;

pub use apply::{apply_record, apply_site};
pub use sites::enumerate_sites;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RtlKind {
    AssignConv,
    LiteralExpr,
    BitMutate,
    DeadLoop,
    IncludeInject,
    IncludeRemove,
}

impl RtlKind {
    pub const ALL: [RtlKind; 6] = [
        RtlKind::AssignConv,
        RtlKind::LiteralExpr,
        RtlKind::BitMutate,
        RtlKind::DeadLoop,
        RtlKind::IncludeInject,
        RtlKind::IncludeRemove,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RtlKind::AssignConv => "assign-conv",
            RtlKind::LiteralExpr => "literal-expr",
            RtlKind::BitMutate => "bit-mutate",
            RtlKind::DeadLoop => "dead-loop",
            RtlKind::IncludeInject => "include-inject",
            RtlKind::IncludeRemove => "include-remove",
        }
    }
}

impl fmt::Display for RtlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RtlKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RtlKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown transformation '{s}'"))
    }
}

/// What a transformation acts on, in the main file of the unit it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteTarget {
    /// A statement, by its start position.
    Stmt { line: u32, col: u32 },
    /// The `index`-th expression node (pre-order over all of the owner's
    /// expression slots) of the statement or item starting at `line:col`.
    Expr { line: u32, col: u32, index: usize },
    /// The include directive on `line`.
    Include { line: u32 },
    /// The unit as a whole.
    Unit,
}

impl fmt::Display for SiteTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteTarget::Stmt { line, col } => write!(f, "{line}:{col}"),
            SiteTarget::Expr { line, col, index } => write!(f, "{line}:{col}#{index}"),
            SiteTarget::Include { line } => write!(f, "{line}"),
            SiteTarget::Unit => f.write_str("-"),
        }
    }
}

impl FromStr for SiteTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed site '{s}' (expected L, L:C, L:C#I or -)");
        if s == "-" {
            return Ok(SiteTarget::Unit);
        }
        let (pos, index) = match s.split_once('#') {
            Some((p, i)) => (p, Some(i.parse().map_err(|_| bad())?)),
            None => (s, None),
        };
        match (pos.split_once(':'), index) {
            (Some((l, c)), idx) => {
                let line = l.parse().map_err(|_| bad())?;
                let col = c.parse().map_err(|_| bad())?;
                Ok(match idx {
                    Some(index) => SiteTarget::Expr { line, col, index },
                    None => SiteTarget::Stmt { line, col },
                })
            }
            (None, None) => Ok(SiteTarget::Include {
                line: pos.parse().map_err(|_| bad())?,
            }),
            (None, Some(_)) => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformSite {
    pub kind: RtlKind,
    pub target: SiteTarget,
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitOp {
    Add,
    Sub,
}

/// Random choices made when a transformation was applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RtlParams {
    None,
    /// `(a + b)` or `(a - b)` replacing a literal.
    Split { op: SplitOp, a: u64, b: u64 },
    /// Names of the generated include files (without the `.vh` suffix);
    /// each defines one empty module of the same name.
    Inject { names: Vec<String> },
}

/// One applied transformation; enough to replay it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RtlRecord {
    pub kind: RtlKind,
    pub target: SiteTarget,
    pub params: RtlParams,
}

impl fmt::Display for RtlRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.target)?;
        match &self.params {
            RtlParams::None => Ok(()),
            RtlParams::Split { op, a, b } => {
                let op = match op {
                    SplitOp::Add => "add",
                    SplitOp::Sub => "sub",
                };
                write!(f, " {op} {a} {b}")
            }
            RtlParams::Inject { names } => {
                for n in names {
                    write!(f, " {n}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for RtlRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = s.split_whitespace();
        let kind: RtlKind = w.next().ok_or("empty record")?.parse()?;
        let target: SiteTarget = w.next().ok_or("record without site")?.parse()?;
        let rest: Vec<&str> = w.collect();
        let params = match (kind, rest.as_slice()) {
            (RtlKind::LiteralExpr, [op, a, b]) => RtlParams::Split {
                op: match *op {
                    "add" => SplitOp::Add,
                    "sub" => SplitOp::Sub,
                    _ => return Err(format!("bad split operator in '{s}'")),
                },
                a: a.parse().map_err(|_| format!("bad operand in '{s}'"))?,
                b: b.parse().map_err(|_| format!("bad operand in '{s}'"))?,
            },
            (RtlKind::IncludeInject, names) if !names.is_empty() => RtlParams::Inject {
                names: names.iter().map(|n| n.to_string()).collect(),
            },
            (RtlKind::LiteralExpr | RtlKind::IncludeInject, _) => return Err(format!("missing parameters in '{s}'")),
            (_, []) => RtlParams::None,
            _ => return Err(format!("unexpected parameters in '{s}'")),
        };
        Ok(RtlRecord { kind, target, params })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("ineligible site for {kind} at {target}: {reason}")]
    IneligibleSite {
        kind: RtlKind,
        target: SiteTarget,
        reason: String,
    },
}

/// A variant together with how its lines relate to the input's.
#[derive(Debug, Clone)]
pub struct TransformResult {
    pub variant: SourceUnit,
    /// Input line to variant line.
    pub line_map: LineMap,
    pub records: Vec<RtlRecord>,
    /// The pipeline ran out of eligible sites before using its budget.
    pub stopped_early: bool,
}

/// Relative draw weights of the operators, in `RtlKind::ALL` order.
pub type KindWeights = [u32; 6];

pub const UNIFORM: KindWeights = [1; 6];

/// Apply up to `m` randomly chosen transformations in sequence.
pub fn pro_pipeline(unit: &SourceUnit, m: usize, weights: &KindWeights, rng: &mut impl Rng) -> TransformResult {
    assert!(m >= 1, "iteration count must be at least 1");
    let mut cur = TransformResult {
        variant: unit.clone(),
        line_map: LineMap::identity(),
        records: Vec::new(),
        stopped_early: false,
    };
    for _ in 0..m {
        let mut open: Vec<RtlKind> = RtlKind::ALL
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0)
            .map(|(&k, _)| k)
            .collect();
        let mut applied = false;
        while !open.is_empty() {
            let total: u32 = open.iter().map(|k| weights[*k as usize]).sum();
            let mut pick = rng.gen_range(0..total);
            let idx = open
                .iter()
                .position(|k| {
                    let w = weights[*k as usize];
                    if pick < w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .expect("weighted pick in range");
            let kind = open.remove(idx);
            let sites = enumerate_sites(&cur.variant, kind);
            if sites.is_empty() {
                continue;
            }
            let site = &sites[rng.gen_range(0..sites.len())];
            let step = apply_site(&cur.variant, site, rng).expect("enumerated sites are eligible");
            cur.variant = step.variant;
            cur.line_map = cur.line_map.compose(&step.line_map);
            cur.records.extend(step.records);
            applied = true;
            break;
        }
        if !applied {
            cur.stopped_early = true;
            break;
        }
    }
    cur
}

/// Re-apply recorded transformations in order.
pub fn replay_records(unit: &SourceUnit, records: &[RtlRecord]) -> Result<TransformResult, TransformError> {
    let mut cur = TransformResult {
        variant: unit.clone(),
        line_map: LineMap::identity(),
        records: Vec::new(),
        stopped_early: false,
    };
    for r in records {
        let step = apply_record(&cur.variant, r)?;
        cur.variant = step.variant;
        cur.line_map = cur.line_map.compose(&step.line_map);
        cur.records.push(r.clone());
    }
    Ok(cur)
}
