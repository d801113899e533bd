use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::{Category, DiffError, Divergence, NormalizedTrace, Verdict};
use crate::trace::TraceEvent;

/// A resolved expectation about one run, in that run's line coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    /// Breakpoint pauses at these lines (and their snapshots) are not compared.
    ExcludePausesAt { lines: BTreeSet<u32> },
    /// The `ordinal`-th BreakpointSet event belongs to an added breakpoint.
    ExcludeBreakpointSet { ordinal: usize },
    /// In every time step where `line` pauses, it pauses exactly `count`
    /// times. With `count == 0` it never pauses.
    ExpectPauseCount { line: u32, count: u64 },
    /// `line` does not pause at any of `times`.
    ExpectNoPauseAt { line: u32, times: BTreeSet<u64> },
    /// The `ordinal`-th breakpoint was requested on `from` and must land on `to`.
    ExpectSlideEquivalence { ordinal: usize, from: u32, to: u32 },
    /// The `ordinal`-th breakpoint was requested in folded-view line `view`,
    /// which shows source line `source`.
    ViewBreakpoint { ordinal: usize, view: u32, source: u32 },
    /// An interactive entry whose defining event never appeared.
    Unresolved { what: String },
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        match self {
            Expectation::ExcludePausesAt { lines } => {
                write!(f, "exclude_pauses {}", join(&mut lines.iter().map(|l| l.to_string())))
            }
            Expectation::ExcludeBreakpointSet { ordinal } => write!(f, "exclude_bp_set {ordinal}"),
            Expectation::ExpectPauseCount { line, count } => write!(f, "pause_count {line} {count}"),
            Expectation::ExpectNoPauseAt { line, times } => {
                write!(f, "no_pause {line} {}", join(&mut times.iter().map(|t| t.to_string())))
            }
            Expectation::ExpectSlideEquivalence { ordinal, from, to } => write!(f, "slide {ordinal} {from} {to}"),
            Expectation::ViewBreakpoint { ordinal, view, source } => write!(f, "view {ordinal} {view} {source}"),
            Expectation::Unresolved { what } => write!(f, "unresolved {what}"),
        }
    }
}

impl FromStr for Expectation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed expectation '{s}'");
        let mut w = s.split_whitespace();
        let head = w.next().ok_or_else(bad)?;
        let nums: Vec<u64> = if head == "unresolved" {
            Vec::new()
        } else {
            w.clone().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        let n = |i: usize| nums.get(i).copied().ok_or_else(bad);
        Ok(match head {
            "exclude_pauses" => Expectation::ExcludePausesAt {
                lines: nums.iter().map(|&x| x as u32).collect(),
            },
            "exclude_bp_set" => Expectation::ExcludeBreakpointSet { ordinal: n(0)? as usize },
            "pause_count" => Expectation::ExpectPauseCount {
                line: n(0)? as u32,
                count: n(1)?,
            },
            "no_pause" => Expectation::ExpectNoPauseAt {
                line: n(0)? as u32,
                times: nums.iter().skip(1).copied().collect(),
            },
            "slide" => Expectation::ExpectSlideEquivalence {
                ordinal: n(0)? as usize,
                from: n(1)? as u32,
                to: n(2)? as u32,
            },
            "view" => Expectation::ViewBreakpoint {
                ordinal: n(0)? as usize,
                view: n(1)? as u32,
                source: n(2)? as u32,
            },
            "unresolved" => Expectation::Unresolved {
                what: w.collect::<Vec<_>>().join(" "),
            },
            _ => return Err(bad()),
        })
    }
}

fn fail(category: Category, time: u64, left: String, right: String) -> Verdict {
    Verdict::Inconsistent(Divergence {
        category,
        index: 0,
        time,
        left: Some(left),
        right: Some(right),
    })
}

/// Check the run-internal expectations of one normalized run.
pub fn check_expectations(trace: &NormalizedTrace, expect: &[Expectation]) -> Result<Verdict, DiffError> {
    // pauses per (line, time), counting excluded ones: they are the evidence
    let mut pauses: BTreeMap<(u32, u64), u64> = BTreeMap::new();
    let mut last_time = 0;
    for e in trace.events.iter().filter(|e| !e.deleted) {
        if let TraceEvent::Paused { line, time, .. } = e.event {
            *pauses.entry((line, time)).or_default() += 1;
            last_time = last_time.max(time);
        }
    }
    for x in expect {
        match x {
            Expectation::Unresolved { what } => return Err(DiffError::UnresolvedExpectation(what.clone())),
            Expectation::ExpectPauseCount { line, count } => {
                for (&(l, t), &n) in pauses.range((*line, 0)..=(*line, u64::MAX)) {
                    debug_assert_eq!(l, *line);
                    // the final step of an unfinished run may be cut short
                    let partial = !trace.finished && t == last_time && n < *count;
                    if n != *count && !partial {
                        return Ok(fail(
                            Category::PauseCount,
                            t,
                            format!("expected {count} pauses at line {line}"),
                            format!("{n} pauses at time {t}"),
                        ));
                    }
                }
            }
            Expectation::ExpectNoPauseAt { line, times } => {
                for &t in times {
                    if pauses.contains_key(&(*line, t)) {
                        return Ok(fail(
                            Category::PauseLocation,
                            t,
                            format!("no pause at line {line}"),
                            format!("paused at line {line} at time {t}"),
                        ));
                    }
                }
            }
            Expectation::ExpectSlideEquivalence { ordinal, to, .. } => {
                let ev = trace.events.iter().find(|e| e.bp_ordinal == Some(*ordinal));
                match ev.map(|e| &e.event) {
                    Some(TraceEvent::BreakpointSet { actual, .. }) if *actual == Some(*to) => {}
                    Some(e) => {
                        return Ok(fail(
                            Category::BreakpointPlacement,
                            0,
                            format!("breakpoint slides to line {to}"),
                            e.to_string(),
                        ))
                    }
                    None => return Err(DiffError::UnresolvedExpectation(x.to_string())),
                }
            }
            Expectation::ExcludePausesAt { .. } | Expectation::ExcludeBreakpointSet { .. } | Expectation::ViewBreakpoint { .. } => {}
        }
    }
    Ok(Verdict::Consistent)
}
