//! Trace normalization and the differential verdict.

mod expect;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hdl::linemap::LineMap;
use crate::sim::SimConfig;
use crate::trace::{FailureKind, PauseReason, Trace, TraceEvent, Waveform};

pub use expect::{check_expectations, Expectation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    BreakpointPlacement,
    PauseLocation,
    PauseCount,
    WaveValue,
    Termination,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::BreakpointPlacement,
        Category::PauseLocation,
        Category::PauseCount,
        Category::WaveValue,
        Category::Termination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::BreakpointPlacement => "breakpoint-placement",
            Category::PauseLocation => "pause-location",
            Category::PauseCount => "pause-count",
            Category::WaveValue => "wave-value",
            Category::Termination => "termination",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category '{s}'"))
    }
}

/// First point where two normalized traces disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub category: Category,
    /// Position in the compared event sequences, or the sample index for
    /// waveform differences.
    pub index: usize,
    pub time: u64,
    pub left: Option<String>,
    pub right: Option<String>,
}

impl Divergence {
    /// Key used to group likely duplicates: the category plus the kinds of
    /// the two witnesses, without concrete lines, times or values.
    pub fn signature(&self) -> String {
        let head = |s: &Option<String>| {
            s.as_deref()
                .and_then(|t| t.split_whitespace().next())
                .unwrap_or("none")
                .to_string()
        };
        format!("{}:{}/{}", self.category, head(&self.left), head(&self.right))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent(Divergence),
    Failure(FailureKind),
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent)
    }

    pub fn category(&self) -> Option<Category> {
        match self {
            Verdict::Inconsistent(d) => Some(d.category),
            _ => None,
        }
    }

    /// `consistent`, `failure <kind>`, or `inconsistent <category> <index>
    /// <time>` followed by `left <event>` and `right <event>` lines (`-` when
    /// a side has no event there).
    pub fn to_text(&self) -> String {
        match self {
            Verdict::Consistent => "consistent\n".into(),
            Verdict::Failure(k) => format!("failure {}\n", k.as_str()),
            Verdict::Inconsistent(d) => format!(
                "inconsistent {} {} {}\nleft {}\nright {}\n",
                d.category,
                d.index,
                d.time,
                d.left.as_deref().unwrap_or("-"),
                d.right.as_deref().unwrap_or("-")
            ),
        }
    }

    pub fn from_text(text: &str) -> Result<Verdict, String> {
        let mut lines = text.lines();
        let head = lines.next().ok_or("empty verdict")?;
        let mut w = head.split_whitespace();
        match w.next() {
            Some("consistent") => Ok(Verdict::Consistent),
            Some("failure") => FailureKind::parse(w.next().unwrap_or(""))
                .map(Verdict::Failure)
                .ok_or_else(|| format!("bad verdict '{head}'")),
            Some("inconsistent") => {
                let bad = || format!("bad verdict '{head}'");
                let category = w.next().ok_or_else(bad)?.parse()?;
                let index = w.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
                let time = w.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
                let mut side = |tag: &str| -> Result<Option<String>, String> {
                    let l = lines.next().ok_or_else(|| format!("missing '{tag}' line"))?;
                    let rest = l.strip_prefix(tag).and_then(|r| r.strip_prefix(' ')).ok_or_else(|| format!("expected '{tag}' line"))?;
                    Ok((rest != "-").then(|| rest.to_string()))
                };
                let left = side("left")?;
                let right = side("right")?;
                Ok(Verdict::Inconsistent(Divergence {
                    category,
                    index,
                    time,
                    left,
                    right,
                }))
            }
            _ => Err(format!("bad verdict '{head}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("trace event references line {line}, which the line map does not cover")]
    IncomparableTrace { line: u32, category: Category },
    #[error("expectation never resolved during the run: {0}")]
    UnresolvedExpectation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormEvent {
    pub event: TraceEvent,
    /// Position among the run's BreakpointSet events.
    pub bp_ordinal: Option<usize>,
    /// Refers to a line that the compared variant deleted.
    pub deleted: bool,
    /// Dropped by an expectation; kept for expectation checks only.
    pub excluded: bool,
}

impl NormEvent {
    pub fn retained(&self) -> bool {
        !self.deleted && !self.excluded
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedTrace {
    pub events: Vec<NormEvent>,
    pub waveform: Option<Waveform>,
    pub finished: bool,
}

impl NormalizedTrace {
    pub fn retained(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.retained()).map(|e| &e.event)
    }

    /// One event per line; dropped events carry a trailing `!deleted` or
    /// `!excluded` marker. Waveform rows follow as in the trace format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.event.to_string());
            if e.deleted {
                out.push_str(" !deleted");
            } else if e.excluded {
                out.push_str(" !excluded");
            }
            out.push('\n');
        }
        let t = Trace {
            events: Vec::new(),
            waveform: self.waveform.clone(),
            failure: None,
        };
        out.push_str(&t.to_text());
        out
    }

    /// The retained part as a plain trace.
    pub fn to_trace(&self) -> Trace {
        Trace {
            events: self.retained().cloned().collect(),
            waveform: self.waveform.clone(),
            failure: None,
        }
    }
}

fn event_lines_mut(e: &mut TraceEvent) -> Vec<&mut u32> {
    match e {
        TraceEvent::BreakpointSet { requested, actual } => {
            let mut v = vec![requested];
            if let Some(a) = actual {
                v.push(a);
            }
            v
        }
        TraceEvent::Paused { line, .. } => vec![line],
        _ => Vec::new(),
    }
}

fn event_time(e: &TraceEvent) -> u64 {
    match e {
        TraceEvent::BreakpointSet { .. } => 0,
        TraceEvent::Paused { time, .. } | TraceEvent::WaveOutput { time, .. } | TraceEvent::Finished { time } => *time,
    }
}

/// Bring a trace into original coordinates.
///
/// `map` takes original lines to the lines of the run being normalized.
/// `deleted` names original lines the other side of the comparison no
/// longer has; events on them are marked rather than mapped.
pub fn normalize(
    trace: &Trace,
    map: &LineMap,
    deleted: &BTreeSet<u32>,
    expect: &[Expectation],
    cfg: &SimConfig,
) -> Result<NormalizedTrace, DiffError> {
    let mut excluded_lines = BTreeSet::new();
    for x in expect {
        if let Expectation::ExcludePausesAt { lines } = x {
            excluded_lines.extend(lines.iter().copied());
        }
    }
    let mut out = NormalizedTrace {
        finished: trace.is_finished(),
        ..Default::default()
    };
    let mut ordinal = 0;
    // the WaveOutput after a dropped pause shares its fate
    let mut carry: Option<(bool, bool)> = None;
    for ev in &trace.events {
        let mut e = ev.clone();
        let mut n = NormEvent {
            event: e.clone(),
            bp_ordinal: None,
            deleted: false,
            excluded: false,
        };
        match &mut e {
            TraceEvent::BreakpointSet { requested, .. } => {
                let k = ordinal;
                ordinal += 1;
                n.bp_ordinal = Some(k);
                for x in expect {
                    match x {
                        Expectation::ExcludeBreakpointSet { ordinal } if *ordinal == k => n.excluded = true,
                        Expectation::ExpectSlideEquivalence { ordinal, from, to } if *ordinal == k && *requested == *from => {
                            *requested = *to
                        }
                        Expectation::ViewBreakpoint { ordinal, view, source } if *ordinal == k && *requested == *view => {
                            *requested = *source
                        }
                        _ => {}
                    }
                }
            }
            TraceEvent::Paused { line, reason, .. } => {
                if *reason == PauseReason::Breakpoint && excluded_lines.contains(line) {
                    n.excluded = true;
                }
            }
            TraceEvent::WaveOutput { time, .. } => {
                if let Some((d, x)) = carry.take() {
                    n.deleted = d;
                    n.excluded = x;
                }
                if *time < cfg.reset_window {
                    continue;
                }
            }
            TraceEvent::Finished { .. } => {}
        }
        let category = match e {
            TraceEvent::BreakpointSet { .. } => Category::BreakpointPlacement,
            _ => Category::PauseLocation,
        };
        for l in event_lines_mut(&mut e) {
            let orig = map.unmap(*l).ok_or(DiffError::IncomparableTrace { line: *l, category })?;
            *l = orig;
            if deleted.contains(&orig) {
                n.deleted = true;
            }
        }
        if matches!(e, TraceEvent::Paused { .. }) {
            carry = Some((n.deleted, n.excluded));
        }
        n.event = e;
        out.events.push(n);
    }
    out.waveform = trace.waveform.as_ref().map(|w| Waveform {
        names: w.names.clone(),
        samples: w.samples.iter().filter(|(t, _)| *t >= cfg.reset_window).cloned().collect(),
    });
    Ok(out)
}

fn event_category(a: Option<&TraceEvent>, b: Option<&TraceEvent>) -> Category {
    use TraceEvent::*;
    match (a, b) {
        (Some(BreakpointSet { .. }), Some(BreakpointSet { .. })) => Category::BreakpointPlacement,
        (Some(Paused { line: x, .. }), Some(Paused { line: y, .. })) if x != y => Category::PauseLocation,
        (Some(Paused { .. }), Some(Paused { .. })) => Category::PauseCount,
        (Some(WaveOutput { .. }), Some(WaveOutput { .. })) => Category::WaveValue,
        (None, _) | (_, None) | (Some(Finished { .. }), _) | (_, Some(Finished { .. })) => Category::Termination,
        (Some(BreakpointSet { .. }), _) | (_, Some(BreakpointSet { .. })) => Category::BreakpointPlacement,
        _ => Category::PauseCount,
    }
}

fn first_wave_difference(a: &Waveform, b: &Waveform) -> Option<Divergence> {
    if a.names != b.names {
        return Some(Divergence {
            category: Category::WaveValue,
            index: 0,
            time: 0,
            left: Some(format!("signals {}", a.names.join(" "))),
            right: Some(format!("signals {}", b.names.join(" "))),
        });
    }
    let mut j = 0;
    for (i, (t, row)) in a.samples.iter().enumerate() {
        while j < b.samples.len() && b.samples[j].0 < *t {
            j += 1;
        }
        let Some((tb, rb)) = b.samples.get(j) else { break };
        if tb == t && rb != row {
            let show = |r: &[crate::sim::Value]| {
                let diffs: Vec<String> = a
                    .names
                    .iter()
                    .zip(r.iter().zip(row.iter().zip(rb)))
                    .filter(|(_, (_, (x, y)))| x != y)
                    .map(|(n, (v, _))| format!("{n}={v}"))
                    .collect();
                format!("sample {t} {}", diffs.join(" "))
            };
            return Some(Divergence {
                category: Category::WaveValue,
                index: i,
                time: *t,
                left: Some(show(row)),
                right: Some(show(rb)),
            });
        }
    }
    None
}

/// Differential verdict between two runs normalized to the same coordinates.
pub fn compare(a: &NormalizedTrace, b: &NormalizedTrace) -> Verdict {
    for (side, t) in [(0, a), (1, b)] {
        if let Some(e) = t.events.iter().find(|e| e.deleted && matches!(e.event, TraceEvent::Paused { .. })) {
            // an unreachable statement paused
            let text = Some(e.event.to_string());
            return Verdict::Inconsistent(Divergence {
                category: Category::PauseLocation,
                index: 0,
                time: event_time(&e.event),
                left: if side == 0 { text.clone() } else { None },
                right: if side == 1 { text } else { None },
            });
        }
    }
    let ea: Vec<&TraceEvent> = a.retained().collect();
    let eb: Vec<&TraceEvent> = b.retained().collect();
    let mut event_div = None;
    for i in 0..ea.len().max(eb.len()) {
        let (x, y) = (ea.get(i).copied(), eb.get(i).copied());
        if x != y {
            let time = x.into_iter().chain(y).map(event_time).min().unwrap_or(0);
            event_div = Some(Divergence {
                category: event_category(x, y),
                index: i,
                time,
                left: x.map(|e| e.to_string()),
                right: y.map(|e| e.to_string()),
            });
            break;
        }
    }
    let wave_div = match (&a.waveform, &b.waveform) {
        (Some(wa), Some(wb)) => first_wave_difference(wa, wb),
        _ => None,
    };
    let pick = match (event_div, wave_div) {
        (Some(e), Some(w)) => {
            // a value difference at or before a control-flow difference is the root cause
            if e.category != Category::BreakpointPlacement && w.time <= e.time {
                w
            } else {
                e
            }
        }
        (Some(e), None) => e,
        (None, Some(w)) => w,
        (None, None) => return Verdict::Consistent,
    };
    Verdict::Inconsistent(pick)
}

/// `compare` with unmappable lines reported as divergences instead of errors.
pub fn compare_traces(
    a: (&Trace, &LineMap, &BTreeSet<u32>, &[Expectation]),
    b: (&Trace, &LineMap, &BTreeSet<u32>, &[Expectation]),
    cfg: &SimConfig,
) -> Verdict {
    let na = normalize(a.0, a.1, a.2, a.3, cfg);
    let nb = normalize(b.0, b.1, b.2, b.3, cfg);
    match (na, nb) {
        (Ok(x), Ok(y)) => compare(&x, &y),
        (Err(e), _) | (_, Err(e)) => {
            let DiffError::IncomparableTrace { line, category } = e else { unreachable!() };
            Verdict::Inconsistent(Divergence {
                category,
                index: 0,
                time: 0,
                left: Some(format!("unmapped line {line}")),
                right: None,
            })
        }
    }
}
