//! Monotone correspondence between original and variant line numbers.

use std::collections::BTreeSet;
use std::fmt;

/// `orig_start..=orig_end` maps to `line + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub orig_start: u32,
    pub orig_end: u32,
    pub delta: i64,
}

/// Segments are sorted, disjoint, and never contain a deleted line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineMap {
    segments: Vec<Segment>,
    deleted: BTreeSet<u32>,
}

impl Default for LineMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl LineMap {
    pub fn identity() -> Self {
        Self {
            segments: vec![Segment {
                orig_start: 1,
                orig_end: u32::MAX,
                delta: 0,
            }],
            deleted: BTreeSet::new(),
        }
    }

    /// `count` new lines inserted before line `at`.
    pub fn insertion(at: u32, count: u32) -> Self {
        let mut segments = Vec::new();
        if at > 1 {
            segments.push(Segment {
                orig_start: 1,
                orig_end: at - 1,
                delta: 0,
            });
        }
        segments.push(Segment {
            orig_start: at.max(1),
            orig_end: u32::MAX,
            delta: count as i64,
        });
        Self {
            segments,
            deleted: BTreeSet::new(),
        }
    }

    /// The given lines removed; later lines move up.
    pub fn deletion(lines: &BTreeSet<u32>) -> Self {
        let mut segments = Vec::new();
        let mut start = 1u32;
        let mut delta = 0i64;
        for &l in lines {
            if l == 0 {
                continue;
            }
            if l > start {
                segments.push(Segment {
                    orig_start: start,
                    orig_end: l - 1,
                    delta,
                });
            }
            delta -= 1;
            start = l + 1;
        }
        segments.push(Segment {
            orig_start: start,
            orig_end: u32::MAX,
            delta,
        });
        Self {
            segments,
            deleted: lines.clone(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn deleted(&self) -> &BTreeSet<u32> {
        &self.deleted
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn is_deleted(&self, line: u32) -> bool {
        self.deleted.contains(&line)
    }

    /// Original line to variant line. `None` for deleted or uncovered lines.
    pub fn map(&self, line: u32) -> Option<u32> {
        let i = self.segments.partition_point(|s| s.orig_end < line);
        let s = self.segments.get(i)?;
        if line < s.orig_start {
            return None;
        }
        u32::try_from(line as i64 + s.delta).ok()
    }

    /// Variant line back to original line.
    pub fn unmap(&self, line: u32) -> Option<u32> {
        self.segments.iter().find_map(|s| {
            let orig = line as i64 - s.delta;
            (orig >= s.orig_start as i64 && orig <= s.orig_end as i64).then_some(orig as u32)
        })
    }

    /// Map applying `self` first and then `next`.
    pub fn compose(&self, next: &LineMap) -> LineMap {
        let mut segments = Vec::new();
        // an end of u32::MAX stands for "no upper bound"
        let end = |s: &Segment, shift: i64| {
            if s.orig_end == u32::MAX {
                i64::MAX
            } else {
                s.orig_end as i64 + shift
            }
        };
        for a in &self.segments {
            let img_lo = a.orig_start as i64 + a.delta;
            let img_hi = end(a, a.delta);
            for b in &next.segments {
                let lo = img_lo.max(b.orig_start as i64);
                let hi = img_hi.min(end(b, 0));
                if lo > hi {
                    continue;
                }
                let delta = a.delta + b.delta;
                let os = (lo - a.delta) as u32;
                let oe = if hi == i64::MAX { u32::MAX } else { (hi - a.delta) as u32 };
                if os as i64 + delta < 1 {
                    continue;
                }
                segments.push(Segment {
                    orig_start: os,
                    orig_end: oe,
                    delta,
                });
            }
        }
        segments.sort_by_key(|s| s.orig_start);
        let mut merged: Vec<Segment> = Vec::new();
        for s in segments {
            match merged.last_mut() {
                Some(m) if m.delta == s.delta && m.orig_end as u64 + 1 == s.orig_start as u64 => m.orig_end = s.orig_end,
                _ => merged.push(s),
            }
        }
        let mut deleted = self.deleted.clone();
        for &d in &next.deleted {
            if let Some(o) = self.unmap(d) {
                deleted.insert(o);
            }
        }
        LineMap {
            segments: merged,
            deleted,
        }
    }
}

impl fmt::Display for LineMap {
    /// One `seg <start> <end> <delta>` line per segment, then `del <line>` lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.segments {
            writeln!(f, "seg {} {} {:+}", s.orig_start, s.orig_end, s.delta)?;
        }
        for d in &self.deleted {
            writeln!(f, "del {d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deleting_lines_10_to_12_moves_13_to_10() {
        let m = LineMap::deletion(&(10..=12).collect());
        assert_eq!(m.map(9), Some(9));
        assert_eq!(m.map(11), None);
        assert_eq!(m.map(13), Some(10));
        assert_eq!(m.unmap(10), Some(13));
        assert!(m.is_deleted(12));
    }

    #[test]
    fn insertion_then_matching_deletion_is_identity_on_old_lines() {
        let ins = LineMap::insertion(1, 3);
        let del = LineMap::deletion(&(1..=3).collect());
        let c = ins.compose(&del);
        for l in 1..200 {
            assert_eq!(c.map(l), Some(l));
        }
    }

    #[test]
    fn blank_line_at_two_shifts_later_lines() {
        let m = LineMap::insertion(2, 1);
        assert_eq!(m.map(1), Some(1));
        assert_eq!(m.map(3), Some(4));
        assert_eq!(m.unmap(4), Some(3));
        assert_eq!(m.unmap(2), None);
    }
}
