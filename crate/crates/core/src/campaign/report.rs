use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::{CampaignConfig, CaseResult, Classification};
use crate::bundle::Bundle;

/// Cases that share a category and first-divergence signature; likely the
/// same defect, to be confirmed by a person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicateGroup {
    pub classification: String,
    pub signature: String,
    pub cases: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub mode: String,
    pub target: String,
    pub rng_seed: u64,
    pub case_count: usize,
    pub designs_run: usize,
    pub excluded: usize,
    pub inconsistent: usize,
    pub failures: usize,
    /// `inconsistent / designs_run`.
    pub discovery_rate: f64,
    /// Inconsistent cases per transformation kind present in the case; a
    /// case with no records counts under `none`.
    pub histogram: BTreeMap<String, usize>,
    pub categories: BTreeMap<String, usize>,
    pub duplicates: Vec<DuplicateGroup>,
    pub cases: Vec<CaseResult>,
}

#[derive(Serialize)]
struct CaseLine {
    id: usize,
    seed: String,
    classification: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    rtl: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    act: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excluded: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    target: &'a str,
    rng_seed: u64,
    case_count: usize,
    designs_run: usize,
    excluded: usize,
    inconsistent: usize,
    failures: usize,
    discovery_rate: f64,
    histogram: &'a BTreeMap<String, usize>,
    categories: &'a BTreeMap<String, usize>,
    duplicates: &'a [DuplicateGroup],
    cases: Vec<CaseLine>,
}

fn signature(c: &CaseResult) -> String {
    if let Some(f) = &c.outcome.failure {
        return f.kind.as_str().to_string();
    }
    c.outcome
        .verdicts
        .iter()
        .find_map(|(_, v)| match v {
            crate::diff::Verdict::Inconsistent(d) => Some(d.signature()),
            _ => None,
        })
        .unwrap_or_default()
}

impl CampaignReport {
    pub fn new(cfg: &CampaignConfig, cases: Vec<CaseResult>) -> Self {
        let excluded = cases.iter().filter(|c| c.excluded.is_some()).count();
        let ran = cases.iter().filter(|c| c.excluded.is_none());
        let mut inconsistent = 0;
        let mut failures = 0;
        let mut histogram = BTreeMap::new();
        let mut categories = BTreeMap::new();
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for c in ran {
            match c.outcome.classification {
                Classification::Consistent => continue,
                Classification::Inconsistent(cat) => {
                    inconsistent += 1;
                    *categories.entry(cat.to_string()).or_insert(0) += 1;
                    let mut kinds: BTreeSet<String> = c.rtl_records.iter().map(|r| r.kind.to_string()).collect();
                    kinds.extend(c.act_records.iter().map(|r| r.kind.to_string()));
                    if kinds.is_empty() {
                        kinds.insert("none".into());
                    }
                    for k in kinds {
                        *histogram.entry(k).or_insert(0) += 1;
                    }
                }
                Classification::Failure(_) => failures += 1,
            }
            groups
                .entry((c.outcome.classification.to_string(), signature(c)))
                .or_default()
                .push(c.case_id);
        }
        let designs_run = cases.len() - excluded;
        CampaignReport {
            mode: cfg.mode.to_string(),
            target: cfg.target.to_string(),
            rng_seed: cfg.rng_seed,
            case_count: cases.len(),
            designs_run,
            excluded,
            inconsistent,
            failures,
            discovery_rate: if designs_run == 0 {
                0.0
            } else {
                inconsistent as f64 / designs_run as f64
            },
            histogram,
            categories,
            duplicates: groups
                .into_iter()
                .map(|((classification, signature), cases)| DuplicateGroup {
                    classification,
                    signature,
                    cases,
                })
                .collect(),
            cases,
        }
    }

    /// Summary in `key = value` form. Wall times are left out so equal
    /// inputs give byte-identical text.
    pub fn to_text(&self) -> String {
        let s = Summary {
            mode: &self.mode,
            target: &self.target,
            rng_seed: self.rng_seed,
            case_count: self.case_count,
            designs_run: self.designs_run,
            excluded: self.excluded,
            inconsistent: self.inconsistent,
            failures: self.failures,
            discovery_rate: self.discovery_rate,
            histogram: &self.histogram,
            categories: &self.categories,
            duplicates: &self.duplicates,
            cases: self
                .cases
                .iter()
                .map(|c| CaseLine {
                    id: c.case_id,
                    seed: c.seed_id.clone(),
                    classification: c.outcome.classification.to_string(),
                    rtl: c.rtl_records.iter().map(|r| r.to_string()).collect(),
                    act: c.act_records.iter().map(|r| r.to_string()).collect(),
                    excluded: c.excluded.clone(),
                })
                .collect(),
        };
        toml::to_string(&s).expect("report fields serialize")
    }

    /// Write `report.toml`, `timing.txt`, and one bundle per
    /// non-consistent case under `bugs/`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.toml"), self.to_text())?;
        let timing: String = self
            .cases
            .iter()
            .map(|c| format!("{} {}\n", c.case_id, c.wall.as_millis()))
            .collect();
        fs::write(dir.join("timing.txt"), timing)?;
        for c in &self.cases {
            if let Some(inputs) = &c.inputs {
                let b = Bundle::from_case(c, inputs, &self.target);
                b.write(&dir.join("bugs").join(format!("case-{:05}", c.case_id)))?;
            }
        }
        Ok(())
    }
}
