//! Bug-report bundles: one directory per reproducer.
//!
//! ```text
//! <bundle>/
//!   design.v          seed design (main file)
//!   include/<path>    further design files, if any
//!   script.txt        base action plan
//!   act-script.txt    transformed action plan (only when actions were transformed)
//!   records.txt       `rtl <record>` and `act <record>` lines
//!   verdict.txt       classification, then one verdict per comparison
//!   meta.toml         case identity, target, flags, creation time
//! ```

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActRecord, Plan};
use crate::campaign::{CaseInputs, CaseOutcome, CaseResult, Classification, Pair};
use crate::diff::Verdict;
use crate::hdl::{parse_set, render_set, MAIN_PATH};
use crate::rtl::{replay_records, RtlRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub case_id: usize,
    pub seed: String,
    pub case_seed: u64,
    pub target: String,
    /// Whether the case ran a transformed design and transformed actions.
    pub pro: bool,
    pub act: bool,
    pub tool_version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub files: Vec<(String, String)>,
    pub base: Plan,
    pub act_plan: Option<Plan>,
    pub rtl_records: Vec<RtlRecord>,
    pub act_records: Vec<ActRecord>,
    pub classification: Classification,
    pub verdicts: Vec<(Pair, Verdict)>,
    pub failure: Option<String>,
    pub meta: BundleMeta,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{file}: {msg}")]
    Format { file: &'static str, msg: String },
}

fn fmt_err(file: &'static str) -> impl Fn(String) -> BundleError {
    move |msg| BundleError::Format { file, msg }
}

impl Bundle {
    pub fn from_case(c: &CaseResult, inputs: &CaseInputs, target: &str) -> Self {
        Self::new(inputs, &c.outcome, c.case_id, &c.seed_id, c.case_seed, target)
    }

    pub fn new(inputs: &CaseInputs, outcome: &CaseOutcome, case_id: usize, seed: &str, case_seed: u64, target: &str) -> Self {
        Bundle {
            files: render_set(&inputs.unit),
            base: inputs.base.clone(),
            act_plan: inputs.act.as_ref().map(|a| a.0.clone()),
            rtl_records: inputs.rtl_records().to_vec(),
            act_records: inputs.act_records().to_vec(),
            classification: outcome.classification,
            verdicts: outcome.verdicts.clone(),
            failure: outcome.failure.as_ref().map(|f| f.to_string()),
            meta: BundleMeta {
                case_id,
                seed: seed.to_string(),
                case_seed,
                target: target.to_string(),
                pro: inputs.pro.is_some(),
                act: inputs.act.is_some(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            },
        }
    }

    /// Rebuild the case inputs; design transformations are replayed from the records.
    pub fn inputs(&self) -> Result<CaseInputs, BundleError> {
        let unit = parse_set(&self.files).map_err(|e| fmt_err("design.v")(e.to_string()))?;
        let pro = if self.meta.pro {
            Some(replay_records(&unit, &self.rtl_records).map_err(|e| fmt_err("records.txt")(e.to_string()))?)
        } else {
            None
        };
        Ok(CaseInputs {
            base: self.base.clone(),
            act: self.act_plan.clone().map(|p| (p, self.act_records.clone())),
            pro,
            unit,
        })
    }

    pub fn verdict_text(&self) -> String {
        let mut out = format!("classification {}\n", self.classification);
        for (p, v) in &self.verdicts {
            out.push_str(&format!("pair {}\n{}", p.name(), v.to_text()));
        }
        if let Some(f) = &self.failure {
            out.push_str(&format!("failure-detail {}\n", f.replace('\n', " ")));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (path, text) in &self.files {
            if path == MAIN_PATH {
                fs::write(dir.join("design.v"), text)?;
            } else {
                let p = dir.join("include").join(path);
                if let Some(parent) = p.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(p, text)?;
            }
        }
        fs::write(dir.join("script.txt"), self.base.to_text())?;
        if let Some(p) = &self.act_plan {
            fs::write(dir.join("act-script.txt"), p.to_text())?;
        }
        let mut records = String::new();
        for r in &self.rtl_records {
            records.push_str(&format!("rtl {r}\n"));
        }
        for r in &self.act_records {
            records.push_str(&format!("act {r}\n"));
        }
        fs::write(dir.join("records.txt"), records)?;
        fs::write(dir.join("verdict.txt"), self.verdict_text())?;
        fs::write(dir.join("meta.toml"), toml::to_string(&self.meta).map_err(io::Error::other)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Bundle, BundleError> {
        let mut files = vec![(MAIN_PATH.to_string(), fs::read_to_string(dir.join("design.v"))?)];
        let inc = dir.join("include");
        if inc.is_dir() {
            let mut extra = Vec::new();
            collect_files(&inc, &inc, &mut extra)?;
            extra.sort();
            files.extend(extra);
        }
        let base = Plan::from_text(&fs::read_to_string(dir.join("script.txt"))?).map_err(fmt_err("script.txt"))?;
        let act_path = dir.join("act-script.txt");
        let act_plan = if act_path.exists() {
            Some(Plan::from_text(&fs::read_to_string(act_path)?).map_err(fmt_err("act-script.txt"))?)
        } else {
            None
        };
        let mut rtl_records = Vec::new();
        let mut act_records = Vec::new();
        for line in fs::read_to_string(dir.join("records.txt"))?.lines().filter(|l| !l.trim().is_empty()) {
            let bad = || fmt_err("records.txt")(format!("bad line '{line}'"));
            match line.split_once(' ') {
                Some(("rtl", r)) => rtl_records.push(r.parse().map_err(|_| bad())?),
                Some(("act", r)) => act_records.push(r.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let (classification, verdicts, failure) = parse_verdicts(&fs::read_to_string(dir.join("verdict.txt"))?)?;
        let meta: BundleMeta =
            toml::from_str(&fs::read_to_string(dir.join("meta.toml"))?).map_err(|e| fmt_err("meta.toml")(e.to_string()))?;
        Ok(Bundle {
            files,
            base,
            act_plan,
            rtl_records,
            act_records,
            classification,
            verdicts,
            failure,
            meta,
        })
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> io::Result<()> {
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            out.push((rel, fs::read_to_string(&p)?));
        }
    }
    Ok(())
}

type ParsedVerdicts = (Classification, Vec<(Pair, Verdict)>, Option<String>);

fn parse_verdicts(text: &str) -> Result<ParsedVerdicts, BundleError> {
    let err = fmt_err("verdict.txt");
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| err("empty file".into()))?;
    let classification = head
        .strip_prefix("classification ")
        .ok_or_else(|| err(format!("expected classification, got '{head}'")))?
        .parse()
        .map_err(&err)?;
    let mut verdicts = Vec::new();
    let mut failure = None;
    let mut cur: Option<(Pair, String)> = None;
    let flush = |cur: &mut Option<(Pair, String)>, out: &mut Vec<(Pair, Verdict)>| -> Result<(), BundleError> {
        if let Some((p, body)) = cur.take() {
            out.push((p, Verdict::from_text(&body).map_err(&err)?));
        }
        Ok(())
    };
    for line in lines {
        if let Some(p) = line.strip_prefix("pair ") {
            flush(&mut cur, &mut verdicts)?;
            cur = Some((p.parse().map_err(&err)?, String::new()));
        } else if let Some(f) = line.strip_prefix("failure-detail ") {
            flush(&mut cur, &mut verdicts)?;
            failure = Some(f.to_string());
        } else if let Some((_, body)) = cur.as_mut() {
            body.push_str(line);
            body.push('\n');
        } else {
            return Err(err(format!("unexpected line '{line}'")));
        }
    }
    flush(&mut cur, &mut verdicts)?;
    Ok((classification, verdicts, failure))
}
