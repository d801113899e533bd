//! The end-to-end differential campaign: seeds, transformations, three runs
//! per case, verdicts, and the aggregated report.

pub mod report;
pub mod seedgen;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::action::{act_pipeline, base_policy, resolve_expectations, ActRecord, ActWeights, Plan, PlanPolicy, PolicyConfig, UNIFORM_ACT};
use crate::adapter::ExternalSession;
use crate::diff::{check_expectations, compare_traces, normalize, Category, DiffError, Divergence, Verdict};
use crate::hdl::{parse_set, LineMap, SourceUnit};
use crate::rtl::{pro_pipeline, KindWeights, RtlRecord, TransformResult, UNIFORM};
use crate::sim::{run_to_completion, start_session, DebugSession, Fault, FaultSet, SimConfig};
use crate::trace::{FailureKind, RunFailure, Trace};

pub use report::CampaignReport;
pub use seedgen::{generate_seed, GenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Full,
    PtOnly,
    AtOnly,
    RandomOne,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::PtOnly => "pt-only",
            Mode::AtOnly => "at-only",
            Mode::RandomOne => "random-one",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Full, Mode::PtOnly, Mode::AtOnly, Mode::RandomOne]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (full, pt-only, at-only, random-one)"))
    }
}

/// The debugger under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Reference,
    Faults(FaultSet),
    /// Shell command that starts a protocol adapter.
    External(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Reference => f.write_str("reference"),
            Target::Faults(fs) => {
                let ids: Vec<&str> = fs.iter().map(|x| x.id()).collect();
                write!(f, "fault:{}", ids.join(","))
            }
            Target::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "reference" {
            return Ok(Target::Reference);
        }
        if let Some(ids) = s.strip_prefix("fault:") {
            let fs = ids.split(',').map(str::parse::<Fault>).collect::<Result<FaultSet, _>>()?;
            return Ok(Target::Faults(fs));
        }
        if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err("external target needs a command".into());
            }
            return Ok(Target::External(cmd.to_string()));
        }
        Err(format!("unknown target '{s}' (reference, fault:F1[,F2..], external:<command>)"))
    }
}

impl Target {
    pub fn default_budget(&self) -> Duration {
        match self {
            Target::External(_) => Duration::from_secs(300),
            _ => Duration::from_secs(30),
        }
    }

    fn open(&self, unit: &SourceUnit, sim: &SimConfig, budget: Duration) -> Result<Box<dyn DebugSession>, RunFailure> {
        let faults = match self {
            Target::Reference => FaultSet::new(),
            Target::Faults(f) => f.clone(),
            Target::External(cmd) => return Ok(Box::new(ExternalSession::launch(cmd, unit, sim, budget)?)),
        };
        let cfg = SimConfig {
            action_budget: budget,
            ..sim.clone()
        };
        start_session(unit, &cfg, &faults)
            .map(|s| Box::new(s) as Box<dyn DebugSession>)
            .map_err(|e| RunFailure::new(FailureKind::Elaboration, e.to_string()))
    }

    /// One debugger run of `plan` on `unit`.
    pub fn run(&self, unit: &SourceUnit, plan: &Plan, sim: &SimConfig, budget: Duration) -> Trace {
        match self.open(unit, sim, budget) {
            Ok(mut s) => run_to_completion(s.as_mut(), &mut PlanPolicy::new(plan.clone())),
            Err(f) => Trace {
                failure: Some(f),
                ..Trace::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSource {
    Generate(RangeInclusive<u32>),
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub seeds: SeedSource,
    pub case_count: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub mode: Mode,
    pub target: Target,
    pub worker_count: usize,
    pub per_case_time_budget: Duration,
    /// ACT gets what PRO left of the iteration budget instead of its own.
    pub shared_budget: bool,
    pub rtl_weights: KindWeights,
    pub act_weights: ActWeights,
    pub policy: PolicyConfig,
    pub sim: SimConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seeds: SeedSource::Generate(700..=1000),
            case_count: 2000,
            max_iterations: 6,
            rng_seed: 0,
            mode: Mode::Full,
            target: Target::Reference,
            worker_count: 1,
            per_case_time_budget: Duration::from_secs(30),
            shared_budget: false,
            rtl_weights: UNIFORM,
            act_weights: UNIFORM_ACT,
            policy: PolicyConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed_lines: Option<[u32; 2]>,
    seeds: Option<Vec<PathBuf>>,
    case_count: Option<usize>,
    max_iterations: Option<usize>,
    rng_seed: Option<u64>,
    mode: Option<String>,
    target: Option<String>,
    worker_count: Option<usize>,
    per_case_time_budget_secs: Option<u64>,
    shared_budget: Option<bool>,
    rtl_weights: Option<KindWeights>,
    act_weights: Option<ActWeights>,
    action_cap: Option<usize>,
    run_all_ratio: Option<f64>,
    clock_period: Option<u64>,
    total_time: Option<u64>,
    reset_window: Option<u64>,
    loop_cap: Option<u32>,
    step_into_instances: Option<bool>,
}

impl CampaignConfig {
    /// Parse `key = value` settings; absent keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let mut c = CampaignConfig::default();
        let invalid = |m: String| ConfigError::Invalid(m);
        if let Some([lo, hi]) = raw.seed_lines {
            c.seeds = SeedSource::Generate(lo..=hi);
        }
        if let Some(files) = raw.seeds {
            c.seeds = SeedSource::Files(files);
        }
        if let Some(t) = raw.target {
            c.target = t.parse().map_err(invalid)?;
            c.per_case_time_budget = c.target.default_budget();
        }
        if let Some(m) = raw.mode {
            c.mode = m.parse().map_err(invalid)?;
        }
        c.case_count = raw.case_count.unwrap_or(c.case_count);
        c.max_iterations = raw.max_iterations.unwrap_or(c.max_iterations);
        c.rng_seed = raw.rng_seed.unwrap_or(c.rng_seed);
        c.worker_count = raw.worker_count.unwrap_or(c.worker_count);
        if let Some(s) = raw.per_case_time_budget_secs {
            c.per_case_time_budget = Duration::from_secs(s);
        }
        c.shared_budget = raw.shared_budget.unwrap_or(c.shared_budget);
        c.rtl_weights = raw.rtl_weights.unwrap_or(c.rtl_weights);
        c.act_weights = raw.act_weights.unwrap_or(c.act_weights);
        c.policy.cap = raw.action_cap.unwrap_or(c.policy.cap);
        c.policy.run_all_ratio = raw.run_all_ratio.unwrap_or(c.policy.run_all_ratio);
        c.sim.clock_period = raw.clock_period.unwrap_or(c.sim.clock_period);
        c.sim.total_time = raw.total_time.unwrap_or(c.sim.total_time);
        c.sim.reset_window = raw.reset_window.unwrap_or(c.sim.reset_window);
        c.sim.loop_cap = raw.loop_cap.unwrap_or(c.sim.loop_cap);
        c.sim.step_into_instances = raw.step_into_instances.unwrap_or(c.sim.step_into_instances);
        c.validate().map_err(invalid)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations < 1 {
            return Err("max_iterations must be at least 1".into());
        }
        if self.case_count < 1 {
            return Err("case_count must be at least 1".into());
        }
        if self.worker_count < 1 {
            return Err("worker_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.policy.run_all_ratio) {
            return Err("run_all_ratio must lie in [0, 1]".into());
        }
        if self.policy.cap < 2 {
            return Err("action_cap must be at least 2".into());
        }
        if self.rtl_weights.iter().all(|&w| w == 0) || self.act_weights.iter().all(|&w| w == 0) {
            return Err("at least one operator weight must be positive".into());
        }
        match &self.seeds {
            SeedSource::Generate(r) if *r.start() < 20 || r.is_empty() => {
                return Err(format!("seed_lines {r:?} must be a non-empty range starting at 20 or more"))
            }
            SeedSource::Files(f) if f.is_empty() => return Err("seeds must name at least one file".into()),
            _ => {}
        }
        self.sim.validate()
    }
}

/// Everything that determines a case's three runs.
#[derive(Debug, Clone)]
pub struct CaseInputs {
    pub unit: SourceUnit,
    pub base: Plan,
    /// PRO output, when the case uses design transformations.
    pub pro: Option<TransformResult>,
    /// ACT output, when the case uses action transformations.
    pub act: Option<(Plan, Vec<ActRecord>)>,
}

impl CaseInputs {
    pub fn rtl_records(&self) -> &[RtlRecord] {
        self.pro.as_ref().map(|p| p.records.as_slice()).unwrap_or(&[])
    }

    pub fn act_records(&self) -> &[ActRecord] {
        self.act.as_ref().map(|a| a.1.as_slice()).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Consistent,
    Inconsistent(Category),
    Failure(FailureKind),
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Consistent => f.write_str("consistent"),
            Classification::Inconsistent(c) => write!(f, "inconsistent {c}"),
            Classification::Failure(k) => write!(f, "failure {}", k.as_str()),
        }
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut w = s.split_whitespace();
        let c = match (w.next(), w.next()) {
            (Some("consistent"), None) => Classification::Consistent,
            (Some("inconsistent"), Some(c)) => Classification::Inconsistent(c.parse()?),
            (Some("failure"), Some(k)) => Classification::Failure(FailureKind::parse(k).ok_or_else(|| format!("unknown failure kind '{k}'"))?),
            _ => return Err(format!("bad classification '{s}'")),
        };
        if w.next().is_some() {
            return Err(format!("bad classification '{s}'"));
        }
        Ok(c)
    }
}

/// Which comparison a verdict came from. `t` is the base run, `t1` the run
/// on the transformed design, `t2` the run with transformed actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pair {
    BaseRtl,
    BaseAct,
    RtlAct,
    ActExpect,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::BaseRtl, Pair::BaseAct, Pair::RtlAct, Pair::ActExpect];

    pub fn name(self) -> &'static str {
        match self {
            Pair::BaseRtl => "t/t1",
            Pair::BaseAct => "t/t2",
            Pair::RtlAct => "t1/t2",
            Pair::ActExpect => "t2/expect",
        }
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pair::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown pair '{s}'"))
    }
}

/// Verdicts of one case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseOutcome {
    pub verdicts: Vec<(Pair, Verdict)>,
    pub failure: Option<RunFailure>,
    pub classification: Classification,
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case_id: usize,
    pub seed_id: String,
    pub case_seed: u64,
    pub rtl_records: Vec<RtlRecord>,
    pub act_records: Vec<ActRecord>,
    pub outcome: CaseOutcome,
    pub wall: Duration,
    /// Why the case never ran, for harness-side problems such as a seed
    /// the generator could not produce.
    pub excluded: Option<String>,
    /// Kept for cases worth a bug report.
    pub inputs: Option<Box<CaseInputs>>,
}

/// Draw the base plan and the transformations of one case.
pub fn prepare_case(unit: SourceUnit, cfg: &CampaignConfig, rng: &mut impl Rng) -> Result<CaseInputs, String> {
    let base = base_policy(&unit, &cfg.policy, rng).map_err(|e| e.to_string())?;
    let (use_pro, use_act) = match cfg.mode {
        Mode::Full => (true, true),
        Mode::PtOnly => (true, false),
        Mode::AtOnly => (false, true),
        Mode::RandomOne => {
            let pro = rng.gen_bool(0.5);
            (pro, !pro)
        }
    };
    let m = cfg.max_iterations;
    let pro = use_pro.then(|| pro_pipeline(&unit, m, &cfg.rtl_weights, rng));
    let act_budget = match (&pro, cfg.shared_budget) {
        (Some(p), true) => m - p.records.len(),
        _ => m,
    };
    let act = (use_act && act_budget > 0).then(|| {
        let (plan, records, _) = act_pipeline(&base, &unit, act_budget, &cfg.act_weights, rng);
        (plan, records)
    });
    Ok(CaseInputs { unit, base, pro, act })
}

fn expectation_verdict(e: DiffError) -> Verdict {
    let (category, what) = match e {
        DiffError::IncomparableTrace { line, category } => (category, format!("unmapped line {line}")),
        DiffError::UnresolvedExpectation(w) => (Category::BreakpointPlacement, w),
    };
    Verdict::Inconsistent(Divergence {
        category,
        index: 0,
        time: 0,
        left: Some(what),
        right: None,
    })
}

/// Run the three debugger sessions of a case and compare them.
pub fn execute_case(inputs: &CaseInputs, target: &Target, sim: &SimConfig, budget: Duration) -> CaseOutcome {
    let t = target.run(&inputs.unit, &inputs.base, sim, budget);
    let t1 = inputs
        .pro
        .as_ref()
        .map(|p| target.run(&p.variant, &inputs.base.remap(&p.line_map), sim, budget));
    let t2 = inputs.act.as_ref().map(|(plan, _)| target.run(&inputs.unit, plan, sim, budget));
    let failure = [Some(&t), t1.as_ref(), t2.as_ref()]
        .into_iter()
        .flatten()
        .find_map(|x| x.failure.clone());
    if let Some(f) = failure {
        return CaseOutcome {
            verdicts: Vec::new(),
            classification: Classification::Failure(f.kind),
            failure: Some(f),
        };
    }
    let id = LineMap::identity();
    let none = BTreeSet::new();
    let map = inputs.pro.as_ref().map(|p| p.line_map.clone()).unwrap_or_default();
    let deleted = map.deleted().clone();
    let expect = match (&inputs.act, &t2) {
        (Some((plan, _)), Some(t2)) => resolve_expectations(plan, &t2.events),
        _ => Vec::new(),
    };
    let mut verdicts = Vec::new();
    if let Some(t1) = &t1 {
        verdicts.push((Pair::BaseRtl, compare_traces((&t, &id, &deleted, &[]), (t1, &map, &none, &[]), sim)));
    }
    if let Some(t2) = &t2 {
        verdicts.push((Pair::BaseAct, compare_traces((&t, &id, &none, &[]), (t2, &id, &none, &expect), sim)));
        if let Some(t1) = &t1 {
            verdicts.push((Pair::RtlAct, compare_traces((t1, &map, &none, &[]), (t2, &id, &deleted, &expect), sim)));
        }
        let v = match normalize(t2, &id, &none, &expect, sim) {
            Ok(n) => check_expectations(&n, &expect).unwrap_or_else(expectation_verdict),
            Err(e) => expectation_verdict(e),
        };
        verdicts.push((Pair::ActExpect, v));
    }
    let classification = verdicts
        .iter()
        .find_map(|(_, v)| v.category())
        .map(Classification::Inconsistent)
        .unwrap_or(Classification::Consistent);
    CaseOutcome {
        verdicts,
        failure: None,
        classification,
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read seed {path}: {msg}")]
    Seed { path: PathBuf, msg: String },
}

fn load_seeds(files: &[PathBuf]) -> Result<Vec<(String, SourceUnit)>, CampaignError> {
    files
        .iter()
        .map(|p| {
            let err = |msg: String| CampaignError::Seed { path: p.clone(), msg };
            let text = std::fs::read_to_string(p).map_err(|e| err(e.to_string()))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let unit = parse_set(&[(crate::hdl::MAIN_PATH.to_string(), text)]).map_err(|e| err(e.to_string()))?;
            Ok((name, unit))
        })
        .collect()
}

/// Seed of the `case`-th case's random stream.
pub fn case_seeds(rng_seed: u64, count: usize) -> Vec<u64> {
    let mut master = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count).map(|_| master.next_u64()).collect()
}

/// Run one case from its seed value.
pub fn run_case(case_id: usize, case_seed: u64, files: &[(String, SourceUnit)], cfg: &CampaignConfig) -> CaseResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let mut result = CaseResult {
        case_id,
        seed_id: String::new(),
        case_seed,
        rtl_records: Vec::new(),
        act_records: Vec::new(),
        outcome: CaseOutcome {
            verdicts: Vec::new(),
            failure: None,
            classification: Classification::Consistent,
        },
        wall: Duration::ZERO,
        excluded: None,
        inputs: None,
    };
    let unit = match &cfg.seeds {
        SeedSource::Generate(budget) => {
            result.seed_id = format!("gen-{case_seed:016x}");
            generate_seed(&mut rng, budget.clone()).map_err(|e| e.to_string())
        }
        SeedSource::Files(_) => {
            let (name, u) = &files[case_id % files.len()];
            result.seed_id = name.clone();
            Ok(u.clone())
        }
    };
    let inputs = unit.and_then(|u| prepare_case(u, cfg, &mut rng));
    match inputs {
        Err(e) => result.excluded = Some(e),
        Ok(inputs) => {
            result.rtl_records = inputs.rtl_records().to_vec();
            result.act_records = inputs.act_records().to_vec();
            result.outcome = execute_case(&inputs, &cfg.target, &cfg.sim, cfg.per_case_time_budget);
            if result.outcome.classification != Classification::Consistent {
                result.inputs = Some(Box::new(inputs));
            }
        }
    }
    result.wall = start.elapsed();
    result
}

/// Execute every case of a campaign and aggregate the results.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    cfg.validate().map_err(|m| CampaignError::Config(ConfigError::Invalid(m)))?;
    let files = match &cfg.seeds {
        SeedSource::Files(f) => load_seeds(f)?,
        SeedSource::Generate(_) => Vec::new(),
    };
    let seeds = case_seeds(cfg.rng_seed, cfg.case_count);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<CaseResult>> = Mutex::new(Vec::with_capacity(cfg.case_count));
    std::thread::scope(|s| {
        for _ in 0..cfg.worker_count.min(cfg.case_count) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = run_case(i, seeds[i], &files, cfg);
                results.lock().expect("no worker panicked").push(r);
            });
        }
    });
    let mut cases = results.into_inner().expect("no worker panicked");
    cases.sort_by_key(|c| c.case_id);
    Ok(CampaignReport::new(cfg, cases))
}
