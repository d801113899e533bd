use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dbgdiff::action::Plan;
use dbgdiff::adapter::serve;
use dbgdiff::bundle::Bundle;
use dbgdiff::campaign::{execute_case, generate_seed, CampaignConfig, Classification, Mode, SeedSource, Target};
use dbgdiff::hdl::{parse_set, render, render_set, SourceUnit, MAIN_PATH};
use dbgdiff::reduce::{reduce, ReduceConfig};
use dbgdiff::rtl::{apply_site, enumerate_sites, RtlKind, SiteTarget, TransformError};
use dbgdiff::sim::{FaultSet, SimConfig};

const EXIT_CLEAN: u8 = 0;
const EXIT_INCONSISTENT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_TARGET: u8 = 3;

#[derive(Parser)]
#[command(name = "dbgdiff", version, about = "Differential testing of interactive HDL debuggers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a differential campaign and write its report.
    Campaign {
        #[arg(long, env = "DBGDIFF_CONFIG")]
        config: Option<PathBuf>,
        /// reference, fault:F1[,F2..] or external:<command>
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// full, pt-only, at-only or random-one
        #[arg(long)]
        mode: Option<String>,
        /// Seed design files; generated seeds are used when none are given.
        #[arg(long = "seed")]
        seeds: Vec<PathBuf>,
        #[arg(long, default_value = "dbgdiff-out")]
        out: PathBuf,
    },
    /// Run one design under an action script and print the trace.
    Simulate {
        design: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "reference")]
        target: String,
        /// Additional design files, addressed by file name.
        #[arg(long = "include")]
        includes: Vec<PathBuf>,
    },
    /// Apply one design transformation at one site; print variant and line map.
    Transform {
        design: PathBuf,
        /// assign-conv, literal-expr, bit-mutate, dead-loop, include-inject or include-remove
        #[arg(long)]
        op: String,
        /// L:C for statements, L:C#I for expressions, L for includes, - for the whole unit
        #[arg(long)]
        site: String,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
    /// Shrink a bug bundle to a minimal reproducer.
    Reduce {
        bundle: PathBuf,
        /// Defaults to `<bundle>-reduced`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 20_000)]
        max_evaluations: usize,
    },
    /// Re-execute a bug bundle and print the verdicts.
    Replay {
        bundle: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Emit generated seed designs.
    GenSeed {
        /// Line budget `LO-HI`.
        #[arg(long, default_value = "700-1000")]
        lines: String,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Directory for `seed-NNNN.v` files; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the reference debugger over the adapter protocol on stdin/stdout.
    AdapterServe {
        /// Comma-separated fault ids to enable, e.g. F1,F4.
        #[arg(long)]
        faults: Option<String>,
    },
}

/// A diagnostic plus the exit status it maps to.
struct Fail(u8, String);

fn usage(msg: impl ToString) -> Fail {
    Fail(EXIT_USAGE, msg.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_design(path: &Path, includes: &[PathBuf]) -> Result<SourceUnit, Fail> {
    let mut files = vec![(MAIN_PATH.to_string(), read(path)?)];
    for inc in includes {
        let name = inc.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        files.push((name, read(inc)?));
    }
    parse_set(&files).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_target(s: &str) -> Result<Target, Fail> {
    s.parse().map_err(usage)
}

fn classification_status(c: Classification) -> u8 {
    match c {
        Classification::Consistent => EXIT_CLEAN,
        Classification::Inconsistent(_) => EXIT_INCONSISTENT,
        Classification::Failure(_) => EXIT_TARGET,
    }
}

#[allow(clippy::too_many_arguments)]
fn campaign(
    config: Option<PathBuf>,
    target: Option<String>,
    cases: Option<usize>,
    rng_seed: Option<u64>,
    workers: Option<usize>,
    mode: Option<String>,
    seeds: Vec<PathBuf>,
    out: PathBuf,
) -> Result<u8, Fail> {
    let mut cfg = match &config {
        Some(p) => CampaignConfig::from_toml(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => CampaignConfig::default(),
    };
    if let Some(t) = target {
        cfg.target = parse_target(&t)?;
        cfg.per_case_time_budget = cfg.target.default_budget();
    }
    if let Some(m) = mode {
        cfg.mode = m.parse::<Mode>().map_err(usage)?;
    }
    cfg.case_count = cases.unwrap_or(cfg.case_count);
    cfg.rng_seed = rng_seed.unwrap_or(cfg.rng_seed);
    cfg.worker_count = workers.unwrap_or(cfg.worker_count);
    if !seeds.is_empty() {
        cfg.seeds = SeedSource::Files(seeds);
    }
    let report = dbgdiff::campaign::run_campaign(&cfg).map_err(usage)?;
    report
        .write(&out)
        .map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", out.display())))?;
    eprintln!(
        "{} cases, {} run, {} inconsistent, {} failures; report in {}",
        report.case_count,
        report.designs_run,
        report.inconsistent,
        report.failures,
        out.display()
    );
    Ok(if report.inconsistent > 0 {
        EXIT_INCONSISTENT
    } else if report.failures > 0 {
        EXIT_TARGET
    } else {
        EXIT_CLEAN
    })
}

fn simulate(design: &Path, script: &Path, target: &str, includes: &[PathBuf]) -> Result<u8, Fail> {
    let unit = load_design(design, includes)?;
    let plan = Plan::from_text(&read(script)?).map_err(|e| usage(format!("{}: {e}", script.display())))?;
    let target = parse_target(target)?;
    let trace = target.run(&unit, &plan, &SimConfig::default(), target.default_budget());
    print!("{}", trace.to_text());
    Ok(if trace.failure.is_some() { EXIT_TARGET } else { EXIT_CLEAN })
}

fn transform(design: &Path, op: &str, site: &str, rng_seed: u64) -> Result<u8, Fail> {
    let unit = load_design(design, &[])?;
    let kind: RtlKind = op.parse().map_err(usage)?;
    let target: SiteTarget = site.parse().map_err(usage)?;
    let found = enumerate_sites(&unit, kind).into_iter().find(|s| s.target == target);
    let Some(site) = found else {
        let e = TransformError::IneligibleSite {
            kind,
            target,
            reason: "no eligible site at this position".into(),
        };
        return Err(usage(e));
    };
    let result = apply_site(&unit, &site, &mut ChaCha8Rng::seed_from_u64(rng_seed)).map_err(usage)?;
    let mut out = io::stdout().lock();
    for (path, text) in render_set(&result.variant) {
        let _ = write!(out, "== {path}\n{text}");
    }
    let _ = write!(out, "== line-map\n{}", result.line_map);
    for r in &result.records {
        let _ = writeln!(out, "== record {r}");
    }
    Ok(EXIT_CLEAN)
}

fn bundle_target(b: &Bundle, over: Option<String>) -> Result<Target, Fail> {
    parse_target(over.as_deref().unwrap_or(&b.meta.target))
}

fn reduce_bundle(dir: &Path, out: Option<PathBuf>, target: Option<String>, max_evaluations: usize) -> Result<u8, Fail> {
    let b = Bundle::read(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let target = bundle_target(&b, target)?;
    let inputs = b.inputs().map_err(usage)?;
    let cfg = ReduceConfig {
        run_budget: target.default_budget(),
        target,
        sim: SimConfig::default(),
        max_evaluations,
    };
    let before = render(&inputs.unit).lines().count();
    let reduced = reduce(&inputs, b.classification, &cfg).map_err(|e| Fail(EXIT_TARGET, e.to_string()))?;
    let outcome = execute_case(&reduced.inputs, &cfg.target, &cfg.sim, cfg.run_budget);
    let out = out.unwrap_or_else(|| {
        let mut p = dir.as_os_str().to_owned();
        p.push("-reduced");
        PathBuf::from(p)
    });
    let nb = Bundle::new(&reduced.inputs, &outcome, b.meta.case_id, &b.meta.seed, b.meta.case_seed, &cfg.target.to_string());
    nb.write(&out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let after = render(&reduced.inputs.unit).lines().count();
    eprintln!(
        "{before} -> {after} lines after {} evaluations{}; written to {}",
        reduced.evaluations,
        if reduced.budget_exceeded { " (evaluation budget exhausted)" } else { "" },
        out.display()
    );
    Ok(classification_status(outcome.classification))
}

fn replay(dir: &Path, target: Option<String>) -> Result<u8, Fail> {
    let b = Bundle::read(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let target = bundle_target(&b, target)?;
    let inputs = b.inputs().map_err(usage)?;
    let outcome = execute_case(&inputs, &target, &SimConfig::default(), target.default_budget());
    let replayed = Bundle::new(&inputs, &outcome, b.meta.case_id, &b.meta.seed, b.meta.case_seed, &target.to_string());
    print!("{}", replayed.verdict_text());
    if outcome.classification != b.classification {
        eprintln!("recorded {}, replayed {}", b.classification, outcome.classification);
    }
    Ok(classification_status(outcome.classification))
}

fn gen_seed(lines: &str, rng_seed: u64, count: usize, out: Option<PathBuf>) -> Result<u8, Fail> {
    let bad = || usage(format!("bad line budget '{lines}' (expected LO-HI)"));
    let (lo, hi) = lines.split_once('-').ok_or_else(bad)?;
    let (lo, hi): (u32, u32) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    for i in 0..count {
        let unit = generate_seed(&mut rng, lo..=hi).map_err(usage)?;
        let text = render(&unit);
        match &out {
            Some(dir) => {
                let p = dir.join(format!("seed-{i:04}.v"));
                fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            }
            None => print!("{text}"),
        }
    }
    Ok(EXIT_CLEAN)
}

fn adapter_serve(faults: Option<String>) -> Result<u8, Fail> {
    let faults: FaultSet = match faults {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>().map_err(usage)?,
        None => FaultSet::new(),
    };
    serve(BufReader::new(io::stdin().lock()), io::stdout().lock(), &faults).map_err(|e| Fail(EXIT_TARGET, e.to_string()))?;
    Ok(EXIT_CLEAN)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN });
        }
    };
    let result = match cli.command {
        Command::Campaign {
            config,
            target,
            cases,
            rng_seed,
            workers,
            mode,
            seeds,
            out,
        } => campaign(config, target, cases, rng_seed, workers, mode, seeds, out),
        Command::Simulate {
            design,
            script,
            target,
            includes,
        } => simulate(&design, &script, &target, &includes),
        Command::Transform {
            design,
            op,
            site,
            rng_seed,
        } => transform(&design, &op, &site, rng_seed),
        Command::Reduce {
            bundle,
            out,
            target,
            max_evaluations,
        } => reduce_bundle(&bundle, out, target, max_evaluations),
        Command::Replay { bundle, target } => replay(&bundle, target),
        Command::GenSeed {
            lines,
            rng_seed,
            count,
            out,
        } => gen_seed(&lines, rng_seed, count, out),
        Command::AdapterServe { faults } => adapter_serve(faults),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("dbgdiff: {msg}");
            ExitCode::from(code)
        }
    }
}
