use std::time::{Duration, Instant};

use dbgdiff::campaign::*;
use dbgdiff::fixtures::LOOP8;
use dbgdiff::hdl::parse;
use dbgdiff::sim::{Fault, FaultSet, SimConfig};
use dbgdiff::trace::FailureKind;

fn serve_cmd(faults: &str) -> Target {
    let bin = env!("CARGO_BIN_EXE_dbgdiff");
    let mut cmd = format!("'{bin}' adapter-serve");
    if !faults.is_empty() {
        cmd.push_str(&format!(" --faults {faults}"));
    }
    Target::External(cmd)
}

fn campaign(target: Target, cases: usize) -> CampaignConfig {
    CampaignConfig {
        seeds: SeedSource::Generate(80..=120),
        case_count: cases,
        rng_seed: 11,
        target,
        worker_count: 4,
        ..Default::default()
    }
}

#[test]
fn loopback_traces_match_in_process_runs() {
    let cfg = campaign(Target::Reference, 1);
    let external = serve_cmd("");
    let budget = Duration::from_secs(30);
    for (i, seed) in case_seeds(cfg.rng_seed, 100).into_iter().enumerate() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let unit = generate_seed(&mut rng, 80..=120).unwrap();
        let c = prepare_case(unit, &cfg, &mut rng).unwrap();
        let mut runs = vec![(&c.unit, &c.base)];
        if let Some(p) = &c.pro {
            runs.push((&p.variant, &c.base));
        }
        if let Some((plan, _)) = &c.act {
            runs.push((&c.unit, plan));
        }
        for (unit, plan) in runs {
            let a = Target::Reference.run(unit, plan, &cfg.sim, budget);
            let b = external.run(unit, plan, &cfg.sim, budget);
            assert_eq!(a, b, "case {i}");
        }
    }
}

#[test]
fn loopback_campaign_classifies_like_the_library() {
    let local = run_campaign(&campaign(Target::Faults(FaultSet::from([Fault::FoldIgnoresView])), 100)).unwrap();
    let remote = run_campaign(&campaign(serve_cmd("F4"), 100)).unwrap();
    assert!(local.inconsistent > 0);
    let a: Vec<_> = local.cases.iter().map(|c| c.outcome.classification).collect();
    let b: Vec<_> = remote.cases.iter().map(|c| c.outcome.classification).collect();
    assert_eq!(a, b);
}

fn short_plan() -> dbgdiff::action::Plan {
    dbgdiff::action::Plan::from_text("add_bp 4\nrun_all\n").unwrap()
}

#[test]
fn silent_adapter_times_out() {
    let unit = parse(LOOP8).unwrap();
    let start = Instant::now();
    let t = Target::External("sleep 30".into()).run(&unit, &short_plan(), &SimConfig::default(), Duration::from_millis(500));
    assert_eq!(t.failure.map(|f| f.kind), Some(FailureKind::Timeout));
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn unknown_event_is_a_crash() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.sh");
    std::fs::write(
        &script,
        "printf '{\"kind\":\"hello\",\"protocol\":1,\"target\":\"bad\"}\\n'\n\
         while read -r line; do\n\
           case \"$line\" in\n\
             *load*) printf '{\"kind\":\"ack\"}\\n' ;;\n\
             *) printf '{\"kind\":\"event\",\"event\":\"teleported\",\"line\":1}\\n' ;;\n\
           esac\n\
         done\n",
    )
    .unwrap();
    let target = Target::External(format!("sh '{}'", script.display()));
    let inputs = CaseInputs {
        unit: parse(LOOP8).unwrap(),
        base: short_plan(),
        pro: None,
        act: None,
    };
    let o = execute_case(&inputs, &target, &SimConfig::default(), Duration::from_secs(10));
    assert_eq!(o.classification, Classification::Failure(FailureKind::Crash));
}

#[test]
fn adapter_that_exits_early_is_a_crash() {
    let unit = parse(LOOP8).unwrap();
    let t = Target::External("true".into()).run(&unit, &short_plan(), &SimConfig::default(), Duration::from_secs(5));
    assert_eq!(t.failure.map(|f| f.kind), Some(FailureKind::Crash));
}
