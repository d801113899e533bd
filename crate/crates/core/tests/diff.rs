use std::collections::BTreeSet;
use std::time::Duration;

use dbgdiff::action::{base_policy, Plan, PlanPolicy, PolicyConfig, Planned, Role};
use dbgdiff::campaign::{execute_case, CaseInputs, Classification, Target};
use dbgdiff::diff::*;
use dbgdiff::fixtures::*;
use dbgdiff::hdl::{parse, LineMap};
use dbgdiff::rtl::TransformResult;
use dbgdiff::sim::{run_to_completion, start_session, Fault, FaultSet, SimConfig, Value};
use dbgdiff::trace::{DebugAction, PauseReason, Trace, TraceEvent};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(src: &str, plan: &Plan, faults: &[Fault]) -> Trace {
    let u = parse(src).unwrap();
    let faults: FaultSet = faults.iter().copied().collect();
    let mut s = start_session(&u, &SimConfig::default(), &faults).unwrap();
    run_to_completion(&mut s, &mut PlanPolicy::new(plan.clone()))
}

fn plan(steps: &[(u32, Role)], runs: usize) -> Plan {
    let mut v: Vec<Planned> = steps
        .iter()
        .map(|&(line, role)| Planned {
            action: DebugAction::AddBp { line },
            role,
        })
        .collect();
    v.extend(std::iter::repeat(Planned::base(DebugAction::RunAll)).take(runs));
    Plan { steps: v, checks: Vec::new() }
}

fn pause_lines(n: &NormalizedTrace) -> Vec<u32> {
    n.retained()
        .filter_map(|e| match e {
            TraceEvent::Paused { line, .. } => Some(*line),
            _ => None,
        })
        .collect()
}

fn none() -> BTreeSet<u32> {
    BTreeSet::new()
}

#[test]
fn blank_line_shift_normalizes_away() {
    let cfg = SimConfig::default();
    let orig = run(DOUBLE_NEG, &plan(&[(5, Role::Base)], 20), &[]);
    let shifted = run(DOUBLE_NEG_SHIFTED, &plan(&[(6, Role::Base)], 20), &[]);
    let map = LineMap::insertion(2, 1);
    let a = normalize(&orig, &LineMap::identity(), &none(), &[], &cfg).unwrap();
    let b = normalize(&shifted, &map, &none(), &[], &cfg).unwrap();
    assert!(!pause_lines(&a).is_empty());
    assert_eq!(pause_lines(&a), pause_lines(&b));
    assert_eq!(compare(&a, &b), Verdict::Consistent);
}

#[test]
fn shifted_variant_case_is_consistent() {
    let inputs = CaseInputs {
        unit: parse(DOUBLE_NEG).unwrap(),
        base: plan(&[(5, Role::Base)], 20),
        pro: Some(TransformResult {
            variant: parse(DOUBLE_NEG_SHIFTED).unwrap(),
            line_map: LineMap::insertion(2, 1),
            records: Vec::new(),
            stopped_early: false,
        }),
        act: None,
    };
    let o = execute_case(&inputs, &Target::Reference, &SimConfig::default(), Duration::from_secs(5));
    assert_eq!(o.classification, Classification::Consistent);
}

#[test]
fn breakpoint_on_new_blank_line_exposes_missing_slide() {
    // the shifted design's line 2 is blank and slides to the assign on line 4
    let base = plan(&[(4, Role::Base)], 20);
    let act = plan(&[(2, Role::Slid { to: 4 })], 20);
    let inputs = CaseInputs {
        unit: parse(DOUBLE_NEG_SHIFTED).unwrap(),
        base,
        pro: None,
        act: Some((act, Vec::new())),
    };
    let cfg = SimConfig::default();
    let budget = Duration::from_secs(5);
    assert_eq!(execute_case(&inputs, &Target::Reference, &cfg, budget).classification, Classification::Consistent);
    let f1 = Target::Faults(FaultSet::from([Fault::NoSliding]));
    assert_eq!(
        execute_case(&inputs, &f1, &cfg, budget).classification,
        Classification::Inconsistent(Category::BreakpointPlacement)
    );
}

fn wave(time: u64, v: u64) -> TraceEvent {
    TraceEvent::WaveOutput {
        time,
        values: vec![("o".into(), Value::known(4, v))],
    }
}

fn trace(events: Vec<TraceEvent>) -> Trace {
    Trace {
        events,
        waveform: None,
        failure: None,
    }
}

#[test]
fn reset_window_hides_early_wave_differences() {
    let cfg = SimConfig::default();
    let pause = |time| TraceEvent::Paused {
        line: 3,
        reason: PauseReason::Breakpoint,
        time,
    };
    let early_a = trace(vec![pause(50), wave(50, 1), TraceEvent::Finished { time: 400 }]);
    let early_b = trace(vec![pause(50), wave(50, 2), TraceEvent::Finished { time: 400 }]);
    let id = LineMap::identity();
    let v = compare_traces((&early_a, &id, &none(), &[]), (&early_b, &id, &none(), &[]), &cfg);
    assert_eq!(v, Verdict::Consistent);
    let late_a = trace(vec![pause(150), wave(150, 1), TraceEvent::Finished { time: 400 }]);
    let late_b = trace(vec![pause(150), wave(150, 2), TraceEvent::Finished { time: 400 }]);
    let v = compare_traces((&late_a, &id, &none(), &[]), (&late_b, &id, &none(), &[]), &cfg);
    assert_eq!(v.category(), Some(Category::WaveValue));
}

#[test]
fn pause_line_mismatch_is_pause_location() {
    let cfg = SimConfig::default();
    let id = LineMap::identity();
    let p = |line| TraceEvent::Paused {
        line,
        reason: PauseReason::Breakpoint,
        time: 105,
    };
    let a = trace(vec![p(3)]);
    let b = trace(vec![p(4)]);
    let v = compare_traces((&a, &id, &none(), &[]), (&b, &id, &none(), &[]), &cfg);
    assert_eq!(v.category(), Some(Category::PauseLocation));
}

#[test]
fn unmapped_line_is_reported_not_raised() {
    let cfg = SimConfig::default();
    let a = trace(vec![TraceEvent::Paused {
        line: 3,
        reason: PauseReason::Breakpoint,
        time: 105,
    }]);
    // run line 3 was inserted, so it has no original line
    let map = LineMap::insertion(3, 1);
    assert!(matches!(
        normalize(&a, &map, &none(), &[], &cfg),
        Err(DiffError::IncomparableTrace { line: 3, .. })
    ));
    let v = compare_traces((&a, &map, &none(), &[]), (&a, &LineMap::identity(), &none(), &[]), &cfg);
    assert!(!v.is_consistent());
}

#[test]
fn verdict_text_round_trip() {
    let a = run(LOOP8, &plan(&[(4, Role::Base)], 30), &[]);
    let b = run(LOOP8, &plan(&[(4, Role::Base)], 30), &[Fault::PauseLineOffByOne]);
    let id = LineMap::identity();
    let v = compare_traces((&a, &id, &none(), &[]), (&b, &id, &none(), &[]), &SimConfig::default());
    assert!(!v.is_consistent());
    assert_eq!(Verdict::from_text(&v.to_text()).unwrap(), v);
    assert_eq!(Verdict::from_text(&Verdict::Consistent.to_text()).unwrap(), Verdict::Consistent);
}

#[test]
fn loop_count_expectation_checks() {
    let t = run(LOOP8, &plan(&[(4, Role::Base)], 30), &[]);
    let n = normalize(&t, &LineMap::identity(), &none(), &[], &SimConfig::default()).unwrap();
    let ok = [Expectation::ExpectPauseCount { line: 4, count: 8 }];
    assert_eq!(check_expectations(&n, &ok).unwrap(), Verdict::Consistent);
    let bad = [Expectation::ExpectPauseCount { line: 4, count: 7 }];
    assert_eq!(check_expectations(&n, &bad).unwrap().category(), Some(Category::PauseCount));
}

fn random_trace(seed: u64, faults: &[Fault]) -> Trace {
    let srcs = [LOOP8, IF_ELSE, FOLDABLE, NBA_CHAIN];
    let src = srcs[(seed % srcs.len() as u64) as usize];
    let u = parse(src).unwrap();
    let cfg = PolicyConfig { cap: 30, run_all_ratio: 0.7 };
    let p = base_policy(&u, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    run(src, &p, faults)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compare_is_reflexive(seed in any::<u64>()) {
        let t = random_trace(seed, &[]);
        let id = LineMap::identity();
        prop_assert_eq!(compare_traces((&t, &id, &none(), &[]), (&t, &id, &none(), &[]), &SimConfig::default()), Verdict::Consistent);
    }

    #[test]
    fn compare_is_symmetric_in_outcome(seed in any::<u64>(), f in 0usize..5) {
        let a = random_trace(seed, &[]);
        let b = random_trace(seed, &[Fault::ALL[f]]);
        let id = LineMap::identity();
        let cfg = SimConfig::default();
        let ab = compare_traces((&a, &id, &none(), &[]), (&b, &id, &none(), &[]), &cfg);
        let ba = compare_traces((&b, &id, &none(), &[]), (&a, &id, &none(), &[]), &cfg);
        prop_assert_eq!(ab.category(), ba.category());
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let t = random_trace(seed, &[]);
        let cfg = SimConfig::default();
        let id = LineMap::identity();
        let once = normalize(&t, &id, &none(), &[], &cfg).unwrap();
        let twice = normalize(&once.to_trace(), &id, &none(), &[], &cfg).unwrap();
        prop_assert_eq!(once.to_trace(), twice.to_trace());
    }
}
