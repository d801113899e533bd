use std::time::Duration;

use dbgdiff::action::*;
use dbgdiff::campaign::{execute_case, CaseInputs, Classification, Target};
use dbgdiff::diff::Category;
use dbgdiff::fixtures::*;
use dbgdiff::hdl::{line_classes, parse, LineClass};
use dbgdiff::sim::{run_to_completion, start_session, Fault, FaultSet, SimConfig};
use dbgdiff::trace::{DebugAction, TraceEvent};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plan(bps: &[u32], runs: usize) -> Plan {
    let mut steps: Vec<Planned> = bps.iter().map(|&line| Planned::base(DebugAction::AddBp { line })).collect();
    steps.extend(std::iter::repeat(Planned::base(DebugAction::RunAll)).take(runs));
    Plan { steps, checks: Vec::new() }
}

fn outcome(src: &str, base: Plan, act: (Plan, Vec<ActRecord>), target: Target) -> Classification {
    let inputs = CaseInputs {
        unit: parse(src).unwrap(),
        base,
        pro: None,
        act: Some(act),
    };
    execute_case(&inputs, &target, &SimConfig::default(), Duration::from_secs(30)).classification
}

fn faults(f: Fault) -> Target {
    Target::Faults(FaultSet::from([f]))
}

/// Apply `kind` under successive seeds until `want` accepts the record.
fn apply_until(p: &Plan, src: &str, kind: ActKind, want: impl Fn(&ActRecord) -> bool) -> (Plan, Vec<ActRecord>) {
    let u = parse(src).unwrap();
    (0..500)
        .map(|s| apply_act(p, &u, kind, &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
        .find(|(_, r)| want(r))
        .map(|(p, r)| (p, vec![r]))
        .expect("some seed picks the wanted site")
}

#[test]
fn loop_sites_count_iterations() {
    assert_eq!(loop_sites(&parse(LOOP8).unwrap()), vec![(4, 8)]);
    assert_eq!(loop_sites(&parse(DEAD_LOOP).unwrap()), vec![(6, 0)]);
}

#[test]
fn step_for_loop_holds_on_reference_and_catches_f5() {
    for src in [LOOP8, DEAD_LOOP] {
        let base = plan(&[3], 40);
        let act = apply_until(&base, src, ActKind::StepForLoop, |_| true);
        assert_eq!(outcome(src, base.clone(), act.clone(), Target::Reference), Classification::Consistent);
    }
    let base = plan(&[3], 40);
    let act = apply_until(&base, LOOP8, ActKind::StepForLoop, |_| true);
    assert_eq!(
        outcome(LOOP8, base, act, faults(Fault::LoopFirstHitSkipped)),
        Classification::Inconsistent(Category::PauseCount)
    );
}

#[test]
fn if_else_probe_on_fixture() {
    let u = parse(IF_ELSE).unwrap();
    assert_eq!(branch_sites(&u), vec![(4, 7)]);
    let base = plan(&[4], 30);
    let (p, recs) = apply_until(&base, IF_ELSE, ActKind::IfElseProbe, |_| true);
    assert_eq!(recs[0].detail, vec![4, 7]);
    assert!(p.checks.contains(&RunCheck::Branch { then_line: 4, else_line: 7 }));
    assert_eq!(outcome(IF_ELSE, base, (p, recs), Target::Reference), Classification::Consistent);
}

#[test]
fn fold_keeps_actual_line_and_f4_flips() {
    let base = plan(&[12, 17], 30);
    let act = apply_until(&base, FOLDABLE, ActKind::CodeFold, |r| r.detail == vec![1, 10, 17]);
    let view = act.0.steps.iter().find_map(|s| match (s.role, s.action) {
        (Role::View { source: 17 }, DebugAction::AddBp { line }) => Some(line),
        _ => None,
    });
    assert_eq!(view, Some(8));
    assert_eq!(outcome(FOLDABLE, base.clone(), act.clone(), Target::Reference), Classification::Consistent);
    assert_eq!(
        outcome(FOLDABLE, base, act, faults(Fault::FoldIgnoresView)),
        Classification::Inconsistent(Category::BreakpointPlacement)
    );
}

#[test]
fn fold_never_displaces_the_leading_breakpoint() {
    let base = plan(&[17], 10);
    let u = parse(FOLDABLE).unwrap();
    for s in 0..50 {
        assert_eq!(
            apply_act(&base, &u, ActKind::CodeFold, &mut ChaCha8Rng::seed_from_u64(s)),
            Err(ActError::NoFoldSite)
        );
    }
}

#[test]
fn slide_moves_onto_comment_and_f1_is_caught() {
    let base = plan(&[5, 17], 30);
    let act = apply_until(&base, FOLDABLE, ActKind::BreakpointSlide, |r| r.detail[1] == 5);
    assert_eq!(outcome(FOLDABLE, base.clone(), act.clone(), Target::Reference), Classification::Consistent);
    assert_eq!(
        outcome(FOLDABLE, base, act, faults(Fault::NoSliding)),
        Classification::Inconsistent(Category::BreakpointPlacement)
    );
}

#[test]
fn no_slide_site_without_quiet_lines() {
    let u = parse(NBA_CHAIN).unwrap();
    let base = plan(&[3], 5);
    assert_eq!(
        apply_act(&base, &u, ActKind::BreakpointSlide, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(ActError::NoSlideSite)
    );
}

#[test]
fn added_breakpoint_keeps_existing_pairs() {
    let u = parse(FOLDABLE).unwrap();
    let base = plan(&[17], 30);
    let (p, rec) = apply_act(&base, &u, ActKind::AddBreakpoint, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let run = |p: &Plan| {
        let mut s = start_session(&u, &SimConfig::default(), &FaultSet::new()).unwrap();
        run_to_completion(&mut s, &mut PlanPolicy::new(p.clone()))
    };
    let pairs = |t: &dbgdiff::trace::Trace| -> Vec<(u32, Option<u32>)> {
        t.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::BreakpointSet { requested, actual } if *requested == 17 => Some((*requested, *actual)),
                _ => None,
            })
            .collect()
    };
    assert_eq!(pairs(&run(&base)), pairs(&run(&p)));
    assert_eq!(outcome(FOLDABLE, base, (p, vec![rec]), Target::Reference), Classification::Consistent);
}

#[test]
fn base_policy_targets_executable_lines() {
    let u = parse(FOLDABLE).unwrap();
    let table = line_classes(u.main());
    for s in 0..200 {
        let p = base_policy(&u, &PolicyConfig::default(), &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        assert_eq!(p.steps.len(), 256);
        for step in &p.steps {
            if let DebugAction::AddBp { line } = step.action {
                assert_eq!(table[line as usize - 1], LineClass::Executable);
            }
        }
    }
}

#[test]
fn base_policy_is_deterministic() {
    let u = parse(FOLDABLE).unwrap();
    let a = base_policy(&u, &PolicyConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = base_policy(&u, &PolicyConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn design_without_executable_lines() {
    let u = parse("module m(input wire a);\nendmodule\n").unwrap();
    assert_eq!(
        base_policy(&u, &PolicyConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)),
        Err(PolicyError::NoExecutableLines)
    );
}

#[test]
fn breakpoint_draws_cover_executable_lines_evenly() {
    // 10,000 single-breakpoint draws over FOLDABLE's executable lines;
    // chi-square against the uniform distribution
    let u = parse(FOLDABLE).unwrap();
    let table = line_classes(u.main());
    let exec: Vec<u32> = (1..=table.len() as u32).filter(|l| table[*l as usize - 1] == LineClass::Executable).collect();
    let cfg = PolicyConfig { cap: 2, run_all_ratio: 0.7 };
    let mut counts = std::collections::BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut n = 0usize;
    while n < 10_000 {
        let p = base_policy(&u, &cfg, &mut rng).unwrap();
        if let DebugAction::AddBp { line } = p.steps[0].action {
            *counts.entry(line).or_insert(0usize) += 1;
            n += 1;
        }
    }
    let expected = n as f64 / exec.len() as f64;
    let chi: f64 = exec
        .iter()
        .map(|l| {
            let o = *counts.get(l).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    // 99.9th percentile of chi-square with df <= 9 is below 28
    assert!(chi < 28.0, "chi-square {chi} over {} lines", exec.len());
}

#[test]
fn plan_text_round_trip() {
    let base = plan(&[12, 17], 3);
    let (p, _) = apply_until(&base, FOLDABLE, ActKind::CodeFold, |r| r.detail == vec![1, 10, 17]);
    let (p, _) = apply_until(&p, FOLDABLE, ActKind::AddBreakpoint, |_| true);
    assert_eq!(Plan::from_text(&p.to_text()).unwrap(), p);
}

#[test]
fn record_text_round_trip() {
    for r in [
        ActRecord { kind: ActKind::CodeFold, detail: vec![1, 10, 17] },
        ActRecord { kind: ActKind::StepForLoop, detail: vec![4, 8] },
    ] {
        assert_eq!(r.to_string().parse::<ActRecord>().unwrap(), r);
    }
}

#[test]
fn pipeline_m1_gives_one_record() {
    let u = parse(FOLDABLE).unwrap();
    let base = plan(&[12, 17], 30);
    for s in 0..100 {
        let (_, recs, early) = act_pipeline(&base, &u, 1, &UNIFORM_ACT, &mut ChaCha8Rng::seed_from_u64(s));
        assert_eq!(recs.len(), 1);
        assert!(!early);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transformed_plans_start_with_a_breakpoint(seed in any::<u64>(), m in 1usize..=6) {
        let u = parse(FOLDABLE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = base_policy(&u, &PolicyConfig::default(), &mut rng).unwrap();
        let (p, recs, _) = act_pipeline(&base, &u, m, &UNIFORM_ACT, &mut rng);
        let leading = matches!(p.steps[0].action, DebugAction::AddBp { .. });
        prop_assert!(leading);
        prop_assert!(recs.len() <= m);
    }

    #[test]
    fn transformed_plans_agree_with_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for src in [FOLDABLE, LOOP8, IF_ELSE, DEAD_LOOP] {
            let u = parse(src).unwrap();
            let base = base_policy(&u, &PolicyConfig { cap: 40, run_all_ratio: 0.7 }, &mut rng).unwrap();
            let (p, recs, _) = act_pipeline(&base, &u, 6, &UNIFORM_ACT, &mut rng);
            prop_assert_eq!(outcome(src, base, (p, recs), Target::Reference), Classification::Consistent);
        }
    }
}
