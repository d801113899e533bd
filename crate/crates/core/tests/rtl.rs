use dbgdiff::fixtures::*;
use dbgdiff::hdl::{parse, render, render_set};
use dbgdiff::rtl::*;
use dbgdiff::sim::elaborate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reparse(u: &dbgdiff::hdl::SourceUnit) -> dbgdiff::hdl::SourceUnit {
    dbgdiff::hdl::parse_set(&render_set(u)).expect("variant re-parses")
}

#[test]
fn assign_conv_sites_on_nba_chain() {
    let u = parse(NBA_CHAIN).unwrap();
    let sites = enumerate_sites(&u, RtlKind::AssignConv);
    assert_eq!(sites.len(), 1);
    assert_eq!(sites[0].target, SiteTarget::Stmt { line: 3, col: 5 });
    let r = apply_site(&u, &sites[0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(render(&r.variant).contains("    reg4 = 1'b0;\n"));
    assert!(r.line_map.is_identity());
}

#[test]
fn reg5_is_ineligible() {
    let u = parse(NBA_CHAIN).unwrap();
    let rec = RtlRecord {
        kind: RtlKind::AssignConv,
        target: SiteTarget::Stmt { line: 4, col: 5 },
        params: RtlParams::None,
    };
    assert!(matches!(apply_record(&u, &rec), Err(TransformError::IneligibleSite { .. })));
}

#[test]
fn literal_split_matches_paper_examples() {
    let u = parse("module m(output wire [1:0] o);\n  assign o = 2'h2;\nendmodule\n").unwrap();
    let sites = enumerate_sites(&u, RtlKind::LiteralExpr);
    assert_eq!(sites.len(), 1);
    for (op, a, b, text) in [(SplitOp::Add, 1, 1, "(2'h1 + 2'h1)"), (SplitOp::Sub, 3, 1, "(2'h3 - 2'h1)")] {
        let rec = RtlRecord {
            kind: RtlKind::LiteralExpr,
            target: sites[0].target,
            params: RtlParams::Split { op, a, b },
        };
        let r = apply_record(&u, &rec).unwrap();
        assert!(render(&r.variant).contains(text), "{}", render(&r.variant));
        assert_eq!(rec.to_string().parse::<RtlRecord>().unwrap(), rec);
    }
    let wrap = RtlRecord {
        kind: RtlKind::LiteralExpr,
        target: sites[0].target,
        params: RtlParams::Split { op: SplitOp::Add, a: 3, b: 3 },
    };
    assert!(apply_record(&u, &wrap).is_err());
}

#[test]
fn no_literals_no_sites() {
    let u = parse("module m(input wire a, output wire o);\n  assign o = a;\nendmodule\n").unwrap();
    assert!(enumerate_sites(&u, RtlKind::LiteralExpr).is_empty());
}

#[test]
fn double_negation_text() {
    let u = parse("module m(input wire a, output wire b);\n  assign b = a;\nendmodule\n").unwrap();
    let sites = enumerate_sites(&u, RtlKind::BitMutate);
    assert_eq!(sites.len(), 1);
    let r = apply_site(&u, &sites[0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(render(&r.variant).contains("assign b = ~(~a);"));
}

#[test]
fn floating_signals_are_not_negated() {
    let src = "module top(input wire clk, output wire o);\n  wire f;\n  assign o = f;\nendmodule\n";
    let u = parse(src).unwrap();
    assert!(enumerate_sites(&u, RtlKind::BitMutate).is_empty());
}

#[test]
fn dead_loop_removed_and_lines_shift() {
    let u = parse(DEAD_LOOP).unwrap();
    let sites = enumerate_sites(&u, RtlKind::DeadLoop);
    assert_eq!(sites.len(), 1);
    assert_eq!(sites[0].target, SiteTarget::Stmt { line: 5, col: 5 });
    let r = apply_site(&u, &sites[0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(r.line_map.map(7), Some(5));
    assert_eq!(r.line_map.map(5), None);
    assert!(r.line_map.is_deleted(6));
    let text = render(&r.variant);
    assert!(!text.contains("for"));
    assert_eq!(text.lines().count(), 6);
    assert!(reparse(&r.variant).same_structure(&r.variant));
}

#[test]
fn reachable_loop_is_not_dead() {
    let u = parse(LOOP8).unwrap();
    assert!(enumerate_sites(&u, RtlKind::DeadLoop).is_empty());
}

#[test]
fn inject_then_remove_restores_text() {
    let u = parse(FOLDABLE).unwrap();
    let original = render(&u);
    let rec = RtlRecord {
        kind: RtlKind::IncludeInject,
        target: SiteTarget::Unit,
        params: RtlParams::Inject {
            names: vec!["inc_a".into(), "inc_b".into(), "inc_c".into()],
        },
    };
    let mut r = replay_records(&u, &[rec]).unwrap();
    assert_eq!(r.variant.files.len(), 4);
    assert_eq!(r.line_map.map(17), Some(20));
    assert!(reparse(&r.variant).same_structure(&r.variant));
    elaborate(&r.variant).unwrap();
    for _ in 0..3 {
        let sites = enumerate_sites(&r.variant, RtlKind::IncludeRemove);
        assert!(!sites.is_empty());
        let step = apply_site(&r.variant, &sites[0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        r.line_map = r.line_map.compose(&step.line_map);
        r.variant = step.variant;
    }
    assert_eq!(render(&r.variant), original);
    assert_eq!(r.variant.files.len(), 1);
    assert!(r.line_map.is_identity());
}

#[test]
fn used_include_cannot_be_removed() {
    let files = vec![
        (
            "main.v".to_string(),
            "`include \"lib.vh\"\nmodule top(input wire clk, output wire y);\n  leaf u0(.o(y));\nendmodule\n".to_string(),
        ),
        ("lib.vh".to_string(), "module leaf(output wire o);\n  assign o = 1'b1;\nendmodule\n".to_string()),
    ];
    let u = dbgdiff::hdl::parse_set(&files).unwrap();
    assert!(enumerate_sites(&u, RtlKind::IncludeRemove).is_empty());
    let rec = RtlRecord {
        kind: RtlKind::IncludeRemove,
        target: SiteTarget::Include { line: 1 },
        params: RtlParams::None,
    };
    assert!(apply_record(&u, &rec).is_err());
}

#[test]
fn pipeline_respects_budget_and_replays() {
    let u = parse(FOLDABLE).unwrap();
    for seed in 0..40 {
        for m in [1, 3, 6] {
            let r = pro_pipeline(&u, m, &UNIFORM, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(r.records.len() <= m);
            if m == 1 {
                assert_eq!(r.records.len(), 1);
            }
            assert!(reparse(&r.variant).same_structure(&r.variant));
            elaborate(&r.variant).unwrap();
            let again = replay_records(&u, &r.records).unwrap();
            assert_eq!(render_set(&again.variant), render_set(&r.variant));
            assert_eq!(again.line_map, r.line_map);
        }
    }
}
