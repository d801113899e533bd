use std::path::Path;
use std::process::{Command, Output};

use dbgdiff::fixtures::{FOLDABLE, LOOP8, NBA_CHAIN};

fn dbgdiff(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbgdiff"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DBGDIFF_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn clean_campaign_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbgdiff(&["campaign", "--cases", "5", "--workers", "2", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/report.toml").exists());
}

#[test]
fn faulty_campaign_exits_one_and_writes_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbgdiff(
        &["campaign", "--target", "fault:F4", "--cases", "30", "--rng-seed", "2", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let bugs: Vec<_> = std::fs::read_dir(dir.path().join("out/bugs")).unwrap().collect();
    assert!(!bugs.is_empty());
}

#[test]
fn campaign_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = dbgdiff(
            &["campaign", "--target", "fault:F1", "--cases", "20", "--rng-seed", "9", "--workers", "1", "--out", out],
            dir.path(),
        );
        assert!(o.status.code().is_some_and(|c| c <= 1));
    }
    let a = std::fs::read(dir.path().join("a/report.toml")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.toml")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "no_such_key = 1\n").unwrap();
    let o = dbgdiff(&["campaign", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = dbgdiff(&["campaign", "--target", "fault:F9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = dbgdiff(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "case_count = 3\nseed_lines = [60, 80]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dbgdiff"))
        .args(["campaign", "--out", "out"])
        .current_dir(dir.path())
        .env("DBGDIFF_CONFIG", "c.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("out/report.toml")).unwrap();
    assert!(report.contains("designs_run = 3"), "{report}");
}

#[test]
fn transform_ineligible_site_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.v"), NBA_CHAIN).unwrap();
    let o = dbgdiff(&["transform", "d.v", "--op", "dead-loop", "--site", "1:1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ineligible"));
}

#[test]
fn transform_prints_variant_and_line_map() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.v"), NBA_CHAIN).unwrap();
    let o = dbgdiff(&["transform", "d.v", "--op", "assign-conv", "--site", "3:5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("reg4 = 1'b0;"), "{text}");
    assert!(text.contains("== line-map"));
    assert!(text.contains("== record assign-conv 3:5"));
}

#[test]
fn simulate_prints_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.v"), LOOP8).unwrap();
    std::fs::write(dir.path().join("s.txt"), "add_bp 4\nrun_all\nrun_all\n").unwrap();
    let o = dbgdiff(&["simulate", "d.v", "--script", "s.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("paused 4"), "{}", stdout(&o));
    std::fs::write(dir.path().join("bad.v"), "module m(;\n").unwrap();
    let o = dbgdiff(&["simulate", "bad.v", "--script", "s.txt"], dir.path());
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn replay_and_reduce_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbgdiff(
        &["campaign", "--target", "fault:F4", "--cases", "30", "--rng-seed", "2", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let bundle = std::fs::read_dir(dir.path().join("out/bugs")).unwrap().next().unwrap().unwrap().path();
    let b = bundle.to_str().unwrap();
    let o = dbgdiff(&["replay", b], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("inconsistent breakpoint-placement"), "{}", stdout(&o));
    // a clean debugger does not reproduce the bug
    let o = dbgdiff(&["reduce", b, "--target", "reference", "--out", "r0"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = dbgdiff(&["reduce", b, "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let before = std::fs::read_to_string(bundle.join("design.v")).unwrap().lines().count();
    let after = std::fs::read_to_string(dir.path().join("r/design.v")).unwrap().lines().count();
    assert!(after < before / 5, "{before} -> {after}");
    let o = dbgdiff(&["replay", "r"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_seed_writes_designs_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbgdiff(&["gen-seed", "--lines", "100-150", "--count", "3", "--rng-seed", "4", "--out", "seeds"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path().join("seeds")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 3);
    for f in files {
        let n = std::fs::read_to_string(&f).unwrap().lines().count();
        assert!((100..=150).contains(&n));
    }
}

#[test]
fn foldable_seed_file_drives_a_campaign() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.v"), FOLDABLE).unwrap();
    let o = dbgdiff(&["campaign", "--seed", "f.v", "--cases", "4", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
