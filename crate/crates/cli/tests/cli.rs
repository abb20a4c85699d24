use std::path::Path;

use pathsel_cli::{compare, load_unit, main_with_args, Flags, EXIT_CONFIG, EXIT_EXHAUSTED, EXIT_INPUT, EXIT_OK};
use pathsel_core::engine::{Clock, EngineConfig, Mode};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["pathsel"];
    argv.extend_from_slice(args);
    let code = main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const QUICK: [&str; 8] = ["--budget-min", "0.5", "--workers", "1", "--clock", "virtual", "--evals-per-sec", "2000"];

#[test]
fn defaults_are_desk_scale() {
    assert_eq!(Flags::default().resolve().unwrap(), EngineConfig::default());
    let paper = Flags {
        paper_scale: true,
        ..Flags::default()
    }
    .resolve()
    .unwrap();
    assert_eq!(paper.time_budget.as_secs(), 1800);
    assert_eq!(paper.workers, 5);
    assert_eq!(paper.pc_budget.as_secs(), 180);

    // Explicit flags win over the preset.
    let mixed = Flags {
        paper_scale: true,
        workers: Some(2),
        ..Flags::default()
    }
    .resolve()
    .unwrap();
    assert_eq!((mixed.workers, mixed.time_budget.as_secs()), (2, 1800));
}

#[test]
fn flags_map_onto_config() {
    let (code, _, _) = invoke(&["run", "nope.tu", "--bucket-probs", "0.25,0.25,0.25,0.25", "--mode", "fifo"]);
    assert_eq!(code, EXIT_INPUT);
    let f = Flags {
        bucket_probs: Some(vec![0.25; 4]),
        seed: Some(9),
        recache_threshold: Some(2),
        pc_budget_s: Some(1.5),
        clock: Some(pathsel_cli::ClockArg::Virtual),
        evals_per_sec: 100,
        ..Flags::default()
    }
    .resolve()
    .unwrap();
    assert_eq!(f.bucket_probs.0, [0.25; 4]);
    assert_eq!((f.master_seed, f.recache_threshold, f.pc_budget.as_millis()), (9, 2, 1500));
    assert_eq!(f.clock, Clock::Virtual { evals_per_sec: 100 });
}

#[test]
fn config_errors_exit_2() {
    for bad in [
        &["run", "sample_class.tu", "--bucket-probs", "0.5,0.5,0.5,0.5"][..],
        &["run", "sample_class.tu", "--bucket-probs", "0.5,0.5"],
        &["run", "sample_class.tu", "--workers", "0"],
        &["run", "sample_class.tu", "--budget-min", "0"],
        &["run", "sample_class.tu", "--mode", "lifo"],
        &["run", "sample_class.tu", "--frobnicate"],
        &["compare", "sample_class.tu", "--seeds", "x"],
    ] {
        let (code, _, err) = invoke(bad);
        assert_eq!(code, EXIT_CONFIG, "{bad:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn unreadable_or_malformed_input_exits_3() {
    assert_eq!(invoke(&["run", "missing.tu"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["run", "/definitely/not/sample_class.tu"]).0, EXIT_INPUT);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tu");
    std::fs::write(&bad, "unit Broken( {").unwrap();
    assert_eq!(invoke(&["run", bad.to_str().unwrap()]).0, EXIT_INPUT);
    assert_eq!(invoke(&["solve-pc", "sample_class.tu", "A[0] >"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["solve-pc", "sample_class.tu", "nothere > 0"]).0, EXIT_INPUT);
}

#[test]
fn bundled_units_resolve_by_name() {
    assert_eq!(load_unit(Path::new("sample_class.tu")).unwrap().name, "SampleClass");
    assert_eq!(load_unit(Path::new("corpus/single_loop.tu")).unwrap().name, "SingleLoop");
    assert_eq!(load_unit(Path::new("nested_guard")).unwrap().name, "NestedGuard");
    let (code, out, _) = invoke(&["corpus-list"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 4);
    assert!(out.contains("sample_class.tu"));
}

#[test]
fn solve_pc_exit_codes() {
    let (code, out, _) = invoke(&["solve-pc", "sample_class.tu", "A[0] > 0"]);
    assert_eq!(code, EXIT_OK);
    let args: Vec<i64> = out.trim().strip_prefix("solved: ").unwrap().split(' ').map(|a| a.parse().unwrap()).collect();
    assert_eq!(args.len(), 15);
    assert!(args[0] > 0);

    let (code, out, _) = invoke(&[
        "solve-pc",
        "sample_class.tu",
        "A.length <= 1",
        "--pc-budget-s",
        "5",
        "--clock",
        "virtual",
        "--evals-per-sec",
        "1000",
    ]);
    assert_eq!(code, EXIT_EXHAUSTED);
    assert_eq!(out, "exhausted after 5000 evaluations\n");
}

#[test]
fn run_writes_self_describing_reports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let mut args = vec!["run", "sample_class.tu", "--mode", "fifo", "--seed", "42"];
    args.extend_from_slice(&QUICK);
    args.extend_from_slice(&["--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    let (code, out, err) = invoke(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("SampleClass fifo: "));

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["config"]["mode"], "fifo");
    assert_eq!(report["config"]["master_seed"], 42);
    assert_eq!(report["config"]["time_budget"], 30.0);
    assert_eq!(report["config"]["clock"]["virtual"]["evals_per_sec"], 2000);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("index,key,mode,label,voting,outcome,seconds\n"));
    assert_eq!(rows.lines().count(), 1 + report["pcs"].as_array().unwrap().len());
    assert!(rows.lines().skip(1).all(|l| l.contains(",fifo,")));
}

#[test]
fn compare_tabulates_per_seed() {
    let unit = load_unit(Path::new("sample_class.tu")).unwrap();
    let config = EngineConfig {
        time_budget: std::time::Duration::from_secs(30),
        workers: 1,
        clock: Clock::Virtual { evals_per_sec: 2000 },
        ..EngineConfig::default()
    };
    let c = compare(&unit, &[3, 3], &config).unwrap();
    assert_eq!(c.rows.len(), 2);
    assert_eq!(c.rows[0], c.rows[1]);
    assert_eq!(c.reports[0].0.config.mode, Mode::Knn);
    assert_eq!(c.reports[0].1.config.mode, Mode::Fifo);
    let text = c.to_text();
    assert!(text.contains("mean"));
    assert!(text.contains("feasible ratio knn/fifo"));
    assert_eq!(c.to_csv().lines().count(), 3);
    assert!(compare(&unit, &[], &config).is_err());

    let mut args = vec!["compare", "sample_class.tu", "--seeds", "1"];
    args.extend_from_slice(&QUICK);
    let (code, out, _) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 4);
}
