//! End-to-end CLI tests: parsing, exit codes, and CSV determinism.

use std::path::{Path, PathBuf};

use evclass_cli::{parse_config, run, run_command, CliError};

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn sample(name: &str) -> String {
    samples().join(name).to_string_lossy().into_owned()
}

fn run_captured(args: &[&str]) -> Result<String, CliError> {
    let mut argv = vec!["evclass".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let config = parse_config(argv)?;
    let mut out = String::new();
    run_command(&config, &mut out)?;
    Ok(out)
}

#[test]
fn classify_reports_proper_and_minimal_dimension() {
    let out = run_captured(&["classify", "--hypothesis", &sample("hypothesis_desk.json")])
        .unwrap();
    assert!(out.contains("classification: proper"), "{out}");
    assert!(out.contains("minimal constraint dimension: 1"), "{out}");
}

#[test]
fn classify_heavy_tail_is_loose_proper() {
    let out = run_captured(&["classify", "--hypothesis", &sample("hypothesis_heavy.json")])
        .unwrap();
    assert!(out.contains("classification: loose_proper"), "{out}");
}

#[test]
fn out_of_range_delta_is_a_usage_error() {
    let code = run([
        "evclass",
        "test",
        "--hypothesis",
        &sample("hypothesis_desk.json"),
        "--strategy",
        &sample("strategy_fixed.json"),
        "--delta",
        "1.5",
        "--gen",
        &sample("gen_two_point.json"),
        "--seed",
        "1",
        "--rounds",
        "5",
    ]);
    assert_eq!(code, evclass_cli::EXIT_USAGE);
}

#[test]
fn gen_without_seed_is_a_usage_error() {
    let err = run_captured(&[
        "test",
        "--hypothesis",
        &sample("hypothesis_desk.json"),
        "--strategy",
        &sample("strategy_fixed.json"),
        "--delta",
        "0.05",
        "--gen",
        &sample("gen_two_point.json"),
        "--rounds",
        "5",
    ])
    .unwrap_err();
    match err {
        CliError::Usage(msg) => assert!(msg.contains("--seed"), "{msg}"),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"delta": 0.05, "bananas": 1}"#).unwrap();
    let err = run_captured(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--hypothesis",
        &sample("hypothesis_desk.json"),
    ])
    .unwrap_err();
    match err {
        CliError::Usage(msg) => assert!(msg.contains("bananas"), "{msg}"),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"hypothesis": "{}", "strategy": "{}", "delta": 0.05}}"#,
            sample("hypothesis_bounded.json"),
            sample("strategy_edge_up.json")
        ),
    )
    .unwrap();
    // Stream flags come from the command line; delta and files from config.
    let out = run_captured(&[
        "test",
        "--config",
        cfg.to_str().unwrap(),
        "--gen",
        r#"{"name": "two_point", "a": 1.0, "b": 1.0, "prob_a": 1.0}"#,
        "--seed",
        "9",
        "--rounds",
        "8",
    ])
    .unwrap();
    // A stream of ones against mu = 1/2 at the up edge doubles every round.
    assert!(out.contains("verdict: rejected(5, threshold)"), "{out}");
}

#[test]
fn outside_support_verdict_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.csv");
    std::fs::write(&stream, "x1\n1.0\n0.0\n").unwrap();
    let out = run_captured(&[
        "test",
        "--hypothesis",
        &sample("hypothesis_support.json"),
        "--strategy",
        r#"{"kind": "constant"}"#,
        "--delta",
        "0.05",
        "--stream",
        stream.to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.contains("verdict: rejected(1, outside_support)"), "{out}");
}

#[test]
fn trajectory_round_trips_through_the_stream_reader() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    // Constant strategy never rejects, so the trajectory covers the whole
    // generated stream.
    run_captured(&[
        "test",
        "--hypothesis",
        &sample("hypothesis_bounded.json"),
        "--strategy",
        r#"{"kind": "constant"}"#,
        "--delta",
        "0.05",
        "--gen",
        &sample("gen_two_point.json"),
        "--seed",
        "4",
        "--rounds",
        "25",
        "--output",
        traj.to_str().unwrap(),
    ])
    .unwrap();
    let expected = evclass::GeneratorSpec::from_json(
        &std::fs::read_to_string(samples().join("gen_two_point.json")).unwrap(),
    )
    .unwrap()
    .generate(4, 25)
    .unwrap();
    let read_back = evclass::stream::read_stream_file(&traj).unwrap();
    assert_eq!(read_back, expected);
}

#[test]
fn cs_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("cs1.csv");
    let out2 = dir.path().join("cs2.csv");
    for out in [&out1, &out2] {
        run_captured(&[
            "cs",
            "--family",
            "bounded",
            "--mu-grid",
            "0.1:0.9:0.1",
            "--delta",
            "0.05",
            "--gen",
            &sample("gen_two_point.json"),
            "--seed",
            "11",
            "--rounds",
            "60",
            "--strategy",
            &sample("strategy_ftl.json"),
            "--output",
            out.to_str().unwrap(),
        ])
        .unwrap();
    }
    let b1 = std::fs::read(&out1).unwrap();
    let b2 = std::fs::read(&out2).unwrap();
    assert!(!b1.is_empty());
    assert_eq!(b1, b2, "same seed and config must give identical bytes");
}

#[test]
fn heavy_tail_cs_has_boundary_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cs.csv");
    run_captured(&[
        "cs",
        "--family",
        "heavy-tail",
        "--mu-grid",
        "-0.5,0.0,0.5",
        "--delta",
        "0.05",
        "--gen",
        &sample("gen_heavy.json"),
        "--seed",
        "2",
        "--rounds",
        "30",
        "--strategy",
        &sample("strategy_ftl.json"),
        "--output",
        out.to_str().unwrap(),
    ])
    .unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,mu,in_set,log_wealth,u_t"), "{text}");
}

#[test]
fn verify_optimality_small_run_exits_zero() {
    let code = run([
        "evclass",
        "verify-optimality",
        "--trials",
        "40",
        "--seed",
        "5",
        "--max-grid",
        "5",
    ]);
    assert_eq!(code, evclass_cli::EXIT_OK);
}

#[test]
fn simulate_type1_small_run_exits_zero() {
    let code = run([
        "evclass",
        "simulate",
        "--task",
        "type1",
        "--hypothesis",
        &sample("hypothesis_desk.json"),
        "--strategy",
        &sample("strategy_ftl.json"),
        "--delta",
        "0.05",
        "--rounds",
        "50",
        "--replicates",
        "60",
        "--seed",
        "3",
    ]);
    assert_eq!(code, evclass_cli::EXIT_OK);
}

#[test]
fn help_exits_zero_and_unknown_flag_exits_one() {
    assert_eq!(run(["evclass", "--help"]), evclass_cli::EXIT_OK);
    assert_eq!(run(["evclass", "classify", "--bogus"]), evclass_cli::EXIT_USAGE);
}
