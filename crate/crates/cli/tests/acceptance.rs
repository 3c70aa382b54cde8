//! End-to-end checks of the `qgp` binary: byte-deterministic reruns, output
//! schemas, the exit-code taxonomy, and Monte Carlo interface behavior.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgp_core::estimators::EstimateReport;
use qgp_core::trainer::TrainingStep;

fn qgp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qgp"))
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = qgp().args(args).output().expect("spawn qgp");
    assert!(
        out.status.success(),
        "qgp {args:?} failed (status {:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn run_err(args: &[&str]) -> Output {
    let out = qgp().args(args).output().expect("spawn qgp");
    assert!(!out.status.success(), "qgp {args:?} unexpectedly succeeded");
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Writes the shared 16-point dataset fixture and returns its path.
fn dataset_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("ds.csv");
    run_ok(&[
        "gen-data",
        "--seed",
        "3",
        "--n",
        "16",
        "--noise-variance",
        "0.25",
        "--spacing",
        "0.25",
        "--out",
        path.to_str().unwrap(),
    ]);
    path
}

#[test]
fn criterion_9_every_command_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_fixture(dir.path());
    let ds = ds.to_str().unwrap();

    let commands: Vec<Vec<&str>> = vec![
        vec![
            "gen-data",
            "--seed",
            "3",
            "--n",
            "16",
            "--noise-variance",
            "0.25",
            "--spacing",
            "0.25",
        ],
        vec![
            "estimate",
            "lml",
            "--data",
            ds,
            "--seed",
            "5",
            "--noise-variance",
            "0.25",
            "--T",
            "128",
            "--samples-det",
            "4000",
            "--samples-fit",
            "4000",
            "--with-oracle",
        ],
        vec![
            "compare",
            "--data",
            ds,
            "--seed",
            "7",
            "--noise-variance",
            "0.25",
            "--T",
            "128",
            "--samples-det",
            "2000",
            "--samples-fit",
            "2000",
            "--probes",
            "300",
        ],
        vec![
            "train",
            "--data",
            ds,
            "--seed",
            "9",
            "--evaluator",
            "quantum",
            "--T",
            "64",
            "--samples-det",
            "1500",
            "--samples-fit",
            "1500",
            "--grid-lengthscale",
            "0.5,1.0",
            "--grid-signal-variance",
            "1.0",
            "--grid-noise-variance",
            "0.1,0.25",
        ],
        vec![
            "study",
            "--seed",
            "11",
            "--sizes",
            "8,16",
            "--repetitions",
            "5",
            "--samples-det",
            "1500",
            "--samples-fit",
            "1500",
            "--noise-variance",
            "0.25",
        ],
    ];

    let mut digest = 0u64;
    for args in &commands {
        let first = run_ok(args);
        let second = run_ok(args);
        assert!(!first.is_empty(), "qgp {args:?} produced no output");
        assert_eq!(
            fnv1a(&first),
            fnv1a(&second),
            "qgp {args:?} output hash changed between reruns"
        );
        assert_eq!(first, second, "qgp {args:?} is not byte-deterministic");
        digest ^= fnv1a(&first);
    }

    // --out must write exactly the bytes that stdout would carry.
    let stdout = run_ok(&[
        "gen-data",
        "--seed",
        "3",
        "--n",
        "16",
        "--noise-variance",
        "0.25",
        "--spacing",
        "0.25",
    ]);
    assert_eq!(stdout, fs::read(ds).unwrap());

    println!(
        "PASS criterion 9: all five commands rerun byte-identically (combined hash {digest:016x})"
    );
}

#[test]
fn outputs_parse_under_their_declared_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let ds_path = dataset_fixture(dir.path());
    let ds = ds_path.to_str().unwrap();

    // Dataset CSV: declared header, one power-of-two batch of observations,
    // every field a finite float.
    let text = fs::read_to_string(&ds_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,y"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    for row in rows {
        for field in row.split(',') {
            let v: f64 = field.parse().expect("dataset field parses as f64");
            assert!(v.is_finite());
        }
    }

    // Estimate JSONL: an EstimateReport line plus an oracle line whose
    // signed error is consistent with the reported mean.
    let out = run_ok(&[
        "estimate",
        "lml",
        "--data",
        ds,
        "--seed",
        "5",
        "--noise-variance",
        "0.25",
        "--T",
        "128",
        "--samples-det",
        "4000",
        "--samples-fit",
        "4000",
        "--with-oracle",
    ]);
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "expected report + oracle lines");
    let report: EstimateReport = serde_json::from_str(lines[0]).expect("report line parses");
    assert_eq!(report.sample_count, 8000);
    assert_eq!(report.seed, 5);
    assert!(report.standard_error > 0.0);
    let oracle: serde_json::Value = serde_json::from_str(lines[1]).expect("oracle line parses");
    let oracle_value = oracle["oracle"].as_f64().unwrap();
    let error = oracle["error"].as_f64().unwrap();
    assert!((error - (report.mean - oracle_value)).abs() < 1e-12);

    // Without --with-oracle exactly one line appears.
    let out = run_ok(&[
        "estimate",
        "logdet",
        "--data",
        ds,
        "--seed",
        "5",
        "--noise-variance",
        "0.25",
        "--samples-det",
        "2000",
    ]);
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);

    // Comparison CSV: declared header, the three method rows, numeric fields.
    let out = run_ok(&[
        "compare",
        "--data",
        ds,
        "--seed",
        "7",
        "--noise-variance",
        "0.25",
        "--T",
        "128",
        "--samples-det",
        "2000",
        "--samples-fit",
        "2000",
        "--probes",
        "300",
    ]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("method,n,budget,estimate,error-vs-oracle,wall-time")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let methods: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(methods, ["quantum", "taylor", "chebyshev"]);
    for row in &rows {
        assert_eq!(row.len(), 6);
        assert_eq!(row[1].parse::<usize>().unwrap(), 16);
        row[2].parse::<u64>().unwrap();
        for field in &row[3..6] {
            field.parse::<f64>().unwrap();
        }
        assert_eq!(row[5], "0", "wall-time must be zero without --timing");
    }

    // Training trace JSONL: step lines parse as steps, the final summary
    // line counts them.
    let out = run_ok(&[
        "train",
        "--data",
        ds,
        "--seed",
        "9",
        "--grid-lengthscale",
        "0.5,1.0",
        "--grid-signal-variance",
        "1.0",
        "--grid-noise-variance",
        "0.1,0.25",
    ]);
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 2);
    for line in &lines[..lines.len() - 1] {
        let step: TrainingStep = serde_json::from_str(line).expect("step line parses");
        assert!(step.theta.lengthscale > 0.0);
    }
    let summary: serde_json::Value = serde_json::from_str(lines[lines.len() - 1]).unwrap();
    assert_eq!(summary["steps"].as_u64().unwrap() as usize, lines.len() - 1);
    assert!(summary["best_theta"]["noise_variance"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["budget_used"].as_u64().unwrap(), 0);

    // Study CSV: declared header and one row per requested size.
    let out = run_ok(&[
        "study",
        "--seed",
        "11",
        "--sizes",
        "8,16",
        "--repetitions",
        "5",
        "--samples-det",
        "1500",
        "--samples-fit",
        "1500",
        "--noise-variance",
        "0.25",
    ]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,rel_var,ci,delta_exact,flagged"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "8");
    assert_eq!(rows[1][0], "16");
    for row in &rows {
        for field in &row[1..4] {
            field.parse::<f64>().unwrap();
        }
        assert!(row[4] == "true" || row[4] == "false");
    }

    println!("PASS schema: every emitted line parses under its declared JSONL/CSV schema");
}

#[test]
fn exit_codes_follow_the_documented_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_fixture(dir.path());
    let ds = ds.to_str().unwrap();

    // Usage problems: exit 1.
    let unknown_flag = run_err(&["estimate", "logdet", "--data", ds, "--sead", "1"]);
    assert_eq!(unknown_flag.status.code(), Some(1));

    let missing_seed = run_err(&["estimate", "logdet", "--data", ds]);
    assert_eq!(missing_seed.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing_seed.stderr).contains("--seed"));

    let bad_value = run_err(&[
        "estimate", "logdet", "--data", ds, "--seed", "1", "--T", "100",
    ]);
    assert_eq!(
        bad_value.status.code(),
        Some(1),
        "non-power-of-two register"
    );

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "sead=1\n").unwrap();
    let bad_config = run_err(&[
        "estimate",
        "logdet",
        "--data",
        ds,
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(bad_config.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_config.stderr).contains("unknown key"));

    // Data problems: exit 2.
    let missing_data = run_err(&[
        "estimate",
        "logdet",
        "--seed",
        "1",
        "--data",
        "/nonexistent.csv",
    ]);
    assert_eq!(missing_data.status.code(), Some(2));

    let mangled = dir.path().join("mangled.csv");
    fs::write(&mangled, "x1,y\n0.1,not-a-number\n").unwrap();
    let bad_data = run_err(&[
        "estimate",
        "logdet",
        "--seed",
        "1",
        "--data",
        mangled.to_str().unwrap(),
    ]);
    assert_eq!(bad_data.status.code(), Some(2));

    let missing_config = run_err(&[
        "estimate",
        "logdet",
        "--data",
        ds,
        "--seed",
        "1",
        "--config",
        "/nonexistent.cfg",
    ]);
    assert_eq!(missing_config.status.code(), Some(2));

    // Numeric problems: exit 3. Duplicate inputs with denormal-level noise
    // give a covariance whose Cholesky pivot is exactly zero.
    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "x1,y\n0.3,1\n0.3,-0.5\n").unwrap();
    let singular = run_err(&[
        "estimate",
        "logdet",
        "--seed",
        "1",
        "--data",
        dup.to_str().unwrap(),
        "--noise-variance",
        "1e-300",
        "--with-oracle",
    ]);
    assert_eq!(singular.status.code(), Some(3));

    println!("PASS exit codes: usage -> 1, data -> 2, numeric -> 3");
}

#[test]
fn stderr_shrinks_like_root_ten_under_tenfold_samples() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_fixture(dir.path());
    let ds = ds.to_str().unwrap();

    let report = |samples: &str| -> EstimateReport {
        let out = run_ok(&[
            "estimate",
            "logdet",
            "--data",
            ds,
            "--seed",
            "21",
            "--noise-variance",
            "0.25",
            "--samples-det",
            samples,
        ]);
        serde_json::from_str(String::from_utf8(out).unwrap().lines().next().unwrap()).unwrap()
    };

    let small = report("20000");
    let large = report("200000");
    let ratio = small.standard_error / large.standard_error;
    let expected = 10f64.sqrt();
    assert!(
        (ratio / expected - 1.0).abs() <= 0.20,
        "stderr ratio {ratio:.3} vs sqrt(10) = {expected:.3}"
    );
    println!(
        "PASS scaling: tenfold samples shrink stderr by {ratio:.3} (sqrt(10) = {expected:.3})"
    );
}

#[test]
fn single_point_grid_trains_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_fixture(dir.path());

    let out = run_ok(&[
        "train",
        "--data",
        ds.to_str().unwrap(),
        "--seed",
        "31",
        "--grid-lengthscale",
        "1.0",
        "--grid-signal-variance",
        "1.0",
        "--grid-noise-variance",
        "0.25",
    ]);
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "one evaluation plus the summary line");
    let step: TrainingStep = serde_json::from_str(lines[0]).unwrap();
    assert!(!step.accepted, "the initial incumbent is not a move");
    let summary: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(summary["steps"].as_u64(), Some(1));
}

#[test]
fn config_file_entries_yield_to_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_fixture(dir.path());

    let cfg = dir.path().join("est.cfg");
    fs::write(
        &cfg,
        "seed=13\nsamples-det=1500\nnoise-variance=0.25\n# comment\n",
    )
    .unwrap();

    let out = run_ok(&[
        "estimate",
        "logdet",
        "--data",
        ds.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--samples-det",
        "800",
    ]);
    let report: EstimateReport =
        serde_json::from_str(String::from_utf8(out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(report.seed, 13, "seed comes from the config file");
    assert_eq!(report.sample_count, 800, "flag overrides the file entry");
}
