use drawdown_cli::manifest::RunManifest;
use drawdown_cli::{run, Io, EXIT_CHECK, EXIT_OK, EXIT_USAGE};
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ddfreq(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        args.iter().copied(),
        &mut Io {
            stdout: &mut out,
            stderr: &mut err,
            stdout_is_terminal: false,
        },
    );
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// A fresh directory under the system temp dir.
fn scratch_dir() -> PathBuf {
    static NEXT: AtomicUsize = AtomicUsize::new(0);
    let dir = std::env::temp_dir().join(format!(
        "ddfreq-test-{}-{}",
        std::process::id(),
        NEXT.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// The value in a single-cell CSV result.
fn scalar(out: &Outcome) -> f64 {
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let mut lines = out.stdout.lines();
    assert_eq!(lines.next(), Some("value"));
    lines.next().unwrap().parse().unwrap()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_examples() {
    let out = ddfreq(&[
        "eval", "lt-tau-n", "--mu", "0.1", "--sigma", "0.2", "--a", "0.1", "--lambda", "1", "--n", "2",
    ]);
    assert_eq!(scalar(&out), 0.582319);
    let out = ddfreq(&[
        "eval",
        "prob-tilde-finite",
        "--mu",
        "-0.1",
        "--sigma",
        "0.2",
        "--a",
        "0.1",
        "--n",
        "2",
    ]);
    assert!((scalar(&out) - (-0.5f64).exp()).abs() < 1e-6);
    let out = ddfreq(&["eval", "kappa", "--mu", "0", "--sigma", "0.2", "--a", "0.1"]);
    assert_eq!(scalar(&out), 10.0);
    let out = ddfreq(&[
        "--digits", "10", "eval", "kappa", "--mu", "0", "--sigma", "0.2", "--a", "0.1",
    ]);
    assert!(out.stdout.contains("10.0000000000"), "{}", out.stdout);
}

#[test]
fn eval_matches_the_library() {
    use drawdown_core::analytics::{lt_tau_n, prob_max_tail};
    use drawdown_core::model::laplace_coeffs;
    use drawdown_core::{DrawdownSpec, ModelParams};
    let params = ModelParams::new(0.1, 0.2).unwrap();
    let spec = DrawdownSpec::new(0.1).unwrap();
    let out = ddfreq(&[
        "--json", "eval", "lt-tau-n", "--mu", "0.1", "--sigma", "0.2", "--a", "0.1", "--lambda", "1", "--n", "3",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let want = lt_tau_n(&laplace_coeffs(&params, &spec, 1.0).unwrap(), 3).unwrap();
    assert_eq!(rows[0]["value"].as_f64().unwrap(), want);
    let out = ddfreq(&[
        "--json",
        "eval",
        "prob-max-tail",
        "--mu",
        "0.1",
        "--sigma",
        "0.2",
        "--a",
        "0.1",
        "--n",
        "2",
        "--x",
        "0.3",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(
        rows[0]["value"].as_f64().unwrap(),
        prob_max_tail(&params, &spec, 2, 0.3).unwrap()
    );
}

#[test]
fn usage_errors() {
    let out = ddfreq(&["eval", "no-such-formula", "--mu", "0", "--sigma", "0.2", "--a", "0.1"]);
    assert_eq!(out.code, EXIT_USAGE);
    let out = ddfreq(&["eval", "kappa", "--mu", "0", "--sigma", "-1", "--a", "0.1"]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("sigma"), "{}", out.stderr);
    let out = ddfreq(&[
        "eval", "lt-tau-n", "--mu", "0", "--sigma", "0.2", "--a", "0.1", "--n", "2",
    ]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("lambda"), "{}", out.stderr);
    let out = ddfreq(&["tables", "9.9"]);
    assert_eq!(out.code, EXIT_USAGE);
    assert_eq!(ddfreq(&["--help"]).code, EXIT_OK);
}

#[test]
fn table_checks_pass() {
    for (which, rows) in [("4.1", 36), ("4.2", 36), ("5.1", 24)] {
        let out = ddfreq(&["tables", which, "--check"]);
        assert_eq!(out.code, EXIT_OK, "{which}: {}", out.stderr);
        let mut reader = csv::Reader::from_reader(out.stdout.as_bytes());
        let headers = reader.headers().unwrap().clone();
        let ok = headers.iter().position(|h| h == "ok").unwrap();
        let records: Vec<_> = reader.records().map(Result::unwrap).collect();
        assert_eq!(records.len(), rows, "{which}");
        assert!(records.iter().all(|r| &r[ok] == "true"));
    }
}

#[test]
fn price_example() {
    let out = ddfreq(&[
        "--digits",
        "4",
        "price",
        "--type",
        "1",
        "--recovery",
        "false",
        "--alpha",
        "0.15",
        "--r",
        "0.05",
        "--sigma",
        "0.1",
        "--T",
        "1",
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let mut reader = csv::Reader::from_reader(out.stdout.as_bytes());
    let col = reader.headers().unwrap().iter().position(|h| h == "price").unwrap();
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[col], "0.1102");
}

#[test]
fn price_from_contract_file() {
    let dir = scratch_dir();
    let contract = dir.join("contract.json");
    fs::write(
        &contract,
        r#"{"alpha": 0.15, "r": 0.05, "maturity": 2.0, "payoff_type": "per_event", "recovery": "with_recovery"}"#,
    )
    .unwrap();
    let out = ddfreq(&["--json", "price", "--contract", path_str(&contract), "--sigma", "0.2"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let rows: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let v = rows[0]["price"].as_f64().unwrap();
    // Published value for type 2 with recovery at sigma = 0.2, T = 2.
    assert!((v - 1.2550).abs() < 5e-4, "{v}");
}

#[test]
fn empirical_log_series() {
    let dir = scratch_dir();
    let input = dir.join("prices.csv");
    fs::write(&input, "time,price\n0,1\n1,0.8\n2,1.1\n3,0.9\n4,0.95\n").unwrap();
    let out = ddfreq(&["empirical", "--input", path_str(&input), "--alpha", "0.15", "--log"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "path,kind,index,time,running_max,value");
    assert_eq!(lines.len(), 5, "{}", out.stdout);
    assert!(lines[1].starts_with("0,without_recovery,1,1"));

    fs::write(&input, "time,price\n0,1\n1,oops\n").unwrap();
    let out = ddfreq(&["empirical", "--input", path_str(&input), "--alpha", "0.15", "--log"]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("line 3"), "{}", out.stderr);

    let out = ddfreq(&["empirical", "--input", path_str(&dir.join("missing.csv")), "--a", "0.1"]);
    assert_eq!(out.code, EXIT_USAGE);
    let out = ddfreq(&["empirical", "--input", path_str(&input), "--alpha", "0.15"]);
    assert_eq!(out.code, EXIT_USAGE, "alpha without --log");
}

#[test]
fn manifest_replay_reproduces_simulation() {
    let dir = scratch_dir();
    let output = dir.join("sim.csv");
    let episodes = dir.join("episodes.json");
    let out = ddfreq(&[
        "--output",
        path_str(&output),
        "simulate",
        "--mu",
        "0.1",
        "--sigma",
        "0.2",
        "--a",
        "0.1",
        "--dt",
        "1e-3",
        "--paths",
        "300",
        "--seed",
        "7",
        "--strides",
        "1,4",
        "--extrapolate",
        "--compare-analytic",
        "--episodes",
        path_str(&episodes),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let manifest_path = dir.join("sim.csv.manifest.json");
    let manifest: RunManifest = serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, Some(7));
    assert_eq!(manifest.outputs.len(), 2);
    let table = fs::read_to_string(&output).unwrap();
    assert!(table.contains("cdf-extrapolated"));
    let before = fs::read(&episodes).unwrap();

    let out = ddfreq(&["replay", path_str(&manifest_path)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert_eq!(fs::read(&episodes).unwrap(), before);

    // Corrupt a recorded checksum: replay must report the mismatch.
    let mut tampered = manifest.clone();
    tampered.outputs[0].sha256 = "0".repeat(64);
    let tampered_path = dir.join("tampered.json");
    fs::write(&tampered_path, serde_json::to_vec(&tampered).unwrap()).unwrap();
    let out = ddfreq(&["replay", path_str(&tampered_path)]);
    assert_eq!(out.code, EXIT_CHECK);
}

#[test]
fn manifest_on_stderr_without_output_file() {
    let out = ddfreq(&["eval", "kappa", "--mu", "0.1", "--sigma", "0.2", "--a", "0.1"]);
    assert_eq!(out.code, EXIT_OK);
    let manifest: RunManifest = serde_json::from_str(out.stderr.trim()).unwrap();
    assert_eq!(manifest.command, "eval");
    assert_eq!(manifest.outputs[0].bytes, out.stdout.len());
    assert_eq!(
        manifest.outputs[0].sha256,
        drawdown_cli::manifest::sha256_hex(out.stdout.as_bytes())
    );
}

#[test]
fn extrapolate_needs_two_strides() {
    let out = ddfreq(&[
        "simulate",
        "--mu",
        "0.1",
        "--sigma",
        "0.2",
        "--a",
        "0.1",
        "--paths",
        "10",
        "--extrapolate",
    ]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("--strides"), "{}", out.stderr);
}

#[test]
fn json_and_table_formats() {
    let args = [
        "eval",
        "prob-max-tail",
        "--mu",
        "0.1",
        "--sigma",
        "0.2",
        "--a",
        "0.1",
        "--n",
        "2",
        "--x",
        "0.3",
    ];
    let json = ddfreq(&[&["--json"][..], &args[..]].concat());
    let rows: serde_json::Value = serde_json::from_str(&json.stdout).unwrap_or_else(|e| panic!("{e}: {}", json.stdout));
    assert!(rows.is_array());
    let table = ddfreq(&[&["--format", "table"][..], &args[..]].concat());
    assert_eq!(table.code, EXIT_OK);
    assert!(!table.stdout.contains(','));
}
