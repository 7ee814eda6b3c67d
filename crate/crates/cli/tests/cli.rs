use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cart_core::dataset::{generate, write_csv_file};
use cart_core::GeneratorSpec;

fn cart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cart")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_data(path: &Path, n: usize, d: usize, seed: u64) {
    let ds = generate(&GeneratorSpec::sparse_quadratic(n, d, 2, seed)).unwrap();
    write_csv_file(&ds, path).unwrap();
}

#[test]
fn grow_prune_diagnose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    let tree = dir.path().join("tree.json");
    write_data(&data, 200, 4, 1);
    let data_s = data.to_str().unwrap();
    let tree_s = tree.to_str().unwrap();

    let out = cart(&["grow", "--data", data_s, "--depth", "4", "--out", tree_s]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let grown = cart_core::Tree::read_json(&tree).unwrap();
    assert!(grown.depth() <= 4 && grown.n_leaves() > 1);

    let out = cart(&["prune", "--tree", tree_s]);
    assert_eq!(code(&out), 0);
    let path = stdout(&out);
    assert!(path.starts_with("step,critical_alpha,n_leaves,training_error"));
    let last = path.lines().last().unwrap();
    assert_eq!(last.split(',').nth(2), Some("1"), "path ends at the root");

    let out = cart(&["prune", "--tree", tree_s, "--alpha", "1e9"]);
    assert_eq!(code(&out), 0);
    let root_only = cart_core::Tree::from_json(&stdout(&out)).unwrap();
    assert_eq!(root_only.n_leaves(), 1);

    let out = cart(&["diagnose", "--tree", tree_s, "--data", data_s]);
    assert_eq!(code(&out), 0);
    let report = stdout(&out);
    assert!(report.starts_with("node,depth,count,stump_rho,monotone_rho"));
    assert_eq!(report.lines().count(), 1 + (grown.len() - grown.n_leaves()) + 2);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "replications = 3\nno_such_key = 1\n").unwrap();
    let out = cart(&["experiment", "theorem1_montecarlo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    fs::write(&cfg, "alpha_scale = 0.5\n").unwrap();
    assert_eq!(code(&cart(&["experiment", "theorem1_montecarlo", "--config", cfg.to_str().unwrap()])), 2);

    // The real-data sweep cannot run without a file.
    assert_eq!(code(&cart(&["experiment", "fig1b_boston_sweep"])), 2);
    assert_eq!(code(&cart(&["grow", "--data", "/nonexistent.csv"])), 2);
}

#[test]
fn experiment_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: &str| {
        let out_dir = dir.path().join(sub);
        let out = cart(&[
            "--threads",
            threads,
            "experiment",
            "theorem1_montecarlo",
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).starts_with("PASS "));
        fs::read_to_string(out_dir.join("theorem1_replications.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "3");
    // Only the echoed output directory differs.
    let body = |t: &str| t.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&a), body(&b));
    let first = a.lines().next().unwrap();
    assert!(first.starts_with("# config: {"));
    assert!(first.contains("\"seed\":11"));
    assert!(first.ends_with(&format!("; version: cart-cli {}", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn real_data_sweep_on_a_small_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("housing.csv");
    let mut text = String::from("a,b,c,MEDV\n");
    for i in 0..150 {
        let (a, b, c) = ((i * 7 % 150) as f64, (i * 13 % 37) as f64, (i % 5) as f64);
        text.push_str(&format!("{a},{b},{c},{}\n", a * 0.1 + b * b * 0.01 + c));
    }
    fs::write(&data, text).unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, format!("boston_csv = {:?}\nd_range = [3, 10]\nreplications = 2\n", data.to_str().unwrap())).unwrap();
    let out_dir = dir.path().join("out");
    let out = cart(&["experiment", "fig1b_boston_sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("fig1b_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);

    // Fewer target dimensions than real columns is a configuration error.
    fs::write(&cfg, format!("boston_csv = {:?}\nd_range = [2]\n", data.to_str().unwrap())).unwrap();
    assert_eq!(code(&cart(&["experiment", "fig1b_boston_sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 2);
}

#[test]
fn population_reports_the_linear_midpoint() {
    let out = cart(&["population", "--model", "linear"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let split: f64 = row[3].parse().unwrap();
    let rho: f64 = row[6].parse().unwrap();
    assert!((split - 0.5).abs() < 1e-6);
    assert!((rho * rho - 0.75).abs() < 1e-9);
}

#[test]
fn smoke_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cart(&["verify", "--smoke", "--seed", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().count(), 12);
    assert!(dir.path().join("identity_suite.csv").exists());
}
