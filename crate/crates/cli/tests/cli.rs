use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_speclocal"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn small_graph(dir: &Path) {
    ok(dir, &["weights", "--kind", "powerlaw", "--n", "400", "--alpha", "2.5", "--out", "w.txt"]);
    ok(dir, &["sample", "--weights", "w.txt", "--seed", "3", "--out", "g.txt"]);
}

#[test]
fn pipeline_from_weights_to_basis() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    let w = read(d, "w.txt");
    assert_eq!(w.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count(), 400);

    ok(d, &["prune", "--graph", "g.txt", "--weights", "w.txt", "--xi", "6", "--out-forest", "f.txt", "--out-ledger", "l.csv"]);
    assert!(read(d, "l.csv").lines().next().unwrap().contains("degree_before"));

    ok(d, &["basis", "--forest", "f.txt", "--weights", "w.txt", "--xi", "6", "--ledger", "l.csv", "--out", "b.json"]);
    let from_ledger: serde_json::Value = serde_json::from_str(&read(d, "b.json")).unwrap();
    ok(d, &["basis", "--forest", "f.txt", "--weights", "w.txt", "--xi", "6", "--graph", "g.txt", "--out", "b2.json"]);
    let from_graph: serde_json::Value = serde_json::from_str(&read(d, "b2.json")).unwrap();
    assert_eq!(from_ledger, from_graph);
    assert!(!from_ledger["members"].as_array().unwrap().is_empty());
}

#[test]
fn spectrum_and_semiloc_csv_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    ok(d, &["spectrum", "--graph", "g.txt", "--k", "4", "--out", "sp.csv"]);
    let sp = read(d, "sp.csv");
    let mut lines = sp.lines();
    assert_eq!(lines.next().unwrap(), "n,seed,version,method,side,index,lambda,sqrt_degree,residual");
    assert_eq!(lines.count(), 8);

    ok(d, &["semiloc", "--graph", "g.txt", "--weights", "w.txt", "--xi", "6", "--k", "3", "--out", "sl.csv"]);
    let sl = read(d, "sl.csv");
    assert!(sl.starts_with("n,seed,version,status,side,eig_index,lambda,eta,resonant_size,mass"));

    let rep = ok(d, &["report", "--csv", "sl.csv", "--columns", "mass"]);
    let v: serde_json::Value = serde_json::from_slice(&rep.stdout).unwrap();
    assert_eq!(v[0]["column"], "mass");
    assert_eq!(v[0]["n"], 400);
}

#[test]
fn checks_and_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    ok(d, &["coupling-check", "--graph", "g.txt", "--weights", "w.txt", "--x", "7", "--reps", "3", "--out", "c.json"]);
    let c: serde_json::Value = serde_json::from_str(&read(d, "c.json")).unwrap();
    assert_eq!(c["failed"], 0);
    assert_eq!(c["passed"], 3);

    ok(d, &["diagnostics", "--graph", "g.txt", "--weights", "w.txt", "--xi", "6", "--out", "d.csv"]);
    assert!(read(d, "d.csv").starts_with("stat_name,vertex,value,bound,exceeded"));

    let out = ok(d, &["wsize", "--weights", "w.txt", "--lambda", "4", "--eta", "1", "--family", "powerlaw", "--alpha", "2.5"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let leading = v["leading"].as_f64().unwrap();
    assert!((leading - 400.0 / 4f64.powi(8)).abs() < 1e-12);
}

#[test]
fn out_dir_resolves_relative_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["--out-dir", "res", "weights", "--kind", "exp", "--n", "50", "--alpha", "1", "--out", "w.txt"]);
    assert!(d.join("res/w.txt").exists());
}

#[test]
fn experiment_output_independent_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{"weights": {"kind": "power_law", "alpha": 2.5}, "n_grid": [256, 512], "seeds": [1, 2, 3], "scaling_block_norms": false}"#,
    )
    .unwrap();
    ok(d, &["--config", "cfg.json", "--threads", "1", "--out-dir", "a", "scaling"]);
    ok(d, &["--config", "cfg.json", "--out-dir", "b", "scaling"]);
    assert_eq!(read(d, "a/scaling.csv"), read(d, "b/scaling.csv"));
    assert_eq!(read(d, "a/scaling.csv").lines().count(), 7);
    let s: serde_json::Value = serde_json::from_str(&read(d, "a/scaling_summary.json")).unwrap();
    assert_eq!(s["experiment"], "scaling");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
    assert_eq!(run(d, &["--version"]).status.code(), Some(0));
    assert_eq!(run(d, &["nonsense"]).status.code(), Some(1));
    assert_eq!(run(d, &["weights", "--kind", "exp", "--n", "10"]).status.code(), Some(1));
    assert_eq!(run(d, &["scaling"]).status.code(), Some(1));
    assert_eq!(run(d, &["spectrum", "--graph", "missing.txt", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(
        run(d, &["weights", "--kind", "powerlaw", "--n", "10", "--alpha", "1.5", "--out", "w.txt"]).status.code(),
        Some(2)
    );
    std::fs::write(
        d.join("cfg.json"),
        r#"{"weights": {"kind": "exponential", "alpha": 1}, "n_grid": [100], "seeds": [0]}"#,
    )
    .unwrap();
    assert_eq!(run(d, &["--config", "cfg.json", "localize"]).status.code(), Some(1));
}
