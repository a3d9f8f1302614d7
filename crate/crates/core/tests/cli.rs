//! End-to-end tests of the psample binary: pipeline determinism, sample
//! extension non-overlap, truth equivalence of exhaustive estimates, and
//! error surfacing.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn psample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psample"))
        .args(args)
        .output()
        .expect("spawn psample")
}

fn run_ok(args: &[&str]) -> String {
    let out = psample(args);
    assert!(
        out.status.success(),
        "psample {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let out = psample(args);
    assert!(!out.status.success(), "psample {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// synth -> build -> sample -> estimate -> eval, returning every produced
/// file's bytes keyed by name.
fn run_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let nodes = p(dir, "nodes.csv");
    let links = p(dir, "links.csv");
    let master = p(dir, "master.csv");
    let sample = p(dir, "sample.json");
    let grown = p(dir, "grown.json");
    let est = p(dir, "est.json");
    let table = p(dir, "table.txt");
    run_ok(&[
        "synth", "--nodes", "400", "--links", "300", "--seed", "11", "--out", &nodes,
        "--out-links", &links,
    ]);
    run_ok(&[
        "build", "--input", &nodes, "--weight", "feature:fo", "--seed", "5", "--out", &master,
    ]);
    run_ok(&[
        "sample", "--master", &master, "--input", &nodes, "--predicate", "fo>=2", "--k", "40",
        "--out", &sample,
    ]);
    run_ok(&[
        "extend", "--master", &master, "--input", &nodes, "--sample", &sample, "--j", "20",
        "--out", &grown,
    ]);
    run_ok(&[
        "estimate", "--sample", &grown, "--mass", "ac", "--by", "fo", "--out", &est,
    ]);
    run_ok(&[
        "eval", "--input", &nodes, "--runs", "2", "--k", "50", "--seed", "3", "--format", "rows",
        "--out", &table,
    ]);
    let mut files: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|name| {
            let bytes = fs::read(dir.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let outs_a = run_pipeline(a.path());
    let outs_b = run_pipeline(b.path());
    assert_eq!(outs_a.len(), outs_b.len());
    assert_eq!(outs_a.len(), 8); // 7 outputs + master sidecar
    for ((name_a, bytes_a), (name_b, bytes_b)) in outs_a.iter().zip(&outs_b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between reruns");
    }
}

#[test]
fn inputs_are_never_mutated() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    run_ok(&["synth", "--nodes", "50", "--seed", "2", "--out", &nodes]);
    let before = fs::read(&nodes).unwrap();
    let master = p(dir.path(), "m.csv");
    let sample = p(dir.path(), "s.json");
    run_ok(&["build", "--input", &nodes, "--weight", "uniform", "--seed", "1", "--out", &master]);
    run_ok(&["sample", "--master", &master, "--input", &nodes, "--k", "10", "--out", &sample]);
    run_ok(&["eval", "--input", &nodes, "--runs", "1", "--k", "10", "--seed", "1"]);
    assert_eq!(fs::read(&nodes).unwrap(), before);
}

#[test]
fn extend_produces_disjoint_increment() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    let master = p(dir.path(), "m.csv");
    let sample = p(dir.path(), "s.json");
    let grown = p(dir.path(), "g.json");
    run_ok(&["synth", "--nodes", "1000", "--seed", "21", "--out", &nodes]);
    run_ok(&["build", "--input", &nodes, "--weight", "feature:ac", "--seed", "9", "--out", &master]);
    run_ok(&[
        "sample", "--master", &master, "--input", &nodes, "--predicate", "fr>=2", "--k", "100",
        "--out", &sample,
    ]);
    run_ok(&[
        "extend", "--master", &master, "--input", &nodes, "--sample", &sample, "--j", "50",
        "--out", &grown,
    ]);
    let ids = |path: &str| -> Vec<String> {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["id"].as_str().unwrap().to_string())
            .collect()
    };
    let first = ids(&sample);
    let combined = ids(&grown);
    assert_eq!(first.len(), 100);
    assert_eq!(combined.len(), 150);
    // Prefix property: the grown sample starts with the original one.
    assert_eq!(&combined[..100], &first[..]);
    let unique: HashSet<&String> = combined.iter().collect();
    assert_eq!(unique.len(), combined.len(), "duplicate ids after extend");
}

#[test]
fn exhaustive_estimate_matches_truth_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    let master = p(dir.path(), "m.csv");
    let sample = p(dir.path(), "s.json");
    let est = p(dir.path(), "est.json");
    let truth = p(dir.path(), "truth.json");
    run_ok(&["synth", "--nodes", "500", "--seed", "33", "--out", &nodes]);
    run_ok(&["build", "--input", &nodes, "--weight", "uniform", "--seed", "4", "--out", &master]);
    // k equals the population size, so the playout is exhaustive and exact.
    run_ok(&["sample", "--master", &master, "--input", &nodes, "--k", "500", "--out", &sample]);
    run_ok(&["estimate", "--sample", &sample, "--mass", "ac", "--by", "fo", "--out", &est]);
    run_ok(&["true-mass", "--input", &nodes, "--mass", "ac", "--by", "fo", "--out", &truth]);
    assert_eq!(fs::read(&est).unwrap(), fs::read(&truth).unwrap());

    let est_cdf = run_ok(&["estimate", "--sample", &sample, "--cdf", "fr", "--format", "rows"]);
    let true_cdf = run_ok(&["true-cdf", "--input", &nodes, "--cdf", "fr", "--format", "rows"]);
    assert_eq!(est_cdf, true_cdf);

    // Exhaustive qq output is the diagonal.
    let qq = run_ok(&["qq", "--sample", &sample, "--input", &nodes, "--mass", "ac", "--by", "fo"]);
    for line in qq.lines() {
        let (t, e) = line.split_once(' ').unwrap();
        assert_eq!(t, e);
    }
}

#[test]
fn duplicate_id_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    fs::write(&nodes, "id,fo,fr,ac\nx1,1,2,3\nx2,2,2,2\nx1,5,5,5\n").unwrap();
    let stderr = run_err(&[
        "build", "--input", &nodes, "--weight", "uniform", "--seed", "1", "--out",
        &p(dir.path(), "m.csv"),
    ]);
    assert_eq!(stderr.lines().count(), 1, "single-line error: {stderr}");
    assert!(stderr.contains("x1"), "error names the id: {stderr}");
}

#[test]
fn kmax_caps_master_and_sidecar_records_it() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    let master = p(dir.path(), "m.csv");
    fs::write(&nodes, "id,fo,fr,ac\na,1,2,3\nb,2,2,2\nc,5,5,5\n").unwrap();
    run_ok(&[
        "build", "--input", &nodes, "--weight", "uniform", "--seed", "1", "--kmax", "2", "--out",
        &master,
    ]);
    let data = fs::read_to_string(&master).unwrap();
    assert_eq!(data.lines().count(), 3); // header + 2 entries
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{master}.meta.json")).unwrap()).unwrap();
    assert_eq!(sidecar["capped"], serde_json::Value::Bool(true));
    assert_eq!(sidecar["population_size"], serde_json::json!(3));
}

#[test]
fn eval_text_format_is_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    run_ok(&["synth", "--nodes", "120", "--seed", "8", "--out", &nodes]);
    let text = run_ok(&[
        "eval", "--input", &nodes, "--runs", "2", "--k", "30", "--seed", "1",
    ]);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    for col in ["weighting", "target", "by", "median_ks", "runs"] {
        assert!(header.contains(col), "missing column {col}: {header}");
    }
    // 4 weightings x (3 cdf + 3 mass) cells on the node grid.
    assert_eq!(lines.count(), 24);
    for weighting in ["uniform", "feature:fo", "feature:fr", "feature:ac"] {
        assert!(text.contains(weighting));
    }

    let rows = run_ok(&[
        "eval", "--input", &nodes, "--runs", "2", "--k", "30", "--seed", "1", "--format", "rows",
        "--weight", "uniform", "--weight", "feature:fo", "--cdf", "fo",
    ]);
    let mut it = rows.lines();
    assert_eq!(it.next().unwrap(), "weighting,target,by,median_ks,runs");
    let body: Vec<&str> = it.collect();
    assert_eq!(body.len(), 2);
    for line in body {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let ks: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&ks));
        assert_eq!(fields[4], "2");
    }
}

#[test]
fn predicate_and_weight_parse_errors_are_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = p(dir.path(), "nodes.csv");
    let master = p(dir.path(), "m.csv");
    fs::write(&nodes, "id,fo,fr,ac\na,1,2,3\n").unwrap();
    let e = run_err(&[
        "build", "--input", &nodes, "--weight", "feature", "--seed", "1", "--out", &master,
    ]);
    assert!(!e.is_empty());
    run_ok(&["build", "--input", &nodes, "--weight", "uniform", "--seed", "1", "--out", &master]);
    let e = run_err(&[
        "sample", "--master", &master, "--input", &nodes, "--predicate", "fo >> 3", "--k", "1",
        "--out", &p(dir.path(), "s.json"),
    ]);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.starts_with("error: "));
}
