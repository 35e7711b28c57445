use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcarleson"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn kernel_check_passes_and_stamps_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["kernel-check", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path().join("o/kernel.csv"));
    assert!(csv.starts_with("# qcarleson "));
    let json: serde_json::Value = serde_json::from_str(&read(d.path().join("o/kernel-check.json"))).unwrap();
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    assert!(json["version"].is_string());
    assert!(json["payload"]["max_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn flags_change_the_hash() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["kernel-check", "--out", "a"]);
    run(d.path(), &["kernel-check", "--out", "b", "--seed", "7"]);
    let h = |p: &str| read(d.path().join(p)).lines().next().unwrap().to_string();
    assert_ne!(h("a/kernel.csv"), h("b/kernel.csv"));
}

#[test]
fn zero_top_scale_warns() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), r#"{"telescoping_k_max": 0}"#).unwrap();
    let o = run(d.path(), &["--config", "c.json", "kernel-check", "--out", "o"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn malformed_config_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), "{ not json").unwrap();
    assert_eq!(run(d.path(), &["--config", "c.json", "kernel-check"]).status.code(), Some(2));
    std::fs::write(d.path().join("u.json"), r#"{"unknown_field": 1}"#).unwrap();
    assert_eq!(run(d.path(), &["--config", "u.json", "kernel-check"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn unknown_suite_lists_the_available_ones() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["verify", "--suite", "nope", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for s in ["kernel", "tree", "weak-l2", "all"] {
        assert!(err.contains(s), "{err}");
    }
}

#[test]
fn planted_field_gives_one_tree() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["decompose", "--kind", "planted", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("o/decomposition.json"))).unwrap();
    let trees: usize = v["payload"]["strata"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["buckets"].as_array().unwrap())
        .map(|b| b["forest"]["trees"].as_array().unwrap().len())
        .sum();
    assert_eq!(trees, 1);
    assert!(read(d.path().join("o/decomposition.svg")).starts_with("<!-- qcarleson "));
}

#[test]
fn empty_field_gives_empty_strata() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["decompose", "--kind", "empty", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("o/decomposition.json"))).unwrap();
    assert!(v["payload"]["strata"].as_array().unwrap().is_empty());
}

#[test]
fn decomposition_reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["decompose", "--seed", "3", "--out", "a"]);
    run(d.path(), &["decompose", "--seed", "3", "--out", "b"]);
    assert_eq!(read(d.path().join("a/decomposition.json")), read(d.path().join("b/decomposition.json")));
    assert_eq!(read(d.path().join("a/decomposition.svg")), read(d.path().join("b/decomposition.svg")));
}

#[test]
fn field_file_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let field = qcarleson_core::LineField::constant(128, qcarleson_core::Line::new(3.0, 0.5));
    std::fs::write(d.path().join("f.json"), serde_json::to_string(&field).unwrap()).unwrap();
    let o = run(d.path(), &["mass", "--field", "f.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path().join("o/mass.csv"));
    assert!(csv.lines().nth(1).unwrap().starts_with("scale,"));
    std::fs::write(d.path().join("bad.json"), r#"{"generator":"explicit","resolution":4,"cells":[]}"#).unwrap();
    assert_eq!(run(d.path(), &["mass", "--field", "bad.json"]).status.code(), Some(2));
}

#[test]
fn evaluate_writes_one_row_per_sample() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["evaluate", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    // Header comment, column names, 512 samples.
    assert_eq!(read(d.path().join("o/evaluate.csv")).lines().count(), 2 + 512);
}

#[test]
fn render_handles_reports_and_empty_lists() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("none.json"), "[]").unwrap();
    assert_eq!(run(d.path(), &["render", "none.json", "--out", "o"]).status.code(), Some(0));
    let svg = read(d.path().join("o/none.svg"));
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>") && !svg.contains("<polygon"));
    std::fs::write(d.path().join("h.json"), r#"[{"scale":1,"t":0,"a":0,"w":0},{"scale":1,"t":1,"a":0,"w":0}]"#).unwrap();
    run(d.path(), &["render", "h.json", "--out", "o"]);
    assert_eq!(read(d.path().join("o/h.svg")).matches("<polygon").count(), 2);
    run(d.path(), &["decompose", "--kind", "planted", "--out", "p"]);
    let o = run(d.path(), &["render", "p/decomposition.json", "--out", "r"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(read(d.path().join("r/decomposition.svg")).contains("<polygon"));
}

#[test]
fn verify_writes_reports_and_weak_type_csvs() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["verify", "--suite", "kernel", "--out", "k"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("k/kernel-telescoping.json"))).unwrap();
    assert_eq!(v["payload"]["passed"], true);
    assert!(read(d.path().join("k/summary.txt")).starts_with("# qcarleson "));
    let o = run(d.path(), &["verify", "--suite", "weak-l2", "--out", "w"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csvs: Vec<_> = std::fs::read_dir(d.path().join("w"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("weak-l2-"))
        .collect();
    assert!(csvs.len() >= 5);
}
