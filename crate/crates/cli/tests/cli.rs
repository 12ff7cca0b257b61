use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spcolor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spcolor")).current_dir(dir).args(args).output().unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn gen(dir: &Path, spec: &str, seed: &str, out: &str) {
    fs::write(dir.join("spec.json"), spec).unwrap();
    let o = spcolor(dir, &["gen", "--spec", "spec.json", "--seed", seed, "--output-dir", out, "--out", "gen.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn rank_check_holds_on_a_regular_graph() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), r#"{"kind": "regular", "n": 100, "d": 6}"#, "3", "g");
    let o = spcolor(dir.path(), &["rank-check", "--input", "g/graph.el", "--tau", "0.9", "--sigma", "0.5", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "r.json");
    assert_eq!(r["result"]["holds"], Value::Bool(true));
    assert_eq!(r["command"], "rank-check");
}

#[test]
fn reports_are_reproducible_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"kind": "sbm", "model": [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]], "n": 300, "d": 40}"#;
    gen(dir.path(), spec, "5", "s");
    let mut runs = Vec::new();
    for name in ["a.json", "b.json"] {
        let o = spcolor(dir.path(), &["color3", "--input", "s/graph.el", "--reference", "s/partition.part", "--seed", "9", "--out", name]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut r = report(dir.path(), name);
        r.as_object_mut().unwrap().remove("wall_time_secs");
        runs.push(r);
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0]["result"]["covered_fraction"].as_f64().unwrap() >= 0.9);
}

#[test]
fn recover_full_returns_a_proper_coloring() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), r#"{"kind": "regular", "n": 400, "d": 48}"#, "4", "h");
    let o = spcolor(dir.path(), &["recover-full", "--host", "h/graph.el", "--k", "3", "--seed", "4", "--out", "f.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "f.json");
    assert_eq!(r["agreement"].as_f64(), Some(1.0));
    assert!(r["result"]["partition"].is_object());
}

#[test]
fn plant_writes_a_loadable_directory() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), r#"{"kind": "regular", "n": 60, "d": 6}"#, "1", "h");
    let o = spcolor(dir.path(), &["plant", "--host", "h/graph.el", "--k", "3", "--seed", "2", "--output-dir", "p", "--out", "p.json"]);
    assert_eq!(o.status.code(), Some(0));
    let loaded = spectral_coloring::planting::load_planted(dir.path().join("p")).unwrap();
    let r = report(dir.path(), "p.json");
    assert_eq!(r["result"]["removed_edges"].as_u64().unwrap() as usize, loaded.host.num_edges() - loaded.graph.num_edges());
}

#[test]
fn config_file_supplies_options_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), r#"{"kind": "regular", "n": 50, "d": 4}"#, "0", "g");
    fs::write(dir.path().join("c.json"), r#"{"input": "g/graph.el", "tau": 0.3}"#).unwrap();
    let o = spcolor(dir.path(), &["spectrum", "--config", "c.json", "--tau", "0.7", "--out", "s.json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "s.json");
    assert_eq!(r["spectra"]["tau"].as_f64(), Some(0.7));
    assert_eq!(r["result"]["eigenvalues"].as_array().unwrap().len(), 50);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spcolor(dir.path(), &["spectrum", "--input", "missing.el"]).status.code(), Some(1));
    assert_eq!(spcolor(dir.path(), &["color"]).status.code(), Some(1));
    fs::write(dir.path().join("bad.el"), "0 0\n").unwrap();
    assert_eq!(spcolor(dir.path(), &["spectrum", "--input", "bad.el"]).status.code(), Some(1));
    fs::write(dir.path().join("c.json"), r#"{"bogus": 1}"#).unwrap();
    assert_eq!(spcolor(dir.path(), &["spectrum", "--config", "c.json"]).status.code(), Some(1));
    fs::write(dir.path().join("spec.json"), r#"{"kind": "regular", "n": 5, "d": 3}"#).unwrap();
    assert_eq!(spcolor(dir.path(), &["gen", "--spec", "spec.json"]).status.code(), Some(1));
}

#[test]
fn algorithmic_failures_exit_with_two() {
    // K6 has no eigenvalue below −0.45, so there is no bottom eigenspace to search.
    let dir = tempfile::tempdir().unwrap();
    let edges: String = (0..6).flat_map(|u| (u + 1..6).map(move |v| format!("{u} {v}\n"))).collect();
    fs::write(dir.path().join("k6.el"), edges).unwrap();
    let o = spcolor(dir.path(), &["indep-set", "--input", "k6.el", "--gamma", "0.05"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
