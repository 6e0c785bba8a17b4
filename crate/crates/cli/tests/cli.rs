use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tdshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn result_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["manifest"]["config_digest"].is_string());
    v["result"].clone()
}

#[test]
fn energy_of_identical_files_is_zero() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.csv", "label,count\nx,3\ny,1\n");
    let b = write(d.path(), "b.csv", "x\ny\nx\nx\n");
    let r = result_of(&tdshift(&["--seed", "1", "energy", s(&a), s(&b)]));
    assert_eq!(r["value"], 0.0);
}

#[test]
fn energy_of_disjoint_point_masses_is_two() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.csv", "x\n");
    let b = write(d.path(), "b.csv", "y\n");
    let r = result_of(&tdshift(&["--seed", "1", "energy", s(&a), s(&b)]));
    assert_eq!(r["value"], 2.0);
}

#[test]
fn energy_of_pmf_fixture() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.json", r#"{"mass": {"x": 0.5, "y": 0.5}}"#);
    let b = write(d.path(), "b.json", r#"{"mass": {"x": 1.0, "y": 0.0}}"#);
    let r = result_of(&tdshift(&["--seed", "1", "energy", s(&a), s(&b)]));
    assert_eq!(r["value"], 0.5);
    assert_eq!(r["mode"], "exact-pmf");
}

#[test]
fn energy_with_label_map_merging_everything_is_zero() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.csv", "x\n");
    let b = write(d.path(), "b.csv", "y\n");
    let c = write(d.path(), "c.json", r#"{"x": "x", "y": "x"}"#);
    let r = result_of(&tdshift(&["--seed", "1", "energy", s(&a), s(&b), "--coarsening", s(&c)]));
    assert_eq!(r["value"], 0.0);
}

#[test]
fn energy_with_fitted_coarsening() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.csv", "p\nq\n");
    let b = write(d.path(), "b.csv", "r\ns\n");
    let e = write(d.path(), "e.csv", "id,x\np,0\nq,0.1\nr,10\ns,10.1\n");
    let r = result_of(&tdshift(&[
        "--seed", "3", "energy", s(&a), s(&b), "--embeddings", s(&e), "--k", "2",
    ]));
    assert_eq!(r["value"], 2.0);
}

#[test]
fn malformed_input_names_file_and_line() {
    let d = TempDir::new().unwrap();
    let a = write(d.path(), "a.csv", "x,1\ny,lots\n");
    let b = write(d.path(), "b.csv", "x\n");
    let out = tdshift(&["--seed", "1", "energy", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{}:2:", s(&a))), "{err}");
}

#[test]
fn missing_seed_is_an_input_error() {
    let out = tdshift(&["verify", "--smoke"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn unknown_flags_are_input_errors() {
    assert_eq!(tdshift(&["--seed", "1", "energy", "--nope"]).status.code(), Some(2));
}

fn paired_line(h: &str, g: &str) -> String {
    format!(
        r#"{{"context_id":"c","human":{{"id":"{h}","context_id":"c","turns":[{{"q":"is it red","a":"yes"}}]}},"generated":{{"id":"{g}","context_id":"c","turns":[{{"q":"is it red","a":"yes"}}]}},"u":"u"}}"#
    )
}

fn score_setup(d: &Path, scores: &str) -> (PathBuf, PathBuf) {
    write(d, "s.csv", scores);
    let tests = write(d, "tests.json", r#"[{"kind": "score_table", "name": "s", "path": "s.csv"}]"#);
    let paired = write(d, "p.jsonl", &format!("{}\n{}\n", paired_line("h1", "g1"), paired_line("h2", "g2")));
    (tests, paired)
}

#[test]
fn testdiv_fixtures() {
    let d = TempDir::new().unwrap();
    let (tests, paired) = score_setup(d.path(), "h1,u,1\nh2,u,1\ng1,u,0\ng2,u,0\n");
    let r = result_of(&tdshift(&["--seed", "1", "testdiv", s(&paired), "--tests", s(&tests)]));
    assert_eq!(r["per_test"]["s"], 1.0);

    let (tests, paired) = score_setup(d.path(), "h1,u,0.8\nh2,u,0.4\ng1,u,0.5\ng2,u,0.9\n");
    let r = result_of(&tdshift(&["--seed", "1", "testdiv", s(&paired), "--tests", s(&tests)]));
    assert!((r["per_test"]["s"].as_f64().unwrap() - 0.4).abs() < 1e-15);
}

#[test]
fn testdiv_of_identical_corpus_is_zero() {
    let d = TempDir::new().unwrap();
    let paired = write(d.path(), "p.jsonl", &format!("{}\n", paired_line("h1", "h1")));
    let r = result_of(&tdshift(&["--seed", "1", "testdiv", s(&paired)]));
    assert_eq!(r["total"], 0.0);
    assert_eq!(r["n_pairs"], 1);
}

#[test]
fn testdiv_schema_violation_exits_two() {
    let d = TempDir::new().unwrap();
    let paired = write(d.path(), "p.jsonl", &format!("{}\n{{\"oops\": 1}}\n", paired_line("h1", "h1")));
    let out = tdshift(&["--seed", "1", "testdiv", s(&paired)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("{}:2:", s(&paired))));
}

const JOINT: &str = r#"{"contexts":{"c":1.0},
    "human":{"c":{"a":0.5,"b":0.5}},
    "gen1":{"c":{"a":0.75,"b":0.25}},
    "gen2":{"c":{"a":0.25,"b":0.75}},
    "noise":{"u":1.0}}"#;

#[test]
fn bound_with_score_table_holds() {
    let d = TempDir::new().unwrap();
    let j = write(d.path(), "j.json", JOINT);
    let sc = write(d.path(), "h.csv", "dialogue_id,u_id,score\na,u,0.9\nb,u,0.5\n");
    let c = write(d.path(), "c.json", r#"{"a": "a", "b": "a"}"#);
    let r = result_of(&tdshift(&[
        "--seed", "1", "bound", s(&j), "--scores", s(&sc), "--coarsening", s(&c),
    ]));
    assert_eq!(r["holds"], true);
    assert!((r["gamma"].as_f64().unwrap() - 0.4).abs() < 1e-15);
    assert!((r["rhs"].as_f64().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn bound_with_builtin_test_on_dialogues() {
    let d = TempDir::new().unwrap();
    let j = write(d.path(), "j.json", JOINT);
    let tests = write(d.path(), "t.json", r#"[{"kind": "repetition"}]"#);
    let dl = write(
        d.path(),
        "d.jsonl",
        concat!(
            r#"{"id":"a","context_id":"c","turns":[{"q":"is it red","a":"no"},{"q":"is it red","a":"no"}]}"#,
            "\n",
            r#"{"id":"b","context_id":"c","turns":[{"q":"is it red","a":"no"},{"q":"is it a car","a":"no"}]}"#,
            "\n"
        ),
    );
    let r = result_of(&tdshift(&[
        "--seed", "1", "bound", s(&j), "--tests", s(&tests), "--dialogues", s(&dl),
    ]));
    assert_eq!(r["holds"], true);
    // Identity coarsening: ε is the energy between the two generated marginals.
    assert!((r["epsilon"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn verify_smoke_passes() {
    let r = result_of(&tdshift(&["--seed", "7", "verify", "--smoke"]));
    assert_eq!(r["all_passed"], true);
}

#[test]
fn verify_passes_across_seeds() {
    for seed in ["1", "2"] {
        let r = result_of(&tdshift(&["--seed", seed, "verify", "--trials", "20"]));
        assert_eq!(r["all_passed"], true, "seed {seed}");
    }
}

#[test]
fn coarsen_fit_then_apply() {
    let d = TempDir::new().unwrap();
    let e = write(d.path(), "e.csv", "id,x,y\np,0,0\nq,0,1\nr,9,9\ns,9,10\n");
    let fitted = d.path().join("c.json");
    let out = tdshift(&["--seed", "5", "--out", s(&fitted), "coarsen", "fit", s(&e), "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&fitted).unwrap()).unwrap();
    let c = write(d.path(), "fn.json", &report["result"].to_string());
    let new = write(d.path(), "new.jsonl", "{\"id\":\"t\",\"vector\":[10,10]}\n{\"id\":\"u\",\"vector\":[0,0.5]}\n");
    let r = result_of(&tdshift(&["--seed", "5", "coarsen", "apply", s(&c), s(&new)]));
    let a = &report["result"]["assignment"];
    assert_eq!(r["t"], a["r"]);
    assert_eq!(r["u"], a["p"]);
    assert_ne!(a["p"], a["r"]);
}

#[test]
fn reports_are_reproducible_modulo_timestamps() {
    let d = TempDir::new().unwrap();
    let e = write(d.path(), "e.csv", "id,x\np,0\nq,0.2\nr,5\ns,5.5\nt,9\n");
    let run = || result_of(&tdshift(&["--seed", "11", "coarsen", "fit", s(&e), "--k", "3"]));
    assert_eq!(run().to_string(), run().to_string());
}

fn tiny_scenario(dir: &Path, magnitudes: &str) -> PathBuf {
    write(
        dir,
        "scenario.json",
        &format!(
            r#"{{"game": {{"n_contexts": 2, "n_objects_per_context": 4, "m": 4, "seed": 0, "human_noise": 0.1}},
                "settings": {{"corpus_size": 200, "eval_rollouts": 200, "task_rollouts": 100, "candidates": 4, "clusters": 5}},
                "sweep": {{"magnitudes": {magnitudes}, "seeds": [1, 2, 3]}},
                "compare": {{"epochs": 1, "step": 0.1, "seeds": [1, 2]}}}}"#
        ),
    )
}

#[test]
fn simulate_writes_one_row_per_cell() {
    let d = TempDir::new().unwrap();
    let sc = tiny_scenario(d.path(), "[0, 0.05, 0.1, 0.2, 0.3]");
    let out_dir = d.path().join("out");
    let out = tdshift(&["--seed", "2", "--config", s(&sc), "--out", s(&out_dir), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("magnitude,seed,epsilon,dtd_"));
    assert!(header.ends_with(",total_abs_dtd,moves"));
    assert_eq!(lines.count(), 15);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["result"]["sweep"]["cells"], 15);
    assert_eq!(summary["result"]["scenario"]["game"]["seed"], 2);
    assert_eq!(summary["result"]["compare"]["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_magnitude_scenario_gives_zero_columns() {
    let d = TempDir::new().unwrap();
    let sc = tiny_scenario(d.path(), "[0, 0, 0, 0, 0]");
    let out_dir = d.path().join("out");
    let out = tdshift(&[
        "--seed", "0", "--config", s(&sc), "--out", s(&out_dir), "simulate", "--sweep-only",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let n = cols.len();
        for v in &cols[2..n - 1] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
        assert_eq!(cols[n - 1], "0");
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["result"]["compare"].is_null());
    assert!(summary["result"]["sweep"]["pearson"].is_null());
}

#[test]
fn simulate_rejects_short_sweeps() {
    let d = TempDir::new().unwrap();
    let sc = tiny_scenario(d.path(), "[0, 0.1]");
    let out_dir = d.path().join("out");
    let out = tdshift(&["--seed", "0", "--config", s(&sc), "--out", s(&out_dir), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
}
