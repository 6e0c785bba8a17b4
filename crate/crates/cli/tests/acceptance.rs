//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion
//! over all of them. Run with `cargo test -p tdshift-cli --test acceptance --
//! --nocapture` to see the lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use tdshift_core::bound::BOUND_TOL;
use tdshift_core::oracle::{
    bijectivity_sweep, bound_fuzz, derive_seed, estimator_sweep, g_optimality_sweep, l2_identity_sweep,
    quadrature_sweep,
};
use tdshift_core::TestFunction;
use tdshift_sim::{compare_arms, pearson, shift_sweep, Scenario, World};

const MASTER_SEED: u64 = 2024;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn outcome(name: &'static str, ok: bool, elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    Outcome {
        name,
        passed: ok && secs < limit_s,
        detail: format!("{detail}; {secs:.1} s (limit {limit_s} s)"),
    }
}

fn shipped_scenario() -> (Scenario, PathBuf) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.json");
    let text = std::fs::read_to_string(&path).expect("shipped scenario exists");
    (serde_json::from_str(&text).expect("shipped scenario parses"), path)
}

fn tdshift(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tdshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// The `result` member of a report, re-serialized.
fn payload(report: &[u8]) -> String {
    let v: serde_json::Value = serde_json::from_slice(report).expect("report is JSON");
    v["result"].to_string()
}

#[test]
fn acceptance() {
    let mut out = Vec::new();
    let seed = |i| derive_seed(MASTER_SEED, i);

    let (gap, t) = timed(|| l2_identity_sweep(seed(1), 10_000, 50).unwrap());
    out.push(outcome(
        "energy-l2-identity",
        gap <= 1e-12,
        t,
        5.0,
        format!("10000 pairs, |Ω| ≤ 50, max |ε − Σ(p−q)²| = {gap:.2e} (tol 1e-12)"),
    ));

    let (mismatches, t) = timed(|| bijectivity_sweep(seed(2), 1_000).unwrap());
    out.push(outcome(
        "bijectivity-equivalence",
        mismatches == 0,
        t,
        5.0,
        format!("1000 coarsened sample pairs, {mismatches} mismatches"),
    ));

    let (qerr, t) = timed(|| quadrature_sweep(seed(3), 100, 1e4, 1_000_000).unwrap());
    out.push(outcome(
        "characteristic-fn-quadrature",
        qerr <= 1e-2,
        t,
        60.0,
        format!("100 pairs, τ = 1e4, max error {qerr:.2e} (tol 1e-2)"),
    ));

    let (fuzz, t) = timed(|| bound_fuzz(seed(4), 10_000).unwrap());
    out.push(outcome(
        "adaptation-bound-validity",
        fuzz.violations == 0,
        t,
        120.0,
        format!(
            "{} instances, {} violations beyond {BOUND_TOL:e}, max excess {:.2e}",
            fuzz.trials, fuzz.violations, fuzz.max_excess
        ),
    ));

    let (g, t) = timed(|| g_optimality_sweep(seed(5), 500).unwrap());
    out.push(outcome(
        "g-optimality",
        g <= BOUND_TOL,
        t,
        60.0,
        format!("500 instances, max φ(solve_g) − φ(grid) = {g:.2e} (tol {BOUND_TOL:e})"),
    ));

    let (est, t) = timed(|| estimator_sweep(seed(6), 10, 100_000, 20).unwrap());
    out.push(outcome(
        "estimator-consistency",
        est <= 0.01,
        t,
        f64::INFINITY,
        format!("10 seeds, n = 1e5, |Ω| ≤ 20, max |plug-in − exact| = {est:.2e} (tol 0.01)"),
    ));

    let (sc, sc_path) = shipped_scenario();
    let world = World::new(sc.game.clone()).unwrap();
    let tests = sc.build_tests(sc_path.parent().unwrap()).unwrap();
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t.as_ref()).collect();

    let (rows, t) = timed(|| shift_sweep(&world, &sc.settings, &refs, &sc.sweep.magnitudes, &sc.sweep.seeds).unwrap());
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let dtd: Vec<f64> = rows.iter().map(|r| r.total_abs_dtd).collect();
    let r = pearson(&eps, &dtd);
    out.push(outcome(
        "energy-predicts-td-change",
        rows.len() >= 20 && r.is_some_and(|r| r >= 0.6),
        t,
        600.0,
        format!("{} cells, Pearson(ε_c, Σ|ΔTD|) = {r:?} (need ≥ 0.6)", rows.len()),
    ));

    let (cmp, t) = timed(|| {
        compare_arms(&world, &sc.settings, &refs, sc.compare.epochs, sc.compare.step, &sc.compare.seeds).unwrap()
    });
    out.push(outcome(
        "regularized-arm-direction",
        cmp.seeds.len() >= 10 && cmp.epsilon_lower_fraction >= 0.8 && cmp.dtd_not_higher_fraction > 0.5,
        t,
        600.0,
        format!(
            "{} seeds, lower mean ε_c in {:.0}% (need ≥ 80%), total |ΔTD| not higher in {:.0}% (need > 50%); \
             mean ε_c {:.3e} vs {:.3e}",
            cmp.seeds.len(),
            100.0 * cmp.epsilon_lower_fraction,
            100.0 * cmp.dtd_not_higher_fraction,
            cmp.mean_epsilon_regularized,
            cmp.mean_epsilon_cooperative,
        ),
    ));

    out.push(determinism(&sc, &refs, &world, &rows));

    println!();
    for o in &out {
        println!("{} {:<28} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn determinism(
    sc: &Scenario,
    refs: &[&dyn TestFunction],
    world: &World,
    first_sweep: &[tdshift_sim::SweepRow],
) -> Outcome {
    let t0 = Instant::now();
    let mut diffs = Vec::new();

    let again = shift_sweep(world, &sc.settings, refs, &sc.sweep.magnitudes, &sc.sweep.seeds).unwrap();
    if serde_json::to_string(&again).unwrap() != serde_json::to_string(first_sweep).unwrap() {
        diffs.push("default sweep");
    }

    let dir = tempfile::TempDir::new().unwrap();
    let verify = |name: &str| {
        let p = dir.path().join(name);
        let o = tdshift(&["--seed", "9", "--out", p.to_str().unwrap(), "verify", "--trials", "50"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        payload(&std::fs::read(p).unwrap())
    };
    if verify("v1.json") != verify("v2.json") {
        diffs.push("verify report");
    }

    let scenario = dir.path().join("small.json");
    std::fs::write(
        &scenario,
        r#"{"game": {"n_contexts": 3, "n_objects_per_context": 6, "m": 5, "seed": 0, "human_noise": 0.2},
            "settings": {"corpus_size": 400, "eval_rollouts": 400, "task_rollouts": 200, "candidates": 8, "clusters": 6},
            "sweep": {"magnitudes": [0, 0.05, 0.1, 0.2, 0.3], "seeds": [1, 2, 3]},
            "compare": {"epochs": 2, "step": 0.1, "seeds": [1, 2]}}"#,
    )
    .unwrap();
    let simulate = |name: &str| {
        let d = dir.path().join(name);
        let o = tdshift(&[
            "--seed", "4", "--config", scenario.to_str().unwrap(), "--out", d.to_str().unwrap(), "simulate",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(d.join("sweep.csv")).unwrap(),
            payload(&std::fs::read(d.join("summary.json")).unwrap()),
        )
    };
    if simulate("s1") != simulate("s2") {
        diffs.push("simulate outputs");
    }

    Outcome {
        name: "determinism",
        passed: diffs.is_empty(),
        detail: format!(
            "reran default sweep, `verify`, `simulate`; differing payloads: {diffs:?}; {:.1} s",
            t0.elapsed().as_secs_f64()
        ),
    }
}
