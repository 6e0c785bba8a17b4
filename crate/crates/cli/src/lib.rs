//! `tdshift` command-line front end.
//!
//! Every command reads JSON or CSV inputs, wraps its result in a
//! [`manifest::Report`] and writes it to `--out` or stdout. Exit codes: 0 on
//! success, 2 on input errors, 3 when a checked theoretical property fails.

#![forbid(unsafe_code)]

pub mod error;
pub mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tdshift_core::coarsening::assign;
use tdshift_core::energy::{energy_coarsened, Coarsening, Identity, LabelMap};
use tdshift_core::io;
use tdshift_core::oracle::{run_verify, VerifyConfig};
use tdshift_core::testfns::{OnDialogues, TestSpec};
use tdshift_core::{evaluate_bound, fit_kmeans, test_divergence, CoarseningFunction, EnergyValue, TestFunction};
use tdshift_sim::{compare_arms, pearson, shift_sweep, CompareSummary, Scenario, SweepRow, World};

pub use error::{CliError, Result};
use error::WithPath;
use manifest::{ManifestBuilder, Report};

#[derive(Debug, Parser)]
#[command(name = "tdshift", version, about = "Energy and test-divergence diagnostics for generated dialogue")]
pub struct Cli {
    /// Master seed. Required by every command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report destination (a directory for `simulate`). Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Command configuration: a scenario for `simulate`, oracle sizes for
    /// `verify`, a test list for `testdiv` and `bound`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy distance between two label CSVs or pmf JSONs.
    Energy(EnergyArgs),
    /// Test divergence of a paired corpus.
    Testdiv(TestdivArgs),
    /// Exact evaluation of the adaptation bound on a joint model.
    Bound(BoundArgs),
    /// Runs the oracle suite.
    Verify(VerifyArgs),
    /// Runs the simulator sweep and arm comparison.
    Simulate(SimulateArgs),
    /// Fits or applies a k-means coarsening.
    #[command(subcommand)]
    Coarsen(CoarsenCommand),
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Coarsening applied to both inputs: a label map or a fitted coarsening.
    #[arg(long, conflicts_with = "embeddings")]
    pub coarsening: Option<PathBuf>,
    /// Embeddings to fit a k-means coarsening on before measuring.
    #[arg(long, requires = "k")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TestdivArgs {
    pub paired: PathBuf,
    /// JSON list of test specs. Defaults to lexical diversity and repetition.
    #[arg(long)]
    pub tests: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    pub joint: PathBuf,
    /// Score table `dialogue_id,u_id,score` used as the test.
    #[arg(long, conflicts_with_all = ["tests", "dialogues"])]
    pub scores: Option<PathBuf>,
    /// JSON list holding one test spec, evaluated on `--dialogues`.
    #[arg(long, requires = "dialogues")]
    pub tests: Option<PathBuf>,
    /// Dialogue JSONL resolving every dialogue and noise label.
    #[arg(long)]
    pub dialogues: Option<PathBuf>,
    #[arg(long)]
    pub coarsening: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// One trial per check.
    #[arg(long, conflicts_with = "trials")]
    pub smoke: bool,
    /// Trials per randomized check.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "compare_only")]
    pub sweep_only: bool,
    #[arg(long)]
    pub compare_only: bool,
}

#[derive(Debug, Subcommand)]
pub enum CoarsenCommand {
    /// Fits k-means on an embedding CSV or JSONL.
    Fit {
        embeddings: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Assigns embeddings to the clusters of a fitted coarsening.
    Apply { coarsening: PathBuf, embeddings: PathBuf },
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    io::parse_json(&read_text(path)?).at(path)
}

/// A coarsening file: either a fitted k-means coarsening or a plain label map.
pub enum CoarseningFile {
    Fitted(CoarseningFunction),
    Map(LabelMap),
}

impl CoarseningFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let value: serde_json::Value = io::parse_json(&text).at(path)?;
        if value.get("centroids").is_some() {
            Ok(Self::Fitted(io::parse_json(&text).at(path)?))
        } else {
            Ok(Self::Map(io::parse_json(&text).at(path)?))
        }
    }

    pub fn as_dyn(&self) -> &dyn Coarsening {
        match self {
            Self::Fitted(c) => c,
            Self::Map(m) => m,
        }
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn build_tests(specs: &[TestSpec], base: &Path, origin: &Path) -> Result<Vec<Box<dyn TestFunction>>> {
    specs.iter().map(|s| s.build(base).at(origin)).collect()
}

fn write_report<T: Serialize>(out: Option<&Path>, report: &Report<T>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(tdshift_core::Error::from)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn no_config(cli: &Cli, command: &str) -> Result<()> {
    match &cli.config {
        Some(_) => Err(CliError::Usage(format!("`{command}` takes no --config"))),
        None => Ok(()),
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli
        .seed
        .ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    match &cli.command {
        Command::Energy(a) => cmd_energy(cli, a, seed),
        Command::Testdiv(a) => cmd_testdiv(cli, a, seed),
        Command::Bound(a) => cmd_bound(cli, a, seed),
        Command::Verify(a) => cmd_verify(cli, a, seed),
        Command::Simulate(a) => cmd_simulate(cli, a, seed),
        Command::Coarsen(c) => cmd_coarsen(cli, c, seed),
    }
}

/// Prints a diagnostic for `e` and returns the exit code.
pub fn report_error(e: &CliError) -> i32 {
    eprintln!("error[{}]: {e}", e.code());
    e.exit_code()
}

pub fn cmd_energy(cli: &Cli, a: &EnergyArgs, seed: u64) -> Result<()> {
    no_config(cli, "energy")?;
    let mut m = ManifestBuilder::start("energy", seed);
    m.config(&serde_json::json!({ "k": a.k, "coarsening": a.coarsening, "embeddings": a.embeddings }));
    m.input(&a.a);
    m.input(&a.b);
    let da = io::read_distribution(&a.a).at(&a.a)?;
    let db = io::read_distribution(&a.b).at(&a.b)?;
    let value: EnergyValue = if let Some(path) = &a.coarsening {
        m.input(path);
        let c = CoarseningFile::read(path)?;
        energy_coarsened(&da, &db, &c.as_dyn())?
    } else if let Some(path) = &a.embeddings {
        m.input(path);
        let table = io::read_embeddings(path).at(path)?;
        let k = a.k.ok_or_else(|| CliError::Usage("--embeddings needs --k".into()))?;
        let c = fit_kmeans(&table, k, seed)?;
        energy_coarsened(&da, &db, &c)?
    } else {
        energy_coarsened(&da, &db, &Identity)?
    };
    write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: value })
}

fn default_td_tests() -> Vec<TestSpec> {
    vec![TestSpec::LexicalDiversity, TestSpec::Repetition]
}

fn read_specs(path: Option<&Path>) -> Result<Option<(Vec<TestSpec>, PathBuf)>> {
    path.map(|p| Ok((read_json::<Vec<TestSpec>>(p)?, p.to_path_buf())))
        .transpose()
}

pub fn cmd_testdiv(cli: &Cli, a: &TestdivArgs, seed: u64) -> Result<()> {
    if a.tests.is_some() && cli.config.is_some() {
        return Err(CliError::Usage("give the test list through --tests or --config, not both".into()));
    }
    let mut m = ManifestBuilder::start("testdiv", seed);
    m.input(&a.paired);
    let specs = read_specs(a.tests.as_deref().or(cli.config.as_deref()))?;
    let tests = match &specs {
        Some((s, p)) => {
            m.input(p);
            build_tests(s, base_dir(p), p)?
        }
        None => build_tests(&default_td_tests(), Path::new("."), Path::new("<built-in>"))?,
    };
    m.config(&specs.as_ref().map_or_else(default_td_tests, |(s, _)| s.clone()));
    let corpus = io::read_paired_jsonl(&a.paired).at(&a.paired)?;
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t.as_ref()).collect();
    let report = test_divergence(&corpus, &refs).at(&a.paired)?;
    write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: report })
}

pub fn cmd_bound(cli: &Cli, a: &BoundArgs, seed: u64) -> Result<()> {
    let mut m = ManifestBuilder::start("bound", seed);
    m.input(&a.joint);
    let joint = io::read_joint_json(&a.joint).at(&a.joint)?;
    let coarsening = match &a.coarsening {
        Some(p) => {
            m.input(p);
            Some(CoarseningFile::read(p)?)
        }
        None => None,
    };
    let c: &dyn Coarsening = coarsening.as_ref().map_or(&Identity, |c| c.as_dyn());
    let outcome = if let Some(path) = &a.scores {
        no_config(cli, "bound --scores")?;
        m.input(path);
        m.config(&serde_json::json!({ "scores": path, "coarsening": a.coarsening }));
        let name = path.file_stem().map_or("scores".into(), |s| s.to_string_lossy().into_owned());
        let table = io::read_score_table(&name, path).at(path)?;
        evaluate_bound(&joint, &table, c)
    } else {
        let spec_path = a
            .tests
            .as_deref()
            .or(cli.config.as_deref())
            .ok_or_else(|| CliError::Usage("bound needs --scores, or a test list with --dialogues".into()))?;
        let dpath = a
            .dialogues
            .as_deref()
            .ok_or_else(|| CliError::Usage("a test list needs --dialogues".into()))?;
        m.input(spec_path);
        m.input(dpath);
        let specs: Vec<TestSpec> = read_json(spec_path)?;
        if specs.len() != 1 {
            return Err(CliError::Usage(format!(
                "{}: bound takes exactly one test, got {}",
                spec_path.display(),
                specs.len()
            )));
        }
        m.config(&serde_json::json!({ "tests": specs, "coarsening": a.coarsening }));
        let test = specs[0].build(base_dir(spec_path)).at(spec_path)?;
        let dialogues: BTreeMap<String, _> = io::read_dialogues_jsonl(dpath)
            .at(dpath)?
            .into_iter()
            .map(|d| (d.id.clone(), d))
            .collect();
        let h = OnDialogues {
            test: test.as_ref(),
            dialogues: &dialogues,
        };
        evaluate_bound(&joint, &h, c)
    };
    match outcome {
        Ok(report) => write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: report }),
        Err(tdshift_core::Error::BoundViolated(report)) => {
            let msg = format!(
                "adaptation bound violated: td_target {} > rhs {}",
                report.td_target, report.rhs
            );
            write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: *report })?;
            Err(CliError::Assertion(msg))
        }
        Err(e) => Err(CliError::Input {
            path: a.joint.clone(),
            source: e,
        }),
    }
}

pub fn cmd_verify(cli: &Cli, a: &VerifyArgs, seed: u64) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => read_json::<VerifyConfig>(p)?,
        None if a.smoke => VerifyConfig::smoke(),
        None => VerifyConfig::default(),
    };
    if let Some(t) = a.trials {
        if t == 0 {
            return Err(CliError::Usage("--trials must be positive".into()));
        }
        cfg.l2_pairs = t;
        cfg.bijectivity_pairs = t;
        cfg.quadrature_pairs = t;
        cfg.bound_trials = t;
        cfg.g_trials = t;
        cfg.general_trials = t;
    }
    let mut m = ManifestBuilder::start("verify", seed);
    m.config(&cfg);
    if let Some(p) = &cli.config {
        m.input(p);
    }
    let report = run_verify(seed, &cfg)?;
    let passed = report.all_passed;
    let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: report })?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("oracle checks failed: {}", failed.join(", "))))
    }
}

/// `summary.json` payload of `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenario: Scenario,
    pub sweep: Option<SweepSummary>,
    pub compare: Option<CompareSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    /// Pearson correlation of `ε_c` against total `|ΔTD|`; absent when
    /// either column is constant.
    pub pearson: Option<f64>,
    /// Pearson correlation of `ε_c` against each test's `|ΔTD|`.
    pub pearson_per_test: BTreeMap<String, Option<f64>>,
}

pub fn sweep_summary(rows: &[SweepRow]) -> SweepSummary {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let total: Vec<f64> = rows.iter().map(|r| r.total_abs_dtd).collect();
    let names: Vec<String> = rows.first().map_or(Vec::new(), |r| r.dtd.keys().cloned().collect());
    let pearson_per_test = names
        .into_iter()
        .map(|n| {
            let col: Vec<f64> = rows.iter().map(|r| r.dtd[&n].abs()).collect();
            let p = pearson(&eps, &col);
            (n, p)
        })
        .collect();
    SweepSummary {
        cells: rows.len(),
        pearson: pearson(&eps, &total),
        pearson_per_test,
    }
}

/// Sweep rows as CSV: `magnitude,seed,epsilon,dtd_<test>…,total_abs_dtd,moves`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let names: Vec<String> = rows.first().map_or(Vec::new(), |r| r.dtd.keys().cloned().collect());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["magnitude".to_string(), "seed".into(), "epsilon".into()];
    header.extend(names.iter().map(|n| format!("dtd_{n}")));
    header.extend(["total_abs_dtd".to_string(), "moves".into()]);
    let csv_err = |e: csv::Error| CliError::Core(e.into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.magnitude.to_string(), r.seed.to_string(), r.epsilon.to_string()];
        rec.extend(names.iter().map(|n| r.dtd[n].to_string()));
        rec.extend([r.total_abs_dtd.to_string(), r.moves.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Core(tdshift_core::Error::Io(e.into_error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The scenario `simulate` runs: the `--config` file, or the built-in
/// default, with the world seed replaced by `--seed`.
pub fn effective_scenario(config: Option<&Path>, seed: u64) -> Result<Scenario> {
    let mut sc = match config {
        Some(p) => read_json::<Scenario>(p)?,
        None => Scenario::default(),
    };
    sc.game.seed = seed;
    Ok(sc)
}

pub fn cmd_simulate(cli: &Cli, a: &SimulateArgs, seed: u64) -> Result<()> {
    let dir = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("simulate needs --out DIR".into()))?;
    let sc = effective_scenario(cli.config.as_deref(), seed)?;
    let origin = cli.config.clone().unwrap_or_else(|| PathBuf::from("<built-in scenario>"));
    let mut m = ManifestBuilder::start("simulate", seed);
    m.config(&sc);
    if let Some(p) = &cli.config {
        m.input(p);
    }
    let world = World::new(sc.game.clone()).map_err(|e| match e {
        tdshift_sim::SimError::Core(source) => CliError::Input { path: origin.clone(), source },
        other => CliError::Usage(format!("{}: {other}", origin.display())),
    })?;
    let base = cli.config.as_deref().map_or(Path::new("."), base_dir);
    let tests = build_tests(&sc.tests, base, &origin)?;
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t.as_ref()).collect();

    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    let sweep = if a.compare_only {
        None
    } else {
        let rows = shift_sweep(&world, &sc.settings, &refs, &sc.sweep.magnitudes, &sc.sweep.seeds)?;
        let path = dir.join("sweep.csv");
        std::fs::write(&path, sweep_csv(&rows)?).map_err(|source| CliError::Output { path, source })?;
        Some(sweep_summary(&rows))
    };
    let compare = if a.sweep_only {
        None
    } else {
        Some(compare_arms(
            &world,
            &sc.settings,
            &refs,
            sc.compare.epochs,
            sc.compare.step,
            &sc.compare.seeds,
        )?)
    };
    let summary = SimulateSummary {
        scenario: sc,
        sweep,
        compare,
    };
    let report = Report {
        manifest: m.finish(),
        result: summary,
    };
    write_report(Some(&dir.join("summary.json")), &report)
}

pub fn cmd_coarsen(cli: &Cli, c: &CoarsenCommand, seed: u64) -> Result<()> {
    no_config(cli, "coarsen")?;
    match c {
        CoarsenCommand::Fit { embeddings, k } => {
            let mut m = ManifestBuilder::start("coarsen fit", seed);
            m.config(&serde_json::json!({ "k": k }));
            m.input(embeddings);
            let table = io::read_embeddings(embeddings).at(embeddings)?;
            let f = fit_kmeans(&table, *k, seed).at(embeddings)?;
            write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: f })
        }
        CoarsenCommand::Apply { coarsening, embeddings } => {
            let mut m = ManifestBuilder::start("coarsen apply", seed);
            m.input(coarsening);
            m.input(embeddings);
            let text = read_text(coarsening)?;
            let f: CoarseningFunction = io::parse_json(&text).at(coarsening)?;
            let table = io::read_embeddings(embeddings).at(embeddings)?;
            let mut clusters = BTreeMap::new();
            for (id, v) in table.ids().iter().zip(table.vectors()) {
                clusters.insert(id.clone(), assign(&f, v).at(embeddings)?);
            }
            write_report(cli.out.as_deref(), &Report { manifest: m.finish(), result: clusters })
        }
    }
}
