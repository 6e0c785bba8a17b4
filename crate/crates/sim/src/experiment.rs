//! Experiments on the simulator: energy against change in test divergence
//! over a sweep of shift magnitudes, and the two training arms side by side.
//!
//! Energy compares the generated dialogues before and after a task phase
//! (source and target environments). Both samples reuse the same per-rollout
//! uniforms, so any difference between them comes from the encoder change.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tdshift_core::coarsening::{assign, fit_kmeans};
use tdshift_core::energy::energy_estimate;
use tdshift_core::oracle::derive_seed;
use tdshift_core::{test_divergence, CoarseningFunction, EmbeddingTable, PairedItem, SampleSet, TDReport, TestFunction};

use crate::error::{Result, SimError};
use crate::game::World;
use crate::human::{sample_goal_corpus, Corpus};
use crate::model::{draws, rollout_with_draws, task_error, EncoderMap, GuesserTable, Rollout, TabularPolicy};
use crate::training::{phase_language, phase_task, TaskPhaseConfig};

/// Sample sizes and search effort shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// Human games per run.
    pub corpus_size: usize,
    /// Generated rollouts per environment when measuring energy and TD.
    pub eval_rollouts: usize,
    /// Rollouts scored by the task phase.
    pub task_rollouts: usize,
    /// Candidate redirects compared per task-phase move.
    pub candidates: usize,
    /// k-means clusters for the coarsening.
    pub clusters: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            corpus_size: 10_000,
            eval_rollouts: 10_000,
            task_rollouts: 2_000,
            candidates: 16,
            clusters: 20,
        }
    }
}

/// Embedding of a question sequence: question frequencies and the share of
/// "yes" answers.
pub fn embedding(world: &World, turns: &[(usize, crate::game::Answer)]) -> Vec<f64> {
    let nq = world.n_questions();
    let mut v = vec![0.0; nq + 1];
    let len = turns.len().max(1) as f64;
    for &(q, a) in turns {
        v[q] += 1.0 / len;
        if a == crate::game::Answer::Yes {
            v[nq] += 1.0 / len;
        }
    }
    v
}

/// k-means coarsening of dialogues, fit once on a reference sample and
/// applied to later samples by nearest centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueCoarsening {
    c: CoarseningFunction,
}

impl DialogueCoarsening {
    /// Fits on the embeddings of every distinct dialogue in `sample`.
    pub fn fit(world: &World, sample: &[Rollout], k: usize, seed: u64) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for r in sample {
            rows.entry(r.label()).or_insert_with(|| embedding(world, &r.turns));
        }
        let table = EmbeddingTable::new(rows.into_iter().collect())?;
        Ok(Self {
            c: fit_kmeans(&table, k, seed)?,
        })
    }

    pub fn function(&self) -> &CoarseningFunction {
        &self.c
    }

    fn clusters(&self, world: &World, sample: &[Rollout]) -> Result<SampleSet> {
        let mut cache: HashMap<String, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(sample.len());
        for r in sample {
            let label = r.label();
            let cluster = match cache.get(&label) {
                Some(&c) => c,
                None => {
                    let c = match self.c.cluster_of(&label) {
                        Ok(c) => c,
                        Err(_) => assign(&self.c, &embedding(world, &r.turns))?,
                    };
                    cache.insert(label, c);
                    c
                }
            };
            labels.push(format!("cluster-{cluster}"));
        }
        Ok(SampleSet::from_labels(labels))
    }

    /// `ε_c` between two rollout samples.
    pub fn energy(&self, world: &World, a: &[Rollout], b: &[Rollout]) -> Result<f64> {
        Ok(energy_estimate(&self.clusters(world, a)?, &self.clusters(world, b)?)?.value)
    }
}

/// Pairs rollout `i` with human game `i mod |corpus|`, which shares its
/// context and goal.
pub fn paired_items(world: &World, corpus: &Corpus, rollouts: &[Rollout]) -> Vec<PairedItem> {
    rollouts
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let h = &corpus.episodes[i % corpus.len()];
            PairedItem::new(
                h.to_dialogue(world, format!("human-{i}")),
                r.to_dialogue(world, format!("gen-{i}")),
                "u",
            )
        })
        .collect()
}

pub fn test_divergence_of(
    world: &World,
    corpus: &Corpus,
    rollouts: &[Rollout],
    tests: &[&dyn TestFunction],
) -> Result<TDReport> {
    Ok(test_divergence(&paired_items(world, corpus, rollouts), tests)?)
}

/// Generated rollouts for the first `n` corpus games (cycling), with draws
/// from `seed`.
pub fn eval_rollouts(
    world: &World,
    policy: &TabularPolicy,
    enc: &EncoderMap,
    guesser: &GuesserTable,
    corpus: &Corpus,
    n: usize,
    seed: u64,
) -> Result<Vec<Rollout>> {
    (0..n)
        .map(|i| {
            let e = &corpus.episodes[i % corpus.len()];
            rollout_with_draws(world, policy, enc, guesser, e.context, e.goal, &draws(seed, i as u64, world.m()))
        })
        .collect()
}

/// Measurements across one language → task transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub epsilon: f64,
    pub td_source: BTreeMap<String, f64>,
    pub td_target: BTreeMap<String, f64>,
    /// `TD_T − TD_S` per test.
    pub dtd: BTreeMap<String, f64>,
    /// `Σ_ℓ |TD_T,ℓ − TD_S,ℓ|`.
    pub total_abs_dtd: f64,
    pub moves: usize,
    pub changed_states: usize,
    pub task_error_source: f64,
    pub task_error_target: f64,
}

pub struct Environment<'a> {
    pub enc: &'a EncoderMap,
    pub guesser: &'a GuesserTable,
}

/// Measures transitions against a fixed corpus and test set. The coarsening
/// is fit on the source sample of the first transition measured and reused
/// afterwards, so every transition is read on the same clusters.
pub struct Meter<'a> {
    pub world: &'a World,
    pub corpus: &'a Corpus,
    pub tests: &'a [&'a dyn TestFunction],
    pub settings: &'a SimSettings,
    pub seed: u64,
    coarsening: Option<DialogueCoarsening>,
}

impl<'a> Meter<'a> {
    pub fn new(
        world: &'a World,
        corpus: &'a Corpus,
        tests: &'a [&'a dyn TestFunction],
        settings: &'a SimSettings,
        seed: u64,
    ) -> Self {
        Self {
            world,
            corpus,
            tests,
            settings,
            seed,
            coarsening: None,
        }
    }

    pub fn coarsening(&self) -> Option<&DialogueCoarsening> {
        self.coarsening.as_ref()
    }

    /// Source and target samples share their per-rollout draws, taken from
    /// `draw_seed`.
    pub fn measure(
        &mut self,
        policy: &TabularPolicy,
        source: Environment<'_>,
        target: Environment<'_>,
        draw_seed: u64,
    ) -> Result<Transition> {
        let (world, corpus, n) = (self.world, self.corpus, self.settings.eval_rollouts);
        let rs = eval_rollouts(world, policy, source.enc, source.guesser, corpus, n, draw_seed)?;
        let rt = eval_rollouts(world, policy, target.enc, target.guesser, corpus, n, draw_seed)?;
        if self.coarsening.is_none() {
            self.coarsening = Some(DialogueCoarsening::fit(world, &rs, self.settings.clusters, self.seed)?);
        }
        let epsilon = self.coarsening.as_ref().expect("fit above").energy(world, &rs, &rt)?;
        let td_s = test_divergence_of(world, corpus, &rs, self.tests)?;
        let td_t = test_divergence_of(world, corpus, &rt, self.tests)?;
        let dtd: BTreeMap<String, f64> = td_t
            .per_test
            .iter()
            .map(|(k, v)| (k.clone(), v - td_s.per_test[k]))
            .collect();
        Ok(Transition {
            epsilon,
            total_abs_dtd: dtd.values().map(|d| d.abs()).sum(),
            dtd,
            td_source: td_s.per_test,
            td_target: td_t.per_test,
            moves: 0,
            changed_states: target.enc.changed_states(source.enc),
            task_error_source: task_error(&rs),
            task_error_target: task_error(&rt),
        })
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub magnitude: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub dtd: BTreeMap<String, f64>,
    pub total_abs_dtd: f64,
    pub moves: usize,
}

fn task_cfg(settings: &SimSettings, step: f64, regularize: bool) -> TaskPhaseConfig {
    TaskPhaseConfig {
        step,
        regularize,
        rollouts: settings.task_rollouts,
        candidates: settings.candidates,
    }
}

fn sweep_cell(
    world: &World,
    settings: &SimSettings,
    tests: &[&dyn TestFunction],
    magnitude: f64,
    seed: u64,
) -> Result<SweepRow> {
    let corpus = sample_goal_corpus(world, settings.corpus_size, derive_seed(seed, 10));
    let (policy, enc_s) = phase_language(world, &EncoderMap::canonical(world), &corpus)?;
    let guesser = GuesserTable::prior(world, &enc_s);
    let out = phase_task(
        world,
        &policy,
        &enc_s,
        &guesser,
        &corpus,
        &task_cfg(settings, magnitude, false),
        derive_seed(seed, 11),
    )?;
    let mut meter = Meter::new(world, &corpus, tests, settings, derive_seed(seed, 13));
    let t = meter.measure(
        &policy,
        Environment { enc: &enc_s, guesser: &guesser },
        Environment { enc: &out.enc, guesser: &out.guesser },
        derive_seed(seed, 12),
    )?;
    Ok(SweepRow {
        magnitude,
        seed,
        epsilon: t.epsilon,
        dtd: t.dtd,
        total_abs_dtd: t.total_abs_dtd,
        moves: out.moves,
    })
}

/// One language phase followed by one unregularized task phase of each
/// magnitude, per seed. Rows come out in (magnitude, seed) order.
pub fn shift_sweep(
    world: &World,
    settings: &SimSettings,
    tests: &[&dyn TestFunction],
    magnitudes: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if magnitudes.len() < 5 || seeds.len() < 3 {
        return Err(SimError::InvalidConfig(format!(
            "a sweep needs at least 5 magnitudes and 3 seeds, got {} and {}",
            magnitudes.len(),
            seeds.len()
        )));
    }
    let cells: Vec<(f64, u64)> = magnitudes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(m, s)| sweep_cell(world, settings, tests, m, s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Task phase scored on generated rollouts only.
    Cooperative,
    /// Task phase also scored on human dialogues, with equal weight.
    HumanRegularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub arm: Arm,
    pub transitions: Vec<Transition>,
    pub mean_epsilon: f64,
    /// `Σ` over transitions of `Σ_ℓ |ΔTD_ℓ|`.
    pub total_abs_dtd: f64,
    pub final_td: BTreeMap<String, f64>,
    pub final_td_total: f64,
    pub final_task_error: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run_arm(
    world: &World,
    settings: &SimSettings,
    tests: &[&dyn TestFunction],
    corpus: &Corpus,
    arm: Arm,
    epochs: usize,
    step: f64,
    seed: u64,
) -> Result<ArmRun> {
    let mut enc = EncoderMap::canonical(world);
    let mut guesser = GuesserTable::prior(world, &enc);
    let mut transitions = Vec::with_capacity(epochs);
    let cfg = task_cfg(settings, step, arm == Arm::HumanRegularized);
    let mut meter = Meter::new(world, corpus, tests, settings, derive_seed(seed, 13));
    for e in 0..epochs as u64 {
        let (policy, enc_s) = phase_language(world, &enc, corpus)?;
        let out = phase_task(world, &policy, &enc_s, &guesser, corpus, &cfg, derive_seed(seed, 100 + e))?;
        let mut t = meter.measure(
            &policy,
            Environment { enc: &enc_s, guesser: &guesser },
            Environment { enc: &out.enc, guesser: &out.guesser },
            derive_seed(seed, 200 + e),
        )?;
        t.moves = out.moves;
        transitions.push(t);
        enc = out.enc;
        guesser = out.guesser;
    }
    let last = transitions.last().ok_or_else(|| SimError::InvalidConfig("epochs must be at least 1".into()))?;
    Ok(ArmRun {
        arm,
        mean_epsilon: transitions.iter().map(|t| t.epsilon).sum::<f64>() / transitions.len() as f64,
        total_abs_dtd: transitions.iter().map(|t| t.total_abs_dtd).sum(),
        final_td: last.td_target.clone(),
        final_td_total: last.td_target.values().sum(),
        final_task_error: last.task_error_target,
        transitions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub cooperative: ArmRun,
    pub regularized: ArmRun,
}

impl SeedComparison {
    pub fn epsilon_lower(&self) -> bool {
        self.regularized.mean_epsilon < self.cooperative.mean_epsilon
    }

    pub fn dtd_not_higher(&self) -> bool {
        self.regularized.total_abs_dtd <= self.cooperative.total_abs_dtd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub epochs: usize,
    pub step: f64,
    pub seeds: Vec<SeedComparison>,
    /// Share of seeds where the regularized arm has lower mean `ε_c`.
    pub epsilon_lower_fraction: f64,
    /// Share of seeds where the regularized arm's total `|ΔTD|` is not higher.
    pub dtd_not_higher_fraction: f64,
    pub mean_epsilon_cooperative: f64,
    pub mean_epsilon_regularized: f64,
    pub mean_task_error_cooperative: f64,
    pub mean_task_error_regularized: f64,
}

/// Runs both arms for `epochs` alternating epochs on the same corpus and
/// seeds.
pub fn compare_arms(
    world: &World,
    settings: &SimSettings,
    tests: &[&dyn TestFunction],
    epochs: usize,
    step: f64,
    seeds: &[u64],
) -> Result<CompareSummary> {
    if epochs == 0 || seeds.is_empty() {
        return Err(SimError::InvalidConfig("comparison needs at least one epoch and one seed".into()));
    }
    let jobs: Vec<(u64, Arm)> = seeds
        .iter()
        .flat_map(|&s| [(s, Arm::Cooperative), (s, Arm::HumanRegularized)])
        .collect();
    let runs: Vec<ArmRun> = jobs
        .par_iter()
        .map(|&(seed, arm)| {
            let corpus = sample_goal_corpus(world, settings.corpus_size, derive_seed(seed, 10));
            run_arm(world, settings, tests, &corpus, arm, epochs, step, seed)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut runs = runs.into_iter();
    let per_seed: Vec<SeedComparison> = seeds
        .iter()
        .map(|&seed| SeedComparison {
            seed,
            cooperative: runs.next().expect("two runs per seed"),
            regularized: runs.next().expect("two runs per seed"),
        })
        .collect();
    let n = per_seed.len() as f64;
    let mean = |f: &dyn Fn(&SeedComparison) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    Ok(CompareSummary {
        epochs,
        step,
        epsilon_lower_fraction: mean(&|s| s.epsilon_lower() as u8 as f64),
        dtd_not_higher_fraction: mean(&|s| s.dtd_not_higher() as u8 as f64),
        mean_epsilon_cooperative: mean(&|s| s.cooperative.mean_epsilon),
        mean_epsilon_regularized: mean(&|s| s.regularized.mean_epsilon),
        mean_task_error_cooperative: mean(&|s| s.cooperative.final_task_error),
        mean_task_error_regularized: mean(&|s| s.regularized.final_task_error),
        seeds: per_seed,
    })
}
