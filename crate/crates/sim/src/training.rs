//! The two alternating phases of cooperative learning.
//!
//! Language phase: teacher-forced maximum likelihood on human dialogues. The
//! policy rows become normalized prefix counts, and encoder transitions on
//! human prefixes are reset to the canonical ones.
//!
//! Task phase: the guesser is refit to the rollouts and the encoder receives a
//! bounded number of transition redirects chosen to lower task error on
//! generated rollouts. The regularized variant adds the error of guessing from
//! human dialogues with equal weight.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tdshift_core::oracle::{derive_seed, trial_rng};

use crate::error::{Result, SimError};
use crate::game::{Answer, World};
use crate::human::Corpus;
use crate::model::{draws, play, EncoderMap, GuesserTable, TabularPolicy};

/// Refits the question generator on human prefixes. The previous policy is
/// discarded, so the phase is idempotent on a fixed corpus.
pub fn phase_language(world: &World, enc: &EncoderMap, corpus: &Corpus) -> Result<(TabularPolicy, EncoderMap)> {
    let mut enc = enc.clone();
    let mut policy = TabularPolicy::for_encoder(world, &enc);
    for e in &corpus.episodes {
        let mut s = enc.init(e.context)?;
        for (step, &(q, a)) in e.turns.iter().enumerate() {
            policy.add(s, step, q, 1.0)?;
            let canon = enc.canonical_next(world, s, q, a)?;
            let entry = enc.entry(s, q, a)?;
            enc.set_target(entry, canon);
            s = canon;
        }
    }
    Ok((policy, enc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPhaseConfig {
    /// Redirect budget as a fraction of the number of encoder states.
    pub step: f64,
    pub regularize: bool,
    /// Generated rollouts scored; the human term uses the whole corpus.
    pub rollouts: usize,
    /// Random redirects compared per move.
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub enc: EncoderMap,
    pub guesser: GuesserTable,
    /// Redirects accepted.
    pub moves: usize,
    /// Objective before and after the encoder moves, with the guesser refit.
    pub objective_before: f64,
    pub objective_after: f64,
}

struct Path {
    context: usize,
    goal: usize,
    turns: Vec<(usize, Answer)>,
    states: Vec<u32>,
    draws: Vec<f64>,
}

impl Path {
    fn uses(&self, enc: &EncoderMap, entry: usize) -> bool {
        self.turns
            .iter()
            .zip(&self.states)
            .any(|(&(q, a), &s)| enc.entry(s, q, a).ok() == Some(entry))
    }

    fn final_state(&self) -> u32 {
        *self.states.last().expect("nonempty")
    }
}

/// Goal counts per final state, one table per objective term.
struct Tally {
    n_objects: usize,
    gen: Vec<i64>,
    hum: Vec<i64>,
    w_gen: i64,
    w_hum: i64,
}

impl Tally {
    fn score(&self, s: u32, o: usize, d_gen: i64, d_hum: i64) -> i64 {
        let i = s as usize * self.n_objects + o;
        (self.gen[i] + d_gen) * self.w_gen + (self.hum[i] + d_hum) * self.w_hum
    }

    /// Misclassified weight at `s` when its guess is the best object.
    fn loss(&self, s: u32, delta: Option<&[(i64, i64)]>) -> i64 {
        let mut total = 0;
        let mut best = 0;
        for o in 0..self.n_objects {
            let (dg, dh) = delta.map_or((0, 0), |d| d[o]);
            let v = self.score(s, o, dg, dh);
            total += v;
            best = best.max(v);
        }
        total - best
    }

    fn total_loss(&self, n_states: usize) -> i64 {
        (0..n_states as u32).map(|s| self.loss(s, None)).sum()
    }

    fn apply(&mut self, delta: &BTreeMap<u32, Vec<(i64, i64)>>) {
        for (&s, d) in delta {
            for (o, &(dg, dh)) in d.iter().enumerate() {
                let i = s as usize * self.n_objects + o;
                self.gen[i] += dg;
                self.hum[i] += dh;
            }
        }
    }
}

/// Rollout index with its rewritten turns and encoder path.
type PathUpdate = (usize, Vec<(usize, Answer)>, Vec<u32>);

struct Candidate {
    entry: usize,
    to: u32,
    change: i64,
    delta: BTreeMap<u32, Vec<(i64, i64)>>,
    gen: Vec<PathUpdate>,
    hum: Vec<(usize, Vec<u32>)>,
}

/// One task-oriented epoch. `step = 0` leaves every input unchanged.
pub fn phase_task(
    world: &World,
    policy: &TabularPolicy,
    enc: &EncoderMap,
    guesser: &GuesserTable,
    corpus: &Corpus,
    cfg: &TaskPhaseConfig,
    seed: u64,
) -> Result<TaskOutcome> {
    if !(cfg.step.is_finite() && cfg.step >= 0.0) {
        return Err(SimError::InvalidConfig(format!("step {} must be finite and nonnegative", cfg.step)));
    }
    if corpus.is_empty() || cfg.rollouts == 0 {
        return Err(SimError::InvalidConfig("task phase needs a nonempty corpus and rollouts".into()));
    }
    if cfg.step == 0.0 {
        return Ok(TaskOutcome {
            enc: enc.clone(),
            guesser: guesser.clone(),
            moves: 0,
            objective_before: f64::NAN,
            objective_after: f64::NAN,
        });
    }
    let mut enc = enc.clone();
    let n_objects = world.n_objects();
    let draw_seed = derive_seed(seed, 1);

    let mut gen = Vec::with_capacity(cfg.rollouts);
    for i in 0..cfg.rollouts {
        let e = &corpus.episodes[i % corpus.len()];
        let d = draws(draw_seed, i as u64, world.m());
        let (turns, states) = play(world, policy, &enc, e.context, e.goal, &d)?;
        gen.push(Path {
            context: e.context,
            goal: e.goal,
            turns,
            states,
            draws: d,
        });
    }
    let mut hum = Vec::new();
    if cfg.regularize {
        for e in &corpus.episodes {
            let mut states = vec![enc.init(e.context)?];
            for &(q, a) in &e.turns {
                states.push(enc.next(*states.last().expect("nonempty"), q, a)?);
            }
            hum.push(Path {
                context: e.context,
                goal: e.goal,
                turns: e.turns.clone(),
                states,
                draws: Vec::new(),
            });
        }
    }

    let mut tally = Tally {
        n_objects,
        gen: vec![0; enc.n_states() * n_objects],
        hum: vec![0; enc.n_states() * n_objects],
        w_gen: if hum.is_empty() { 1 } else { hum.len() as i64 },
        w_hum: gen.len() as i64,
    };
    for p in &gen {
        tally.gen[p.final_state() as usize * n_objects + p.goal] += 1;
    }
    for p in &hum {
        tally.hum[p.final_state() as usize * n_objects + p.goal] += 1;
    }
    let scale = (tally.w_gen * tally.w_hum) as f64;
    let mut loss = tally.total_loss(enc.n_states());
    let objective_before = loss as f64 / scale;

    let budget = (cfg.step * enc.n_states() as f64).ceil() as usize;
    let mut rng = trial_rng(seed, 0);
    let mut moves = 0;
    for _ in 0..budget {
        let mut best: Option<Candidate> = None;
        for _ in 0..cfg.candidates {
            let p = &gen[rng.random_range(0..gen.len())];
            let t = rng.random_range(0..p.turns.len());
            let (q, a) = p.turns[t];
            let entry = enc.entry(p.states[t], q, a)?;
            let range = enc.context_states(p.context);
            let to = rng.random_range(range.clone());
            if to == enc.target(entry) {
                continue;
            }
            let cand = evaluate(world, policy, &mut enc, &tally, &gen, &hum, entry, to)?;
            if best.as_ref().is_none_or(|b| cand.change < b.change) {
                best = Some(cand);
            }
        }
        let Some(c) = best else { continue };
        if c.change > 0 {
            continue;
        }
        enc.set_target(c.entry, c.to);
        tally.apply(&c.delta);
        loss += c.change;
        for (i, turns, states) in c.gen {
            gen[i].turns = turns;
            gen[i].states = states;
        }
        for (i, states) in c.hum {
            hum[i].states = states;
        }
        moves += 1;
    }

    let mut guesser = guesser.clone();
    for s in 0..enc.n_states() as u32 {
        let row: Vec<f64> = (0..n_objects).map(|o| tally.score(s, o, 0, 0) as f64).collect();
        if row.iter().any(|&w| w > 0.0) {
            guesser.set_row(s, &row)?;
        }
    }
    Ok(TaskOutcome {
        enc,
        guesser,
        moves,
        objective_before,
        objective_after: loss as f64 / scale,
    })
}

/// Objective change of redirecting `entry` to `to`, with the guesser refit.
/// `enc` is restored before returning.
#[allow(clippy::too_many_arguments)]
fn evaluate(
    world: &World,
    policy: &TabularPolicy,
    enc: &mut EncoderMap,
    tally: &Tally,
    gen: &[Path],
    hum: &[Path],
    entry: usize,
    to: u32,
) -> Result<Candidate> {
    let hit_gen: Vec<usize> = (0..gen.len()).filter(|&i| gen[i].uses(enc, entry)).collect();
    let hit_hum: Vec<usize> = (0..hum.len()).filter(|&i| hum[i].uses(enc, entry)).collect();
    let old = enc.target(entry);
    enc.set_target(entry, to);
    let replay = (|| -> Result<_> {
        let mut g = Vec::with_capacity(hit_gen.len());
        for &i in &hit_gen {
            let p = &gen[i];
            let (turns, states) = play(world, policy, enc, p.context, p.goal, &p.draws)?;
            g.push((i, turns, states));
        }
        let mut h = Vec::with_capacity(hit_hum.len());
        for &i in &hit_hum {
            let p = &hum[i];
            let mut states = vec![enc.init(p.context)?];
            for &(q, a) in &p.turns {
                states.push(enc.next(*states.last().expect("nonempty"), q, a)?);
            }
            h.push((i, states));
        }
        Ok((g, h))
    })();
    enc.set_target(entry, old);
    let (g, h) = replay?;

    let n = tally.n_objects;
    let mut delta: BTreeMap<u32, Vec<(i64, i64)>> = BTreeMap::new();
    let mut bump = |s: u32, o: usize, dg: i64, dh: i64| {
        let d = delta.entry(s).or_insert_with(|| vec![(0, 0); n]);
        d[o].0 += dg;
        d[o].1 += dh;
    };
    for (i, _, states) in &g {
        bump(gen[*i].final_state(), gen[*i].goal, -1, 0);
        bump(*states.last().expect("nonempty"), gen[*i].goal, 1, 0);
    }
    for (i, states) in &h {
        bump(hum[*i].final_state(), hum[*i].goal, 0, -1);
        bump(*states.last().expect("nonempty"), hum[*i].goal, 0, 1);
    }
    let change = delta
        .iter()
        .map(|(&s, d)| tally.loss(s, Some(d)) - tally.loss(s, None))
        .sum();
    Ok(Candidate {
        entry,
        to,
        change,
        delta,
        gen: g,
        hum: h,
    })
}
