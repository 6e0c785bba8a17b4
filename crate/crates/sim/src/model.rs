//! Tabular learner: a recurrent encoder automaton, a question generator with
//! one categorical row per (encoder state, step), and a guesser with one row
//! per encoder state.
//!
//! The encoder starts as the canonical automaton whose states are
//! `(context, candidate mask)` pairs: each answer intersects the mask with the
//! objects consistent with it. Training can redirect individual transitions,
//! after which the state reached no longer matches the true candidate set.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tdshift_core::oracle::trial_rng;
use tdshift_core::{Dialogue, OutcomeSpace, Pmf, Turn};

use crate::error::{Result, SimError};
use crate::game::{turns_label, Answer, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub context: u32,
    pub mask: u64,
}

/// `β`: initial state per context and a transition per (state, question, answer).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMap {
    n_questions: usize,
    keys: Vec<StateKey>,
    index: HashMap<StateKey, u32>,
    init: Vec<u32>,
    /// States of context `c` are `ranges[c].0 .. ranges[c].1`.
    ranges: Vec<(u32, u32)>,
    trans: Vec<[u32; 2]>,
}

impl EncoderMap {
    /// Canonical automaton, closed under every question and answer so that it
    /// is total on every reachable prefix, including after redirects.
    pub fn canonical(world: &World) -> Self {
        let nq = world.n_questions();
        let mut keys = Vec::new();
        let mut index = HashMap::new();
        let mut init = Vec::new();
        let mut ranges = Vec::new();
        let mut trans: Vec<[u32; 2]> = Vec::new();
        for c in 0..world.n_contexts() {
            let start = keys.len();
            let mut intern = |mask: u64, keys: &mut Vec<StateKey>| -> u32 {
                let key = StateKey { context: c as u32, mask };
                *index.entry(key).or_insert_with(|| {
                    keys.push(key);
                    (keys.len() - 1) as u32
                })
            };
            init.push(intern(world.full_mask(), &mut keys));
            let mut cursor = start;
            while cursor < keys.len() {
                let mask = keys[cursor].mask;
                for q in 0..nq {
                    let yes = mask & world.oracle().consistent(c, q, Answer::Yes);
                    let next = match world.kind(q) {
                        crate::game::QuestionKind::Filler => {
                            let s = intern(mask, &mut keys);
                            [s, s]
                        }
                        crate::game::QuestionKind::Attribute { .. } => {
                            [intern(yes, &mut keys), intern(mask & !yes, &mut keys)]
                        }
                    };
                    trans.push(next);
                }
                cursor += 1;
            }
            ranges.push((start as u32, keys.len() as u32));
        }
        Self {
            n_questions: nq,
            keys,
            index,
            init,
            ranges,
            trans,
        }
    }

    pub fn n_states(&self) -> usize {
        self.keys.len()
    }

    pub fn n_questions(&self) -> usize {
        self.n_questions
    }

    pub fn key(&self, s: u32) -> Result<StateKey> {
        self.keys
            .get(s as usize)
            .copied()
            .ok_or_else(|| SimError::StateHole(format!("state {s} does not exist")))
    }

    pub fn context_states(&self, context: usize) -> std::ops::Range<u32> {
        let (a, b) = self.ranges[context];
        a..b
    }

    pub fn init(&self, context: usize) -> Result<u32> {
        self.init
            .get(context)
            .copied()
            .ok_or_else(|| SimError::StateHole(format!("no initial state for context {context}")))
    }

    /// Flat index of the transition `(s, q, answer)`.
    pub fn entry(&self, s: u32, q: usize, a: Answer) -> Result<usize> {
        if s as usize >= self.keys.len() || q >= self.n_questions {
            return Err(SimError::StateHole(format!("no transition from state {s} on question {q}")));
        }
        Ok((s as usize * self.n_questions + q) * 2 + a.slot())
    }

    pub fn next(&self, s: u32, q: usize, a: Answer) -> Result<u32> {
        let e = self.entry(s, q, a)?;
        Ok(self.target(e))
    }

    pub fn target(&self, entry: usize) -> u32 {
        self.trans[entry / 2][entry % 2]
    }

    pub fn set_target(&mut self, entry: usize, to: u32) {
        self.trans[entry / 2][entry % 2] = to;
    }

    /// Where the canonical automaton goes from state `s`.
    pub fn canonical_next(&self, world: &World, s: u32, q: usize, a: Answer) -> Result<u32> {
        let key = self.key(s)?;
        let mask = key.mask & world.oracle().consistent(key.context as usize, q, a);
        self.index
            .get(&StateKey { context: key.context, mask })
            .copied()
            .ok_or_else(|| SimError::StateHole(format!("mask {mask:#x} missing in context {}", key.context)))
    }

    /// State reached after reading `turns` in `context`.
    pub fn encode(&self, context: usize, turns: &[(usize, Answer)]) -> Result<u32> {
        let mut s = self.init(context)?;
        for &(q, a) in turns {
            s = self.next(s, q, a)?;
        }
        Ok(s)
    }

    /// Number of transition entries that differ between two encoders.
    pub fn changed_entries(&self, other: &EncoderMap) -> usize {
        self.trans
            .iter()
            .zip(&other.trans)
            .map(|(a, b)| (a[0] != b[0]) as usize + (a[1] != b[1]) as usize)
            .sum()
    }

    /// Number of states with at least one differing outgoing transition.
    pub fn changed_states(&self, other: &EncoderMap) -> usize {
        self.trans
            .chunks(self.n_questions)
            .zip(other.trans.chunks(other.n_questions))
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// `θ`: nonnegative weights per (state, step) over the question vocabulary.
/// An all-zero row stands for the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    m: usize,
    n_questions: usize,
    weights: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, m: usize, n_questions: usize) -> Self {
        Self {
            n_states,
            m,
            n_questions,
            weights: vec![0.0; n_states * m * n_questions],
        }
    }

    pub fn for_encoder(world: &World, enc: &EncoderMap) -> Self {
        Self::uniform(enc.n_states(), world.m(), world.n_questions())
    }

    fn offset(&self, s: u32, step: usize) -> Result<usize> {
        if s as usize >= self.n_states || step >= self.m {
            return Err(SimError::StateHole(format!("no policy row for state {s} at step {step}")));
        }
        Ok((s as usize * self.m + step) * self.n_questions)
    }

    /// Raw row weights.
    pub fn row(&self, s: u32, step: usize) -> Result<&[f64]> {
        let o = self.offset(s, step)?;
        Ok(&self.weights[o..o + self.n_questions])
    }

    pub fn is_visited(&self, s: u32, step: usize) -> Result<bool> {
        Ok(self.row(s, step)?.iter().any(|&w| w > 0.0))
    }

    pub fn add(&mut self, s: u32, step: usize, q: usize, w: f64) -> Result<()> {
        let o = self.offset(s, step)?;
        self.weights[o + q] += w;
        Ok(())
    }

    pub fn set_row(&mut self, s: u32, step: usize, row: &[f64]) -> Result<()> {
        let o = self.offset(s, step)?;
        if row.len() != self.n_questions || row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SimError::InvalidConfig("policy row must hold one nonnegative weight per question".into()));
        }
        self.weights[o..o + self.n_questions].copy_from_slice(row);
        Ok(())
    }

    /// The row as a normalized distribution over `vocab`.
    pub fn row_pmf(&self, s: u32, step: usize, vocab: &OutcomeSpace) -> Result<Pmf> {
        let row = self.row(s, step)?;
        let mass: Vec<f64> = if row.iter().any(|&w| w > 0.0) {
            let total: f64 = row.iter().sum();
            row.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / row.len() as f64; row.len()]
        };
        Ok(Pmf::new(vocab.clone(), mass)?)
    }

    /// Inverse-CDF draw with a given uniform `u ∈ [0, 1)`.
    pub fn sample(&self, s: u32, step: usize, u: f64) -> Result<usize> {
        let row = self.row(s, step)?;
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Ok(((u * row.len() as f64) as usize).min(row.len() - 1));
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (q, &w) in row.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = q;
                if target < acc {
                    return Ok(q);
                }
            }
        }
        Ok(last)
    }
}

/// `α`: nonnegative weights per state over the context's objects; the guess
/// is the argmax, ties to the lowest object index.
#[derive(Debug, Clone, PartialEq)]
pub struct GuesserTable {
    n_objects: usize,
    weights: Vec<f64>,
}

impl GuesserTable {
    /// Uniform over the state's candidate mask (over all objects when empty).
    pub fn prior(world: &World, enc: &EncoderMap) -> Self {
        let n = world.n_objects();
        let mut weights = Vec::with_capacity(enc.n_states() * n);
        for key in &enc.keys {
            let mask = if key.mask == 0 { world.full_mask() } else { key.mask };
            weights.extend((0..n).map(|o| ((mask >> o) & 1) as f64));
        }
        Self { n_objects: n, weights }
    }

    /// The same row for every state: a guesser that ignores the dialogue.
    pub fn constant(n_states: usize, row: &[f64]) -> Self {
        Self {
            n_objects: row.len(),
            weights: row.repeat(n_states),
        }
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn row(&self, s: u32) -> Result<&[f64]> {
        let o = s as usize * self.n_objects;
        self.weights
            .get(o..o + self.n_objects)
            .ok_or_else(|| SimError::StateHole(format!("no guesser row for state {s}")))
    }

    pub fn set_row(&mut self, s: u32, row: &[f64]) -> Result<()> {
        let o = s as usize * self.n_objects;
        if row.len() != self.n_objects || !row.iter().any(|&w| w > 0.0) {
            return Err(SimError::InvalidConfig("guesser row needs one weight per object and positive mass".into()));
        }
        self.weights
            .get_mut(o..o + self.n_objects)
            .ok_or_else(|| SimError::StateHole(format!("no guesser row for state {s}")))?
            .copy_from_slice(row);
        Ok(())
    }

    pub fn row_pmf(&self, s: u32) -> Result<Pmf> {
        let row = self.row(s)?;
        Ok(Pmf::from_weights(row.iter().enumerate().map(|(o, &w)| (format!("obj{o}"), w)))?)
    }

    pub fn guess(&self, s: u32) -> Result<usize> {
        let row = self.row(s)?;
        let mut best = 0;
        for (o, &w) in row.iter().enumerate() {
            if w > row[best] {
                best = o;
            }
        }
        Ok(best)
    }
}

/// One generated game. `states[i]` is the encoder state before question `i`;
/// the last entry is the state the guess is read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollout {
    pub context: usize,
    pub goal: usize,
    pub turns: Vec<(usize, Answer)>,
    pub states: Vec<u32>,
    pub guess: usize,
}

impl Rollout {
    pub fn label(&self) -> String {
        turns_label(&self.turns)
    }

    pub fn final_state(&self) -> u32 {
        *self.states.last().expect("rollouts hold at least the initial state")
    }

    pub fn to_dialogue(&self, world: &World, id: impl Into<String>) -> Dialogue {
        Dialogue::new(
            id,
            format!("ctx{}/obj{}", self.context, self.goal),
            self.turns
                .iter()
                .map(|&(q, a)| Turn {
                    q: world.question(q).to_string(),
                    a: a.as_str().to_string(),
                })
                .collect(),
        )
    }
}

/// `m` uniforms driving one rollout's question draws.
pub fn draws(seed: u64, index: u64, m: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, index);
    (0..m).map(|_| rng.random::<f64>()).collect()
}

/// Plays `m` turns, question `i` drawn from the policy row of the current
/// encoder state with uniform `draws[i]`; the guess is read at the end.
pub fn rollout_with_draws(
    world: &World,
    policy: &TabularPolicy,
    enc: &EncoderMap,
    guesser: &GuesserTable,
    context: usize,
    goal: usize,
    draws: &[f64],
) -> Result<Rollout> {
    let (turns, states) = play(world, policy, enc, context, goal, draws)?;
    let guess = guesser.guess(*states.last().expect("nonempty"))?;
    Ok(Rollout {
        context,
        goal,
        turns,
        states,
        guess,
    })
}

/// Turns played and the encoder state after each prefix.
pub(crate) type Played = (Vec<(usize, Answer)>, Vec<u32>);

pub(crate) fn play(
    world: &World,
    policy: &TabularPolicy,
    enc: &EncoderMap,
    context: usize,
    goal: usize,
    draws: &[f64],
) -> Result<Played> {
    if goal >= world.n_objects() {
        return Err(SimError::InvalidConfig(format!("goal {goal} is not an object")));
    }
    let m = world.m();
    let mut s = enc.init(context)?;
    let mut turns = Vec::with_capacity(m);
    let mut states = Vec::with_capacity(m + 1);
    states.push(s);
    for (step, &u) in draws.iter().take(m).enumerate() {
        let q = policy.sample(s, step, u)?;
        let a = world.answer(context, goal, q);
        s = enc.next(s, q, a)?;
        turns.push((q, a));
        states.push(s);
    }
    Ok((turns, states))
}

/// Rollout with draws derived from `seed`.
pub fn rollout(
    world: &World,
    policy: &TabularPolicy,
    enc: &EncoderMap,
    guesser: &GuesserTable,
    context: usize,
    goal: usize,
    seed: u64,
) -> Result<Rollout> {
    rollout_with_draws(world, policy, enc, guesser, context, goal, &draws(seed, 0, world.m()))
}

/// Fraction of rollouts whose guess misses the goal; `0` for no rollouts.
pub fn task_error(rollouts: &[Rollout]) -> f64 {
    if rollouts.is_empty() {
        return 0.0;
    }
    rollouts.iter().filter(|r| r.guess != r.goal).count() as f64 / rollouts.len() as f64
}
