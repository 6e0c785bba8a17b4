//! Scripted "human" questioner and the goal corpus it produces.

use rand::Rng;
use serde::{Deserialize, Serialize};
use tdshift_core::oracle::trial_rng;
use tdshift_core::{Dialogue, Turn};

use crate::game::{turns_label, Answer, World};

/// One game: context, goal object and the dialogue played on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub context: usize,
    pub goal: usize,
    pub turns: Vec<(usize, Answer)>,
}

impl Episode {
    /// Shared id of the `(image, goal)` pair, used to pair human and
    /// generated dialogues.
    pub fn context_id(&self) -> String {
        format!("ctx{}/obj{}", self.context, self.goal)
    }

    pub fn label(&self) -> String {
        turns_label(&self.turns)
    }

    pub fn to_dialogue(&self, world: &World, id: impl Into<String>) -> Dialogue {
        Dialogue::new(
            id,
            self.context_id(),
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub episodes: Vec<Episode>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }
}

/// Question that splits the candidate set most evenly, with its split size
/// `min(|yes|, |no|)`. Ties go to the lowest vocabulary index.
pub fn best_question(world: &World, context: usize, mask: u64) -> (usize, u32) {
    let total = mask.count_ones();
    let mut best = (0, 0);
    for q in 0..world.n_questions() {
        let yes = (mask & world.oracle().consistent(context, q, Answer::Yes)).count_ones();
        let split = yes.min(total - yes);
        if split > best.1 {
            best = (q, split);
        }
    }
    best
}

/// Plays one scripted game. The questioner always asks at least once, then
/// keeps asking until one candidate remains, no question can split the
/// remaining candidates, or `m` questions have been asked. With probability
/// `human_noise` a question is drawn uniformly from the vocabulary instead.
pub fn human_episode<R: Rng>(world: &World, context: usize, goal: usize, rng: &mut R) -> Episode {
    let mut mask = world.full_mask();
    let mut turns = Vec::new();
    let noise = world.config().human_noise;
    while turns.len() < world.m() {
        let (best, split) = best_question(world, context, mask);
        if !turns.is_empty() && (mask.count_ones() <= 1 || split == 0) {
            break;
        }
        let explore = rng.random::<f64>() < noise;
        let pick = rng.random_range(0..world.n_questions());
        let q = if explore { pick } else { best };
        let a = world.answer(context, goal, q);
        mask &= world.oracle().consistent(context, q, a);
        turns.push((q, a));
    }
    Episode { context, goal, turns }
}

/// `n` human games with uniform context and goal; game `i` depends only on
/// `(seed, i)`.
pub fn sample_goal_corpus(world: &World, n: usize, seed: u64) -> Corpus {
    let episodes = (0..n)
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let context = rng.random_range(0..world.n_contexts());
            let goal = rng.random_range(0..world.n_objects());
            human_episode(world, context, goal, &mut rng)
        })
        .collect();
    Corpus { episodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;

    fn world(objects: Vec<[u8; 3]>, noise: f64) -> World {
        let cfg = GameConfig {
            n_contexts: 1,
            n_objects_per_context: objects.len(),
            human_noise: noise,
            ..GameConfig::default()
        };
        World::from_objects(cfg, vec![objects]).unwrap()
    }

    #[test]
    fn single_object_game_has_one_turn() {
        let w = world(vec![[0, 0, 0]], 0.0);
        let c = sample_goal_corpus(&w, 5, 1);
        for e in &c.episodes {
            assert_eq!(e.goal, 0);
            assert_eq!(e.turns.len(), 1);
            // No question splits a single candidate: the lowest index is asked.
            assert_eq!(e.turns[0].0, 0);
        }
    }

    #[test]
    fn two_objects_split_by_one_attribute() {
        // Same color and position, different category (car vs dog).
        let w = world(vec![[0, 0, 0], [0, 0, 2]], 0.0);
        let e = human_episode(&w, 0, 1, &mut trial_rng(0, 0));
        assert_eq!(e.turns.len(), 1);
        assert_eq!(w.question(e.turns[0].0), "is it a car");
        assert_eq!(e.turns[0].1, Answer::No);
    }

    #[test]
    fn dialogues_never_exceed_m() {
        let w = World::new(GameConfig { human_noise: 1.0, m: 3, ..GameConfig::default() }).unwrap();
        let c = sample_goal_corpus(&w, 300, 4);
        assert!(c.episodes.iter().all(|e| (1..=3).contains(&e.turns.len())));
    }

    #[test]
    fn corpus_is_reproducible() {
        let w = World::new(GameConfig::default()).unwrap();
        assert_eq!(sample_goal_corpus(&w, 500, 9), sample_goal_corpus(&w, 500, 9));
        assert_ne!(sample_goal_corpus(&w, 500, 9), sample_goal_corpus(&w, 500, 10));
    }

    #[test]
    fn noiseless_human_identifies_distinct_objects() {
        let w = World::new(GameConfig { human_noise: 0.0, ..GameConfig::default() }).unwrap();
        for e in sample_goal_corpus(&w, 200, 2).episodes {
            let mut mask = w.full_mask();
            for &(q, a) in &e.turns {
                mask &= w.oracle().consistent(e.context, q, a);
            }
            assert!(mask & (1 << e.goal) != 0);
            let twins = w.objects(e.context).iter().filter(|o| **o == w.objects(e.context)[e.goal]).count();
            if twins == 1 && e.turns.len() < w.m() {
                assert_eq!(mask.count_ones(), 1);
            }
        }
    }
}
