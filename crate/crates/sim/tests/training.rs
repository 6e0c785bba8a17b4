use tdshift_sim::game::{default_vocab, Answer, Object};
use tdshift_sim::human::{Corpus, Episode};
use tdshift_sim::model::{draws, rollout_with_draws};
use tdshift_sim::*;

fn cfg(n_contexts: usize, n_objects: usize, m: usize, noise: f64) -> GameConfig {
    GameConfig {
        n_contexts,
        n_objects_per_context: n_objects,
        question_vocab: default_vocab(),
        m,
        seed: 0,
        human_noise: noise,
    }
}

fn q(world: &World, text: &str) -> usize {
    (0..world.n_questions()).find(|&i| world.question(i) == text).unwrap()
}

/// One context: a red car and a blue dog.
fn two_object_world(m: usize) -> World {
    let objects: Vec<Vec<Object>> = vec![vec![[0, 0, 0], [1, 0, 2]]];
    World::from_objects(cfg(1, 2, m, 0.0), objects).unwrap()
}

fn episode(world: &World, goal: usize, questions: &[&str]) -> Episode {
    Episode {
        context: 0,
        goal,
        turns: questions
            .iter()
            .map(|t| {
                let i = q(world, t);
                (i, world.answer(0, goal, i))
            })
            .collect(),
    }
}

#[test]
fn language_phase_rows_are_normalized_prefix_counts() {
    let w = two_object_world(2);
    let corpus = Corpus {
        episodes: vec![
            episode(&w, 0, &["is it red"]),
            episode(&w, 1, &["is it red"]),
            episode(&w, 0, &["is it a car"]),
            episode(&w, 0, &["is it red", "is it a car"]),
        ],
    };
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let s0 = enc.init(0).unwrap();
    let row = policy.row_pmf(s0, 0, &w.config().question_vocab).unwrap();
    assert_eq!(row.mass_of("is it red"), 0.75);
    assert_eq!(row.mass_of("is it a car"), 0.25);

    // Only one game reaches step 1, from the state after "red → yes".
    let s1 = enc.next(s0, q(&w, "is it red"), Answer::Yes).unwrap();
    let row = policy.row_pmf(s1, 1, &w.config().question_vocab).unwrap();
    assert_eq!(row.mass_of("is it a car"), 1.0);
    assert!(!policy.is_visited(s0, 1).unwrap());
}

#[test]
fn language_phase_even_split() {
    let w = two_object_world(1);
    let corpus = Corpus {
        episodes: vec![episode(&w, 0, &["is it red"]), episode(&w, 1, &["is it a dog"])],
    };
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let row = policy.row_pmf(enc.init(0).unwrap(), 0, &w.config().question_vocab).unwrap();
    assert_eq!(row.mass_of("is it red"), 0.5);
    assert_eq!(row.mass_of("is it a dog"), 0.5);
}

#[test]
fn language_phase_is_idempotent() {
    let w = World::new(cfg(3, 6, 5, 0.2)).unwrap();
    let corpus = sample_goal_corpus(&w, 300, 4);
    let (p1, e1) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let (p2, e2) = phase_language(&w, &e1, &corpus).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(e1, e2);
}

#[test]
fn language_phase_restores_canonical_transitions_on_human_prefixes() {
    let w = World::new(cfg(2, 4, 4, 0.0)).unwrap();
    let corpus = sample_goal_corpus(&w, 50, 1);
    let canon = EncoderMap::canonical(&w);
    let (policy, enc) = phase_language(&w, &canon, &corpus).unwrap();
    let out = phase_task(
        &w,
        &policy,
        &enc,
        &GuesserTable::prior(&w, &enc),
        &corpus,
        &TaskPhaseConfig { step: 1.0, regularize: false, rollouts: 50, candidates: 8 },
        3,
    )
    .unwrap();
    let (_, back) = phase_language(&w, &out.enc, &corpus).unwrap();
    for e in &corpus.episodes {
        assert_eq!(back.encode(e.context, &e.turns).unwrap(), canon.encode(e.context, &e.turns).unwrap());
    }
}

#[test]
fn policy_rows_are_valid_distributions() {
    let w = World::new(cfg(4, 8, 6, 0.3)).unwrap();
    let corpus = sample_goal_corpus(&w, 500, 9);
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let vocab = &w.config().question_vocab;
    for s in 0..enc.n_states() as u32 {
        for step in 0..w.m() {
            let p = policy.row_pmf(s, step, vocab).unwrap();
            let total: f64 = p.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_step_leaves_everything_unchanged() {
    let w = World::new(cfg(3, 8, 6, 0.2)).unwrap();
    let corpus = sample_goal_corpus(&w, 200, 2);
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let guesser = GuesserTable::prior(&w, &enc);
    for regularize in [false, true] {
        let out = phase_task(
            &w,
            &policy,
            &enc,
            &guesser,
            &corpus,
            &TaskPhaseConfig { step: 0.0, regularize, rollouts: 100, candidates: 4 },
            1,
        )
        .unwrap();
        assert_eq!(out.enc, enc);
        assert_eq!(out.guesser, guesser);
        assert_eq!(out.moves, 0);
    }
}

#[test]
fn task_phase_never_worsens_its_objective() {
    let w = World::new(cfg(3, 8, 6, 0.2)).unwrap();
    let corpus = sample_goal_corpus(&w, 300, 5);
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    for regularize in [false, true] {
        let out = phase_task(
            &w,
            &policy,
            &enc,
            &GuesserTable::prior(&w, &enc),
            &corpus,
            &TaskPhaseConfig { step: 0.3, regularize, rollouts: 200, candidates: 8 },
            8,
        )
        .unwrap();
        assert!(out.objective_after <= out.objective_before);
        assert!(out.moves > 0);
    }
}

#[test]
fn negative_step_is_rejected() {
    let w = two_object_world(1);
    let corpus = Corpus { episodes: vec![episode(&w, 0, &["is it red"])] };
    let enc = EncoderMap::canonical(&w);
    let policy = TabularPolicy::for_encoder(&w, &enc);
    let e = phase_task(
        &w,
        &policy,
        &enc,
        &GuesserTable::prior(&w, &enc),
        &corpus,
        &TaskPhaseConfig { step: -0.1, regularize: false, rollouts: 1, candidates: 1 },
        0,
    )
    .unwrap_err();
    assert_eq!(e.code(), "invalid-config");
}

/// When generated dialogues coincide with the human ones, the human term
/// duplicates the task term and the regularized update is the same.
#[test]
fn regularizer_is_neutral_when_dialogues_coincide() {
    let objects: Vec<Vec<Object>> = vec![
        vec![[0, 0, 0], [1, 0, 2]],
        vec![[2, 1, 1], [2, 3, 1]],
        vec![[3, 2, 3], [3, 2, 0]],
    ];
    let w = World::from_objects(cfg(3, 2, 1, 0.0), objects).unwrap();
    let corpus = sample_goal_corpus(&w, 60, 7);
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let guesser = GuesserTable::prior(&w, &enc);

    // Precondition: every generated rollout replays its human game.
    for (i, e) in corpus.episodes.iter().enumerate() {
        let r = rollout_with_draws(&w, &policy, &enc, &guesser, e.context, e.goal, &draws(1, i as u64, 1)).unwrap();
        assert_eq!(r.turns, e.turns);
    }

    let run = |regularize| {
        phase_task(
            &w,
            &policy,
            &enc,
            &guesser,
            &corpus,
            &TaskPhaseConfig { step: 1.0, regularize, rollouts: corpus.len(), candidates: 6 },
            21,
        )
        .unwrap()
    };
    let (plain, reg) = (run(false), run(true));
    assert_eq!(plain.enc, reg.enc);
    assert!(plain.moves > 0);
    assert_eq!(plain.moves, reg.moves);
    for s in 0..enc.n_states() as u32 {
        assert_eq!(plain.guesser.guess(s).unwrap(), reg.guesser.guess(s).unwrap());
    }
}

#[test]
fn rollouts_have_exactly_m_turns_and_are_reproducible() {
    let w = World::new(cfg(3, 8, 7, 0.2)).unwrap();
    let corpus = sample_goal_corpus(&w, 100, 2);
    let (policy, enc) = phase_language(&w, &EncoderMap::canonical(&w), &corpus).unwrap();
    let g = GuesserTable::prior(&w, &enc);
    for e in &corpus.episodes {
        assert!(e.turns.len() <= w.m());
        let a = rollout(&w, &policy, &enc, &g, e.context, e.goal, 17).unwrap();
        let b = rollout(&w, &policy, &enc, &g, e.context, e.goal, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.turns.len(), w.m());
    }
}
