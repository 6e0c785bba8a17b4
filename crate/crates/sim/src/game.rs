//! Game world: contexts of attributed objects, the question vocabulary and
//! the answer rule.
//!
//! Every object carries a color, a position and a category. A question asks
//! about one attribute value (`is it red`, `is it on the left`, `is it a dog`)
//! or is filler that reveals nothing. The attribute is read off the last token
//! of the question, so custom vocabularies only need to end in a known value.

use rand::Rng;
use serde::{Deserialize, Serialize};
use tdshift_core::oracle::trial_rng;
use tdshift_core::testfns::tokenize;
use tdshift_core::OutcomeSpace;

use crate::error::{Result, SimError};

pub const COLORS: [&str; 4] = ["red", "blue", "green", "white"];
pub const POSITIONS: [&str; 4] = ["left", "right", "middle", "back"];
pub const CATEGORIES: [&str; 4] = ["car", "person", "dog", "cup"];

const ATTRIBUTES: [&[&str; 4]; 3] = [&COLORS, &POSITIONS, &CATEGORIES];

/// Largest supported number of objects per context (candidate sets are bit masks).
pub const MAX_OBJECTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Na,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Na => "na",
        }
    }

    /// Column of the encoder transition table. Filler questions only ever
    /// receive `Na`, attribute questions only `Yes`/`No`, so two slots suffice.
    pub fn slot(self) -> usize {
        match self {
            Answer::Yes | Answer::Na => 0,
            Answer::No => 1,
        }
    }

    fn code(self) -> char {
        match self {
            Answer::Yes => 'y',
            Answer::No => 'n',
            Answer::Na => 'a',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuestionKind {
    Attribute { attr: usize, value: u8 },
    Filler,
}

pub fn parse_question(text: &str) -> QuestionKind {
    let tokens = tokenize(text);
    let Some(last) = tokens.last() else {
        return QuestionKind::Filler;
    };
    for (attr, values) in ATTRIBUTES.iter().enumerate() {
        if let Some(v) = values.iter().position(|v| v == last) {
            return QuestionKind::Attribute { attr, value: v as u8 };
        }
    }
    QuestionKind::Filler
}

/// Twelve attribute questions plus two filler questions.
pub fn default_vocab() -> OutcomeSpace {
    let mut qs: Vec<String> = Vec::new();
    qs.extend(COLORS.iter().map(|c| format!("is it {c}")));
    qs.extend(["left", "right"].iter().map(|p| format!("is it on the {p}")));
    qs.extend(["middle", "back"].iter().map(|p| format!("is it in the {p}")));
    qs.extend(CATEGORIES.iter().map(|c| format!("is it a {c}")));
    qs.push("can you see it".into());
    qs.push("is it in the picture".into());
    OutcomeSpace::new(qs).expect("default vocabulary is duplicate-free")
}

fn default_m() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n_contexts: usize,
    pub n_objects_per_context: usize,
    #[serde(default = "default_vocab")]
    pub question_vocab: OutcomeSpace,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: u64,
    /// Probability that the scripted human asks a uniformly random question
    /// instead of the most informative one.
    #[serde(default)]
    pub human_noise: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            n_contexts: 10,
            n_objects_per_context: 8,
            question_vocab: default_vocab(),
            m: 8,
            seed: 0,
            human_noise: 0.2,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_contexts == 0 {
            return bad("n_contexts must be at least 1".into());
        }
        if self.n_objects_per_context == 0 || self.n_objects_per_context > MAX_OBJECTS {
            return bad(format!(
                "n_objects_per_context must lie in 1..={MAX_OBJECTS}, got {}",
                self.n_objects_per_context
            ));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.question_vocab.is_empty() {
            return bad("question_vocab is empty".into());
        }
        if !(0.0..=1.0).contains(&self.human_noise) {
            return bad(format!("human_noise {} is outside [0, 1]", self.human_noise));
        }
        Ok(())
    }
}

/// Attribute values of one object: color, position, category.
pub type Object = [u8; 3];

/// The answer-player: a total, deterministic rule from
/// (context, goal object, question) to an answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerOracle {
    kinds: Vec<QuestionKind>,
    objects: Vec<Vec<Object>>,
}

impl AnswerOracle {
    pub fn answer(&self, context: usize, goal: usize, q: usize) -> Answer {
        match self.kinds[q] {
            QuestionKind::Filler => Answer::Na,
            QuestionKind::Attribute { attr, value } => {
                if self.objects[context][goal][attr] == value {
                    Answer::Yes
                } else {
                    Answer::No
                }
            }
        }
    }

    /// Objects of `context` that would have produced `answer` to `q`.
    pub fn consistent(&self, context: usize, q: usize, answer: Answer) -> u64 {
        let mut mask = 0u64;
        for o in 0..self.objects[context].len() {
            if self.answer(context, o, q) == answer {
                mask |= 1 << o;
            }
        }
        mask
    }
}

/// A fixed game instance: the config plus the drawn contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    cfg: GameConfig,
    oracle: AnswerOracle,
}

impl World {
    /// Draws every object's attributes uniformly from `cfg.seed`.
    pub fn new(cfg: GameConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = trial_rng(cfg.seed, 0);
        let objects = (0..cfg.n_contexts)
            .map(|_| {
                (0..cfg.n_objects_per_context)
                    .map(|_| [0u8; 3].map(|_| rng.random_range(0..4u8)))
                    .collect()
            })
            .collect();
        Self::from_objects(cfg, objects)
    }

    /// Builds a world from explicit objects; counts in `cfg` must match.
    pub fn from_objects(cfg: GameConfig, objects: Vec<Vec<Object>>) -> Result<Self> {
        cfg.validate()?;
        if objects.len() != cfg.n_contexts
            || objects.iter().any(|o| o.len() != cfg.n_objects_per_context)
        {
            return Err(SimError::InvalidConfig(
                "object table does not match n_contexts × n_objects_per_context".into(),
            ));
        }
        if objects.iter().flatten().flatten().any(|&v| v >= 4) {
            return Err(SimError::InvalidConfig("attribute values must lie in 0..4".into()));
        }
        let kinds = cfg.question_vocab.labels().iter().map(|q| parse_question(q)).collect();
        Ok(Self {
            oracle: AnswerOracle { kinds, objects },
            cfg,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn oracle(&self) -> &AnswerOracle {
        &self.oracle
    }

    pub fn m(&self) -> usize {
        self.cfg.m
    }

    pub fn n_contexts(&self) -> usize {
        self.cfg.n_contexts
    }

    pub fn n_objects(&self) -> usize {
        self.cfg.n_objects_per_context
    }

    pub fn n_questions(&self) -> usize {
        self.cfg.question_vocab.len()
    }

    pub fn question(&self, q: usize) -> &str {
        self.cfg.question_vocab.label(q)
    }

    pub fn kind(&self, q: usize) -> QuestionKind {
        self.oracle.kinds[q]
    }

    pub fn objects(&self, context: usize) -> &[Object] {
        &self.oracle.objects[context]
    }

    pub fn full_mask(&self) -> u64 {
        if self.n_objects() == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_objects()) - 1
        }
    }

    pub fn answer(&self, context: usize, goal: usize, q: usize) -> Answer {
        self.oracle.answer(context, goal, q)
    }
}

pub fn context_id(context: usize) -> String {
    format!("ctx{context}")
}

/// Compact label of a question/answer sequence, e.g. `3y.7n.12a`.
pub fn turns_label(turns: &[(usize, Answer)]) -> String {
    let mut s = String::with_capacity(turns.len() * 4);
    for (i, (q, a)) in turns.iter().enumerate() {
        if i > 0 {
            s.push('.');
        }
        s.push_str(&q.to_string());
        s.push(a.code());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn questions_parse_by_last_token() {
        assert_eq!(parse_question("is it red"), QuestionKind::Attribute { attr: 0, value: 0 });
        assert_eq!(
            parse_question("Is it in the BACK"),
            QuestionKind::Attribute { attr: 1, value: 3 }
        );
        assert_eq!(parse_question("is it a cup"), QuestionKind::Attribute { attr: 2, value: 3 });
        assert_eq!(parse_question("can you see it"), QuestionKind::Filler);
        assert_eq!(parse_question(""), QuestionKind::Filler);
    }

    #[test]
    fn default_vocab_has_fourteen_questions() {
        let v = default_vocab();
        assert_eq!(v.len(), 14);
        let fillers = v.labels().iter().filter(|q| parse_question(q) == QuestionKind::Filler).count();
        assert_eq!(fillers, 2);
    }

    #[test]
    fn config_validation() {
        let ok = GameConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GameConfig { n_contexts: 0, ..ok.clone() },
            GameConfig { n_objects_per_context: 65, ..ok.clone() },
            GameConfig { m: 0, ..ok.clone() },
            GameConfig { human_noise: 1.5, ..ok.clone() },
        ] {
            assert_eq!(bad.validate().unwrap_err().code(), "invalid-config");
        }
    }

    #[test]
    fn oracle_answers_and_consistency() {
        let cfg = GameConfig { n_contexts: 1, n_objects_per_context: 2, ..GameConfig::default() };
        let w = World::from_objects(cfg, vec![vec![[0, 0, 0], [1, 0, 0]]]).unwrap();
        let red = w.config().question_vocab.index_of("is it red").unwrap();
        let see = w.config().question_vocab.index_of("can you see it").unwrap();
        assert_eq!(w.answer(0, 0, red), Answer::Yes);
        assert_eq!(w.answer(0, 1, red), Answer::No);
        assert_eq!(w.answer(0, 1, see), Answer::Na);
        assert_eq!(w.oracle().consistent(0, red, Answer::Yes), 0b01);
        assert_eq!(w.oracle().consistent(0, red, Answer::No), 0b10);
        assert_eq!(w.oracle().consistent(0, see, Answer::Na), 0b11);
    }

    #[test]
    fn world_is_reproducible() {
        let a = World::new(GameConfig::default()).unwrap();
        let b = World::new(GameConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = World::new(GameConfig { seed: 1, ..GameConfig::default() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_are_compact() {
        assert_eq!(turns_label(&[(3, Answer::Yes), (12, Answer::Na)]), "3y.12a");
        assert_eq!(turns_label(&[]), "");
    }
}
