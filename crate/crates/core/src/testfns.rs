//! Test functions `h : dialogue × noise → [0,1]`.
//!
//! Tokens come from a lowercase whitespace split of each question. Only
//! question tokens are scored; answers are ignored by every built-in.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub q: String,
    pub a: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub context_id: String,
    pub turns: Vec<Turn>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

impl Dialogue {
    pub fn new(id: impl Into<String>, context_id: impl Into<String>, turns: Vec<Turn>) -> Self {
        Self {
            id: id.into(),
            context_id: context_id.into(),
            turns,
        }
    }

    /// Builds a dialogue from `(question, answer)` string pairs.
    pub fn from_pairs(id: &str, context_id: &str, turns: &[(&str, &str)]) -> Self {
        Self::new(
            id,
            context_id,
            turns
                .iter()
                .map(|(q, a)| Turn {
                    q: q.to_string(),
                    a: a.to_string(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn questions(&self) -> Vec<Vec<String>> {
        self.turns.iter().map(|t| tokenize(&t.q)).collect()
    }

    pub fn question_tokens(&self) -> Vec<String> {
        self.turns.iter().flat_map(|t| tokenize(&t.q)).collect()
    }

    /// Checks `1 ≤ P ≤ m` and that no question is blank.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::EmptyDialogue(self.id.clone()));
        }
        if self.turns.len() > m {
            return Err(Error::InvalidParameter(format!(
                "dialogue `{}` has {} turns, more than m = {m}",
                self.id,
                self.turns.len()
            )));
        }
        if self.turns.iter().any(|t| t.q.trim().is_empty()) {
            return Err(Error::EmptyDialogue(self.id.clone()));
        }
        Ok(())
    }
}

/// A value of the noise variable `U`.
#[derive(Debug, Clone, Copy)]
pub struct Noise<'a> {
    pub label: &'a str,
    /// Reference dialogue, for overlap-style tests.
    pub reference: Option<&'a Dialogue>,
}

impl<'a> Noise<'a> {
    pub fn label(label: &'a str) -> Self {
        Self {
            label,
            reference: None,
        }
    }

    pub fn with_reference(label: &'a str, reference: &'a Dialogue) -> Self {
        Self {
            label,
            reference: Some(reference),
        }
    }
}

pub trait TestFunction: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, dialogue: &Dialogue, u: &Noise<'_>) -> Result<f64>;
}

/// Question-type predicate: fires when a question contains any keyword token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordClassifier {
    pub name: String,
    pub keywords: BTreeSet<String>,
}

impl KeywordClassifier {
    pub fn new<I, S>(name: impl Into<String>, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            name: name.into(),
            keywords: keywords.into_iter().map(|k| k.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn matches(&self, question: &[String]) -> bool {
        question.iter().any(|t| self.keywords.contains(t))
    }
}

/// Fraction of questions flagged by a classifier, normalized by the
/// dialogue's own length.
#[derive(Debug, Clone)]
pub struct StrategyProportion {
    name: String,
    pub classifier: KeywordClassifier,
}

pub fn strategy_proportion(classifier: KeywordClassifier) -> StrategyProportion {
    StrategyProportion {
        name: format!("strategy:{}", classifier.name),
        classifier,
    }
}

impl TestFunction for StrategyProportion {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, d: &Dialogue, _u: &Noise<'_>) -> Result<f64> {
        if d.is_empty() {
            return Err(Error::EmptyDialogue(d.id.clone()));
        }
        let hits = d
            .questions()
            .iter()
            .filter(|q| self.classifier.matches(q))
            .count();
        Ok(hits as f64 / d.len() as f64)
    }
}

/// Type/token ratio over question tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalDiversity;

pub fn lexical_diversity() -> LexicalDiversity {
    LexicalDiversity
}

impl TestFunction for LexicalDiversity {
    fn name(&self) -> &str {
        "lexical_diversity"
    }

    fn eval(&self, d: &Dialogue, _u: &Noise<'_>) -> Result<f64> {
        let tokens = d.question_tokens();
        if tokens.is_empty() {
            return Err(Error::EmptyDialogue(d.id.clone()));
        }
        let types: BTreeSet<&String> = tokens.iter().collect();
        Ok(types.len() as f64 / tokens.len() as f64)
    }
}

/// 1 when some question's token sequence occurs twice.
#[derive(Debug, Clone, Copy, Default)]
pub struct RepetitionIndicator;

pub fn repetition_indicator() -> RepetitionIndicator {
    RepetitionIndicator
}

impl TestFunction for RepetitionIndicator {
    fn name(&self) -> &str {
        "repetition"
    }

    fn eval(&self, d: &Dialogue, _u: &Noise<'_>) -> Result<f64> {
        let mut seen = BTreeSet::new();
        let repeated = d.questions().into_iter().any(|q| !seen.insert(q));
        Ok(if repeated { 1.0 } else { 0.0 })
    }
}

/// Clipped unigram precision of question tokens against the reference in `u`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceOverlap;

pub fn reference_overlap() -> ReferenceOverlap {
    ReferenceOverlap
}

fn bag(tokens: Vec<String>) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

impl TestFunction for ReferenceOverlap {
    fn name(&self) -> &str {
        "reference_overlap"
    }

    fn eval(&self, d: &Dialogue, u: &Noise<'_>) -> Result<f64> {
        let reference = u
            .reference
            .ok_or_else(|| Error::MissingReference(self.name().to_string()))?;
        let cand = d.question_tokens();
        if cand.is_empty() {
            return Err(Error::EmptyDialogue(d.id.clone()));
        }
        let refs = bag(reference.question_tokens());
        let matched: usize = bag(cand.clone())
            .iter()
            .map(|(t, &n)| n.min(refs.get(t).copied().unwrap_or(0)))
            .sum();
        Ok((matched as f64 / cand.len() as f64).clamp(0.0, 1.0))
    }
}

/// Externally supplied scores keyed by `(dialogue id, noise label)`, e.g.
/// human annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    name: String,
    scores: BTreeMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new<I>(name: impl Into<String>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let name = name.into();
        let mut scores = BTreeMap::new();
        for (d, u, s) in rows {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidParameter(format!(
                    "score {s} for ({d}, {u}) in `{name}` is outside [0,1]"
                )));
            }
            if scores.insert((d.clone(), u.clone()), s).is_some() {
                return Err(Error::DuplicateLabel(format!("({d}, {u})")));
            }
        }
        Ok(Self { name, scores })
    }

    pub fn get(&self, dialogue: &str, noise: &str) -> Result<f64> {
        self.scores
            .get(&(dialogue.to_string(), noise.to_string()))
            .copied()
            .ok_or_else(|| Error::MissingScore {
                table: self.name.clone(),
                dialogue: dialogue.to_string(),
                noise: noise.to_string(),
            })
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.scores.iter().map(|((d, u), &s)| (d.as_str(), u.as_str(), s))
    }
}

impl TestFunction for ScoreTable {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, d: &Dialogue, u: &Noise<'_>) -> Result<f64> {
        self.get(&d.id, u.label)
    }
}

/// A test evaluated on bare labels, as needed when dialogues are atoms of a
/// joint model.
pub trait LabelTest {
    fn name(&self) -> &str;
    fn score(&self, dialogue: &str, noise: &str) -> Result<f64>;
}

impl LabelTest for ScoreTable {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, dialogue: &str, noise: &str) -> Result<f64> {
        self.get(dialogue, noise)
    }
}

/// Lifts a [`TestFunction`] to labels by resolving them in a dialogue store.
/// The noise label doubles as a reference dialogue id when one exists.
pub struct OnDialogues<'a, T: ?Sized> {
    pub test: &'a T,
    pub dialogues: &'a BTreeMap<String, Dialogue>,
}

impl<T: TestFunction + ?Sized> LabelTest for OnDialogues<'_, T> {
    fn name(&self) -> &str {
        self.test.name()
    }

    fn score(&self, dialogue: &str, noise: &str) -> Result<f64> {
        let d = self
            .dialogues
            .get(dialogue)
            .ok_or_else(|| Error::UnknownDialogue(dialogue.to_string()))?;
        let u = Noise {
            label: noise,
            reference: self.dialogues.get(noise),
        };
        self.test.eval(d, &u)
    }
}

/// Declarative test description used by configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSpec {
    Strategy { name: String, keywords: Vec<String> },
    LexicalDiversity,
    Repetition,
    ReferenceOverlap,
    ScoreTable { name: String, path: String },
}

impl TestSpec {
    /// Instantiates the test; score-table paths resolve against `base`.
    pub fn build(&self, base: &std::path::Path) -> Result<Box<dyn TestFunction>> {
        Ok(match self {
            TestSpec::Strategy { name, keywords } => {
                Box::new(strategy_proportion(KeywordClassifier::new(name.clone(), keywords)))
            }
            TestSpec::LexicalDiversity => Box::new(lexical_diversity()),
            TestSpec::Repetition => Box::new(repetition_indicator()),
            TestSpec::ReferenceOverlap => Box::new(reference_overlap()),
            TestSpec::ScoreTable { name, path } => {
                Box::new(crate::io::read_score_table(name, &base.join(path))?)
            }
        })
    }
}
