//! Tabular question-guessing game for studying environment shift between the
//! two phases of cooperative learning.
//!
//! A questioner asks yes/no questions about attributed objects to find a goal
//! object. The learner has a question generator, a guesser and an encoder
//! shared by both. A language phase fits the generator to human dialogues; a
//! task phase refits the guesser and perturbs the encoder to guess better.
//! Perturbing the encoder changes which generator rows are used, so the
//! distribution of generated dialogues shifts between the phases.

#![forbid(unsafe_code)]

pub mod error;
pub mod experiment;
pub mod game;
pub mod human;
pub mod model;
pub mod scenario;
pub mod training;

pub use error::{Result, SimError};
pub use experiment::{compare_arms, pearson, shift_sweep, Arm, CompareSummary, SimSettings, SweepRow};
pub use game::{AnswerOracle, GameConfig, World};
pub use human::{sample_goal_corpus, Corpus, Episode};
pub use model::{rollout, task_error, EncoderMap, GuesserTable, Rollout, TabularPolicy};
pub use scenario::Scenario;
pub use training::{phase_language, phase_task, TaskOutcome, TaskPhaseConfig};
