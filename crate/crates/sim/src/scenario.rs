//! Scenario files: game, sample sizes, tests and the experiment plans.

use serde::{Deserialize, Serialize};
use tdshift_core::testfns::TestSpec;
use tdshift_core::TestFunction;

use crate::error::Result;
use crate::experiment::SimSettings;
use crate::game::{GameConfig, CATEGORIES, COLORS, POSITIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub magnitudes: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparePlan {
    pub epochs: usize,
    pub step: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "tdshift_core::io::schema_version")]
    pub schema_version: u32,
    pub game: GameConfig,
    #[serde(default)]
    pub settings: SimSettings,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestSpec>,
    pub sweep: SweepPlan,
    pub compare: ComparePlan,
}

/// Strategy proportions for color, spatial and object questions, lexical
/// diversity and question repetition.
pub fn default_tests() -> Vec<TestSpec> {
    let strategy = |name: &str, words: &[&str]| TestSpec::Strategy {
        name: name.into(),
        keywords: words.iter().map(|w| w.to_string()).collect(),
    };
    vec![
        strategy("color", &COLORS),
        strategy("spatial", &POSITIONS),
        strategy("object", &CATEGORIES),
        TestSpec::LexicalDiversity,
        TestSpec::Repetition,
    ]
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: tdshift_core::io::SCHEMA_VERSION,
            game: GameConfig::default(),
            settings: SimSettings::default(),
            tests: default_tests(),
            sweep: SweepPlan {
                magnitudes: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.3],
                seeds: vec![1, 2, 3, 4],
            },
            compare: ComparePlan {
                epochs: 3,
                step: 0.1,
                seeds: (1..=10).collect(),
            },
        }
    }
}

impl Scenario {
    /// Instantiates the configured tests; score-table paths resolve against `base`.
    pub fn build_tests(&self, base: &std::path::Path) -> Result<Vec<Box<dyn TestFunction>>> {
        Ok(self.tests.iter().map(|t| t.build(base)).collect::<tdshift_core::Result<_>>()?)
    }
}
