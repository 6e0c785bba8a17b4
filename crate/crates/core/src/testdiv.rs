//! Test divergence between paired human and generated dialogues:
//! `TD^ℓ = E|h_ℓ(D, U) − h_ℓ(D̂, U)|`, summed over tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfns::{Dialogue, Noise, TestFunction};

fn unit_weight() -> f64 {
    1.0
}

/// One `(C, D, D̂, U)` draw. The noise value also carries the human dialogue
/// as the reference for overlap-style tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedItem {
    pub context_id: String,
    pub human: Dialogue,
    pub generated: Dialogue,
    pub u: String,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

impl PairedItem {
    pub fn new(human: Dialogue, generated: Dialogue, u: impl Into<String>) -> Self {
        Self {
            context_id: human.context_id.clone(),
            human,
            generated,
            u: u.into(),
            weight: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.human.context_id != self.context_id || self.generated.context_id != self.context_id {
            return Err(Error::InvalidParameter(format!(
                "pair in context `{}` holds dialogues from contexts `{}` and `{}`",
                self.context_id, self.human.context_id, self.generated.context_id
            )));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidParameter(format!("weight {} is invalid", self.weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TDReport {
    #[serde(default = "crate::io::schema_version")]
    pub schema_version: u32,
    pub per_test: BTreeMap<String, f64>,
    pub total: f64,
    pub n_pairs: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TDChange {
    pub per_test: BTreeMap<String, f64>,
    pub total: f64,
}

/// Weighted mean gap per test over the pairs on which every test succeeds.
pub fn test_divergence(corpus: &[PairedItem], tests: &[&dyn TestFunction]) -> Result<TDReport> {
    let mut names = BTreeSet::new();
    for t in tests {
        if !names.insert(t.name()) {
            return Err(Error::DuplicateLabel(t.name().to_string()));
        }
    }
    let mut sums = vec![0.0; tests.len()];
    let mut weight = 0.0;
    let mut n_pairs = 0;
    let mut skipped = 0;
    for item in corpus {
        item.check()?;
        let u = Noise::with_reference(&item.u, &item.human);
        let gaps: Result<Vec<f64>> = tests
            .iter()
            .map(|t| Ok((t.eval(&item.human, &u)? - t.eval(&item.generated, &u)?).abs()))
            .collect();
        match gaps {
            Ok(gaps) => {
                for (s, g) in sums.iter_mut().zip(gaps) {
                    *s += item.weight * g;
                }
                weight += item.weight;
                n_pairs += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    if n_pairs == 0 || weight <= 0.0 {
        return Err(Error::NoValidPairs { skipped });
    }
    let per_test: BTreeMap<String, f64> = tests
        .iter()
        .zip(&sums)
        .map(|(t, s)| (t.name().to_string(), s / weight))
        .collect();
    let total = per_test.values().sum();
    Ok(TDReport {
        schema_version: crate::io::SCHEMA_VERSION,
        per_test,
        total,
        n_pairs,
        skipped,
    })
}

/// `target − source`, per test and in total.
pub fn td_change(source: &TDReport, target: &TDReport) -> Result<TDChange> {
    if source.per_test.keys().ne(target.per_test.keys()) {
        return Err(Error::TestMismatch(format!(
            "{:?} vs {:?}",
            source.per_test.keys().collect::<Vec<_>>(),
            target.per_test.keys().collect::<Vec<_>>()
        )));
    }
    let per_test: BTreeMap<String, f64> = source
        .per_test
        .iter()
        .map(|(k, s)| (k.clone(), target.per_test[k] - s))
        .collect();
    Ok(TDChange {
        total: target.total - source.total,
        per_test,
    })
}
