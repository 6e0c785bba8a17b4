//! Exact finite probability objects: outcome spaces, mass functions, sample
//! multisets and the enumerable joint model used as ground truth by the bound
//! and oracle modules.
//!
//! Labels are opaque strings kept in lexicographic order, so every vector
//! operation over a space is order-stable across runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ mass = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Ordered set of distinct outcome labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    /// Builds a space from distinct labels. Duplicates are rejected.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLabel(w[0].clone()));
        }
        Ok(Self { labels })
    }

    /// Builds a space from labels, silently merging repeats.
    pub fn from_labels_dedup<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        labels.dedup();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn union(&self, other: &OutcomeSpace) -> OutcomeSpace {
        Self::from_labels_dedup(self.labels.iter().chain(other.labels.iter()).cloned())
    }
}

impl TryFrom<Vec<String>> for OutcomeSpace {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<OutcomeSpace> for Vec<String> {
    fn from(space: OutcomeSpace) -> Self {
        space.labels
    }
}

/// Probability mass function over a finite [`OutcomeSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    space: OutcomeSpace,
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(space: OutcomeSpace, mass: Vec<f64>) -> Result<Self> {
        if space.is_empty() {
            return Err(Error::InvalidPmf("empty outcome space".into()));
        }
        if mass.len() != space.len() {
            return Err(Error::InvalidPmf(format!(
                "{} masses for {} labels",
                mass.len(),
                space.len()
            )));
        }
        for (label, &m) in space.labels.iter().zip(&mass) {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidPmf(format!("mass of `{label}` is {m}")));
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("masses sum to {total}")));
        }
        Ok(Self { space, mass })
    }

    /// Builds a pmf from `(label, mass)` pairs; labels must be distinct.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut pairs: Vec<(String, f64)> = pairs.into_iter().map(|(l, m)| (l.into(), m)).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateLabel(w[0].0.clone()));
        }
        let (labels, mass): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
        Self::new(OutcomeSpace { labels }, mass)
    }

    /// Like [`Pmf::from_pairs`] but rescales the weights to sum to one.
    pub fn from_weights<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let pairs: Vec<(String, f64)> = pairs.into_iter().map(|(l, m)| (l.into(), m)).collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidPmf(format!("weights sum to {total}")));
        }
        Self::from_pairs(pairs.into_iter().map(|(l, w)| (l, w / total)))
    }

    pub fn point_mass(label: impl Into<String>) -> Self {
        Self {
            space: OutcomeSpace {
                labels: vec![label.into()],
            },
            mass: vec![1.0],
        }
    }

    pub fn uniform(space: OutcomeSpace) -> Result<Self> {
        let n = space.len();
        if n == 0 {
            return Err(Error::InvalidPmf("empty outcome space".into()));
        }
        Ok(Self {
            space,
            mass: vec![1.0 / n as f64; n],
        })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Mass of `label`; zero for labels outside the space.
    pub fn mass_of(&self, label: &str) -> f64 {
        self.space.index_of(label).map_or(0.0, |i| self.mass[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.space
            .labels
            .iter()
            .map(String::as_str)
            .zip(self.mass.iter().copied())
    }

    /// Labels with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.iter().filter(|(_, m)| *m > 0.0).map(|(l, _)| l)
    }

    /// Re-expresses the pmf over a superset space, filling zeros.
    pub fn align(&self, space: &OutcomeSpace) -> Result<Pmf> {
        let mut mass = vec![0.0; space.len()];
        for (label, m) in self.iter() {
            match space.index_of(label) {
                Some(i) => mass[i] = m,
                None if m == 0.0 => {}
                None => {
                    return Err(Error::SpaceMismatch(format!(
                        "label `{label}` carries mass {m} but is absent from the target space"
                    )))
                }
            }
        }
        Ok(Pmf {
            space: space.clone(),
            mass,
        })
    }

    /// Pushes the pmf through `f`, summing masses of labels with the same image.
    pub fn pushforward<F>(&self, mut f: F) -> Result<Pmf>
    where
        F: FnMut(&str) -> Result<String>,
    {
        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
        for (label, m) in self.iter() {
            *acc.entry(f(label)?).or_insert(0.0) += m;
        }
        let (labels, mass) = acc.into_iter().unzip();
        Ok(Pmf {
            space: OutcomeSpace { labels },
            mass,
        })
    }

    pub fn total_variation(&self, other: &Pmf) -> f64 {
        let space = self.space.union(&other.space);
        0.5 * space
            .labels()
            .iter()
            .map(|l| (self.mass_of(l) - other.mass_of(l)).abs())
            .sum::<f64>()
    }
}

impl Serialize for Pmf {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.mass.len()))?;
        for (label, m) in self.iter() {
            map.serialize_entry(label, &m)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(deserializer)?;
        Pmf::from_pairs(raw).map_err(serde::de::Error::custom)
    }
}

/// Multiset of observed outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    space: OutcomeSpace,
    counts: Vec<u64>,
    n: u64,
}

impl SampleSet {
    /// Builds a sample set from `(label, count)` pairs; labels must be distinct.
    pub fn from_counts<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut pairs: Vec<(String, u64)> = pairs.into_iter().map(|(l, c)| (l.into(), c)).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateLabel(w[0].0.clone()));
        }
        let (labels, counts): (Vec<String>, Vec<u64>) = pairs.into_iter().unzip();
        let n = counts.iter().sum();
        Ok(Self {
            space: OutcomeSpace { labels },
            counts,
            n,
        })
    }

    /// Tallies a stream of observed labels.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tally: BTreeMap<String, u64> = BTreeMap::new();
        for l in labels {
            *tally.entry(l.into()).or_insert(0) += 1;
        }
        let n = tally.values().sum();
        let (labels, counts) = tally.into_iter().unzip();
        Self {
            space: OutcomeSpace { labels },
            counts,
            n,
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count_of(&self, label: &str) -> u64 {
        self.space.index_of(label).map_or(0, |i| self.counts[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.space
            .labels
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
    }

    /// Relabels every observation through `f`, merging counts of equal images.
    pub fn pushforward<F>(&self, mut f: F) -> Result<SampleSet>
    where
        F: FnMut(&str) -> Result<String>,
    {
        let mut acc: BTreeMap<String, u64> = BTreeMap::new();
        for (label, c) in self.iter() {
            *acc.entry(f(label)?).or_insert(0) += c;
        }
        let (labels, counts) = acc.into_iter().unzip();
        Ok(SampleSet {
            space: OutcomeSpace { labels },
            counts,
            n: self.n,
        })
    }
}

/// Empirical pmf `counts(x) / n`.
pub fn pmf_from_samples(s: &SampleSet) -> Result<Pmf> {
    if s.n == 0 {
        return Err(Error::EmptySample);
    }
    let n = s.n as f64;
    Ok(Pmf {
        space: s.space.clone(),
        mass: s.counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Draws `n` outcomes from `p` by inverse CDF over the canonical label order.
pub fn sample(p: &Pmf, n: u64, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cdf = Vec::with_capacity(p.mass.len());
    let mut acc = 0.0;
    for &m in &p.mass {
        acc += m;
        cdf.push(acc);
    }
    // Last positive-mass index absorbs rounding at the top of the CDF.
    let last = p.mass.iter().rposition(|&m| m > 0.0).unwrap_or(0);
    let mut counts = vec![0u64; p.mass.len()];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(last);
        counts[idx] += 1;
    }
    SampleSet {
        space: p.space.clone(),
        counts,
        n,
    }
}

/// Exact joint distribution over (context, human dialogue, generated dialogue
/// under the target environment, generated dialogue under the source
/// environment, noise).
///
/// Conditionals are stored row-aligned to a shared dialogue space. The noise
/// variable is independent of everything else by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    contexts: Pmf,
    dialogues: OutcomeSpace,
    human: Vec<Vec<f64>>,
    gen1: Vec<Vec<f64>>,
    gen2: Vec<Vec<f64>>,
    noise: Pmf,
}

/// One atom of [`enumerate_joint`], as indices into the model's spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTuple {
    pub context: usize,
    pub human: usize,
    pub gen1: usize,
    pub gen2: usize,
    pub noise: usize,
    pub probability: f64,
}

impl JointModel {
    pub fn new(
        contexts: Pmf,
        human: BTreeMap<String, Pmf>,
        gen1: BTreeMap<String, Pmf>,
        gen2: BTreeMap<String, Pmf>,
        noise: Pmf,
    ) -> Result<Self> {
        let mut dialogues = OutcomeSpace::default();
        for (name, rows) in [("human", &human), ("gen1", &gen1), ("gen2", &gen2)] {
            if let Some(extra) = rows.keys().find(|c| !contexts.space().contains(c)) {
                return Err(Error::InvalidJoint(format!(
                    "{name} has a row for unknown context `{extra}`"
                )));
            }
            for row in rows.values() {
                dialogues = dialogues.union(row.space());
            }
        }
        let align = |name: &str, rows: &BTreeMap<String, Pmf>| -> Result<Vec<Vec<f64>>> {
            contexts
                .space()
                .labels()
                .iter()
                .map(|c| {
                    let row = rows.get(c).ok_or_else(|| {
                        Error::InvalidJoint(format!("{name} has no row for context `{c}`"))
                    })?;
                    Ok(row.align(&dialogues)?.masses().to_vec())
                })
                .collect()
        };
        Ok(Self {
            human: align("human", &human)?,
            gen1: align("gen1", &gen1)?,
            gen2: align("gen2", &gen2)?,
            dialogues,
            contexts,
            noise,
        })
    }

    pub fn contexts(&self) -> &Pmf {
        &self.contexts
    }

    pub fn dialogues(&self) -> &OutcomeSpace {
        &self.dialogues
    }

    pub fn noise(&self) -> &Pmf {
        &self.noise
    }

    /// `p(d | c)` for the human dialogue, aligned to [`JointModel::dialogues`].
    pub fn human_row(&self, context: usize) -> &[f64] {
        &self.human[context]
    }

    pub fn gen1_row(&self, context: usize) -> &[f64] {
        &self.gen1[context]
    }

    pub fn gen2_row(&self, context: usize) -> &[f64] {
        &self.gen2[context]
    }

    fn marginal(&self, rows: &[Vec<f64>]) -> Pmf {
        let mut mass = vec![0.0; self.dialogues.len()];
        for (w, row) in self.contexts.masses().iter().zip(rows) {
            for (m, p) in mass.iter_mut().zip(row) {
                *m += w * p;
            }
        }
        Pmf {
            space: self.dialogues.clone(),
            mass,
        }
    }

    pub fn human_marginal(&self) -> Pmf {
        self.marginal(&self.human)
    }

    pub fn gen1_marginal(&self) -> Pmf {
        self.marginal(&self.gen1)
    }

    pub fn gen2_marginal(&self) -> Pmf {
        self.marginal(&self.gen2)
    }

    /// Visits every atom `(c, d, d̃₁, d̃₂, u)` in canonical order, including
    /// zero-probability atoms.
    pub fn for_each_tuple<F: FnMut(JointTuple)>(&self, mut f: F) {
        let nd = self.dialogues.len();
        for (c, &wc) in self.contexts.masses().iter().enumerate() {
            for d in 0..nd {
                let pd = wc * self.human[c][d];
                for d1 in 0..nd {
                    let p1 = pd * self.gen1[c][d1];
                    for d2 in 0..nd {
                        let p2 = p1 * self.gen2[c][d2];
                        for (u, &pu) in self.noise.masses().iter().enumerate() {
                            f(JointTuple {
                                context: c,
                                human: d,
                                gen1: d1,
                                gen2: d2,
                                noise: u,
                                probability: p2 * pu,
                            });
                        }
                    }
                }
            }
        }
    }
}

/// Lists every atom of the joint with its probability.
pub fn enumerate_joint(j: &JointModel) -> Vec<JointTuple> {
    let mut out = Vec::new();
    j.for_each_tuple(|t| out.push(t));
    out
}

/// On-disk form of a [`JointModel`]: nested maps keyed by label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointModelFile {
    #[serde(default = "crate::io::schema_version")]
    pub schema_version: u32,
    pub contexts: BTreeMap<String, f64>,
    pub human: BTreeMap<String, BTreeMap<String, f64>>,
    pub gen1: BTreeMap<String, BTreeMap<String, f64>>,
    pub gen2: BTreeMap<String, BTreeMap<String, f64>>,
    pub noise: BTreeMap<String, f64>,
}

impl TryFrom<JointModelFile> for JointModel {
    type Error = Error;

    fn try_from(f: JointModelFile) -> Result<Self> {
        let pmf = |what: String, m: BTreeMap<String, f64>| {
            Pmf::from_pairs(m).map_err(|e| Error::InvalidJoint(format!("{what}: {e}")))
        };
        let rows = |name: &str, rows: BTreeMap<String, BTreeMap<String, f64>>| {
            rows.into_iter()
                .map(|(c, m)| Ok((c.clone(), pmf(format!("{name}[{c}]"), m)?)))
                .collect::<Result<BTreeMap<_, _>>>()
        };
        JointModel::new(
            pmf("contexts".into(), f.contexts)?,
            rows("human", f.human)?,
            rows("gen1", f.gen1)?,
            rows("gen2", f.gen2)?,
            pmf("noise".into(), f.noise)?,
        )
    }
}

impl From<&JointModel> for JointModelFile {
    fn from(j: &JointModel) -> Self {
        let to_map = |p: &Pmf| p.iter().map(|(l, m)| (l.to_string(), m)).collect();
        let rows = |rows: &[Vec<f64>]| {
            j.contexts
                .space()
                .labels()
                .iter()
                .zip(rows)
                .map(|(c, row)| {
                    let m = j
                        .dialogues
                        .labels()
                        .iter()
                        .zip(row)
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(d, &p)| (d.clone(), p))
                        .collect();
                    (c.clone(), m)
                })
                .collect()
        };
        Self {
            schema_version: crate::io::SCHEMA_VERSION,
            contexts: to_map(&j.contexts),
            human: rows(&j.human),
            gen1: rows(&j.gen1),
            gen2: rows(&j.gen2),
            noise: to_map(&j.noise),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn space_is_sorted_and_rejects_duplicates() {
        let s = OutcomeSpace::new(["b", "a", "c"]).unwrap();
        assert_eq!(s.labels(), ["a", "b", "c"]);
        assert_eq!(s.index_of("c"), Some(2));
        assert!(matches!(
            OutcomeSpace::new(["a", "a"]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::from_pairs([("a", 0.5), ("b", 0.4)]).is_err());
        assert!(Pmf::from_pairs([("a", 1.5), ("b", -0.5)]).is_err());
        assert!(Pmf::from_pairs([("a", 0.1), ("b", 0.2), ("c", 0.7)]).is_ok());
        let err = Pmf::new(OutcomeSpace::new(["a"]).unwrap(), vec![0.5, 0.5]).unwrap_err();
        assert_eq!(err.code(), "invalid-pmf");
    }

    #[test]
    fn pmf_from_samples_examples() {
        let p = pmf_from_samples(&SampleSet::from_counts([("a", 2)]).unwrap()).unwrap();
        assert_eq!(p, Pmf::point_mass("a"));

        let p = pmf_from_samples(&SampleSet::from_counts([("a", 1), ("b", 1)]).unwrap()).unwrap();
        assert_eq!(p.masses(), [0.5, 0.5]);

        let p = pmf_from_samples(&SampleSet::from_counts([("a", 3), ("b", 1)]).unwrap()).unwrap();
        assert_eq!(p.masses(), [3.0 / 4.0, 1.0 / 4.0]);
        assert_eq!(p.masses(), [0.75, 0.25]);

        let empty = SampleSet::from_counts(Vec::<(String, u64)>::new()).unwrap();
        assert_eq!(pmf_from_samples(&empty).unwrap_err().code(), "empty-sample");
    }

    #[test]
    fn sample_degenerate_and_deterministic() {
        let s = sample(&Pmf::point_mass("a"), 5, 7);
        assert_eq!(s.count_of("a"), 5);
        assert_eq!(s.n(), 5);

        let p = Pmf::from_pairs([("a", 0.5), ("b", 0.5)]).unwrap();
        assert_eq!(sample(&p, 1000, 3), sample(&p, 1000, 3));
        assert_ne!(sample(&p, 1000, 3), sample(&p, 1000, 4));
    }

    #[test]
    fn sample_fair_coin_concentrates() {
        // Hoeffding: P(|p̂ − ½| > 0.02) ≤ 2·exp(−2·10⁵·0.02²) ≈ 1e-35.
        let p = Pmf::from_pairs([("a", 0.5), ("b", 0.5)]).unwrap();
        for seed in 0..3 {
            let q = pmf_from_samples(&sample(&p, 100_000, seed)).unwrap();
            assert!((q.mass_of("a") - 0.5).abs() < 0.02);
            assert!((q.mass_of("b") - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn sample_skips_zero_mass_labels() {
        let p = Pmf::from_pairs([("a", 0.0), ("b", 1.0), ("c", 0.0)]).unwrap();
        let s = sample(&p, 1000, 1);
        assert_eq!(s.count_of("b"), 1000);
    }

    fn rows(pairs: &[(&str, &[(&str, f64)])]) -> BTreeMap<String, Pmf> {
        pairs
            .iter()
            .map(|(c, r)| (c.to_string(), Pmf::from_pairs(r.iter().copied()).unwrap()))
            .collect()
    }

    #[test]
    fn enumerate_single_context_point_masses() {
        let j = JointModel::new(
            Pmf::point_mass("c"),
            rows(&[("c", &[("d", 1.0)])]),
            rows(&[("c", &[("d", 1.0)])]),
            rows(&[("c", &[("d", 1.0)])]),
            Pmf::point_mass("u"),
        )
        .unwrap();
        let t = enumerate_joint(&j);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].probability, 1.0);
    }

    #[test]
    fn enumerate_two_contexts_point_masses() {
        let j = JointModel::new(
            Pmf::from_pairs([("c1", 0.5), ("c2", 0.5)]).unwrap(),
            rows(&[("c1", &[("x", 1.0)]), ("c2", &[("y", 1.0)])]),
            rows(&[("c1", &[("x", 1.0)]), ("c2", &[("y", 1.0)])]),
            rows(&[("c1", &[("x", 1.0)]), ("c2", &[("y", 1.0)])]),
            Pmf::point_mass("u"),
        )
        .unwrap();
        let positive: Vec<_> = enumerate_joint(&j)
            .into_iter()
            .filter(|t| t.probability > 0.0)
            .collect();
        assert_eq!(positive.len(), 2);
        assert!(positive.iter().all(|t| t.probability == 0.5));
    }

    #[test]
    fn enumerate_mixed_example_has_32_atoms() {
        let j = JointModel::new(
            Pmf::from_pairs([("c1", 0.3), ("c2", 0.7)]).unwrap(),
            rows(&[("c1", &[("x", 0.2), ("y", 0.8)]), ("c2", &[("x", 0.6), ("y", 0.4)])]),
            rows(&[("c1", &[("x", 0.5), ("y", 0.5)]), ("c2", &[("x", 0.9), ("y", 0.1)])]),
            rows(&[("c1", &[("x", 0.25), ("y", 0.75)]), ("c2", &[("x", 0.1), ("y", 0.9)])]),
            Pmf::from_pairs([("u1", 0.4), ("u2", 0.6)]).unwrap(),
        )
        .unwrap();
        let t = enumerate_joint(&j);
        assert_eq!(t.len(), 32);
        let total: f64 = t.iter().map(|t| t.probability).sum();
        assert!(approx(total, 1.0));
        // Product form, spot-checked by hand: c2, d=x, d̃₁=y, d̃₂=y, u2.
        let atom = t
            .iter()
            .find(|t| (t.context, t.human, t.gen1, t.gen2, t.noise) == (1, 0, 1, 1, 1))
            .unwrap();
        assert!(approx(atom.probability, 0.7 * 0.6 * 0.1 * 0.9 * 0.6));
    }

    #[test]
    fn joint_rejects_bad_rows() {
        let file: JointModelFile = serde_json::from_str(
            r#"{"contexts":{"c":1.0},"human":{"c":{"d":0.9}},"gen1":{"c":{"d":1.0}},
                "gen2":{"c":{"d":1.0}},"noise":{"u":1.0}}"#,
        )
        .unwrap();
        assert_eq!(JointModel::try_from(file).unwrap_err().code(), "invalid-joint");

        let file: JointModelFile = serde_json::from_str(
            r#"{"contexts":{"c":1.0},"human":{"c":{"d":1.0}},"gen1":{},
                "gen2":{"c":{"d":1.0}},"noise":{"u":1.0}}"#,
        )
        .unwrap();
        assert_eq!(JointModel::try_from(file).unwrap_err().code(), "invalid-joint");
    }

    #[test]
    fn joint_file_roundtrip() {
        let text = r#"{"contexts":{"c1":0.25,"c2":0.75},
            "human":{"c1":{"a":1.0},"c2":{"b":0.5,"c":0.5}},
            "gen1":{"c1":{"a":0.5,"b":0.5},"c2":{"c":1.0}},
            "gen2":{"c1":{"a":1.0},"c2":{"b":1.0}},
            "noise":{"u1":0.5,"u2":0.5}}"#;
        let j = JointModel::try_from(serde_json::from_str::<JointModelFile>(text).unwrap()).unwrap();
        assert_eq!(j.dialogues().labels(), ["a", "b", "c"]);
        let back = JointModel::try_from(JointModelFile::from(&j)).unwrap();
        assert_eq!(back, j);
        let m = j.gen1_marginal();
        assert!(approx(m.mass_of("a"), 0.125));
        assert!(approx(m.mass_of("c"), 0.75));
    }
}
