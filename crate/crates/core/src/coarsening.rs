//! k-means coarsening of dialogue embeddings.
//!
//! A fitted [`CoarseningFunction`] maps each dialogue id to a cluster and each
//! cluster to a representative dialogue, so `c(𝒟) ⊂ 𝒟`. Unseen vectors go to
//! the nearest centroid.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::SampleSet;
use crate::energy::{energy_estimate, Coarsening, EnergyValue};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const DISPLACEMENT_TOL: f64 = 1e-8;

/// Dialogue ids with equal-dimension real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut dim = None;
        for (id, v) in &rows {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateLabel(id.clone()));
            }
            if v.is_empty() {
                return Err(Error::InvalidEmbedding {
                    id: id.clone(),
                    reason: "empty vector".into(),
                });
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidEmbedding {
                    id: id.clone(),
                    reason: format!("component {i} is {}", v[i]),
                });
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::DimMismatch {
                        expected: d,
                        got: v.len(),
                    })
                }
                Some(_) => {}
            }
        }
        let (ids, vectors) = rows.into_iter().unzip();
        Ok(Self {
            ids,
            vectors,
            dim: dim.unwrap_or(0),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance; ties go low.
fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Fitted k-means coarsening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseningFunction {
    #[serde(default = "crate::io::schema_version")]
    pub schema_version: u32,
    /// Cluster budget actually used.
    pub k: usize,
    /// Set when the requested `k` exceeded the number of points.
    pub k_reduced: bool,
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
    /// One dialogue id per cluster, a member of that cluster.
    pub representatives: Vec<String>,
    pub assignment: BTreeMap<String, usize>,
    /// Within-cluster SSE after each assignment step.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn kmeans_pp(table: &EmbeddingTable, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let points = table.vectors();
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // Every remaining point coincides with a centroid: no further seed adds anything.
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = points[pick].clone();
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points.par_iter().map(|p| nearest(p, centroids)).collect()
}

/// Drops clusters with no members and renumbers the survivors in order.
fn drop_empty(centroids: &mut Vec<Vec<f64>>, labels: &mut [(usize, f64)]) {
    let mut used = vec![false; centroids.len()];
    for &(j, _) in labels.iter() {
        used[j] = true;
    }
    if used.iter().all(|&u| u) {
        return;
    }
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut next = 0;
    for (j, &u) in used.iter().enumerate() {
        if u {
            remap[j] = next;
            next += 1;
        }
    }
    let mut j = 0;
    centroids.retain(|_| {
        j += 1;
        used[j - 1]
    });
    for l in labels.iter_mut() {
        l.0 = remap[l.0];
    }
}

fn means(points: &[Vec<f64>], labels: &[(usize, f64)], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &(j, _)) in points.iter().zip(labels) {
        counts[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for x in s.iter_mut() {
            *x /= n as f64;
        }
    }
    sums
}

/// Lloyd's algorithm with k-means++ seeding, deterministic given `seed`.
pub fn fit_kmeans(table: &EmbeddingTable, k: usize, seed: u64) -> Result<CoarseningFunction> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if table.is_empty() {
        return Err(Error::EmptySample);
    }
    let k_reduced = k > table.len();
    let k = k.min(table.len());
    let points = table.vectors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(table, k, &mut rng);
    let mut sse_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut labels = assign_all(points, &centroids);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        sse_trace.push(labels.iter().map(|l| l.1).sum());
        drop_empty(&mut centroids, &mut labels);
        let updated = means(points, &labels, centroids.len(), table.dim());
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        labels = assign_all(points, &centroids);
        if shift <= DISPLACEMENT_TOL {
            converged = true;
            break;
        }
    }
    drop_empty(&mut centroids, &mut labels);

    let mut representatives: Vec<Option<(f64, &str)>> = vec![None; centroids.len()];
    for (id, (p, &(j, _))) in table.ids().iter().zip(points.iter().zip(&labels)) {
        let d = sq_dist(p, &centroids[j]);
        let better = match representatives[j] {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && id.as_str() < bid),
        };
        if better {
            representatives[j] = Some((d, id));
        }
    }
    let representatives = representatives
        .into_iter()
        .map(|r| r.expect("clusters are nonempty").1.to_string())
        .collect();
    let assignment = table
        .ids()
        .iter()
        .cloned()
        .zip(labels.iter().map(|l| l.0))
        .collect();
    Ok(CoarseningFunction {
        schema_version: crate::io::SCHEMA_VERSION,
        k,
        k_reduced,
        dim: table.dim(),
        centroids,
        representatives,
        assignment,
        sse_trace,
        iterations,
        converged,
    })
}

/// Nearest-centroid cluster of an arbitrary vector; ties go to the lower index.
pub fn assign(c: &CoarseningFunction, v: &[f64]) -> Result<usize> {
    if v.len() != c.dim {
        return Err(Error::DimMismatch {
            expected: c.dim,
            got: v.len(),
        });
    }
    Ok(nearest(v, &c.centroids).0)
}

impl CoarseningFunction {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn cluster_of(&self, id: &str) -> Result<usize> {
        self.assignment
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownDialogue(id.to_string()))
    }

    /// Assigns unseen ids by nearest centroid, leaving fitted ids untouched.
    pub fn extend(&mut self, table: &EmbeddingTable) -> Result<()> {
        for (id, v) in table.ids().iter().zip(table.vectors()) {
            if !self.assignment.contains_key(id) {
                let j = assign(self, v)?;
                self.assignment.insert(id.clone(), j);
            }
        }
        Ok(())
    }

    /// Labels clusters by index instead of representative.
    pub fn by_index(&self) -> ClusterIndex<'_> {
        ClusterIndex(self)
    }

    /// Total within-cluster SSE of `table` under the fitted centroids.
    pub fn sse(&self, table: &EmbeddingTable) -> Result<f64> {
        table
            .ids()
            .iter()
            .zip(table.vectors())
            .map(|(id, v)| Ok(sq_dist(v, &self.centroids[self.cluster_of(id)?])))
            .sum()
    }
}

impl Coarsening for CoarseningFunction {
    fn coarsen(&self, label: &str) -> Result<String> {
        Ok(self.representatives[self.cluster_of(label)?].clone())
    }
}

/// View of a [`CoarseningFunction`] whose coarse labels are cluster indices.
#[derive(Debug, Clone, Copy)]
pub struct ClusterIndex<'a>(&'a CoarseningFunction);

impl Coarsening for ClusterIndex<'_> {
    fn coarsen(&self, label: &str) -> Result<String> {
        Ok(format!("cluster-{}", self.0.cluster_of(label)?))
    }
}

/// Energy over representative labels and over cluster-index labels.
///
/// The two labelings are a bijection of each other, so the pair is equal bit
/// for bit.
pub fn label_energy_equivalence(
    a: &SampleSet,
    b: &SampleSet,
    c: &CoarseningFunction,
) -> Result<(EnergyValue, EnergyValue)> {
    let by_rep = energy_estimate(
        &a.pushforward(|l| c.coarsen(l))?,
        &b.pushforward(|l| c.coarsen(l))?,
    )?;
    let idx = c.by_index();
    let by_idx = energy_estimate(
        &a.pushforward(|l| idx.coarsen(l))?,
        &b.pushforward(|l| idx.coarsen(l))?,
    )?;
    Ok((by_rep, by_idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(points: &[&[f64]]) -> EmbeddingTable {
        EmbeddingTable::new(
            points
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("p{i}"), p.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn table_validation() {
        let nan = EmbeddingTable::new(vec![("a".into(), vec![f64::NAN])]).unwrap_err();
        assert_eq!(nan.code(), "invalid-embedding");
        let dup = EmbeddingTable::new(vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]);
        assert_eq!(dup.unwrap_err().code(), "duplicate-label");
        let dim = EmbeddingTable::new(vec![("a".into(), vec![1.0]), ("b".into(), vec![2.0, 3.0])]);
        assert_eq!(dim.unwrap_err().code(), "dim-mismatch");
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let t = table(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 3.0]]);
        let c = fit_kmeans(&t, 1, 5).unwrap();
        assert_eq!(c.n_clusters(), 1);
        assert!((c.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_distinct_point() {
        let t = table(&[&[0.0], &[5.0], &[9.0], &[20.0]]);
        let c = fit_kmeans(&t, 4, 1).unwrap();
        assert_eq!(c.n_clusters(), 4);
        assert_eq!(c.sse(&t).unwrap(), 0.0);
    }

    #[test]
    fn two_columns_split() {
        let t = table(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 0.0], &[10.0, 1.0]]);
        for seed in 0..10 {
            let c = fit_kmeans(&t, 2, seed).unwrap();
            let mut cents = c.centroids.clone();
            cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(cents, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
            assert_eq!(c.cluster_of("p0").unwrap(), c.cluster_of("p1").unwrap());
            assert_ne!(c.cluster_of("p0").unwrap(), c.cluster_of("p2").unwrap());
        }
    }

    #[test]
    fn k_larger_than_points_is_reduced() {
        let t = table(&[&[0.0], &[1.0]]);
        let c = fit_kmeans(&t, 5, 0).unwrap();
        assert!(c.k_reduced);
        assert_eq!(c.k, 2);
    }

    #[test]
    fn duplicate_points_collapse() {
        let t = table(&[&[1.0], &[1.0], &[1.0]]);
        let c = fit_kmeans(&t, 3, 0).unwrap();
        assert_eq!(c.n_clusters(), 1);
        assert_eq!(c.representatives, ["p0"]);
    }

    #[test]
    fn assign_examples() {
        let t = table(&[&[0.0, 0.0], &[10.0, 0.0]]);
        let c = fit_kmeans(&t, 2, 0).unwrap();
        let i0 = c.cluster_of("p0").unwrap();
        assert_eq!(assign(&c, &[0.0, 0.0]).unwrap(), i0);
        assert_eq!(assign(&c, &[1.0, 0.0]).unwrap(), i0);
        assert_eq!(assign(&c, &[5.0, 0.0]).unwrap(), 0);
        assert_eq!(assign(&c, &[1.0]).unwrap_err().code(), "dim-mismatch");
    }

    #[test]
    fn representative_ties_go_to_smallest_id() {
        let t = EmbeddingTable::new(vec![
            ("b".into(), vec![0.0]),
            ("a".into(), vec![2.0]),
        ])
        .unwrap();
        let c = fit_kmeans(&t, 1, 0).unwrap();
        assert_eq!(c.representatives, ["a"]);
    }

    #[test]
    fn equivalence_examples() {
        let t = table(&[&[0.0], &[0.1], &[5.0], &[5.1], &[9.0]]);
        let c = fit_kmeans(&t, 3, 2).unwrap();
        let s = SampleSet::from_counts([("p0", 3), ("p2", 1)]).unwrap();
        let (r, i) = label_energy_equivalence(&s, &s, &c).unwrap();
        assert_eq!((r.value, i.value), (0.0, 0.0));

        let a = SampleSet::from_counts([("p0", 2), ("p1", 1)]).unwrap();
        let b = SampleSet::from_counts([("p4", 4)]).unwrap();
        let (r, i) = label_energy_equivalence(&a, &b, &c).unwrap();
        assert_eq!((r.value, i.value), (2.0, 2.0));

        let a = SampleSet::from_counts([("p0", 2), ("p2", 3), ("p4", 1)]).unwrap();
        let b = SampleSet::from_counts([("p1", 1), ("p3", 5), ("p4", 7)]).unwrap();
        let (r, i) = label_energy_equivalence(&a, &b, &c).unwrap();
        assert_eq!(r.value.to_bits(), i.value.to_bits());

        let bad = SampleSet::from_counts([("zz", 1)]).unwrap();
        assert_eq!(
            label_energy_equivalence(&bad, &b, &c).unwrap_err().code(),
            "unknown-dialogue"
        );
    }

    #[test]
    fn json_roundtrip() {
        let t = table(&[&[0.0], &[0.1], &[5.0]]);
        let c = fit_kmeans(&t, 2, 9).unwrap();
        let back: CoarseningFunction = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
