//! Exact evaluation of the adaptation bound
//! `TD_T ≤ γ + φ + TD_S + √(ε_c · δ)` on enumerable instances.
//!
//! The target environment generates `D̃₁`, the source generates `D̃₂`. All
//! expectations are finite sums over the joint model. The minimizer `g` is
//! built cell by cell as a weighted median, which is optimal because the
//! objective separates over coarse cells `(x, u)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{JointModel, SampleSet};
use crate::energy::{energy_estimate, energy_from_masses, Coarsening, EnergyMode, EnergyValue};
use crate::error::{Error, Result};
use crate::testdiv::{test_divergence, PairedItem, TDReport};
use crate::testfns::{LabelTest, TestFunction};

/// Slack allowed on `td_target ≤ rhs`.
pub const BOUND_TOL: f64 = 1e-9;

/// Relative slack when testing `cumulative weight ≥ ½` in the median.
const MEDIAN_TOL: f64 = 1e-12;

/// One atom of a branch: fine outcome `x`, noise index `u`, the value the
/// test output is compared against, and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: usize,
    pub u: usize,
    pub target: f64,
    pub p: f64,
}

/// Index-level form of a bound instance, shared by the dialogue bound and the
/// generalized fuzz.
///
/// Branch `a` is the side being bounded, branch `b` the side whose error is
/// observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    /// Coarse cell of each fine outcome.
    pub coarse_of: Vec<usize>,
    pub n_coarse: usize,
    pub noise: Vec<f64>,
    /// `f(x, u)` on fine outcomes.
    pub f_fine: Vec<Vec<f64>>,
    /// `f(x, u)` on coarse representatives.
    pub f_coarse: Vec<Vec<f64>>,
    pub a: Vec<Atom>,
    pub b: Vec<Atom>,
}

/// `g` on coarse cells, with cells of zero probability flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    pub values: Vec<Vec<f64>>,
    pub unconstrained: Vec<Vec<bool>>,
}

/// Exponent on `|g − f|` inside δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaForm {
    /// `E_U Σ_x |g(x,U) − f(x,U)|`, as in the dialogue statement.
    Absolute,
    /// `E_U Σ_x |g(x,U) − f(x,U)|²`, as in the general statement.
    Squared,
}

/// Smallest value whose cumulative weight reaches half the total.
pub fn weighted_median(items: &mut [(f64, f64)]) -> Option<f64> {
    let total: f64 = items.iter().map(|i| i.1).sum();
    if total <= 0.0 {
        return None;
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * total * (1.0 - MEDIAN_TOL);
    let mut acc = 0.0;
    for &(v, w) in items.iter() {
        acc += w;
        if acc >= half {
            return Some(v);
        }
    }
    items.last().map(|i| i.0)
}

impl Problem {
    fn branches(&self) -> [&[Atom]; 2] {
        [&self.a, &self.b]
    }

    /// `E|S − f(A, U)|`.
    pub fn error_a(&self) -> f64 {
        self.a
            .iter()
            .map(|t| t.p * (t.target - self.f_fine[t.x][t.u]).abs())
            .sum()
    }

    /// `E|S' − f(B, U)|`.
    pub fn error_b(&self) -> f64 {
        self.b
            .iter()
            .map(|t| t.p * (t.target - self.f_fine[t.x][t.u]).abs())
            .sum()
    }

    pub fn gamma(&self) -> f64 {
        self.branches()
            .iter()
            .flat_map(|br| br.iter())
            .map(|t| t.p * (self.f_coarse[self.coarse_of[t.x]][t.u] - self.f_fine[t.x][t.u]).abs())
            .sum()
    }

    /// Pointwise smallest weighted median of the targets in each cell.
    pub fn solve_g(&self) -> GTable {
        let nu = self.noise.len();
        let mut cells: Vec<Vec<Vec<(f64, f64)>>> = vec![vec![Vec::new(); nu]; self.n_coarse];
        for t in self.branches().iter().flat_map(|br| br.iter()) {
            if t.p > 0.0 {
                cells[self.coarse_of[t.x]][t.u].push((t.target, t.p));
            }
        }
        let mut values = vec![vec![0.0; nu]; self.n_coarse];
        let mut unconstrained = vec![vec![false; nu]; self.n_coarse];
        for (k, row) in cells.iter_mut().enumerate() {
            for (u, cell) in row.iter_mut().enumerate() {
                match weighted_median(cell) {
                    Some(v) => values[k][u] = v,
                    None => unconstrained[k][u] = true,
                }
            }
        }
        GTable {
            values,
            unconstrained,
        }
    }

    pub fn phi(&self, g: &[Vec<f64>]) -> f64 {
        self.branches()
            .iter()
            .flat_map(|br| br.iter())
            .map(|t| t.p * (g[self.coarse_of[t.x]][t.u] - t.target).abs())
            .sum()
    }

    pub fn delta(&self, g: &[Vec<f64>], form: DeltaForm) -> f64 {
        self.noise
            .iter()
            .enumerate()
            .map(|(u, pu)| {
                pu * (0..self.n_coarse)
                    .map(|k| {
                        let gap = (g[k][u] - self.f_coarse[k][u]).abs();
                        match form {
                            DeltaForm::Absolute => gap,
                            DeltaForm::Squared => gap * gap,
                        }
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Coarse marginals of the two branches.
    pub fn coarse_marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let marginal = |br: &[Atom]| {
            let mut m = vec![0.0; self.n_coarse];
            for t in br {
                m[self.coarse_of[t.x]] += t.p;
            }
            m
        };
        (marginal(&self.a), marginal(&self.b))
    }

    pub fn epsilon(&self) -> Result<f64> {
        let (pa, pb) = self.coarse_marginals();
        energy_from_masses(&pa, &pb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCell {
    pub x: String,
    pub u: String,
    pub value: f64,
    pub unconstrained: bool,
}

/// `g` keyed by (coarse label, noise label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GFunction {
    pub cells: Vec<GCell>,
}

impl GFunction {
    pub fn get(&self, x: &str, u: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.x == x && c.u == u)
            .map(|c| c.value)
    }

    pub fn unconstrained_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.unconstrained).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(default = "crate::io::schema_version")]
    pub schema_version: u32,
    pub test: String,
    pub gamma: f64,
    pub phi: f64,
    pub delta: f64,
    pub epsilon: EnergyValue,
    pub td_source: f64,
    pub td_target: f64,
    pub rhs: f64,
    pub holds: bool,
    pub unconstrained_cells: usize,
    pub g: GFunction,
}

/// A [`JointModel`] lowered to index form with `h` and `c` resolved.
pub struct Instance {
    pub problem: Problem,
    pub coarse_labels: Vec<String>,
    pub noise_labels: Vec<String>,
    pub test: String,
}

/// Resolves `h` on every dialogue and representative and builds both branches.
pub fn lower<H, C>(j: &JointModel, h: &H, c: &C) -> Result<Instance>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    let dialogues = j.dialogues().labels();
    let noise_labels: Vec<String> = j.noise().space().labels().to_vec();
    let reps: Vec<String> = dialogues.iter().map(|d| c.coarsen(d)).collect::<Result<_>>()?;
    let mut coarse_labels = reps.clone();
    coarse_labels.sort();
    coarse_labels.dedup();
    let coarse_of = reps
        .iter()
        .map(|r| coarse_labels.binary_search(r).expect("image label"))
        .collect();
    let eval_rows = |labels: &[String]| -> Result<Vec<Vec<f64>>> {
        labels
            .iter()
            .map(|d| {
                noise_labels
                    .iter()
                    .map(|u| {
                        let v = h.score(d, u)?;
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidParameter(format!(
                                "test `{}` returned {v} on ({d}, {u})",
                                h.name()
                            )));
                        }
                        Ok(v)
                    })
                    .collect()
            })
            .collect()
    };
    let f_fine = eval_rows(dialogues)?;
    let f_coarse = eval_rows(&coarse_labels)?;
    let noise = j.noise().masses().to_vec();

    let branch = |source: bool| {
        let mut atoms = Vec::new();
        for (ci, &wc) in j.contexts().masses().iter().enumerate() {
            let human = j.human_row(ci);
            let generated = if source { j.gen2_row(ci) } else { j.gen1_row(ci) };
            for (d, &pd) in human.iter().enumerate() {
                for (x, &px) in generated.iter().enumerate() {
                    for (u, &pu) in noise.iter().enumerate() {
                        atoms.push(Atom {
                            x,
                            u,
                            target: f_fine[d][u],
                            p: wc * pd * px * pu,
                        });
                    }
                }
            }
        }
        atoms
    };
    let a = branch(false);
    let b = branch(true);
    Ok(Instance {
        problem: Problem {
            n_coarse: coarse_labels.len(),
            coarse_of,
            noise,
            f_fine,
            f_coarse,
            a,
            b,
        },
        coarse_labels,
        noise_labels,
        test: h.name().to_string(),
    })
}

impl Instance {
    pub fn g_function(&self, g: &GTable) -> GFunction {
        let mut cells = Vec::new();
        for (k, x) in self.coarse_labels.iter().enumerate() {
            for (u, ul) in self.noise_labels.iter().enumerate() {
                cells.push(GCell {
                    x: x.clone(),
                    u: ul.clone(),
                    value: g.values[k][u],
                    unconstrained: g.unconstrained[k][u],
                });
            }
        }
        GFunction { cells }
    }

    /// All terms for a given `g`, without asserting the inequality.
    pub fn report_for(&self, g: &GTable) -> Result<BoundReport> {
        let p = &self.problem;
        let gamma = p.gamma();
        let phi = p.phi(&g.values);
        let delta = p.delta(&g.values, DeltaForm::Absolute);
        let epsilon = p.epsilon()?;
        let td_source = p.error_b();
        let td_target = p.error_a();
        let rhs = gamma + phi + td_source + (epsilon * delta).sqrt();
        let g = self.g_function(g);
        Ok(BoundReport {
            schema_version: crate::io::SCHEMA_VERSION,
            test: self.test.clone(),
            gamma,
            phi,
            delta,
            epsilon: EnergyValue {
                value: epsilon,
                mode: EnergyMode::ExactPmf,
            },
            td_source,
            td_target,
            rhs,
            holds: td_target <= rhs + BOUND_TOL,
            unconstrained_cells: g.unconstrained_cells(),
            g,
        })
    }
}

pub fn compute_gamma<H, C>(j: &JointModel, h: &H, c: &C) -> Result<f64>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    Ok(lower(j, h, c)?.problem.gamma())
}

pub fn solve_g<H, C>(j: &JointModel, h: &H, c: &C) -> Result<GFunction>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    let inst = lower(j, h, c)?;
    Ok(inst.g_function(&inst.problem.solve_g()))
}

fn g_table(inst: &Instance, g: &GFunction) -> Result<Vec<Vec<f64>>> {
    inst.coarse_labels
        .iter()
        .map(|x| {
            inst.noise_labels
                .iter()
                .map(|u| {
                    g.get(x, u).ok_or_else(|| {
                        Error::InvalidParameter(format!("g is undefined at ({x}, {u})"))
                    })
                })
                .collect()
        })
        .collect()
}

pub fn compute_phi<H, C>(j: &JointModel, h: &H, c: &C, g: &GFunction) -> Result<f64>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    let inst = lower(j, h, c)?;
    Ok(inst.problem.phi(&g_table(&inst, g)?))
}

pub fn compute_delta<H, C>(j: &JointModel, h: &H, c: &C, g: &GFunction) -> Result<f64>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    let inst = lower(j, h, c)?;
    Ok(inst.problem.delta(&g_table(&inst, g)?, DeltaForm::Absolute))
}

/// Every term of the bound with `g` from [`solve_g`].
///
/// A violation is reported as [`Error::BoundViolated`] carrying the report.
pub fn evaluate_bound<H, C>(j: &JointModel, h: &H, c: &C) -> Result<BoundReport>
where
    H: LabelTest + ?Sized,
    C: Coarsening + ?Sized,
{
    let inst = lower(j, h, c)?;
    let report = inst.report_for(&inst.problem.solve_g())?;
    if report.holds {
        Ok(report)
    } else {
        Err(Error::BoundViolated(Box::new(report)))
    }
}

/// Observable terms when only samples are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedTerms {
    pub epsilon: EnergyValue,
    pub td_source: TDReport,
    pub unobserved: Vec<String>,
}

/// `ε_c` between source and target generated samples, plus the source TD.
/// The source sample is the generated side of `source`.
pub fn estimate_terms<C: Coarsening + ?Sized>(
    source: &[PairedItem],
    target_generated: &SampleSet,
    tests: &[&dyn TestFunction],
    c: &C,
) -> Result<EstimatedTerms> {
    let source_generated = SampleSet::from_labels(source.iter().map(|p| p.generated.id.clone()));
    let epsilon = energy_estimate(
        &source_generated.pushforward(|l| c.coarsen(l))?,
        &target_generated.pushforward(|l| c.coarsen(l))?,
    )?;
    Ok(EstimatedTerms {
        epsilon,
        td_source: test_divergence(source, tests)?,
        unobserved: vec!["gamma".into(), "phi".into(), "delta".into()],
    })
}

/// Random enumerable instances for property tests and the oracle suite.
pub mod fuzz {
    use super::*;
    use crate::dist::Pmf;
    use crate::energy::LabelMap;
    use crate::testfns::ScoreTable;
    use rand::seq::SliceRandom;
    use rand::Rng;

    pub const MAX_DIALOGUES: usize = 8;
    pub const MAX_COARSE: usize = 4;
    pub const MAX_NOISE: usize = 3;
    pub const MAX_CONTEXTS: usize = 3;

    #[derive(Debug, Clone)]
    pub struct FuzzInstance {
        pub joint: JointModel,
        pub test: ScoreTable,
        pub coarsening: LabelMap,
    }

    /// Sparse random pmf over `labels`; at least one entry is positive.
    pub fn sparse_pmf<R: Rng>(rng: &mut R, labels: &[String], zero_p: f64) -> Pmf {
        let mut w: Vec<f64> = labels
            .iter()
            .map(|_| if rng.random_bool(zero_p) { 0.0 } else { rng.random::<f64>() + 1e-3 })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            let i = rng.random_range(0..w.len());
            w[i] = 1.0;
        }
        Pmf::from_weights(labels.iter().cloned().zip(w)).expect("positive weights")
    }

    /// A value in [0,1], sometimes on a coarse grid so that ties occur.
    pub fn score<R: Rng>(rng: &mut R) -> f64 {
        match rng.random_range(0..3) {
            0 => rng.random_range(0..=4) as f64 / 4.0,
            1 => rng.random_range(0..=10) as f64 / 10.0,
            _ => rng.random::<f64>(),
        }
    }

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    pub fn random_instance<R: Rng>(rng: &mut R) -> FuzzInstance {
        let nd = rng.random_range(2..=MAX_DIALOGUES);
        let nc = rng.random_range(1..=MAX_CONTEXTS);
        let nu = rng.random_range(1..=MAX_NOISE);
        let nk = rng.random_range(1..=MAX_COARSE.min(nd - 1));
        let dialogues = names("d", nd);
        let contexts = names("c", nc);
        let noise = names("u", nu);

        let zero_p = rng.random_range(0.0..0.6);
        let mut human = BTreeMap::new();
        let mut gen1 = BTreeMap::new();
        let mut gen2 = BTreeMap::new();
        for c in &contexts {
            let h = sparse_pmf(rng, &dialogues, zero_p);
            let g1 = match rng.random_range(0..5) {
                0 => h.clone(),
                _ => sparse_pmf(rng, &dialogues, zero_p),
            };
            let g2 = match rng.random_range(0..5) {
                0 => g1.clone(),
                1 => h.clone(),
                _ => sparse_pmf(rng, &dialogues, zero_p),
            };
            human.insert(c.clone(), h);
            gen1.insert(c.clone(), g1);
            gen2.insert(c.clone(), g2);
        }
        let joint = JointModel::new(
            sparse_pmf(rng, &contexts, 0.2),
            human,
            gen1,
            gen2,
            sparse_pmf(rng, &noise, 0.2),
        )
        .expect("valid random joint");

        let mut rows = Vec::new();
        for d in &dialogues {
            for u in &noise {
                rows.push((d.clone(), u.clone(), score(rng)));
            }
        }
        let test = ScoreTable::new("h", rows).expect("scores in range");

        let mut order: Vec<usize> = (0..nd).collect();
        order.shuffle(rng);
        let mut cluster = vec![0; nd];
        for (i, &d) in order.iter().enumerate() {
            cluster[d] = if i < nk { i } else { rng.random_range(0..nk) };
        }
        let reps: Vec<String> = (0..nk)
            .map(|k| {
                if rng.random_bool(0.2) {
                    dialogues[rng.random_range(0..nd)].clone()
                } else {
                    let members: Vec<usize> = (0..nd).filter(|&d| cluster[d] == k).collect();
                    dialogues[members[rng.random_range(0..members.len())]].clone()
                }
            })
            .collect();
        let coarsening = LabelMap::from_pairs(
            dialogues
                .iter()
                .zip(&cluster)
                .map(|(d, &k)| (d.clone(), reps[k].clone())),
        );
        FuzzInstance {
            joint,
            test,
            coarsening,
        }
    }
}
