//! Brute-force checks of the identities behind the energy bound.
//!
//! * energy equals the squared L2 distance between pmfs;
//! * the same quantity is the large-`τ` average of `|φ_p − φ_q|²`;
//! * relabeling clusters bijectively leaves energy unchanged;
//! * the bound holds on random enumerable instances, in both the dialogue
//!   form and the general form.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::fuzz::{random_instance, score, sparse_pmf};
use crate::bound::{lower, Atom, DeltaForm, Problem, BOUND_TOL};
use crate::coarsening::{fit_kmeans, label_energy_equivalence, EmbeddingTable};
use crate::dist::{pmf_from_samples, sample, Pmf, SampleSet};
use crate::energy::{energy_estimate, energy_exact};
use crate::error::{Error, Result};

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// Discrete distribution on distinct real atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEmbeddedPmf {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl RealEmbeddedPmf {
    pub fn new(support: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() || support.is_empty() {
            return Err(Error::InvalidPmf(format!(
                "{} atoms with {} masses",
                support.len(),
                mass.len()
            )));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPmf("support values must be finite".into()));
        }
        let mut sorted = support.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPmf("support values must be distinct".into()));
        }
        // Reuse the label pmf validation on the masses.
        Pmf::new(
            crate::dist::OutcomeSpace::new((0..mass.len()).map(|i| format!("{i:08}")))?,
            mass.clone(),
        )?;
        Ok(Self { support, mass })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `(value, p mass, q mass)` over the union of both supports, in value order.
    fn aligned(&self, other: &RealEmbeddedPmf) -> Vec<(f64, f64, f64)> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (x, m) in self.support.iter().zip(&self.mass) {
            rows.push((*x, *m, 0.0));
        }
        for (x, m) in other.support.iter().zip(&other.mass) {
            match rows.iter_mut().find(|r| r.0 == *x) {
                Some(r) => r.2 += m,
                None => rows.push((*x, 0.0, *m)),
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }
}

/// `Σ_a p(a)·exp(i·t·a)`.
pub fn characteristic_fn(p: &RealEmbeddedPmf, t: f64) -> Complex64 {
    p.support
        .iter()
        .zip(&p.mass)
        .map(|(a, m)| Complex64::from_polar(*m, t * a))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Check {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Energy from its closed form against `Σ (p − q)²` computed directly.
pub fn l2_identity_check(p: &Pmf, q: &Pmf) -> Result<L2Check> {
    let lhs = energy_exact(p, q)?.value;
    let space = p.space().union(q.space());
    let rhs: f64 = space
        .labels()
        .iter()
        .map(|l| (p.mass_of(l) - q.mass_of(l)).powi(2))
        .sum();
    Ok(L2Check {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Energy alongside both candidate readings of the relabeling lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaForms {
    pub energy: f64,
    pub l1: f64,
    pub squared_l2: f64,
}

pub fn lemma_forms(p: &Pmf, q: &Pmf) -> Result<LemmaForms> {
    let space = p.space().union(q.space());
    let diffs: Vec<f64> = space
        .labels()
        .iter()
        .map(|l| p.mass_of(l) - q.mass_of(l))
        .collect();
    Ok(LemmaForms {
        energy: energy_exact(p, q)?.value,
        l1: diffs.iter().map(|d| d.abs()).sum(),
        squared_l2: diffs.iter().map(|d| d * d).sum(),
    })
}

/// Trapezoid rule for `(1/2τ) ∫_{−τ}^{τ} |φ_p(t) − φ_q(t)|² dt`.
///
/// The integrand is even, so the rule runs on `[0, τ]` and the result is
/// `(1/τ) ∫_0^τ`.
pub fn parseval_quadrature(p: &RealEmbeddedPmf, q: &RealEmbeddedPmf, tau: f64, steps: usize) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if steps < 1000 {
        return Err(Error::InvalidParameter(format!("steps must be at least 1000, got {steps}")));
    }
    let r: Vec<(f64, f64)> = p.aligned(q).into_iter().map(|(x, a, b)| (x, a - b)).collect();
    let integrand = |t: f64| -> f64 {
        r.iter()
            .map(|(x, w)| Complex64::from_polar(*w, t * x))
            .sum::<Complex64>()
            .norm_sqr()
    };
    let h = tau / steps as f64;
    let mut acc = 0.5 * (integrand(0.0) + integrand(tau));
    for i in 1..steps {
        acc += integrand(i as f64 * h);
    }
    Ok(acc * h / tau)
}

/// Random sparse label pmf over up to `max_size` labels.
pub fn random_pmf<R: Rng>(rng: &mut R, max_size: usize) -> Pmf {
    let n = rng.random_range(1..=max_size);
    let labels: Vec<String> = (0..n).map(|i| format!("x{i:02}")).collect();
    let zero_p = rng.random_range(0.0..0.5);
    sparse_pmf(rng, &labels, zero_p)
}

/// Random pmf pair over a shared label pool, forced equal some of the time.
pub fn random_pmf_pair<R: Rng>(rng: &mut R, max_size: usize) -> (Pmf, Pmf) {
    let p = random_pmf(rng, max_size);
    let q = if rng.random_bool(0.1) {
        p.clone()
    } else {
        random_pmf(rng, max_size)
    };
    (p, q)
}

/// Random integer-support pmf with `atoms` atoms drawn from `[-10, 10]`.
pub fn random_integer_pmf<R: Rng>(rng: &mut R, atoms: usize) -> RealEmbeddedPmf {
    let mut pool: Vec<i32> = (-10..=10).collect();
    let mut support = Vec::with_capacity(atoms);
    for _ in 0..atoms {
        let i = rng.random_range(0..pool.len());
        support.push(pool.swap_remove(i) as f64);
    }
    let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let mut mass: Vec<f64> = w.iter().map(|x| x / total).collect();
    let drift: f64 = 1.0 - mass.iter().sum::<f64>();
    mass[0] += drift;
    RealEmbeddedPmf::new(support, mass).expect("valid random pmf")
}

/// Largest L2 gap over `pairs` random pmf pairs with `|Ω| ≤ max_size`.
pub fn l2_identity_sweep(seed: u64, pairs: usize, max_size: usize) -> Result<f64> {
    let gaps: Result<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let (p, q) = random_pmf_pair(&mut rng, max_size);
            Ok(l2_identity_check(&p, &q)?.gap)
        })
        .collect();
    Ok(gaps?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaFormSummary {
    pub pairs: usize,
    /// Pairs where `|energy − Σ(p−q)²| > 1e-12`.
    pub squared_failures: usize,
    /// Pairs where `|energy − Σ|p−q|| > 1e-9`.
    pub l1_failures: usize,
}

pub fn lemma_form_sweep(seed: u64, pairs: usize, max_size: usize) -> Result<LemmaFormSummary> {
    let forms: Result<Vec<LemmaForms>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let (p, q) = random_pmf_pair(&mut rng, max_size);
            lemma_forms(&p, &q)
        })
        .collect();
    let forms = forms?;
    Ok(LemmaFormSummary {
        pairs,
        squared_failures: forms
            .iter()
            .filter(|f| (f.energy - f.squared_l2).abs() > 1e-12)
            .count(),
        l1_failures: forms.iter().filter(|f| (f.energy - f.l1).abs() > 1e-9).count(),
    })
}

/// Number of random coarsened sample pairs on which the representative and
/// index labelings disagree in any bit.
pub fn bijectivity_sweep(seed: u64, pairs: usize) -> Result<usize> {
    let mismatches: Result<Vec<bool>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let n = rng.random_range(2..=30);
            let dim = rng.random_range(1..=3);
            let rows = (0..n)
                .map(|j| {
                    let v = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
                    (format!("d{j:02}"), v)
                })
                .collect();
            let table = EmbeddingTable::new(rows)?;
            let k = rng.random_range(1..n);
            let c = fit_kmeans(&table, k, rng.random())?;
            let mut draw = || {
                SampleSet::from_labels((0..rng.random_range(1..200)).map(|_| {
                    table.ids()[rng.random_range(0..n)].clone()
                }))
            };
            let (a, b) = (draw(), draw());
            let (r, x) = label_energy_equivalence(&a, &b, &c)?;
            Ok(r.value.to_bits() != x.value.to_bits())
        })
        .collect();
    Ok(mismatches?.into_iter().filter(|&m| m).count())
}

/// Largest `|quadrature − Σ(p−q)²|` over random integer-support pairs.
pub fn quadrature_sweep(seed: u64, pairs: usize, tau: f64, steps: usize) -> Result<f64> {
    let errs: Result<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let p = random_integer_pmf(&mut rng, 5);
            let q = random_integer_pmf(&mut rng, 5);
            let exact: f64 = p.aligned(&q).iter().map(|(_, a, b)| (a - b).powi(2)).sum();
            Ok((parseval_quadrature(&p, &q, tau, steps)? - exact).abs())
        })
        .collect();
    Ok(errs?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen; negative when every trial has slack.
    pub max_excess: f64,
}

fn summarize(excess: Vec<f64>) -> FuzzSummary {
    FuzzSummary {
        trials: excess.len(),
        violations: excess.iter().filter(|&&e| e > BOUND_TOL).count(),
        max_excess: excess.into_iter().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Dialogue-form bound on random joint models.
pub fn bound_fuzz(seed: u64, trials: usize) -> Result<FuzzSummary> {
    let excess: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let inst = random_instance(&mut rng);
            let lowered = lower(&inst.joint, &inst.test, &inst.coarsening)?;
            let r = lowered.report_for(&lowered.problem.solve_g())?;
            Ok(r.td_target - r.rhs)
        })
        .collect();
    Ok(summarize(excess?))
}

/// Best `φ` over a 0.01 grid, chosen independently per cell.
pub fn phi_grid(problem: &Problem) -> f64 {
    let mut cells: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for t in problem.a.iter().chain(&problem.b) {
        cells
            .entry((problem.coarse_of[t.x], t.u))
            .or_default()
            .push((t.target, t.p));
    }
    cells
        .values()
        .map(|cell| {
            (0..=100)
                .map(|i| {
                    let g = i as f64 / 100.0;
                    cell.iter().map(|(v, w)| w * (g - v).abs()).sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Largest `φ(solve_g) − φ(grid)`; nonpositive when `solve_g` is optimal.
pub fn g_optimality_sweep(seed: u64, trials: usize) -> Result<f64> {
    let gaps: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let inst = random_instance(&mut rng);
            let p = lower(&inst.joint, &inst.test, &inst.coarsening)?.problem;
            Ok(p.phi(&p.solve_g().values) - phi_grid(&p))
        })
        .collect();
    Ok(gaps?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralMode {
    RandomF,
    FEqualsG,
    Degenerate,
}

/// One random instance of the general bound `E|S − f(A,U)| ≤ …`.
///
/// `S` depends on `(A, U)` and `S'` on `(B, U)` through arbitrary kernels;
/// `U` is independent of `A` and of `B`.
pub fn general_instance<R: Rng>(rng: &mut R, mode: GeneralMode) -> Problem {
    let degenerate = mode == GeneralMode::Degenerate;
    let nx = if degenerate { rng.random_range(1..=2) } else { rng.random_range(1..=6) };
    let nu = if degenerate { 1 } else { rng.random_range(1..=3) };
    let nk = rng.random_range(1..=nx);
    let xs: Vec<String> = (0..nx).map(|i| format!("x{i}")).collect();
    let us: Vec<String> = (0..nu).map(|i| format!("u{i}")).collect();

    let mut order: Vec<usize> = (0..nx).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let mut coarse_of = vec![0; nx];
    for (i, &x) in order.iter().enumerate() {
        coarse_of[x] = if i < nk { i } else { rng.random_range(0..nk) };
    }
    let reps: Vec<usize> = (0..nk)
        .map(|k| {
            let members: Vec<usize> = (0..nx).filter(|&x| coarse_of[x] == k).collect();
            members[rng.random_range(0..members.len())]
        })
        .collect();

    let point = |rng: &mut R, n: usize| {
        let mut m = vec![0.0; n];
        m[rng.random_range(0..n)] = 1.0;
        m
    };
    let (pa, pb) = if degenerate {
        (point(rng, nx), point(rng, nx))
    } else {
        (
            sparse_pmf(rng, &xs, 0.3).masses().to_vec(),
            sparse_pmf(rng, &xs, 0.3).masses().to_vec(),
        )
    };
    let noise = sparse_pmf(rng, &us, 0.2).masses().to_vec();

    let branch = |rng: &mut R, px: &[f64]| {
        let mut atoms = Vec::new();
        for (x, &wx) in px.iter().enumerate() {
            for (u, &wu) in noise.iter().enumerate() {
                let n_s = if degenerate { 1 } else { rng.random_range(1..=3) };
                let values: Vec<f64> = (0..n_s).map(|_| score(rng)).collect();
                let w: Vec<f64> = (0..n_s).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = w.iter().sum();
                for (v, wi) in values.into_iter().zip(w) {
                    atoms.push(Atom {
                        x,
                        u,
                        target: v,
                        p: wx * wu * wi / total,
                    });
                }
            }
        }
        atoms
    };
    let a = branch(rng, &pa);
    let b = branch(rng, &pb);

    let mut f_fine: Vec<Vec<f64>> = (0..nx).map(|_| (0..nu).map(|_| score(rng)).collect()).collect();
    let mut problem = Problem {
        f_coarse: Vec::new(),
        coarse_of,
        n_coarse: nk,
        noise,
        f_fine: f_fine.clone(),
        a,
        b,
    };
    if mode == GeneralMode::FEqualsG {
        let g = problem.solve_g().values;
        for (x, row) in f_fine.iter_mut().enumerate() {
            *row = g[problem.coarse_of[x]].clone();
        }
        problem.f_fine = f_fine;
    }
    problem.f_coarse = reps.iter().map(|&r| problem.f_fine[r].clone()).collect();
    problem
}

/// General-form bound on random instances, with `δ = E_U Σ_x |g − f|²`.
pub fn generalized_bound_fuzz(seed: u64, trials: usize) -> Result<FuzzSummary> {
    let excess: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mode = match rng.random_range(0..10) {
                0 => GeneralMode::FEqualsG,
                1 => GeneralMode::Degenerate,
                _ => GeneralMode::RandomF,
            };
            let p = general_instance(&mut rng, mode);
            let g = p.solve_g().values;
            let rhs = p.gamma()
                + p.phi(&g)
                + p.error_b()
                + (p.epsilon()? * p.delta(&g, DeltaForm::Squared)).sqrt();
            Ok(p.error_a() - rhs)
        })
        .collect();
    Ok(summarize(excess?))
}

/// Largest `|plug-in − exact|` over `seeds` draws of size `n` from random
/// pmfs with `|Ω| ≤ max_size`.
pub fn estimator_sweep(seed: u64, seeds: usize, n: u64, max_size: usize) -> Result<f64> {
    let errs: Result<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let (p, q) = random_pmf_pair(&mut rng, max_size);
            let exact = energy_exact(&p, &q)?.value;
            let a = sample(&p, n, rng.random());
            let b = sample(&q, n, rng.random());
            Ok((energy_estimate(&a, &b)?.value - exact).abs())
        })
        .collect();
    Ok(errs?.into_iter().fold(0.0, f64::max))
}

/// Largest total-variation distance between a pmf and its empirical estimate.
pub fn sampling_tv_sweep(seed: u64, seeds: usize, n: u64, max_size: usize) -> Result<f64> {
    let tvs: Result<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let p = random_pmf(&mut rng, max_size);
            Ok(pmf_from_samples(&sample(&p, n, rng.random()))?.total_variation(&p))
        })
        .collect();
    Ok(tvs?.into_iter().fold(0.0, f64::max))
}

/// Sizes for [`run_verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub l2_pairs: usize,
    pub bijectivity_pairs: usize,
    pub quadrature_pairs: usize,
    pub quadrature_tau: f64,
    pub quadrature_steps: usize,
    pub bound_trials: usize,
    pub g_trials: usize,
    pub general_trials: usize,
    pub estimator_seeds: usize,
    pub estimator_n: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            l2_pairs: 10_000,
            bijectivity_pairs: 1_000,
            quadrature_pairs: 100,
            quadrature_tau: 1e4,
            quadrature_steps: 1_000_000,
            bound_trials: 10_000,
            g_trials: 500,
            general_trials: 10_000,
            estimator_seeds: 10,
            estimator_n: 100_000,
        }
    }
}

impl VerifyConfig {
    /// One trial per check, with a short quadrature.
    pub fn smoke() -> Self {
        Self {
            l2_pairs: 1,
            bijectivity_pairs: 1,
            quadrature_pairs: 1,
            quadrature_tau: 1e3,
            quadrature_steps: 100_000,
            bound_trials: 1,
            g_trials: 1,
            general_trials: 1,
            estimator_seeds: 1,
            estimator_n: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(default = "crate::io::schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    pub config: VerifyConfig,
    pub checks: Vec<Check>,
    pub lemma_forms: LemmaFormSummary,
    pub all_passed: bool,
}

fn check(name: &str, observed: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: observed <= tolerance,
        observed,
        tolerance,
        detail,
    }
}

/// Runs every oracle and collects pass/fail results.
pub fn run_verify(seed: u64, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let sub = |i| derive_seed(seed, i);
    let mut checks = Vec::new();

    let gap = l2_identity_sweep(sub(0), cfg.l2_pairs, 50)?;
    checks.push(check("energy-l2-identity", gap, 1e-12, format!("{} pairs, |Ω| ≤ 50", cfg.l2_pairs)));

    let forms = lemma_form_sweep(sub(1), cfg.l2_pairs, 50)?;
    checks.push(check(
        "relabeling-lemma-squared-form",
        forms.squared_failures as f64,
        0.0,
        format!(
            "squared form failed on {} of {} pairs; unsquared form failed on {}",
            forms.squared_failures, forms.pairs, forms.l1_failures
        ),
    ));

    let mismatches = bijectivity_sweep(sub(2), cfg.bijectivity_pairs)?;
    checks.push(check(
        "label-representative-equivalence",
        mismatches as f64,
        0.0,
        format!("{} coarsened sample pairs, bitwise comparison", cfg.bijectivity_pairs),
    ));

    let mut rng = trial_rng(sub(3), 0);
    let mut cf_err: f64 = 0.0;
    for _ in 0..100 {
        let p = random_integer_pmf(&mut rng, 5);
        cf_err = cf_err.max((characteristic_fn(&p, 0.0) - Complex64::new(1.0, 0.0)).norm());
        let t = rng.random_range(-100.0..100.0);
        cf_err = cf_err.max((characteristic_fn(&p, t).norm() - 1.0).max(0.0));
    }
    checks.push(check("characteristic-fn-range", cf_err, 1e-12, "φ(0) = 1 and |φ| ≤ 1".into()));

    let qerr = quadrature_sweep(sub(4), cfg.quadrature_pairs, cfg.quadrature_tau, cfg.quadrature_steps)?;
    checks.push(check(
        "parseval-quadrature",
        qerr,
        1e-2,
        format!(
            "{} pairs, τ = {}, {} steps",
            cfg.quadrature_pairs, cfg.quadrature_tau, cfg.quadrature_steps
        ),
    ));

    let b = bound_fuzz(sub(5), cfg.bound_trials)?;
    checks.push(check(
        "adaptation-bound",
        b.violations as f64,
        0.0,
        format!("{} instances, max excess {:.3e}", b.trials, b.max_excess),
    ));

    let g = g_optimality_sweep(sub(6), cfg.g_trials)?;
    checks.push(check(
        "g-optimality",
        g,
        1e-9,
        format!("{} instances against a 0.01 grid", cfg.g_trials),
    ));

    let gb = generalized_bound_fuzz(sub(7), cfg.general_trials)?;
    checks.push(check(
        "general-bound",
        gb.violations as f64,
        0.0,
        format!("{} instances, max excess {:.3e}", gb.trials, gb.max_excess),
    ));

    let est = estimator_sweep(sub(8), cfg.estimator_seeds, cfg.estimator_n, 20)?;
    checks.push(check(
        "estimator-consistency",
        est,
        1e-2,
        format!("{} seeds, n = {}, |Ω| ≤ 20", cfg.estimator_seeds, cfg.estimator_n),
    ));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema_version: crate::io::SCHEMA_VERSION,
        seed,
        config: *cfg,
        checks,
        lemma_forms: forms,
        all_passed,
    })
}
