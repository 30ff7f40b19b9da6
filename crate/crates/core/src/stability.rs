//! TV-stability, statistical tasks and failure probabilities, equivalence
//! checks, and the small-domain TV-stabilizer.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, dim, Error, Result};
use crate::finite_prob::{learn_from_counts, tv_slices, FiniteDistribution, ETA};
use crate::mechanisms::{
    k_subsets, preprocess, sample_row, symmetrize, DatasetIter, Preprocessor,
    SampledMechanism, TabularMechanism,
};
use crate::seeding;

/// A point estimate with an optional standard error (absent when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, standard_error: None }
    }

    pub fn se(&self) -> f64 {
        self.standard_error.unwrap_or(0.0)
    }

    /// Mean and batch-means standard error.
    pub fn from_samples(xs: &[f64], batch: usize) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let batch = batch.max(1);
        let batches: Vec<f64> = xs.chunks(batch).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let se = if batches.len() >= 2 {
            let b = batches.len() as f64;
            let bm = batches.iter().sum::<f64>() / b;
            (batches.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
        } else {
            0.0
        };
        Self { value: mean, standard_error: Some(se) }
    }
}

type Validity = dyn Fn(&FiniteDistribution, usize) -> bool + Send + Sync;

/// A family of source distributions with a validity predicate on outputs.
#[derive(Clone)]
pub struct StatisticalTask {
    pub name: String,
    pub domain_size: usize,
    pub output_size: usize,
    pub family: Vec<FiniteDistribution>,
    valid: Arc<Validity>,
}

impl fmt::Debug for StatisticalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatisticalTask")
            .field("name", &self.name)
            .field("domain_size", &self.domain_size)
            .field("output_size", &self.output_size)
            .field("family", &self.family.len())
            .finish_non_exhaustive()
    }
}

/// One entry of a finite-family task file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub dist: Vec<f64>,
    pub valid_outputs: Vec<usize>,
}

impl StatisticalTask {
    pub fn new<F>(
        name: impl Into<String>,
        domain_size: usize,
        output_size: usize,
        family: Vec<FiniteDistribution>,
        valid: F,
    ) -> Result<Self>
    where
        F: Fn(&FiniteDistribution, usize) -> bool + Send + Sync + 'static,
    {
        if family.iter().any(|d| d.support_size() != domain_size) {
            return Err(dim("task family distributions must live on the task's domain"));
        }
        Ok(Self { name: name.into(), domain_size, output_size, family, valid: Arc::new(valid) })
    }

    /// Task whose valid set for the `i`-th distribution is listed explicitly.
    pub fn from_valid_sets(
        name: impl Into<String>,
        domain_size: usize,
        output_size: usize,
        entries: Vec<(FiniteDistribution, Vec<usize>)>,
    ) -> Result<Self> {
        let family: Vec<FiniteDistribution> = entries.iter().map(|(d, _)| d.clone()).collect();
        let sets: Vec<(FiniteDistribution, Vec<bool>)> = entries
            .into_iter()
            .map(|(d, v)| {
                let mut mask = vec![false; output_size];
                for y in v {
                    if y < output_size {
                        mask[y] = true;
                    }
                }
                (d, mask)
            })
            .collect();
        Self::new(name, domain_size, output_size, family, move |d, y| {
            sets.iter().any(|(e, mask)| e.approx_eq(d, ETA) && mask[y])
        })
    }

    pub fn from_entries(name: impl Into<String>, output_size: usize, entries: Vec<TaskEntry>) -> Result<Self> {
        let domain = entries.first().map(|e| e.dist.len()).ok_or_else(|| arg("empty task family"))?;
        let pairs = entries
            .into_iter()
            .map(|e| Ok((FiniteDistribution::new(e.dist)?, e.valid_outputs)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_valid_sets(name, domain, output_size, pairs)
    }

    pub fn is_valid(&self, d: &FiniteDistribution, y: usize) -> bool {
        (self.valid)(d, y)
    }

    pub fn contains(&self, d: &FiniteDistribution) -> bool {
        self.family.iter().any(|e| e.approx_eq(d, ETA))
    }
}

/// Mechanisms whose failure probability on a task can be evaluated.
pub trait SolvesTasks {
    fn failure(&self, task: &StatisticalTask, d: &FiniteDistribution) -> Result<Estimate>;
}

/// Law of `M(S)` for `S ~ Dⁿ`.
pub fn output_law(m: &TabularMechanism, d: &FiniteDistribution) -> Result<FiniteDistribution> {
    if d.support_size() != m.domain_size() {
        return Err(dim("source distribution lives on a different domain"));
    }
    let mut acc = vec![0.0; m.output_size()];
    for (i, s) in DatasetIter::new(m.domain_size(), m.sample_size()).enumerate() {
        let w: f64 = s.iter().map(|&x| d.prob(x)).product();
        if w > 0.0 {
            for (a, &p) in acc.iter_mut().zip(m.row(i)) {
                *a += w * p;
            }
        }
    }
    FiniteDistribution::new(acc)
}

pub(crate) fn failure_of_law(task: &StatisticalTask, d: &FiniteDistribution, law: &FiniteDistribution) -> f64 {
    law.probs()
        .iter()
        .enumerate()
        .filter(|&(y, _)| !task.is_valid(d, y))
        .map(|(_, &p)| p)
        .sum::<f64>()
        .clamp(0.0, 1.0)
        + 0.0 // an empty f64 sum is -0.0
}

/// `Pr_{S~Dⁿ, M}[M(S) ∉ T(D)]`, exact.
pub fn failure_probability(m: &TabularMechanism, task: &StatisticalTask, d: &FiniteDistribution) -> Result<f64> {
    if !task.contains(d) {
        return Err(arg("distribution is not in the task family"));
    }
    if task.output_size != m.output_size() {
        return Err(dim("task and mechanism have different output spaces"));
    }
    Ok(failure_of_law(task, d, &output_law(m, d)?))
}

impl SolvesTasks for TabularMechanism {
    fn failure(&self, task: &StatisticalTask, d: &FiniteDistribution) -> Result<Estimate> {
        failure_probability(self, task, d).map(Estimate::exact)
    }
}

/// A sampled mechanism evaluated by Monte Carlo.
pub struct MonteCarlo<'a> {
    pub mechanism: &'a SampledMechanism,
    pub trials: usize,
    pub seed: u64,
}

impl SolvesTasks for MonteCarlo<'_> {
    fn failure(&self, task: &StatisticalTask, d: &FiniteDistribution) -> Result<Estimate> {
        if !task.contains(d) {
            return Err(arg("distribution is not in the task family"));
        }
        let m = self.mechanism;
        let xs: Vec<f64> = (0..self.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeding::sub_rng(self.seed, t as u64);
                let s: Vec<usize> = (0..m.sample_size()).map(|_| d.sample(&mut rng)).collect();
                let y = m.sample(&s, rng.random());
                if task.is_valid(d, y) { 0.0 } else { 1.0 }
            })
            .collect();
        Ok(Estimate::from_samples(&xs, 100))
    }
}

/// The task whose valid set under each `D` is the smallest set of outputs
/// carrying at least `1 − β` of `M`'s output law (largest outputs first).
pub fn coverage_task(m: &TabularMechanism, dists: &[FiniteDistribution], beta: f64) -> Result<StatisticalTask> {
    let mut entries = Vec::with_capacity(dists.len());
    for d in dists {
        let law = output_law(m, d)?;
        let mut order: Vec<usize> = (0..law.support_size()).collect();
        order.sort_by(|&a, &b| law.prob(b).total_cmp(&law.prob(a)).then(a.cmp(&b)));
        let mut mass = 0.0;
        let mut valid = Vec::new();
        for y in order {
            if mass >= 1.0 - beta - 1e-12 {
                break;
            }
            mass += law.prob(y);
            valid.push(y);
        }
        entries.push((d.clone(), valid));
    }
    StatisticalTask::from_valid_sets("coverage", m.domain_size(), m.output_size(), entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceEntry {
    pub task: String,
    pub dist_index: usize,
    pub failure_m: Estimate,
    pub failure_m_prime: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub beta_prime: f64,
    pub entries: Vec<EquivalenceEntry>,
    /// Largest `failure(M′)/β′` over the solved entries.
    pub max_ratio: f64,
    pub holds: bool,
}

/// For every family member `M` solves with failure ≤ β, measures the failure
/// of `M′` against the target β′ (Monte Carlo estimates get a 3·SE allowance).
pub fn equivalent_on(
    m: &dyn SolvesTasks,
    m_prime: &dyn SolvesTasks,
    tasks: &[StatisticalTask],
    beta: f64,
    beta_prime: f64,
) -> Result<EquivalenceReport> {
    if tasks.is_empty() || tasks.iter().all(|t| t.family.is_empty()) {
        return Err(arg("equivalence needs a nonempty task family"));
    }
    let mut entries = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut holds = true;
    for task in tasks {
        for (i, d) in task.family.iter().enumerate() {
            let f = m.failure(task, d)?;
            if f.value - 3.0 * f.se() > beta + ETA {
                continue;
            }
            let g = m_prime.failure(task, d)?;
            if beta_prime > 0.0 {
                max_ratio = max_ratio.max(g.value / beta_prime);
            }
            holds &= g.value - 3.0 * g.se() <= beta_prime + ETA;
            entries.push(EquivalenceEntry { task: task.name.clone(), dist_index: i, failure_m: f, failure_m_prime: g });
        }
    }
    Ok(EquivalenceReport { beta, beta_prime, entries, max_ratio, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub value: f64,
    pub mode: StabMode,
    pub standard_error: Option<f64>,
}

/// Pair budget for exact `stab_tv`: `(|X|ⁿ)²·|Y|`.
pub const EXACT_PAIR_BUDGET: f64 = 2e9;

/// Default Monte Carlo pair count and batch size.
pub const MC_PAIRS: usize = 10_000;
pub const MC_BATCH: usize = 100;

/// `stab_tv(M, D) = E[dtv(M(S), M(S′))]` for independent `S, S′ ~ Dⁿ`.
pub fn stab_tv(m: &TabularMechanism, d: &FiniteDistribution, mode: StabMode, seed: u64) -> Result<StabilityReport> {
    if d.support_size() != m.domain_size() {
        return Err(dim("source distribution lives on a different domain"));
    }
    match mode {
        StabMode::Exact => {
            let rows = m.num_rows() as f64;
            let cost = rows * rows * m.output_size() as f64;
            if cost > EXACT_PAIR_BUDGET {
                return Err(Error::Infeasible { entries: cost, limit: EXACT_PAIR_BUDGET });
            }
            let weights: Vec<(usize, f64)> = DatasetIter::new(m.domain_size(), m.sample_size())
                .enumerate()
                .map(|(i, s)| (i, s.iter().map(|&x| d.prob(x)).product::<f64>()))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let value: f64 = weights
                .par_iter()
                .map(|&(i, wi)| {
                    weights
                        .iter()
                        .filter(|&&(j, _)| j > i)
                        .map(|&(j, wj)| 2.0 * wi * wj * tv_slices(m.row(i), m.row(j)))
                        .sum::<f64>()
                })
                .sum();
            Ok(StabilityReport { value: value.clamp(0.0, 1.0), mode, standard_error: None })
        }
        StabMode::MonteCarlo => {
            let n = m.sample_size();
            let xs: Vec<f64> = (0..MC_PAIRS)
                .into_par_iter()
                .map(|t| {
                    let mut rng = seeding::sub_rng(seed, t as u64);
                    let s: Vec<usize> = (0..n).map(|_| d.sample(&mut rng)).collect();
                    let s2: Vec<usize> = (0..n).map(|_| d.sample(&mut rng)).collect();
                    tv_slices(m.row_of(&s), m.row_of(&s2))
                })
                .collect();
            let e = Estimate::from_samples(&xs, MC_BATCH);
            Ok(StabilityReport { value: e.value, mode, standard_error: e.standard_error })
        }
    }
}

/// `Pr[dtv(M(S), M(S′)) ≥ t]` for independent `S, S′ ~ Dⁿ`, exact.
pub fn tv_tail_probability(m: &TabularMechanism, d: &FiniteDistribution, t: f64) -> Result<f64> {
    let weights: Vec<f64> = DatasetIter::new(m.domain_size(), m.sample_size())
        .map(|s| s.iter().map(|&x| d.prob(x)).product())
        .collect();
    let mut p = 0.0;
    for (i, &wi) in weights.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (j, &wj) in weights.iter().enumerate() {
            if wj > 0.0 && tv_slices(m.row(i), m.row(j)) >= t {
                p += wi * wj;
            }
        }
    }
    Ok(p)
}

/// Result of a grid check of ρ-TV-stability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCertificate {
    pub rho: f64,
    pub max_stab: f64,
    pub grid_size: usize,
    pub random_draws: usize,
    pub certified: bool,
    /// Always "grid-certified": universal quantification is not checkable.
    pub label: String,
}

/// Checks `stab_tv(M, D) ≤ ρ` over `grid` plus `random_draws` random sources.
pub fn certify_tv_stable(
    m: &TabularMechanism,
    grid: &[FiniteDistribution],
    random_draws: usize,
    rho: f64,
    seed: u64,
) -> Result<GridCertificate> {
    let mut rng = seeding::rng(seed);
    let mut dists = grid.to_vec();
    for _ in 0..random_draws {
        dists.push(FiniteDistribution::new((0..m.domain_size()).map(|_| rng.random::<f64>()).collect())?);
    }
    let mut max_stab: f64 = 0.0;
    for d in &dists {
        max_stab = max_stab.max(stab_tv(m, d, StabMode::Exact, 0)?.value);
    }
    Ok(GridCertificate {
        rho,
        max_stab,
        grid_size: grid.len(),
        random_draws,
        certified: max_stab <= rho + ETA,
        label: "grid-certified".into(),
    })
}

/// All `m`-subsets of `0..domain_size` as sorted tuples.
pub fn m_sets(domain_size: usize, m: usize) -> Vec<Vec<usize>> {
    k_subsets(domain_size, m)
}

/// Budget on `C(|X|, m)²` for exact `rho_disjoint`.
pub const RHO_EXACT_BUDGET: f64 = 1e6;

/// Expected TV distance between outputs on a uniformly random pair of
/// disjoint `m`-sets, for a symmetric mechanism on `X^m`.
pub fn rho_disjoint(m: &TabularMechanism, seed: u64) -> Result<Estimate> {
    let (d, k) = (m.domain_size(), m.sample_size());
    if d < 2 * k {
        return Err(arg(format!("rho_disjoint needs |X| ≥ 2m, got |X| = {d}, m = {k}")));
    }
    if !m.is_symmetric() {
        return Err(Error::Precondition("rho_disjoint needs a symmetric mechanism".into()));
    }
    let sets = m_sets(d, k);
    if (sets.len() as f64).powi(2) <= RHO_EXACT_BUDGET {
        let (sum, count) = sets
            .par_iter()
            .map(|a| {
                let mut sum = 0.0;
                let mut count = 0usize;
                for b in &sets {
                    if a.iter().all(|x| !b.contains(x)) {
                        sum += tv_slices(m.row_of(a), m.row_of(b));
                        count += 1;
                    }
                }
                (sum, count)
            })
            .reduce(|| (0.0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        return Ok(Estimate::exact(sum / count as f64));
    }
    let xs: Vec<f64> = (0..MC_PAIRS)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::sub_rng(seed, t as u64);
            let idx = rand::seq::index::sample(&mut rng, d, 2 * k).into_vec();
            let mut a = idx[..k].to_vec();
            let mut b = idx[k..].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            tv_slices(m.row_of(&a), m.row_of(&b))
        })
        .collect();
    Ok(Estimate::from_samples(&xs, MC_BATCH))
}

/// Parameters of the small-domain stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizerParams {
    pub rho: f64,
    pub beta: f64,
    /// Leading constant `C` in the sample bound.
    pub constant: f64,
    /// Run with this many samples instead of the bound.
    pub m_override: Option<usize>,
}

impl StabilizerParams {
    pub fn new(rho: f64, beta: f64) -> Self {
        Self { rho, beta, constant: 1.0, m_override: None }
    }
}

/// The stabilized mechanism: learn `Sim_D` from `m` samples, draw
/// `S* ~ Sim_Dⁿ`, output `M(S*)`.
#[derive(Debug, Clone)]
pub struct SmallDomainStabilizer {
    base: TabularMechanism,
    pub params: StabilizerParams,
    /// `C·(|X| + ln(1/β))/(βρ/n)²`.
    pub required_m: usize,
    pub m: usize,
    /// `m` is below the bound.
    pub below_bound: bool,
    pub seed: u64,
}

pub fn make_tv_stable_small_domain(
    m: &TabularMechanism,
    params: StabilizerParams,
    seed: u64,
) -> Result<SmallDomainStabilizer> {
    if !(params.rho > 0.0 && params.rho <= 1.0 && params.beta > 0.0 && params.beta < 1.0) {
        return Err(arg("need ρ in (0,1] and β in (0,1)"));
    }
    let n = m.sample_size() as f64;
    let tau = params.beta * params.rho / n;
    let bound = params.constant * (m.domain_size() as f64 + (1.0 / params.beta).ln()) / (tau * tau);
    let required_m = bound.ceil() as usize;
    let chosen = params.m_override.unwrap_or(required_m);
    Ok(SmallDomainStabilizer {
        base: m.clone(),
        params,
        required_m,
        m: chosen,
        below_bound: chosen < required_m,
        seed,
    })
}

impl SmallDomainStabilizer {
    pub fn domain_size(&self) -> usize {
        self.base.domain_size()
    }

    pub fn output_size(&self) -> usize {
        self.base.output_size()
    }

    /// Output law given the count vector of the `m`-sample.
    pub fn law_given_counts(&self, counts: &[u64]) -> Result<FiniteDistribution> {
        let sim = learn_from_counts(counts)?;
        output_law(&self.base, &sim)
    }

    pub fn law_given_dataset(&self, s: &[usize]) -> Result<FiniteDistribution> {
        let mut counts = vec![0u64; self.domain_size()];
        for &x in s {
            counts[x] += 1;
        }
        self.law_given_counts(&counts)
    }

    /// The figure's procedure as a black box on `m` inputs.
    pub fn to_sampled(&self) -> SampledMechanism {
        let base = self.base.clone();
        let d = self.domain_size();
        SampledMechanism::new(d, self.m, base.output_size(), move |s, seed| {
            let mut counts = vec![0u64; d];
            for &x in s {
                counts[x] += 1;
            }
            let sim = learn_from_counts(&counts).expect("nonempty sample");
            let mut rng = seeding::rng(seed);
            let star: Vec<usize> = (0..base.sample_size()).map(|_| sim.sample(&mut rng)).collect();
            sample_row(base.row_of(&star), &mut rng)
        })
    }

    /// Count vector of an `m`-sample from `d`, via sequential binomials.
    pub fn sample_counts<R: Rng + ?Sized>(&self, d: &FiniteDistribution, rng: &mut R) -> Vec<u64> {
        multinomial(self.m as u64, d.probs(), rng)
    }

    /// Monte Carlo `stab_tv` over `pairs` independent sample pairs.
    pub fn stab_tv(&self, d: &FiniteDistribution, pairs: usize, seed: u64) -> Result<StabilityReport> {
        let xs = (0..pairs)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeding::sub_rng(seed, t as u64);
                let a = self.law_given_counts(&self.sample_counts(d, &mut rng))?;
                let b = self.law_given_counts(&self.sample_counts(d, &mut rng))?;
                Ok(tv_slices(a.probs(), b.probs()))
            })
            .collect::<Result<Vec<f64>>>()?;
        let e = Estimate::from_samples(&xs, MC_BATCH.min(pairs / 2).max(1));
        Ok(StabilityReport { value: e.value, mode: StabMode::MonteCarlo, standard_error: e.standard_error })
    }

    /// Failure estimated over `trials` samples, each contributing its exact
    /// conditional failure.
    pub fn failure_mc(&self, task: &StatisticalTask, d: &FiniteDistribution, trials: usize) -> Result<Estimate> {
        let xs = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeding::sub_rng(self.seed ^ 0xfa11, t as u64);
                let law = self.law_given_counts(&self.sample_counts(d, &mut rng))?;
                Ok(failure_of_law(task, d, &law))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Estimate::from_samples(&xs, MC_BATCH.min(trials / 2).max(1)))
    }
}

/// Failure evaluation for a stabilizer with a fixed trial budget.
pub struct StabilizerFailure<'a> {
    pub stabilizer: &'a SmallDomainStabilizer,
    pub trials: usize,
}

impl SolvesTasks for StabilizerFailure<'_> {
    fn failure(&self, task: &StatisticalTask, d: &FiniteDistribution) -> Result<Estimate> {
        if !task.contains(d) {
            return Err(arg("distribution is not in the task family"));
        }
        self.stabilizer.failure_mc(task, d, self.trials)
    }
}

pub fn multinomial<R: Rng + ?Sized>(total: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = total;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let c = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[i] = c;
        left -= c;
        mass -= p;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub lhs: f64,
    pub best_rhs: f64,
    pub sigma: Vec<usize>,
    pub target_domain: usize,
    pub samples: usize,
    pub holds: bool,
}

/// Compares `stab_tv(M̃, D)` with `max_σ stab_tv(M̃∘σ, Unif(X′))` over sampled
/// maps `σ: X′ → X` whose values are i.i.d. draws from `D`, where `M̃` is the
/// symmetrization of `M`.
pub fn transfer_stability_gap(
    m: &TabularMechanism,
    d: &FiniteDistribution,
    target_domain: usize,
    samples_of_sigma: usize,
    seed: u64,
) -> Result<TransferReport> {
    let sym = symmetrize(m);
    let lhs = stab_tv(&sym, d, StabMode::Exact, 0)?.value;
    let unif = FiniteDistribution::uniform(target_domain)?;
    let n = m.sample_size();
    let mut rng = seeding::rng(seed);
    let mut best_rhs = f64::NEG_INFINITY;
    let mut best_sigma = Vec::new();
    for _ in 0..samples_of_sigma.max(1) {
        let sigma: Vec<usize> = (0..target_domain).map(|_| d.sample(&mut rng)).collect();
        let lifted = TabularMechanism::from_fn(target_domain, n, sym.output_size(), |s| {
            let mapped: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
            Ok(FiniteDistribution::from_normalized(sym.row_of(&mapped).to_vec()))
        })?;
        let rhs = stab_tv(&lifted, &unif, StabMode::Exact, 0)?.value;
        if rhs > best_rhs {
            best_rhs = rhs;
            best_sigma = sigma;
        }
    }
    Ok(TransferReport {
        lhs,
        best_rhs,
        sigma: best_sigma,
        target_domain,
        samples: samples_of_sigma.max(1),
        holds: best_rhs >= lhs / 2.0 - ETA,
    })
}

/// `M∘γ` for each preprocessor, symmetrized; convenience for the audits.
pub fn preprocessed_symmetrized(m: &TabularMechanism, gamma: &Preprocessor) -> Result<TabularMechanism> {
    Ok(symmetrize(&preprocess(m, gamma)?))
}
