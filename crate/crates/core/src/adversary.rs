//! Hypothesis selection, the reconstruction adversary against composed
//! preprocessed copies, and the FindElement hardness apparatus.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::binomial;

use crate::error::{arg, Error, Result};
use crate::finite_prob::{tv_slices, FiniteDistribution};
use crate::mechanisms::{k_subsets, permutations, sample_row, DatasetIter, Preprocessor, TabularMechanism};
use crate::seeding::{self, Rng as SeededRng};
use crate::stability::StatisticalTask;

/// Tournament over `k` candidates: `duel(a, b)` with `a < b` returns whether
/// `a` wins. The candidate with the fewest losses wins, lowest index on ties.
fn tournament(k: usize, mut duel: impl FnMut(usize, usize) -> bool) -> usize {
    let mut losses = vec![0usize; k];
    for a in 0..k {
        for b in (a + 1)..k {
            if duel(a, b) {
                losses[b] += 1;
            } else {
                losses[a] += 1;
            }
        }
    }
    (0..k).min_by_key(|&i| (losses[i], i)).expect("nonempty")
}

/// Scheffé tournament: for each pair, the candidate whose mass on
/// `{y : Dₐ(y) > D_b(y)}` is closer to the empirical frequency wins.
pub fn hypothesis_select(candidates: &[FiniteDistribution], samples: &[usize]) -> Result<usize> {
    if candidates.is_empty() || samples.is_empty() {
        return Err(arg("hypothesis selection needs candidates and samples"));
    }
    let size = candidates[0].support_size();
    if candidates.iter().any(|c| c.support_size() != size) || samples.iter().any(|&y| y >= size) {
        return Err(arg("candidates and samples must share one outcome space"));
    }
    let mut hist = vec![0.0; size];
    for &y in samples {
        hist[y] += 1.0 / samples.len() as f64;
    }
    Ok(tournament(candidates.len(), |a, b| {
        let (pa, pb) = (candidates[a].probs(), candidates[b].probs());
        let (mut fa, mut fb, mut emp) = (0.0, 0.0, 0.0);
        for y in 0..size {
            if pa[y] > pb[y] {
                fa += pa[y];
                fb += pb[y];
                emp += hist[y];
            }
        }
        (fa - emp).abs() <= (fb - emp).abs()
    }))
}

/// How the candidate family is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CandidateFamily {
    /// Every `n`-subset of `X`.
    Full,
    /// The hidden set plus `decoys` distinct random `n`-subsets, shuffled.
    Decoy { decoys: usize },
}

/// Budget on `candidates²·ℓ` for one tournament.
pub const TOURNAMENT_BUDGET: f64 = 1e9;

/// Default number of copies: `⌈2·n·ln|X|⌉`.
pub fn default_ell(n: usize, x_size: usize) -> usize {
    ((2.0 * n as f64 * (x_size as f64).ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub ell: usize,
    pub family: CandidateFamily,
    /// Independent `γ̄` draws; each is used for `trials / gamma_draws` hidden sets.
    pub gamma_draws: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n: usize,
    pub ell: usize,
    pub family: CandidateFamily,
    pub candidates: usize,
    /// `γ̄`-averaged mean of `per_trial`.
    pub expected_overlap: f64,
    pub standard_error: f64,
    pub per_trial: Vec<usize>,
    /// Mean overlap of the best sampled `γ̄`.
    pub best_gamma_overlap: f64,
    /// The best sampled `γ̄`, as (σ, π) pairs.
    pub gamma_bar: Vec<Preprocessor>,
    /// `expected_overlap − 3·SE ≥ 0.9n`.
    pub blatant: bool,
}

struct Copy<'a> {
    rows: Vec<&'a [f64]>,
    nonzero: Vec<Vec<usize>>,
    observed: usize,
}

/// Runs the adversary: draw `γ̄ = (γ₁, …, γ_ℓ)`, observe `yᵢ ~ M∘γᵢ(S)` on a
/// hidden `S` with distinct entries, and select among the candidate family
/// with a Scheffé tournament conditioned on the drawn `γ̄`.
pub fn blatant_attack(m: &TabularMechanism, n: usize, config: &AttackConfig) -> Result<RecoveryReport> {
    let x = m.domain_size();
    if m.sample_size() != n {
        return Err(arg("mechanism sample size differs from n"));
    }
    if x < n + 1 {
        return Err(arg("the domain must exceed n for distinct-element datasets"));
    }
    if !m.is_symmetric() {
        return Err(Error::Precondition("the adversary expects a symmetric mechanism".into()));
    }
    let total = binomial(x as u64, n as u64);
    let candidates = match config.family {
        CandidateFamily::Full => total,
        CandidateFamily::Decoy { decoys } => (decoys as f64 + 1.0).min(total),
    };
    let cost = candidates * candidates * config.ell as f64;
    if cost > TOURNAMENT_BUDGET {
        return Err(Error::Infeasible { entries: cost, limit: TOURNAMENT_BUDGET });
    }
    let full = matches!(config.family, CandidateFamily::Full).then(|| k_subsets(x, n));
    let draws = config.gamma_draws.max(1);
    let per_draw = config.trials.div_ceil(draws);

    let results: Vec<(Vec<Preprocessor>, Vec<usize>)> = (0..draws)
        .into_par_iter()
        .map(|g| {
            let mut rng = seeding::sub_rng(config.seed, g as u64);
            let gamma: Vec<Preprocessor> =
                (0..config.ell).map(|_| Preprocessor::random_permutations(x, n, &mut rng)).collect();
            let overlaps = (0..per_draw)
                .map(|t| {
                    let mut rng = seeding::sub_rng(seeding::combine(config.seed, g as u64), t as u64);
                    attack_once(m, n, &gamma, full.as_deref(), config.family, &mut rng)
                })
                .collect();
            (gamma, overlaps)
        })
        .collect();

    let per_trial: Vec<usize> = results.iter().flat_map(|(_, o)| o.iter().copied()).take(config.trials).collect();
    let count = per_trial.len() as f64;
    let mean = per_trial.iter().sum::<usize>() as f64 / count;
    let var = per_trial.iter().map(|&o| (o as f64 - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    let se = (var / count).sqrt();
    let (best, best_mean) = results
        .iter()
        .enumerate()
        .map(|(i, (_, o))| (i, o.iter().sum::<usize>() as f64 / o.len() as f64))
        .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    Ok(RecoveryReport {
        n,
        ell: config.ell,
        family: config.family,
        candidates: candidates as usize,
        expected_overlap: mean,
        standard_error: se,
        per_trial,
        best_gamma_overlap: best_mean,
        gamma_bar: results[best].0.clone(),
        blatant: mean - 3.0 * se >= 0.9 * n as f64,
    })
}

fn attack_once(
    m: &TabularMechanism,
    n: usize,
    gamma: &[Preprocessor],
    full: Option<&[Vec<usize>]>,
    family: CandidateFamily,
    rng: &mut SeededRng,
) -> usize {
    let x = m.domain_size();
    let hidden: Vec<usize> = rand::seq::index::sample(rng, x, n).into_vec();
    let mut truth = hidden.clone();
    truth.sort_unstable();
    let observations: Vec<usize> = gamma.iter().map(|g| sample_row(m.row_of(&g.apply(&hidden)), rng)).collect();

    let owned;
    let cands: &[Vec<usize>] = match (full, family) {
        (Some(all), _) => all,
        (None, CandidateFamily::Decoy { decoys }) => {
            let mut list = vec![truth.clone()];
            let limit = binomial(x as u64, n as u64) as usize;
            while list.len() < (decoys + 1).min(limit) {
                let mut c = rand::seq::index::sample(rng, x, n).into_vec();
                c.sort_unstable();
                if !list.contains(&c) {
                    list.push(c);
                }
            }
            list.shuffle(rng);
            owned = list;
            &owned
        }
        (None, CandidateFamily::Full) => unreachable!("full family is precomputed"),
    };

    let copies: Vec<Copy> = gamma
        .iter()
        .zip(&observations)
        .map(|(g, &y)| {
            let rows: Vec<&[f64]> = cands.iter().map(|c| m.row_of(&g.apply(c))).collect();
            let nonzero = rows.iter().map(|r| (0..r.len()).filter(|&j| r[j] > 0.0).collect()).collect();
            Copy { rows, nonzero, observed: y }
        })
        .collect();
    let ell = copies.len() as f64;
    let winner = tournament(cands.len(), |a, b| {
        let (mut fa, mut fb, mut emp) = (0.0, 0.0, 0.0);
        for c in &copies {
            let (ra, rb) = (c.rows[a], c.rows[b]);
            for &y in &c.nonzero[a] {
                if ra[y] > rb[y] {
                    fa += ra[y];
                    fb += rb[y];
                }
            }
            if ra[c.observed] > rb[c.observed] {
                emp += 1.0;
            }
        }
        let (fa, fb, emp) = (fa / ell, fb / ell, emp / ell);
        (fa - emp).abs() <= (fb - emp).abs()
    });
    let guess = &cands[winner];
    hidden.iter().filter(|h| guess.contains(h)).count()
}

/// `dtv(D_S, D_S′)` for the candidate distributions `(σ, M∘σ(·))` with `σ`
/// uniform over all permutations of `X`, exact (|X| ≤ 8).
pub fn candidate_distance(m: &TabularMechanism, s: &[usize], s_prime: &[usize]) -> Result<f64> {
    let x = m.domain_size();
    if x > 8 {
        return Err(Error::Infeasible { entries: (1..=x).map(|i| i as f64).product(), limit: 40320.0 });
    }
    let perms = permutations(x);
    let total: f64 = perms
        .iter()
        .map(|sigma| {
            let a: Vec<usize> = s.iter().map(|&e| sigma[e]).collect();
            let b: Vec<usize> = s_prime.iter().map(|&e| sigma[e]).collect();
            tv_slices(m.row_of(&a), m.row_of(&b))
        })
        .sum();
    Ok(total / perms.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: usize,
    /// The entropy floor was waived.
    pub relaxed_entropy: bool,
    pub blatant: bool,
}

/// `E[Σ_{x∈S} 1[x ∈ A(M(S))]]` for `S ~ Dⁿ`, by Monte Carlo. `D` must put at
/// most `1/(100n²)` on every element unless `relax_entropy` is set.
pub fn recovery_score<O, Mech, Adv>(
    mechanism: Mech,
    adversary: Adv,
    d: &FiniteDistribution,
    n: usize,
    trials: usize,
    seed: u64,
    relax_entropy: bool,
) -> Result<RecoveryScore>
where
    Mech: Fn(&[usize], &mut SeededRng) -> O + Sync,
    Adv: Fn(&O) -> Vec<usize> + Sync,
{
    let floor = 1.0 / (100.0 * (n * n) as f64);
    if d.max_prob() > floor + 1e-15 && !relax_entropy {
        return Err(Error::Precondition(format!(
            "source puts {} on one element, above the entropy floor {floor}",
            d.max_prob()
        )));
    }
    if trials == 0 {
        return Err(arg("need at least one trial"));
    }
    let xs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::sub_rng(seed, t as u64);
            let s: Vec<usize> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let guess = adversary(&mechanism(&s, &mut rng));
            s.iter().filter(|x| guess.contains(x)).count() as f64
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0).max(1.0);
    let se = (var / trials as f64).sqrt();
    Ok(RecoveryScore {
        mean,
        standard_error: se,
        trials,
        relaxed_entropy: relax_entropy,
        blatant: mean - 3.0 * se >= 0.9 * n as f64,
    })
}

fn lift(x_star: usize) -> impl Fn(usize) -> usize {
    move |j| if j < x_star { j } else { j + 1 }
}

fn lower(x_star: usize, x: usize) -> usize {
    if x < x_star { x } else { x - 1 }
}

/// The sample built from `S′ ∈ (X′)ⁿ` and the coin vector `b`: `x*` where
/// `bᵢ = 1`, `S′ᵢ` (as an element of `X`) otherwise.
pub fn reduction_input(s_prime: &[usize], b: &[bool], x_star: usize) -> Vec<usize> {
    let up = lift(x_star);
    s_prime.iter().zip(b).map(|(&e, &bi)| if bi { x_star } else { up(e) }).collect()
}

/// Exact table of the FindElement reduction: mix in `x*` at rate 0.7, run
/// `M`, and replace an `x*` output by a uniform element of `X′ = X∖{x*}`.
pub fn find_element_reduction(m: &TabularMechanism, x_star: usize) -> Result<TabularMechanism> {
    let x = m.domain_size();
    if x_star >= x {
        return Err(arg(format!("x* = {x_star} is outside the domain of size {x}")));
    }
    if m.output_size() != x || x < 2 {
        return Err(arg("the reduction needs M: Xⁿ → X with |X| ≥ 2"));
    }
    let n = m.sample_size();
    let reduced = x - 1;
    TabularMechanism::from_fn(reduced, n, reduced, |s_prime| {
        let mut out = vec![0.0; reduced];
        for mask in 0..(1usize << n) {
            let b: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let ones = b.iter().filter(|&&v| v).count() as i32;
            let w = 0.7f64.powi(ones) * 0.3f64.powi(n as i32 - ones);
            let row = m.row_of(&reduction_input(s_prime, &b, x_star));
            for (y, &p) in row.iter().enumerate() {
                if y == x_star {
                    for o in out.iter_mut() {
                        *o += w * p / reduced as f64;
                    }
                } else {
                    out[lower(x_star, y)] += w * p;
                }
            }
        }
        FiniteDistribution::new(out)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessWitness {
    pub s: Vec<usize>,
    pub s_prime: Vec<usize>,
    pub x: usize,
    pub p_s: f64,
    pub p_s_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessProbe {
    /// `Pr_{S~Unif(X)ⁿ}[M(S) ∈ S]`.
    pub p_m: f64,
    /// `p(M) ≥ 1/3`, so a witness search was run.
    pub gate: bool,
    pub witness: Option<HardnessWitness>,
    /// The witness pair violates the requested `(ε, δ)` on the event `{x}`.
    pub violates: bool,
    pub attempts: usize,
}

/// Computes `p(M)` exactly and, when it is at least 1/3, searches random
/// `(S, x, i)` for neighbors with `Pr[M(S) = x] ≤ 1/(100n)` and
/// `Pr[M(S′) = x] ≥ 1/(5n)`.
pub fn find_element_hardness_probe(m: &TabularMechanism, epsilon: f64, delta: f64, trials: usize, seed: u64) -> Result<HardnessProbe> {
    let x = m.domain_size();
    if m.output_size() != x {
        return Err(arg("the probe needs M: Xⁿ → X"));
    }
    let n = m.sample_size();
    let total = m.num_rows() as f64;
    let p_m = DatasetIter::new(x, n)
        .enumerate()
        .map(|(i, s)| {
            let row = m.row(i);
            (0..x).filter(|y| s.contains(y)).map(|y| row[y]).sum::<f64>()
        })
        .sum::<f64>()
        / total;
    let gate = p_m >= 1.0 / 3.0;
    let mut witness = None;
    let mut attempts = 0;
    if gate {
        let mut rng = seeding::rng(seed);
        let (lo, hi) = (1.0 / (100.0 * n as f64), 1.0 / (5.0 * n as f64));
        for _ in 0..trials {
            attempts += 1;
            let s: Vec<usize> = (0..n).map(|_| rng.random_range(0..x)).collect();
            let e = rng.random_range(0..x);
            let i = rng.random_range(0..n);
            let mut s_prime = s.clone();
            s_prime[i] = e;
            let (p, q) = (m.row_of(&s)[e], m.row_of(&s_prime)[e]);
            if p <= lo && q >= hi {
                witness = Some(HardnessWitness { s, s_prime, x: e, p_s: p, p_s_prime: q });
                break;
            }
        }
    }
    let violates = witness.as_ref().is_some_and(|w| w.p_s_prime > epsilon.exp() * w.p_s + delta + 1e-12);
    Ok(HardnessProbe { p_m, gate, witness, violates, attempts })
}

/// FindElement over `grid`: any `x` with `D(x) > 0` is valid.
pub fn task_find_element(x_size: usize, grid: Vec<FiniteDistribution>) -> Result<StatisticalTask> {
    if x_size < 2 {
        return Err(arg("FindElement needs |X| ≥ 2"));
    }
    StatisticalTask::new("find-element", x_size, x_size, grid, |d, y| d.prob(y) > 0.0)
}

/// The unique element with mass in `[0.7, 0.9]`, if any.
pub fn light_task_heavy_element(d: &FiniteDistribution) -> Option<usize> {
    let heavy: Vec<usize> = (0..d.support_size()).filter(|&x| (0.7..=0.9).contains(&d.prob(x))).collect();
    (heavy.len() == 1).then(|| heavy[0])
}

/// FindLightElement over the members of `grid` with a unique element of mass
/// in `[0.7, 0.9]`: valid outputs are the other support elements.
pub fn task_find_light_element(x_size: usize, grid: Vec<FiniteDistribution>) -> Result<StatisticalTask> {
    if x_size < 2 {
        return Err(arg("FindLightElement needs |X| ≥ 2"));
    }
    let family: Vec<FiniteDistribution> = grid.into_iter().filter(|d| light_task_heavy_element(d).is_some()).collect();
    StatisticalTask::new("find-light-element", x_size, x_size, family, |d, y| {
        light_task_heavy_element(d).is_some_and(|h| y != h && d.prob(y) > 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_analysis::{dp_violation_witness, min_delta_for_epsilon};
    use crate::finite_prob::tv_distance;
    use crate::mechanisms::symmetrize;
    use crate::stability::{failure_probability, rho_disjoint};

    #[test]
    fn hypothesis_select_examples() {
        let one = [FiniteDistribution::uniform(3).unwrap()];
        assert_eq!(hypothesis_select(&one, &[2]).unwrap(), 0);
        let points = [FiniteDistribution::point_mass(2, 0).unwrap(), FiniteDistribution::point_mass(2, 1).unwrap()];
        assert_eq!(hypothesis_select(&points, &[0]).unwrap(), 0);
        assert_eq!(hypothesis_select(&points, &[1]).unwrap(), 1);
        assert!(hypothesis_select(&[], &[0]).is_err());
        assert!(hypothesis_select(&points, &[]).is_err());
    }

    #[test]
    fn hypothesis_select_recovers_separated_candidates() {
        let mut rng = seeding::rng(11);
        let mut cands: Vec<FiniteDistribution> = Vec::new();
        while cands.len() < 20 {
            let w: Vec<f64> = (0..12).map(|_| (4.0 * rng.random::<f64>()).exp()).collect();
            let c = FiniteDistribution::new(w).unwrap();
            if cands.iter().all(|o| tv_distance(o, &c).unwrap() >= 0.3) {
                cands.push(c);
            }
        }
        let ell = ((20.0f64 / 0.01).ln() / (0.15f64 * 0.15)).ceil() as usize;
        let trials = 1000;
        let hits = (0..trials)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = seeding::sub_rng(12, t as u64);
                let truth = t % 20;
                let samples: Vec<usize> = (0..ell).map(|_| cands[truth].sample(&mut rng)).collect();
                let j = hypothesis_select(&cands, &samples).unwrap();
                tv_distance(&cands[truth], &cands[j]).unwrap() <= 0.15
            })
            .count();
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}");
    }

    fn set_leak(x: usize) -> TabularMechanism {
        TabularMechanism::deterministic(x, 2, x * x, |s| s[0].min(s[1]) * x + s[0].max(s[1])).unwrap()
    }

    #[test]
    fn set_leaking_mechanism_is_recovered() {
        let m = set_leak(20);
        let cfg = AttackConfig { ell: default_ell(2, 20), family: CandidateFamily::Decoy { decoys: 50 }, gamma_draws: 4, trials: 40, seed: 3 };
        let r = blatant_attack(&m, 2, &cfg).unwrap();
        assert_eq!(r.expected_overlap, 2.0);
        assert!(r.blatant);
        let full = AttackConfig { family: CandidateFamily::Full, trials: 8, ..cfg };
        assert_eq!(blatant_attack(&m, 2, &full).unwrap().expected_overlap, 2.0);
    }

    #[test]
    fn constant_mechanism_stays_near_chance() {
        let x = 30;
        let m = TabularMechanism::constant(x, 2, &FiniteDistribution::uniform(3).unwrap()).unwrap();
        let cfg = AttackConfig { ell: 8, family: CandidateFamily::Full, gamma_draws: 5, trials: 400, seed: 5 };
        let r = blatant_attack(&m, 2, &cfg).unwrap();
        // a uniformly random 2-set overlaps a fixed one in 2·2/30 elements on average
        let chance = 2.0 * 2.0 / x as f64;
        assert!((r.expected_overlap - chance).abs() <= 4.0 * r.standard_error + 0.02, "{}", r.expected_overlap);
        assert!(!r.blatant);
    }

    #[test]
    fn attack_rejects_asymmetric_mechanisms_and_huge_families() {
        let first = TabularMechanism::coordinates(5, 2, &[0]).unwrap();
        let cfg = AttackConfig { ell: 4, family: CandidateFamily::Full, gamma_draws: 1, trials: 1, seed: 0 };
        assert!(blatant_attack(&first, 2, &cfg).is_err());
        let big = TabularMechanism::constant(3000, 1, &FiniteDistribution::uniform(2).unwrap()).unwrap();
        let cfg = AttackConfig { ell: 200, ..cfg };
        assert!(matches!(blatant_attack(&big, 1, &cfg), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn candidate_distance_meets_key_lemma_bound() {
        for seed in 0..10 {
            let m = symmetrize(&TabularMechanism::random(6, 2, 3, 300 + seed).unwrap());
            let rho = rho_disjoint(&m, 0).unwrap().value;
            for (s, t) in [([0, 1], [0, 2]), ([0, 1], [2, 3]), ([3, 5], [1, 5])] {
                let dd = crate::coupling::dist(&s, &t) as f64;
                assert!(candidate_distance(&m, &s, &t).unwrap() >= 0.5 * dd / 2.0 * rho - 1e-12);
            }
        }
    }

    #[test]
    fn recovery_score_examples() {
        let n = 2;
        let d = FiniteDistribution::uniform(100 * n * n).unwrap();
        let ident = recovery_score(|s, _| s.to_vec(), |o| o.clone(), &d, n, 500, 1, false).unwrap();
        assert_eq!(ident.mean, 2.0);
        assert!(ident.blatant);
        let guess = recovery_score(|_, _| (), |_| vec![0, 1], &d, n, 20_000, 2, false).unwrap();
        assert!(guess.mean <= 0.01 + 3.0 * guess.standard_error);
        let eps: f64 = 0.1;
        let k = d.support_size();
        let keep = eps.exp() / (eps.exp() + k as f64 - 1.0);
        let rr = recovery_score(
            |s, rng| {
                s.iter()
                    .map(|&x| if rng.random::<f64>() < keep { x } else { (x + 1 + rng.random_range(0..k - 1)) % k })
                    .collect::<Vec<usize>>()
            },
            |o| o.clone(),
            &d,
            n,
            20_000,
            3,
            false,
        )
        .unwrap();
        assert!(rr.mean < 0.9 * n as f64);
        let skewed = FiniteDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!(recovery_score(|s, _| s.to_vec(), |o| o.clone(), &skewed, n, 10, 1, false).is_err());
        assert!(recovery_score(|s, _| s.to_vec(), |o| o.clone(), &skewed, n, 10, 1, true).unwrap().relaxed_entropy);
    }

    #[test]
    fn reduction_branches() {
        assert_eq!(reduction_input(&[0, 2, 1], &[false; 3], 1), vec![0, 3, 2]);
        assert_eq!(reduction_input(&[0, 2, 1], &[true; 3], 1), vec![1, 1, 1]);
    }

    #[test]
    fn reduction_preserves_dp_exactly() {
        for seed in 0..30 {
            let m = TabularMechanism::random(3, 2, 3, 500 + seed).unwrap();
            let eps = 1.0;
            let delta = min_delta_for_epsilon(&m, eps).unwrap().delta;
            for x_star in 0..3 {
                let red = find_element_reduction(&m, x_star).unwrap();
                assert!(min_delta_for_epsilon(&red, eps).unwrap().delta <= delta + 1e-9);
            }
        }
        assert!(find_element_reduction(&TabularMechanism::identity(3, 1).unwrap(), 3).is_err());
    }

    #[test]
    fn reduction_maps_light_success_to_find_element_success() {
        // On X = {0,1,2} with x* = 0, "output the least non-x* element seen, else 1".
        let m = TabularMechanism::deterministic(3, 2, 3, |s| s.iter().copied().filter(|&e| e != 0).min().unwrap_or(1)).unwrap();
        let red = find_element_reduction(&m, 0).unwrap();
        let grid = vec![FiniteDistribution::point_mass(2, 0).unwrap(), FiniteDistribution::new(vec![0.5, 0.5]).unwrap()];
        let fe = task_find_element(2, grid).unwrap();
        for d in &fe.family {
            let lifted = FiniteDistribution::new(vec![0.7, 0.3 * d.prob(0), 0.3 * d.prob(1)]).unwrap();
            let light = task_find_light_element(3, vec![lifted.clone()]).unwrap();
            let light_fail = failure_probability(&m, &light, &lifted).unwrap();
            assert!(failure_probability(&red, &fe, d).unwrap() <= light_fail + 1e-12);
        }
    }

    #[test]
    fn hardness_probe_examples() {
        let first = TabularMechanism::coordinates(40, 1, &[0]).unwrap();
        let p = find_element_hardness_probe(&first, 1.0, 0.1, 10_000, 0).unwrap();
        assert_eq!(p.p_m, 1.0);
        assert!(p.gate && p.witness.is_some() && p.violates);
        let c = TabularMechanism::constant(40, 2, &FiniteDistribution::point_mass(40, 0).unwrap()).unwrap();
        let p = find_element_hardness_probe(&c, 1.0, 0.1, 100, 0).unwrap();
        assert!(p.p_m < 1.0 / 3.0 && !p.gate && p.witness.is_none());
    }

    #[test]
    fn probe_agrees_with_exhaustive_witness_on_randomized_response() {
        for keep in [0.2, 0.5, 0.9, 0.99, 1.0] {
            let m = TabularMechanism::randomized_response(3, keep).unwrap();
            let probe = find_element_hardness_probe(&m, 1.0, 0.1, 5000, 1).unwrap();
            assert_eq!(probe.gate, keep >= 1.0 / 3.0);
            let exhaustive = dp_violation_witness(&m, 1.0, 0.1, 0, 0);
            if probe.violates {
                assert!(exhaustive.witness.is_some());
            }
        }
    }

    #[test]
    fn task_definitions() {
        let u = FiniteDistribution::uniform(4).unwrap();
        let fe = task_find_element(4, vec![u.clone()]).unwrap();
        assert!((0..4).all(|y| fe.is_valid(&u, y)));
        let d = FiniteDistribution::new(vec![0.8, 0.2]).unwrap();
        let half = FiniteDistribution::new(vec![0.5, 0.5]).unwrap();
        let fl = task_find_light_element(2, vec![d.clone(), half.clone()]).unwrap();
        assert!(!fl.is_valid(&d, 0) && fl.is_valid(&d, 1));
        assert!(!fl.contains(&half) && fl.contains(&d));
        assert!(task_find_element(1, vec![]).is_err());
    }
}
