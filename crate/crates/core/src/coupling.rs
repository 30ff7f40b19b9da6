//! The distance-`d` joint distribution `J_d`, the random walk to disjoint
//! samples, and empirical checks of the walk marginals and the key lemma.

use std::collections::{BTreeSet, BTreeMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::binomial;

use crate::error::{arg, Error, Result};
use crate::finite_prob::tv_slices;
use crate::mechanisms::TabularMechanism;
use crate::seeding;
use crate::stability::{rho_disjoint, Estimate};

/// `dist(S, S′) = Σᵢ 1[Sᵢ ∉ S′]`.
pub fn dist(s: &[usize], s_prime: &[usize]) -> usize {
    s.iter().filter(|x| !s_prime.contains(x)).count()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn choose<R: Rng + ?Sized>(from: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, from.len(), k).into_iter().map(|i| from[i]).collect()
}

/// One draw from `J_d`: `T` uniform, then `d` elements swapped for fresh ones.
pub fn sample_jd<R: Rng + ?Sized>(x_size: usize, m: usize, d: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if d > m || x_size < m + d {
        return Err(arg(format!("J_d needs d ≤ m and |X| ≥ m + d (|X| = {x_size}, m = {m}, d = {d})")));
    }
    let t = sorted(rand::seq::index::sample(rng, x_size, m).into_vec());
    let outside: Vec<usize> = (0..x_size).filter(|x| !t.contains(x)).collect();
    let removed = choose(&t, d, rng);
    let added = choose(&outside, d, rng);
    let t_prime = sorted(t.iter().copied().filter(|x| !removed.contains(x)).chain(added).collect());
    Ok((t, t_prime))
}

/// Number of ordered pairs of `m`-subsets of `X` at distance `d`.
pub fn jd_support_size(x_size: usize, m: usize, d: usize) -> f64 {
    if d > m || m > x_size || m + d > x_size {
        return 0.0;
    }
    binomial(x_size as u64, m as u64) * binomial(m as u64, d as u64) * binomial((x_size - m) as u64, d as u64)
}

/// `T⁰, …, T^k` with `k = ⌈m/d⌉`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub sets: Vec<Vec<usize>>,
    pub d: usize,
    pub k: usize,
}

impl WalkTrace {
    pub fn is_valid(&self) -> bool {
        let m = self.sets[0].len();
        self.sets.len() == self.k + 1
            && self.sets.iter().all(|t| t.len() == m && t.windows(2).all(|w| w[0] < w[1]))
            && self.sets.windows(2).all(|w| dist(&w[0], &w[1]) == self.d)
            && dist(&self.sets[0], &self.sets[self.k]) == m
    }
}

/// Runs the walk for `d = dist(S, S′)` and `m = |S|`. Each step removes `d`
/// surviving elements of `T⁰` (on the last step, all survivors plus
/// `kd − m` elements of `T^{k−1}∖T⁰`) and adds `d` elements never seen before.
pub fn random_walk<R: Rng + ?Sized>(s: &[usize], s_prime: &[usize], x_size: usize, rng: &mut R) -> Result<WalkTrace> {
    let m = s.len();
    if s_prime.len() != m {
        return Err(arg("walk endpoints must have the same size"));
    }
    let as_set: BTreeSet<usize> = s.iter().copied().collect();
    if as_set.len() != m || s_prime.iter().collect::<BTreeSet<_>>().len() != m {
        return Err(arg("walk endpoints must be sets of distinct elements"));
    }
    let d = dist(s, s_prime);
    if d == 0 {
        return Err(arg("the walk needs dist(S, S′) ≥ 1"));
    }
    let k = m.div_ceil(d);
    if x_size < m + k * d {
        return Err(arg(format!("the walk needs |X| ≥ m + kd = {}, got {x_size}", m + k * d)));
    }
    let t0 = sorted(rand::seq::index::sample(rng, x_size, m).into_vec());
    let mut seen = vec![false; x_size];
    for &x in &t0 {
        seen[x] = true;
    }
    let mut sets = vec![t0.clone()];
    for i in 1..=k {
        let prev = &sets[i - 1];
        let survivors: Vec<usize> = prev.iter().copied().filter(|x| t0.contains(x)).collect();
        let removed: Vec<usize> = if i < k {
            choose(&survivors, d, rng)
        } else {
            let others: Vec<usize> = prev.iter().copied().filter(|x| !t0.contains(x)).collect();
            let extra = choose(&others, k * d - m, rng);
            survivors.into_iter().chain(extra).collect()
        };
        let fresh: Vec<usize> = (0..x_size).filter(|&x| !seen[x]).collect();
        let added = choose(&fresh, d, rng);
        for &x in &added {
            seen[x] = true;
        }
        let next = sorted(prev.iter().copied().filter(|x| !removed.contains(x)).chain(added).collect());
        sets.push(next);
    }
    Ok(WalkTrace { sets, d, k })
}

/// Chi-square goodness of fit against a uniform law on `cells` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub label: String,
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    /// Observations falling outside the target support.
    pub off_support: usize,
    pub pass: bool,
}

fn uniform_chi_square(label: String, counts: &BTreeMap<(Vec<usize>, Vec<usize>), u64>, off_support: usize, cells: f64, trials: usize, significance: f64) -> ChiSquareTest {
    let expected = trials as f64 / cells;
    // Σ (O − E)²/E over all cells, with unobserved cells folded in.
    let statistic = counts.values().map(|&o| (o as f64).powi(2) / expected).sum::<f64>() - trials as f64;
    let dof = cells - 1.0;
    let p_value = if dof >= 1.0 {
        1.0 - ChiSquared::new(dof).expect("positive dof").cdf(statistic.max(0.0))
    } else {
        1.0
    };
    ChiSquareTest { label, statistic, dof, p_value, off_support, pass: off_support == 0 && p_value >= significance }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub x_size: usize,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub trials: usize,
    pub significance: f64,
    /// One test per step marginal `(T^{i−1}, T^i)`, then `(T⁰, T^k)`.
    pub tests: Vec<ChiSquareTest>,
    /// Fraction of traces with `dist(T⁰, T^k) = m`.
    pub endpoint_disjoint_rate: f64,
    pub pass: bool,
}

pub const MARGINAL_SIGNIFICANCE: f64 = 1e-3;
const MAX_SUBSETS: f64 = 500.0;

/// Runs `trials` walks between fixed sets at distance `d` and tests every
/// pairwise marginal against `J_d` and the endpoints against `J_m`.
pub fn verify_walk_marginals(m: usize, d: usize, x_size: usize, trials: usize, seed: u64) -> Result<WalkReport> {
    if binomial(x_size as u64, m as u64) > MAX_SUBSETS {
        return Err(Error::Infeasible { entries: binomial(x_size as u64, m as u64), limit: MAX_SUBSETS });
    }
    if d == 0 || d > m {
        return Err(arg("need 1 ≤ d ≤ m"));
    }
    let s: Vec<usize> = (0..m).collect();
    let s_prime: Vec<usize> = (d..m + d).collect();
    let k = m.div_ceil(d);
    let traces = (0..trials)
        .into_par_iter()
        .map(|t| random_walk(&s, &s_prime, x_size, &mut seeding::sub_rng(seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut tests = Vec::with_capacity(k + 1);
    let pairs: Vec<(usize, usize, usize)> = (1..=k).map(|i| (i - 1, i, d)).chain([(0, k, m)]).collect();
    for (a, b, dd) in pairs {
        let mut counts: BTreeMap<(Vec<usize>, Vec<usize>), u64> = BTreeMap::new();
        let mut off = 0;
        for tr in &traces {
            let (u, v) = (&tr.sets[a], &tr.sets[b]);
            if dist(u, v) != dd {
                off += 1;
                continue;
            }
            *counts.entry((u.clone(), v.clone())).or_default() += 1;
        }
        let label = format!("(T{a},T{b}) vs J_{dd}");
        tests.push(uniform_chi_square(label, &counts, off, jd_support_size(x_size, m, dd), trials, MARGINAL_SIGNIFICANCE));
    }
    let disjoint = traces.iter().filter(|t| dist(&t.sets[0], &t.sets[k]) == m).count();
    let endpoint_disjoint_rate = disjoint as f64 / trials as f64;
    let pass = tests.iter().all(|t| t.pass) && disjoint == trials;
    Ok(WalkReport { x_size, m, d, k, trials, significance: MARGINAL_SIGNIFICANCE, tests, endpoint_disjoint_rate, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub lhs: Estimate,
    pub rho: f64,
    pub dist: usize,
    /// `(ρ/2)·dist/m`.
    pub rhs: f64,
    pub pass: bool,
}

/// Estimates `E_σ[dtv(M(σ(S)), M(σ(S′)))]` over uniform permutations of `X`
/// and compares it with `(ρ/2)·dist(S,S′)/m`.
pub fn key_lemma_check(m: &TabularMechanism, s: &[usize], s_prime: &[usize], trials: usize, seed: u64) -> Result<KeyLemmaReport> {
    let size = m.sample_size();
    if s.len() != size || s_prime.len() != size {
        return Err(arg("datasets must have the mechanism's sample size"));
    }
    let rho = rho_disjoint(m, seed)?.value;
    let dd = dist(s, s_prime);
    let rhs = rho / 2.0 * dd as f64 / size as f64;
    let x_size = m.domain_size();
    let xs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::sub_rng(seed, t as u64);
            let mut sigma: Vec<usize> = (0..x_size).collect();
            sigma.shuffle(&mut rng);
            let a = sorted(s.iter().map(|&x| sigma[x]).collect());
            let b = sorted(s_prime.iter().map(|&x| sigma[x]).collect());
            tv_slices(m.row_of(&a), m.row_of(&b))
        })
        .collect();
    let lhs = Estimate::from_samples(&xs, 100.min(trials / 2).max(1));
    let pass = lhs.value + 3.0 * lhs.se() >= rhs - 1e-12;
    Ok(KeyLemmaReport { lhs, rho, dist: dd, rhs, pass })
}
