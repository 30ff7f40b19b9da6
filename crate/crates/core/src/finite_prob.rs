//! Exact finite probability: distributions, distances, products, empirical
//! learning, and hypergeometric facts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{arg, dim, Error, Result};

/// Global tolerance for probability equality and normalization.
pub const ETA: f64 = 1e-9;

const NEG_TOLERANCE: f64 = 1e-12;

/// A probability vector over `0..support_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        FiniteDistribution::new(raw.probs)
    }
}

impl From<FiniteDistribution> for RawDistribution {
    fn from(d: FiniteDistribution) -> Self {
        RawDistribution { probs: d.probs }
    }
}

impl FiniteDistribution {
    /// Normalizes `weights`. Entries below `-1e-12` are rejected; tiny negative
    /// rounding residue is clamped to zero.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(arg("distribution needs a nonempty support"));
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(arg("distribution weights must be finite"));
            }
            if *w < -NEG_TOLERANCE {
                return Err(arg(format!("negative probability {w}")));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
            total += *w;
        }
        if total <= 0.0 {
            return Err(arg("distribution weights sum to zero"));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(Self { probs: weights })
    }

    /// Wraps a vector that is already normalized. Used on hot paths that build
    /// rows by convex combination of valid rows.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        Self { probs }
    }

    pub fn point_mass(support_size: usize, at: usize) -> Result<Self> {
        if at >= support_size {
            return Err(arg(format!("point mass at {at} outside support of size {support_size}")));
        }
        let mut probs = vec![0.0; support_size];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(support_size: usize) -> Result<Self> {
        if support_size == 0 {
            return Err(arg("uniform distribution needs a nonempty support"));
        }
        Ok(Self { probs: vec![1.0 / support_size as f64; support_size] })
    }

    /// Uniform over the listed indices.
    pub fn uniform_on(support_size: usize, indices: &[usize]) -> Result<Self> {
        let mut w = vec![0.0; support_size];
        for &i in indices {
            if i >= support_size {
                return Err(arg(format!("index {i} outside support of size {support_size}")));
            }
            w[i] += 1.0;
        }
        Self::new(w)
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn mass(&self, event: &[usize]) -> f64 {
        event.iter().map(|&i| self.probs[i]).sum()
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_point_mass(&self) -> Option<usize> {
        let i = self.argmax();
        ((self.probs[i] - 1.0).abs() <= ETA).then_some(i)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.probs.len() == other.probs.len()
            && self.probs.iter().zip(&other.probs).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Product distribution; outcome `(i, j)` has index `i * other.len() + j`.
    pub fn product(&self, other: &Self) -> Self {
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        Self { probs }
    }

    /// Image under `map: support -> 0..out_size`.
    pub fn push_forward(&self, map: &[usize], out_size: usize) -> Result<Self> {
        if map.len() != self.probs.len() {
            return Err(dim("push-forward map length differs from support size"));
        }
        let mut probs = vec![0.0; out_size];
        for (&p, &y) in self.probs.iter().zip(map) {
            if y >= out_size {
                return Err(arg(format!("map target {y} outside output size {out_size}")));
            }
            probs[y] += p;
        }
        Ok(Self { probs })
    }

    /// Convex combination `Σ wᵢ·dᵢ`; weights are normalized.
    pub fn mixture(weights: &[f64], dists: &[&Self]) -> Result<Self> {
        if weights.len() != dists.len() || dists.is_empty() {
            return Err(dim("mixture needs one weight per component"));
        }
        let size = dists[0].support_size();
        let mut probs = vec![0.0; size];
        for (&w, d) in weights.iter().zip(dists) {
            if d.support_size() != size {
                return Err(dim("mixture components have different supports"));
            }
            for (acc, &p) in probs.iter_mut().zip(&d.probs) {
                *acc += w * p;
            }
        }
        Self::new(probs)
    }
}

/// Total variation distance `½Σ|pᵢ−qᵢ|`.
pub fn tv_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(dim(format!(
            "tv_distance on supports of size {} and {}",
            p.support_size(),
            q.support_size()
        )));
    }
    Ok(tv_slices(p.probs(), q.probs()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Empirical frequency distribution of `samples`.
pub fn learn_empirical(samples: &[usize], domain_size: usize) -> Result<FiniteDistribution> {
    if samples.is_empty() {
        return Err(arg("learn_empirical needs at least one sample"));
    }
    let mut counts = vec![0.0; domain_size];
    for &s in samples {
        if s >= domain_size {
            return Err(arg(format!("sample {s} outside domain of size {domain_size}")));
        }
        counts[s] += 1.0;
    }
    FiniteDistribution::new(counts)
}

/// Empirical distribution from a count vector.
pub fn learn_from_counts(counts: &[u64]) -> Result<FiniteDistribution> {
    FiniteDistribution::new(counts.iter().map(|&c| c as f64).collect())
}

/// Population `N`, successes `K`, draws `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergeometricParams {
    pub population: u64,
    pub successes: u64,
    pub draws: u64,
}

impl HypergeometricParams {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if population == 0 {
            return Err(arg("hypergeometric population must be positive"));
        }
        if successes > population || draws > population {
            return Err(arg("hypergeometric successes and draws must not exceed the population"));
        }
        Ok(Self { population, successes, draws })
    }

    pub fn mean(&self) -> f64 {
        self.draws as f64 * self.successes as f64 / self.population as f64
    }

    pub fn variance(&self) -> f64 {
        let (big_n, k, n) = (self.population as f64, self.successes as f64, self.draws as f64);
        if self.population < 2 {
            return 0.0;
        }
        n * (k / big_n) * (1.0 - k / big_n) * (big_n - n) / (big_n - 1.0)
    }

    /// Smallest and largest attainable success counts.
    pub fn support(&self) -> (u64, u64) {
        let lo = self.draws.saturating_sub(self.population - self.successes);
        let hi = self.draws.min(self.successes);
        (lo, hi)
    }

    pub fn pmf(&self, k: u64) -> Result<f64> {
        hypergeom_pmf(self, k)
    }

    /// Least `k` with CDF(k) ≥ 1/2.
    pub fn median(&self) -> u64 {
        let (lo, hi) = self.support();
        let mut acc = 0.0;
        for k in lo..=hi {
            acc += self.pmf(k).unwrap_or(0.0);
            if acc >= 0.5 - 1e-12 {
                return k;
            }
        }
        hi
    }
}

/// `C(K,k)C(N−K,n−k)/C(N,n)` via log-factorials.
pub fn hypergeom_pmf(params: &HypergeometricParams, k: u64) -> Result<f64> {
    if k > params.draws {
        return Err(Error::Precondition(format!(
            "k = {k} exceeds the number of draws {}",
            params.draws
        )));
    }
    let (lo, hi) = params.support();
    if k < lo || k > hi {
        return Ok(0.0);
    }
    let (big_n, big_k, n) = (params.population, params.successes, params.draws);
    let ln = ln_binomial(big_k, k) + ln_binomial(big_n - big_k, n - k) - ln_binomial(big_n, n);
    Ok(ln.exp())
}

pub fn hypergeom_median_near_mean(params: &HypergeometricParams) -> bool {
    let mu = params.mean();
    let med = params.median() as f64;
    med == mu.floor() || med == mu.ceil()
}

pub fn logconcave_mode_bound_holds(params: &HypergeometricParams) -> bool {
    let (lo, hi) = params.support();
    let mode = (lo..=hi).map(|k| params.pmf(k).unwrap_or(0.0)).fold(0.0, f64::max);
    mode <= 1.0 / (1.0 + params.variance()).sqrt() + 1e-12
}

/// Exact binomial upper tail `Pr[Bin(n, p) ≥ k]`.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (k..=n)
        .map(|j| (ln_binomial(n, j) + j as f64 * lp + (n - j) as f64 * lq).exp())
        .sum::<f64>()
        .min(1.0)
}
