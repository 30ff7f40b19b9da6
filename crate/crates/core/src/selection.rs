//! Private selection: Laplace noise, stability-based DP-Select, Pick-Heavy,
//! RDP-Select, replicability checks and the replicability-to-DP reduction.
//!
//! Multisets over `Y` are passed as count vectors.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{arg, Result};
use crate::finite_prob::FiniteDistribution;
use crate::mechanisms::{counts_of, SampledMechanism, TabularMechanism};
use crate::seeding;
use crate::stability::StatisticalTask;

/// Output of Pick-Heavy: an element of `Y` or ⊥.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionOutcome {
    Value(usize),
    Bot,
}

impl SelectionOutcome {
    pub fn value(self) -> Option<usize> {
        match self {
            Self::Value(v) => Some(v),
            Self::Bot => None,
        }
    }

    /// Index in a table whose last column is ⊥.
    pub fn column(self, output_size: usize) -> usize {
        self.value().unwrap_or(output_size)
    }
}

/// Result of DP-Select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub value: usize,
    /// The noisy stability test passed; otherwise `value` is the fallback 0.
    pub confident: bool,
    /// `n ≥ C·ln(1/δ)/ε`.
    pub in_regime: bool,
}

/// Regime constants: DP-Select needs `n ≥ DP_SELECT_C·ln(1/δ)/ε`, Pick-Heavy
/// needs `n ≥ PICK_HEAVY_C·(ln(1/β) + ln(1/δ))/ε`.
pub const DP_SELECT_C: f64 = 20.0;
pub const PICK_HEAVY_C: f64 = 10.0;

fn check_privacy_params(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(delta > 0.0 && delta < 1.0) {
        return Err(arg(format!("need ε > 0 and δ in (0,1), got ({epsilon}, {delta})")));
    }
    Ok(())
}

fn check_counts(counts: &[u64]) -> Result<u64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(arg("empty multiset"));
    }
    Ok(n)
}

/// One `Lap(scale)` draw by inverse CDF.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(arg(format!("Laplace scale must be positive, got {scale}")));
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln())
}

pub fn laplace_noise(scale: f64, seed: u64) -> Result<f64> {
    laplace_sample(scale, &mut seeding::rng(seed))
}

/// `Pr[Lap(scale) > t]`.
pub fn laplace_survival(scale: f64, t: f64) -> f64 {
    if t >= 0.0 {
        0.5 * (-t / scale).exp()
    } else {
        1.0 - 0.5 * (t / scale).exp()
    }
}

/// Largest count, the runner-up count, and the lowest-index argmax.
fn top_two(counts: &[u64]) -> (usize, u64, u64) {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    let second = counts.iter().enumerate().filter(|&(i, _)| i != best).map(|(_, &c)| c).max().unwrap_or(0);
    (best, counts[best], second)
}

/// `2·ln(1/δ)/ε + 2`.
pub fn dp_select_threshold(epsilon: f64, delta: f64) -> f64 {
    2.0 * (1.0 / delta).ln() / epsilon + 2.0
}

fn dp_select_confidence(counts: &[u64], epsilon: f64, delta: f64) -> (usize, f64) {
    let (best, c1, c2) = top_two(counts);
    let gap = (c1 - c2) as f64;
    (best, laplace_survival(2.0 / epsilon, dp_select_threshold(epsilon, delta) - gap))
}

/// Stability-based selection: the argmax if `gap + Lap(2/ε)` clears
/// `2·ln(1/δ)/ε + 2`, otherwise the data-independent fallback 0.
pub fn dp_select(counts: &[u64], epsilon: f64, delta: f64, seed: u64) -> Result<Selection> {
    check_privacy_params(epsilon, delta)?;
    let n = check_counts(counts)?;
    let (best, c1, c2) = top_two(counts);
    let noisy = (c1 - c2) as f64 + laplace_noise(2.0 / epsilon, seed)?;
    let confident = noisy > dp_select_threshold(epsilon, delta);
    Ok(Selection {
        value: if confident { best } else { 0 },
        confident,
        in_regime: n as f64 >= DP_SELECT_C * (1.0 / delta).ln() / epsilon,
    })
}

/// Exact output law of [`dp_select`].
pub fn dp_select_law(counts: &[u64], epsilon: f64, delta: f64) -> Result<FiniteDistribution> {
    check_privacy_params(epsilon, delta)?;
    check_counts(counts)?;
    let (best, p) = dp_select_confidence(counts, epsilon, delta);
    let mut probs = vec![0.0; counts.len()];
    probs[best] += p;
    probs[0] += 1.0 - p;
    FiniteDistribution::new(probs)
}

/// Pick-Heavy: `m = max-freq(S) + Lap(1/ε)` and `h = DP-Select(S, ε, δ)`;
/// returns `h` if `m > 0.7n` and DP-Select was confident, ⊥ otherwise.
pub fn pick_heavy(counts: &[u64], epsilon: f64, delta: f64, seed: u64) -> Result<SelectionOutcome> {
    check_privacy_params(epsilon, delta)?;
    let n = check_counts(counts)?;
    let max_freq = *counts.iter().max().expect("nonempty") as f64;
    let m = max_freq + laplace_noise(1.0 / epsilon, seeding::combine(seed, 1))?;
    let h = dp_select(counts, epsilon, delta, seeding::combine(seed, 2))?;
    Ok(if m > 0.7 * n as f64 && h.confident { SelectionOutcome::Value(h.value) } else { SelectionOutcome::Bot })
}

pub fn pick_heavy_in_regime(n: u64, epsilon: f64, delta: f64, beta: f64) -> bool {
    n as f64 >= PICK_HEAVY_C * ((1.0 / beta).ln() + (1.0 / delta).ln()) / epsilon
}

/// Exact law of [`pick_heavy`] on `|Y| + 1` outcomes, ⊥ last.
pub fn pick_heavy_law(counts: &[u64], epsilon: f64, delta: f64) -> Result<FiniteDistribution> {
    check_privacy_params(epsilon, delta)?;
    let n = check_counts(counts)?;
    let max_freq = *counts.iter().max().expect("nonempty") as f64;
    let p_heavy = laplace_survival(1.0 / epsilon, 0.7 * n as f64 - max_freq);
    let (best, p_conf) = dp_select_confidence(counts, epsilon, delta);
    let mut probs = vec![0.0; counts.len() + 1];
    probs[best] = p_heavy * p_conf;
    probs[counts.len()] = 1.0 - p_heavy * p_conf;
    FiniteDistribution::new(probs)
}

/// Pick-Heavy on `Yⁿ` as a table with outputs `Y ∪ {⊥}`.
pub fn pick_heavy_tabular(output_size: usize, n: usize, epsilon: f64, delta: f64) -> Result<TabularMechanism> {
    TabularMechanism::from_fn(output_size, n, output_size + 1, |s| {
        let counts: Vec<u64> = counts_of(s, output_size).into_iter().map(|c| c as u64).collect();
        pick_heavy_law(&counts, epsilon, delta)
    })
}

/// Copies used by RDP-Select: `⌈RDP_SELECT_CK·ln(1/β)⌉`, at least 1.
pub const RDP_SELECT_CK: f64 = 3.0;

pub fn rdp_select_copies(beta: f64) -> usize {
    ((RDP_SELECT_CK * (1.0 / beta).ln()).ceil() as usize).max(1)
}

/// Exponential mechanism over counts at pure privacy `eps0`.
fn exp_mech_law(counts: &[u64], eps0: f64) -> Vec<f64> {
    let top = *counts.iter().max().unwrap_or(&0) as f64;
    let w: Vec<f64> = counts.iter().map(|&c| (eps0 * (c as f64 - top) / 2.0).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn plurality(votes: &[u64]) -> usize {
    top_two(votes).0
}

/// `k = ⌈3·ln(1/β)⌉` draws of the `ε/k`-DP exponential mechanism on the
/// counts, then the most frequent draw (lowest index on ties).
pub fn rdp_select(counts: &[u64], epsilon: f64, beta: f64, seed: u64) -> Result<usize> {
    if !(epsilon > 0.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(arg("need ε > 0 and β in (0,1)"));
    }
    check_counts(counts)?;
    let k = rdp_select_copies(beta);
    let law = FiniteDistribution::new(exp_mech_law(counts, epsilon / k as f64))?;
    let mut rng = seeding::rng(seed);
    let mut votes = vec![0u64; counts.len()];
    for _ in 0..k {
        votes[law.sample(&mut rng)] += 1;
    }
    Ok(plurality(&votes))
}

fn for_each_composition(total: u64, parts: usize, prefix: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
    if prefix.len() + 1 == parts {
        let used: u64 = prefix.iter().sum();
        prefix.push(total - used);
        f(prefix);
        prefix.pop();
        return;
    }
    let used: u64 = prefix.iter().sum();
    for c in 0..=(total - used) {
        prefix.push(c);
        for_each_composition(total, parts, prefix, f);
        prefix.pop();
    }
}

/// Exact law of [`rdp_select`].
pub fn rdp_select_law(counts: &[u64], epsilon: f64, beta: f64) -> Result<FiniteDistribution> {
    check_counts(counts)?;
    let k = rdp_select_copies(beta);
    let p = exp_mech_law(counts, epsilon / k as f64);
    let mut out = vec![0.0; counts.len()];
    let ln_k = ln_factorial(k as u64);
    for_each_composition(k as u64, counts.len(), &mut Vec::new(), &mut |votes| {
        let mut lp = ln_k;
        for (&v, &q) in votes.iter().zip(&p) {
            if v > 0 {
                lp += v as f64 * q.ln() - ln_factorial(v);
            }
        }
        out[plurality(votes)] += lp.exp();
    });
    FiniteDistribution::new(out)
}

pub fn rdp_select_tabular(output_size: usize, n: usize, epsilon: f64, beta: f64) -> Result<TabularMechanism> {
    TabularMechanism::from_fn(output_size, n, output_size, |s| {
        let counts: Vec<u64> = counts_of(s, output_size).into_iter().map(|c| c as u64).collect();
        rdp_select_law(&counts, epsilon, beta)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicabilityReport {
    pub rho: f64,
    pub tau: f64,
    pub seeds: usize,
    pub trials_per_seed: usize,
    /// `max_y Pr_S[M(S, r) = y]` per seed.
    pub per_seed_max: Vec<f64>,
    pub good_fraction: f64,
    pub standard_error: f64,
    pub pass: bool,
}

/// Estimates, for each shared seed `r`, how concentrated `M(S, r)` is over
/// fresh samples `S ~ Dⁿ`; `r` is τ-good when the top output has mass ≥ 1 − τ.
pub fn check_replicability(
    m: &SampledMechanism,
    d: &FiniteDistribution,
    rho: f64,
    tau: f64,
    seeds: usize,
    trials_per_seed: usize,
    seed: u64,
) -> Result<ReplicabilityReport> {
    if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&tau) {
        return Err(arg("ρ and τ must lie in [0,1]"));
    }
    if seeds == 0 || trials_per_seed == 0 {
        return Err(arg("need at least one seed and one trial"));
    }
    let per_seed_max: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let r = seeding::combine(seed, i as u64);
            let mut rng = seeding::sub_rng(seed ^ 0x5eed, i as u64);
            let mut hits = vec![0u64; m.output_size()];
            for _ in 0..trials_per_seed {
                let s: Vec<usize> = (0..m.sample_size()).map(|_| d.sample(&mut rng)).collect();
                hits[m.sample(&s, r)] += 1;
            }
            *hits.iter().max().expect("nonempty") as f64 / trials_per_seed as f64
        })
        .collect();
    let good = per_seed_max.iter().filter(|&&p| p >= 1.0 - tau - 1e-12).count();
    let f = good as f64 / seeds as f64;
    let se = (f * (1.0 - f) / seeds as f64).sqrt();
    Ok(ReplicabilityReport {
        rho,
        tau,
        seeds,
        trials_per_seed,
        pass: f >= 1.0 - rho - 3.0 * se,
        per_seed_max,
        good_fraction: f,
        standard_error: se,
    })
}

/// Heavy-coin identification on `{0, 1}`: report the element of mass ≥ 0.8.
pub fn heavy_coin_task(bias: f64) -> Result<StatisticalTask> {
    if !(0.5..=1.0).contains(&bias) {
        return Err(arg("bias must lie in [0.5, 1]"));
    }
    let family = vec![
        FiniteDistribution::new(vec![bias, 1.0 - bias])?,
        FiniteDistribution::new(vec![1.0 - bias, bias])?,
    ];
    StatisticalTask::new("heavy-coin", 2, 2, family, |d, y| d.prob(y) >= 0.8 - 1e-12)
}

/// Replicable heavy-coin learner: compares the fraction of ones in `n`
/// samples with a threshold drawn from `U(0.3, 0.7)` by the shared seed.
pub fn heavy_coin_mechanism(n: usize) -> SampledMechanism {
    SampledMechanism::new(2, n, 2, move |s, r| {
        let t = 0.3 + 0.4 * seeding::rng(r).random::<f64>();
        let ones = s.iter().filter(|&&x| x == 1).count() as f64;
        usize::from(ones / s.len() as f64 > t)
    })
}

/// Multipliers of the reduction: `k = ⌈c_k·ln(1/β)⌉`, `ℓ = ⌈c_l·ln(1/(βδ))/ε⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepToDpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub c_k: f64,
    pub c_l: f64,
}

impl RepToDpParams {
    pub fn new(epsilon: f64, delta: f64, beta: f64) -> Self {
        Self { epsilon, delta, beta, c_k: 3.0, c_l: 8.0 }
    }
}

/// The reduction around a replicable `M: Xⁿ → Y`, taking `m = k·ℓ·n` samples.
#[derive(Debug, Clone)]
pub struct RepToDp {
    inner: SampledMechanism,
    pub params: RepToDpParams,
    pub k: usize,
    pub ell: usize,
    pub m: usize,
    /// `ℓ` meets Pick-Heavy's regime at `(ε/2, δ/2, β)`.
    pub in_regime: bool,
}

pub fn rep_to_dp(m: &SampledMechanism, params: RepToDpParams) -> Result<RepToDp> {
    check_privacy_params(params.epsilon, params.delta)?;
    if !(params.beta > 0.0 && params.beta < 1.0) {
        return Err(arg("β must lie in (0,1)"));
    }
    let k = ((params.c_k * (1.0 / params.beta).ln()).ceil() as usize).max(1);
    let ell = ((params.c_l * (1.0 / (params.beta * params.delta)).ln() / params.epsilon).ceil() as usize).max(1);
    Ok(RepToDp {
        inner: m.clone(),
        params,
        k,
        ell,
        m: k * ell * m.sample_size(),
        in_regime: pick_heavy_in_regime(ell as u64, params.epsilon / 2.0, params.delta / 2.0, params.beta),
    })
}

impl RepToDp {
    fn group_seed(seed: u64, i: usize) -> u64 {
        seeding::combine(seed, i as u64)
    }

    /// `Tⁱ = [M(S_{i,1}, rᵢ), …, M(S_{i,ℓ}, rᵢ)]` for each group `i`, where the
    /// input is split into consecutive blocks of `n`.
    pub fn group_outputs(&self, s: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
        if s.len() != self.m {
            return Err(arg(format!("expected {} samples, got {}", self.m, s.len())));
        }
        let n = self.inner.sample_size();
        Ok((0..self.k)
            .map(|i| {
                let r = Self::group_seed(seed, i);
                (0..self.ell).map(|j| self.inner.sample(&s[(i * self.ell + j) * n..][..n], r)).collect()
            })
            .collect())
    }

    pub fn run(&self, s: &[usize], seed: u64) -> Result<usize> {
        let groups = self.group_outputs(s, seed)?;
        let y = self.inner.output_size();
        let (eps, delta) = (self.params.epsilon / 2.0, self.params.delta / 2.0);
        let mut found = Vec::new();
        for (i, t) in groups.iter().enumerate() {
            let counts: Vec<u64> = counts_of(t, y).into_iter().map(|c| c as u64).collect();
            let seed_i = seeding::combine(seed, (self.k + i) as u64);
            if let SelectionOutcome::Value(h) = pick_heavy(&counts, eps, delta, seed_i)? {
                found.push(h);
            }
        }
        let mut rng = seeding::sub_rng(seed, (2 * self.k) as u64);
        Ok(if found.is_empty() { rng.random_range(0..y) } else { found[rng.random_range(0..found.len())] })
    }

    pub fn to_sampled(&self) -> SampledMechanism {
        let this = self.clone();
        SampledMechanism::new(self.inner.domain_size(), self.m, self.inner.output_size(), move |s, seed| {
            this.run(s, seed).expect("input has the reduction's sample size")
        })
    }

    /// Failure rate on `task` under `d` over `trials` end-to-end runs.
    pub fn empirical_failure(&self, task: &StatisticalTask, d: &FiniteDistribution, trials: usize, seed: u64) -> Result<f64> {
        let fails = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeding::sub_rng(seed, t as u64);
                let s: Vec<usize> = (0..self.m).map(|_| d.sample(&mut rng)).collect();
                let y = self.run(&s, rng.next_u64())?;
                Ok(usize::from(!task.is_valid(d, y)))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(fails.iter().sum::<usize>() as f64 / trials as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_analysis::{min_delta_for_epsilon, min_rdp_epsilon};

    #[test]
    fn laplace_examples() {
        assert_eq!(laplace_noise(1.0, 7).unwrap(), laplace_noise(1.0, 7).unwrap());
        assert!(laplace_noise(0.0, 1).is_err());
        let mut rng = seeding::rng(1);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| laplace_sample(1.0, &mut rng).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        // median SE for Lap(1) is 1/(2·f(0)·√n) = 1/√n
        assert!(xs[n / 2].abs() <= 4.0 / (n as f64).sqrt());
        let eps = 0.5;
        let mut rng = seeding::rng(2);
        let ys: Vec<f64> = (0..n).map(|_| laplace_sample(1.0 / eps, &mut rng).unwrap()).collect();
        for t in [1.0f64, 2.0, 3.0] {
            let p = (-t).exp();
            let emp = ys.iter().filter(|y| y.abs() >= t / eps).count() as f64 / n as f64;
            assert!((emp - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "t = {t}");
        }
    }

    #[test]
    fn dp_select_examples() {
        let s = dp_select(&[0, 500, 0], 1.0, 1e-3, 0).unwrap();
        assert_eq!((s.value, s.confident), (1, true));
        let tie = dp_select(&[3, 3], 1.0, 1e-3, 0).unwrap();
        assert_eq!((tie.value, tie.confident), (0, false));
        assert!(dp_select(&[0, 0], 1.0, 0.1, 0).is_err());
        assert!(dp_select(&[1], 0.0, 0.1, 0).is_err());
    }

    #[test]
    fn dp_select_gap_regime() {
        let (eps, delta) = (1.0, 1e-3);
        let n = (10.0 * DP_SELECT_C * (1.0f64 / delta).ln() / eps).ceil() as u64;
        let gap = n / 5;
        let second = (n - gap) / 2;
        let counts = [second, second + gap, n - 2 * second - gap];
        assert_eq!(counts.iter().sum::<u64>(), n);
        let mut wrong = 0;
        for seed in 0..10_000 {
            let s = dp_select(&counts, eps, delta, seed).unwrap();
            assert!(s.in_regime);
            wrong += usize::from(s.value != 1);
        }
        assert!(wrong as f64 <= delta * 10_000.0);
    }

    #[test]
    fn dp_select_is_private_exactly() {
        let m = TabularMechanism::from_fn(3, 5, 3, |s| {
            let counts: Vec<u64> = counts_of(s, 3).into_iter().map(|c| c as u64).collect();
            dp_select_law(&counts, 1.0, 0.1)
        })
        .unwrap();
        assert!(min_delta_for_epsilon(&m, 1.0).unwrap().delta <= 0.1 + 1e-9);
    }

    #[test]
    fn pick_heavy_guarantees() {
        let (eps, delta, beta) = (1.0, 1e-3, 0.1);
        let n = 200u64;
        assert!(pick_heavy_in_regime(n, eps, delta, beta));
        let trials = 10_000;
        let cases: [(&[u64], fn(SelectionOutcome) -> bool); 3] = [
            (&[130, 40, 30], |o| matches!(o, SelectionOutcome::Bot | SelectionOutcome::Value(0))),
            (&[10, 170, 20], |o| o == SelectionOutcome::Value(1)),
            (&[70, 70, 60], |o| o == SelectionOutcome::Bot),
        ];
        for (counts, ok) in cases {
            let good = (0..trials).filter(|&t| ok(pick_heavy(counts, eps, delta, t).unwrap())).count();
            assert!(good as f64 >= (1.0 - beta) * trials as f64, "{counts:?}");
        }
        let uniform = vec![20u64; 10];
        let bots = (0..1000).filter(|&t| pick_heavy(&uniform, eps, delta, t).unwrap() == SelectionOutcome::Bot).count();
        assert_eq!(bots, 1000);
    }

    #[test]
    fn pick_heavy_law_matches_sampler() {
        let counts = [5u64, 4, 1];
        let law = pick_heavy_law(&counts, 2.0, 0.2).unwrap();
        let trials = 100_000;
        let mut hits = [0.0; 4];
        for t in 0..trials {
            hits[pick_heavy(&counts, 2.0, 0.2, t).unwrap().column(3)] += 1.0 / trials as f64;
        }
        for y in 0..4 {
            assert!((hits[y] - law.prob(y)).abs() < 0.006, "{y}");
        }
    }

    #[test]
    fn pick_heavy_micro_audit() {
        for (eps, delta) in [(0.5, 0.05), (1.0, 0.01), (2.0, 0.1)] {
            let m = pick_heavy_tabular(2, 6, eps, delta).unwrap();
            let r = min_delta_for_epsilon(&m, 2.0 * eps).unwrap();
            assert!(r.delta <= 2.0 * delta + 1e-9, "{eps} {delta}: {}", r.delta);
        }
    }

    #[test]
    fn rdp_select_examples() {
        for seed in 0..100 {
            assert_eq!(rdp_select(&[0, 0, 300], 1.0, 0.1, seed).unwrap(), 2);
        }
        let (eps, beta) = (1.0, 0.1);
        let counts = [60u64, 100, 40];
        let good = (0..10_000).filter(|&t| rdp_select(&counts, eps, beta, t).unwrap() == 1).count();
        assert!(good as f64 >= (1.0 - beta) * 10_000.0);
    }

    #[test]
    fn rdp_select_law_matches_sampler_and_is_private() {
        let counts = [3u64, 2, 1];
        let law = rdp_select_law(&counts, 1.0, 0.1).unwrap();
        let trials = 50_000;
        let mut hits = [0.0; 3];
        for t in 0..trials {
            hits[rdp_select(&counts, 1.0, 0.1, t).unwrap()] += 1.0 / trials as f64;
        }
        for y in 0..3 {
            assert!((hits[y] - law.prob(y)).abs() < 0.01);
        }
        for eps in [0.3, 1.0] {
            let m = rdp_select_tabular(2, 4, eps, 0.1).unwrap();
            assert!(min_rdp_epsilon(&m, 2.0).unwrap() <= eps + 1e-9);
        }
    }

    #[test]
    fn replicability_examples() {
        let d = FiniteDistribution::new(vec![0.2, 0.8]).unwrap();
        let seed_only = SampledMechanism::new(2, 3, 4, |_, r| (r % 4) as usize);
        let r = check_replicability(&seed_only, &d, 0.0, 0.0, 50, 20, 1).unwrap();
        assert!(r.pass && r.good_fraction == 1.0);
        let majority = SampledMechanism::new(2, 101, 2, |s, _| usize::from(s.iter().sum::<usize>() > 50));
        let point = FiniteDistribution::point_mass(2, 1).unwrap();
        assert!(check_replicability(&majority, &point, 0.0, 0.0, 20, 20, 1).unwrap().pass);
        let coin = heavy_coin_mechanism(200);
        assert!(check_replicability(&coin, &d, 0.1, 0.1, 200, 200, 2).unwrap().pass);
        let fresh = SampledMechanism::new(2, 3, 100, |s, r| (seeding::stream_seed(r, s, 0) % 100) as usize);
        assert!(!check_replicability(&fresh, &d, 0.1, 0.1, 50, 50, 3).unwrap().pass);
    }

    #[test]
    fn rep_to_dp_examples() {
        let constant = SampledMechanism::new(2, 3, 5, |_, _| 3);
        let red = rep_to_dp(&constant, RepToDpParams::new(1.0, 1e-3, 0.1)).unwrap();
        assert_eq!((red.k, red.ell), (7, 74));
        assert_eq!(red.m, 7 * 74 * 3);
        let s = vec![0; red.m];
        for seed in 0..20 {
            assert_eq!(red.run(&s, seed).unwrap(), 3);
        }
        let noise = SampledMechanism::new(2, 12, 1000, |s, r| (seeding::stream_seed(r, s, 1) % 1000) as usize);
        let red = rep_to_dp(&noise, RepToDpParams::new(1.0, 1e-3, 0.1)).unwrap();
        let mut rng = seeding::rng(0);
        let mut seen = std::collections::HashSet::new();
        for seed in 0..30 {
            let s: Vec<usize> = (0..red.m).map(|_| rng.random_range(0..2)).collect();
            assert!(red.group_outputs(&s, seed).unwrap().iter().all(|t| counts_of(t, 1000).iter().all(|&c| c < t.len() / 2)));
            seen.insert(red.run(&s, seed).unwrap());
        }
        assert!(seen.len() > 20);
    }

    #[test]
    fn neighbors_change_one_group_by_one_element() {
        let red = rep_to_dp(&heavy_coin_mechanism(20), RepToDpParams::new(1.0, 1e-2, 0.2)).unwrap();
        let mut rng = seeding::rng(4);
        for trial in 0..200 {
            let s: Vec<usize> = (0..red.m).map(|_| rng.random_range(0..2)).collect();
            let mut t = s.clone();
            let i = rng.random_range(0..red.m);
            t[i] = 1 - t[i];
            let (a, b) = (red.group_outputs(&s, trial).unwrap(), red.group_outputs(&t, trial).unwrap());
            let changed: Vec<usize> = (0..red.k).filter(|&g| a[g] != b[g]).collect();
            assert!(changed.len() <= 1);
            for g in changed {
                assert_eq!(a[g].iter().zip(&b[g]).filter(|(x, y)| x != y).count(), 1);
            }
        }
    }

    #[test]
    fn rep_to_dp_solves_heavy_coin() {
        let task = heavy_coin_task(0.8).unwrap();
        let red = rep_to_dp(&heavy_coin_mechanism(50), RepToDpParams::new(1.0, 1e-3, 0.1)).unwrap();
        for d in &task.family {
            assert!(red.empirical_failure(&task, d, 200, 9).unwrap() <= 0.5);
        }
    }
}
