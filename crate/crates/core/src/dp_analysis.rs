//! Exact privacy verification on tabular mechanisms: approximate DP, Rényi DP,
//! group privacy and violation witnesses.
//!
//! Neighbors are datasets at Hamming distance one (coordinate replacement).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::finite_prob::{FiniteDistribution, ETA};
use crate::mechanisms::{decode_dataset, k_subsets, Dataset, TabularMechanism};
use crate::seeding;

/// A neighbor pair and the event attaining a reported bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub s: Dataset,
    pub s_prime: Dataset,
    pub event: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpReport {
    /// `None` when no finite ε works.
    pub epsilon: Option<f64>,
    pub epsilon_infinite: bool,
    pub delta: f64,
    pub witness: Option<Witness>,
}

impl DpReport {
    pub fn epsilon_value(&self) -> f64 {
        self.epsilon.unwrap_or(f64::INFINITY)
    }

    /// `(ε, δ)` within `ETA` of this report.
    pub fn satisfies(&self, epsilon: f64, delta: f64) -> bool {
        !self.epsilon_infinite && self.epsilon_value() <= epsilon + ETA && self.delta <= delta + ETA
    }
}

/// Powers `|X|^(n-1-i)`: the index stride of coordinate `i`.
pub(crate) fn strides(domain_size: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| domain_size.pow((n - 1 - i) as u32)).collect()
}

/// Calls `f(neighbor_index)` for every dataset at Hamming distance one from `index`.
pub(crate) fn for_each_neighbor(
    index: usize,
    domain_size: usize,
    strides: &[usize],
    mut f: impl FnMut(usize),
) {
    for &st in strides {
        let digit = (index / st) % domain_size;
        let base = index - digit * st;
        for x in 0..domain_size {
            if x != digit {
                f(base + x * st);
            }
        }
    }
}

fn pair_delta(p: &[f64], q: &[f64], e_eps: f64) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| (a - e_eps * b).max(0.0)).sum()
}

fn event_of(p: &[f64], q: &[f64], e_eps: f64) -> Vec<usize> {
    (0..p.len()).filter(|&y| p[y] > e_eps * q[y]).collect()
}

/// Deterministic max with lowest `(s, s')` index pair on ties.
fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
        b
    } else {
        a
    }
}

fn max_over_pairs(m: &TabularMechanism, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> (f64, usize, usize) {
    let d = m.domain_size();
    let st = strides(d, m.sample_size());
    (0..m.num_rows())
        .into_par_iter()
        .map(|s| {
            let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
            let p = m.row(s);
            for_each_neighbor(s, d, &st, |t| {
                best = better(best, (f(p, m.row(t)), s, t));
            });
            best
        })
        .reduce(|| (f64::NEG_INFINITY, usize::MAX, usize::MAX), better)
}

fn witness(m: &TabularMechanism, s: usize, t: usize, event: Vec<usize>) -> Witness {
    let (d, n) = (m.domain_size(), m.sample_size());
    Witness {
        s: Dataset::from_index(s, d, n),
        s_prime: Dataset::from_index(t, d, n),
        event,
    }
}

/// Smallest δ with `M` (ε, δ)-DP, attained by the event `{y : P_S(y) > e^ε P_S′(y)}`.
pub fn min_delta_for_epsilon(m: &TabularMechanism, epsilon: f64) -> Result<DpReport> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(arg("epsilon must be nonnegative"));
    }
    let e_eps = epsilon.exp();
    let (delta, s, t) = max_over_pairs(m, |p, q| pair_delta(p, q, e_eps));
    if s == usize::MAX {
        // n ≥ 1 and |X| = 1: there are no neighbors
        return Ok(DpReport { epsilon: Some(epsilon), epsilon_infinite: false, delta: 0.0, witness: None });
    }
    let delta = delta.clamp(0.0, 1.0);
    let w = (delta > 0.0).then(|| witness(m, s, t, event_of(m.row(s), m.row(t), e_eps)));
    Ok(DpReport { epsilon: Some(epsilon), epsilon_infinite: false, delta, witness: w })
}

/// Mass that no finite ε can cover, and the largest finite log-ratio.
fn ratio_profile(m: &TabularMechanism) -> (f64, f64) {
    let (uncovered, _, _) = max_over_pairs(m, |p, q| {
        p.iter().zip(q).filter(|(_, &b)| b <= 0.0).map(|(&a, _)| a).sum()
    });
    let (max_ratio, _, _) = max_over_pairs(m, |p, q| {
        p.iter()
            .zip(q)
            .filter(|(&a, &b)| a > 0.0 && b > 0.0)
            .map(|(&a, &b)| (a / b).ln())
            .fold(0.0, f64::max)
    });
    (uncovered.max(0.0), max_ratio.max(0.0))
}

/// Smallest ε with `M` (ε, δ)-DP by bisection (δ(ε) is non-increasing), to
/// relative tolerance 1e-6.
pub fn min_epsilon_for_delta(m: &TabularMechanism, delta: f64) -> Result<DpReport> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(arg("delta must lie in [0, 1]"));
    }
    let holds = |eps: f64| -> Result<bool> { Ok(min_delta_for_epsilon(m, eps)?.delta <= delta + 1e-12) };
    if holds(0.0)? {
        return min_delta_for_epsilon(m, 0.0);
    }
    let (uncovered, max_ratio) = ratio_profile(m);
    if uncovered > delta + 1e-12 {
        let at_inf = min_delta_for_epsilon(m, max_ratio)?;
        return Ok(DpReport { epsilon: None, epsilon_infinite: true, delta: uncovered, witness: at_inf.witness });
    }
    let (mut lo, mut hi) = (0.0, max_ratio.max(1e-12));
    while !holds(hi)? {
        hi *= 2.0;
    }
    while hi - lo > 1e-6 * hi.max(1e-9) {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    min_delta_for_epsilon(m, hi)
}

/// `D_α(p‖q) = (1/(α−1)) ln Σ q(y)(p(y)/q(y))^α`, computed in log space.
/// Returns `f64::INFINITY` when `p` is not absolutely continuous w.r.t. `q`.
pub fn renyi_divergence(p: &FiniteDistribution, q: &FiniteDistribution, alpha: f64) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(crate::error::dim("renyi_divergence on different supports"));
    }
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(arg("Rényi order must exceed 1"));
    }
    Ok(renyi_slices(p.probs(), q.probs(), alpha))
}

pub(crate) fn renyi_slices(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let mut logs = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        logs.push(alpha * a.ln() + (1.0 - alpha) * b.ln());
    }
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    (lse / (alpha - 1.0)).max(0.0)
}

/// Largest order-α Rényi divergence over ordered neighbor pairs.
pub fn min_rdp_epsilon(m: &TabularMechanism, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(arg("Rényi order must exceed 1"));
    }
    let (v, s, _) = max_over_pairs(m, |p, q| renyi_slices(p, q, alpha));
    Ok(if s == usize::MAX { 0.0 } else { v })
}

/// Checks `Pr[M(S) ∈ E] ≤ (e^ε Pr[M(S′) ∈ E])^{(α−1)/α}` over neighbor pairs
/// and all events (|Y| ≤ 12) or 10⁴ random events.
pub fn rdp_event_bound_holds(m: &TabularMechanism, alpha: f64, epsilon: f64) -> bool {
    let k = m.output_size();
    let events: Vec<Vec<bool>> = if k <= 12 {
        (0u32..(1 << k)).map(|mask| (0..k).map(|y| mask & (1 << y) != 0).collect()).collect()
    } else {
        let mut rng = seeding::rng(0x5eed_e7e7);
        (0..10_000).map(|_| (0..k).map(|_| rng.random::<bool>()).collect()).collect()
    };
    let expo = (alpha - 1.0) / alpha;
    let e_eps = epsilon.exp();
    let (worst, _, _) = max_over_pairs(m, |p, q| {
        events
            .iter()
            .map(|ev| {
                let (mut a, mut b) = (0.0, 0.0);
                for y in 0..k {
                    if ev[y] {
                        a += p[y];
                        b += q[y];
                    }
                }
                a - (e_eps * b).powf(expo)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    });
    worst <= ETA
}

/// Checks `Pr[M(S′)=y] ≥ Pr[M(S)=y]^{2^k}·e^{−(2^k−1)ε}` for every pair at
/// Hamming distance `k` and every `y`.
pub fn group_privacy_lb_holds(m: &TabularMechanism, epsilon: f64, k: usize) -> bool {
    let (d, n) = (m.domain_size(), m.sample_size());
    if k > n {
        return true;
    }
    let power = 2f64.powi(k as i32);
    let slack = (-(power - 1.0) * epsilon).exp();
    let coord_sets = k_subsets(n, k);
    let st = strides(d, n);
    (0..m.num_rows()).into_par_iter().all(|s| {
        let digits = decode_dataset(s, d, n);
        let p = m.row(s);
        coord_sets.iter().all(|coords| {
            // every assignment of different values to the chosen coordinates
            let mut choice = vec![0usize; k];
            loop {
                let mut t = s;
                for (j, &c) in coords.iter().enumerate() {
                    let mut x = choice[j];
                    if x >= digits[c] {
                        x += 1;
                    }
                    t = t - digits[c] * st[c] + x * st[c];
                }
                let q = m.row(t);
                if p.iter().zip(q).any(|(&a, &b)| b < a.powf(power) * slack - ETA) {
                    return false;
                }
                let mut j = 0;
                loop {
                    if j == k {
                        return true;
                    }
                    choice[j] += 1;
                    if choice[j] < d - 1 {
                        break;
                    }
                    choice[j] = 0;
                    j += 1;
                }
            }
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSearch {
    pub witness: Option<Witness>,
    pub exhaustive: bool,
    pub pairs_checked: usize,
}

/// Budget above which the witness search samples instead of enumerating.
pub const EXHAUSTIVE_WITNESS_BUDGET: f64 = 1e7;

/// Searches for a neighbor pair and a singleton event `{y}` with
/// `P_S(y) > e^ε P_S′(y) + δ`.
pub fn dp_violation_witness(
    m: &TabularMechanism,
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> ViolationSearch {
    let (d, n) = (m.domain_size(), m.sample_size());
    let e_eps = epsilon.exp();
    let violated = |s: usize, t: usize| -> Option<usize> {
        let (p, q) = (m.row(s), m.row(t));
        (0..p.len()).find(|&y| p[y] > e_eps * q[y] + delta + ETA)
    };
    let st = strides(d, n);
    let budget = m.num_rows() as f64 * n as f64 * d as f64;
    if budget <= EXHAUSTIVE_WITNESS_BUDGET {
        let mut checked = 0;
        for s in 0..m.num_rows() {
            let mut found = None;
            for_each_neighbor(s, d, &st, |t| {
                if found.is_none() {
                    checked += 1;
                    if let Some(y) = violated(s, t) {
                        found = Some((t, y));
                    }
                }
            });
            if let Some((t, y)) = found {
                return ViolationSearch { witness: Some(witness(m, s, t, vec![y])), exhaustive: true, pairs_checked: checked };
            }
        }
        return ViolationSearch { witness: None, exhaustive: true, pairs_checked: checked };
    }
    let mut rng = seeding::rng(seed);
    for probe in 0..trials {
        let s = rng.random_range(0..m.num_rows());
        let i = rng.random_range(0..n);
        let x = rng.random_range(0..d);
        let digit = (s / st[i]) % d;
        if x == digit {
            continue;
        }
        let t = s - digit * st[i] + x * st[i];
        if let Some(y) = violated(s, t) {
            return ViolationSearch { witness: Some(witness(m, s, t, vec![y])), exhaustive: false, pairs_checked: probe + 1 };
        }
    }
    ViolationSearch { witness: None, exhaustive: false, pairs_checked: trials }
}

/// Two-outcome rows `[p, 1−p]` vs `[q, 1−q]`: closed-form order-2 divergence.
pub fn two_point_renyi2(p: f64, q: f64) -> f64 {
    (p * p / q + (1.0 - p) * (1.0 - p) / (1.0 - q)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::DatasetIter;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn rr() -> TabularMechanism {
        TabularMechanism::randomized_response(2, E / (1.0 + E)).unwrap()
    }

    fn constant(d: usize, n: usize) -> TabularMechanism {
        TabularMechanism::constant(d, n, &FiniteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap()).unwrap()
    }

    /// max over all events E and neighbor pairs of P_S(E) − e^ε P_S′(E).
    fn delta_by_events(m: &TabularMechanism, eps: f64) -> f64 {
        let k = m.output_size();
        let st = strides(m.domain_size(), m.sample_size());
        let mut best: f64 = 0.0;
        for s in 0..m.num_rows() {
            for_each_neighbor(s, m.domain_size(), &st, |t| {
                for mask in 0u32..(1 << k) {
                    let (mut a, mut b) = (0.0, 0.0);
                    for y in 0..k {
                        if mask & (1 << y) != 0 {
                            a += m.row(s)[y];
                            b += m.row(t)[y];
                        }
                    }
                    best = best.max(a - eps.exp() * b);
                }
            });
        }
        best
    }

    #[test]
    fn min_delta_examples() {
        assert_eq!(min_delta_for_epsilon(&constant(3, 2), 0.0).unwrap().delta, 0.0);
        let id = TabularMechanism::identity(2, 1).unwrap();
        let r = min_delta_for_epsilon(&id, 1.0).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-15);
        let w = r.witness.unwrap();
        assert_eq!(w.s.entries(), &[0]);
        assert_eq!(w.s_prime.entries(), &[1]);
        assert_eq!(w.event, vec![0]);
        assert!(min_delta_for_epsilon(&rr(), 1.0).unwrap().delta < 1e-15);
        assert!(min_delta_for_epsilon(&rr(), 0.99).unwrap().delta > 0.0);
    }

    #[test]
    fn min_epsilon_examples() {
        let r = min_epsilon_for_delta(&rr(), 0.0).unwrap();
        assert!((r.epsilon.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(min_epsilon_for_delta(&constant(2, 2), 0.0).unwrap().epsilon, Some(0.0));
        let id = TabularMechanism::identity(2, 1).unwrap();
        let r = min_epsilon_for_delta(&id, 0.5).unwrap();
        assert!(r.epsilon_infinite && r.epsilon.is_none());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["epsilon"].is_null());
        assert_eq!(json["epsilon_infinite"], true);
    }

    #[test]
    fn renyi_examples() {
        let p = FiniteDistribution::new(vec![1.0, 0.0]).unwrap();
        let q = FiniteDistribution::uniform(2).unwrap();
        assert_eq!(renyi_divergence(&q, &q, 2.0).unwrap(), 0.0);
        assert!((renyi_divergence(&p, &q, 2.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        let r = FiniteDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(renyi_divergence(&p, &r, 2.0).unwrap(), f64::INFINITY);
        assert!(renyi_divergence(&p, &q, 1.0).is_err());
    }

    #[test]
    fn rdp_examples() {
        assert_eq!(min_rdp_epsilon(&constant(2, 2), 2.0).unwrap(), 0.0);
        assert_eq!(min_rdp_epsilon(&TabularMechanism::identity(2, 2).unwrap(), 2.0).unwrap(), f64::INFINITY);
        let p = E / (1.0 + E);
        let closed = two_point_renyi2(p, 1.0 - p);
        assert!((min_rdp_epsilon(&rr(), 2.0).unwrap() - closed).abs() < 1e-12);
        assert!(rdp_event_bound_holds(&constant(2, 2), 2.0, 0.0));
        assert!(rdp_event_bound_holds(&rr(), 2.0, closed));
    }

    #[test]
    fn group_privacy_examples() {
        let eps = min_rdp_epsilon(&rr(), 2.0).unwrap();
        assert!(group_privacy_lb_holds(&rr(), eps, 0));
        assert!(group_privacy_lb_holds(&rr(), eps, 1));
        assert!(group_privacy_lb_holds(&constant(3, 3), 0.0, 3));
        let id = TabularMechanism::identity(2, 1).unwrap();
        assert!(!group_privacy_lb_holds(&id, 5.0, 1));
    }

    #[test]
    fn witness_examples() {
        let first = TabularMechanism::coordinates(3, 2, &[0]).unwrap();
        let w = dp_violation_witness(&first, 1.0, 1.0 / 20.0, 0, 0);
        assert!(w.exhaustive && w.witness.is_some());
        assert!(dp_violation_witness(&constant(3, 2), 0.0, 0.0, 0, 0).witness.is_none());
        assert!(dp_violation_witness(&rr(), 1.0, 0.0, 0, 0).witness.is_none());
    }

    #[test]
    fn delta_matches_event_oracle() {
        for seed in 0..50 {
            let m = TabularMechanism::random(3, 2, 4, seed).unwrap();
            for eps in [0.0, 0.1, 0.5, 1.0, 2.0] {
                let a = min_delta_for_epsilon(&m, eps).unwrap().delta;
                assert!((a - delta_by_events(&m, eps).max(0.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn delta_is_nonincreasing_in_epsilon() {
        for seed in 0..50 {
            let m = TabularMechanism::random(2, 2, 3, 1000 + seed).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..10 {
                let d = min_delta_for_epsilon(&m, i as f64 * 0.3).unwrap().delta;
                assert!(d <= prev + 1e-15);
                prev = d;
            }
        }
    }

    #[test]
    fn witness_event_reproduces_delta() {
        let m = TabularMechanism::random(3, 2, 5, 77).unwrap();
        let r = min_delta_for_epsilon(&m, 0.3).unwrap();
        let w = r.witness.unwrap();
        let p = m.apply(&w.s).unwrap();
        let q = m.apply(&w.s_prime).unwrap();
        assert!((p.mass(&w.event) - 0.3f64.exp() * q.mass(&w.event) - r.delta).abs() < ETA);
        assert_eq!(w.s.hamming(&w.s_prime), 1);
    }

    #[test]
    fn pure_dp_implies_rdp() {
        for seed in 0..30 {
            let m = TabularMechanism::random(2, 2, 3, 500 + seed).unwrap();
            let eps = min_epsilon_for_delta(&m, 0.0).unwrap().epsilon.unwrap();
            for alpha in [1.5, 2.0, 4.0] {
                assert!(min_rdp_epsilon(&m, alpha).unwrap() <= eps + 1e-6);
            }
        }
    }

    #[test]
    fn neighbors_enumerate_hamming_one() {
        let st = strides(3, 3);
        for s in 0..27 {
            let mut seen = Vec::new();
            for_each_neighbor(s, 3, &st, |t| seen.push(t));
            assert_eq!(seen.len(), 6);
            let a = decode_dataset(s, 3, 3);
            for t in seen {
                let b = decode_dataset(t, 3, 3);
                assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
            }
        }
        assert_eq!(DatasetIter::new(3, 3).count(), 27);
    }

    fn kernel(out_in: usize, out: usize, seed: u64) -> Vec<FiniteDistribution> {
        let mut rng = seeding::rng(seed);
        (0..out_in)
            .map(|_| FiniteDistribution::new((0..out).map(|_| rng.random::<f64>()).collect()).unwrap())
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn post_processing_never_hurts(seed in any::<u64>(), eps in 0.0f64..2.0) {
            let m = TabularMechanism::random(3, 2, 3, seed).unwrap();
            let a = m.post_process(&kernel(3, 2, seed ^ 1)).unwrap();
            prop_assert!(min_delta_for_epsilon(&a, eps).unwrap().delta
                <= min_delta_for_epsilon(&m, eps).unwrap().delta + ETA);
            prop_assert!(min_rdp_epsilon(&a, 2.0).unwrap() <= min_rdp_epsilon(&m, 2.0).unwrap() + ETA);
        }

        #[test]
        fn group_privacy_holds_on_random_mechanisms(seed in any::<u64>(), k in 0usize..=2) {
            let m = TabularMechanism::random(2, 2, 3, seed).unwrap();
            let eps = min_rdp_epsilon(&m, 2.0).unwrap();
            prop_assert!(group_privacy_lb_holds(&m, eps, k));
        }
    }
}
