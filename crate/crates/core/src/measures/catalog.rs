use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::count_vectors;
use crate::error::{arg, Error, Result};
use crate::finite_prob::FiniteDistribution;
use crate::mechanisms::{counts_of, is_heavy, symmetrize, TabularMechanism};
use crate::selection::{pick_heavy, pick_heavy_tabular, SelectionOutcome};

pub const CATALOG_VERSION: u32 = 1;
/// Catalog entries above this many table entries are skipped.
pub const CATALOG_TABLE_BUDGET: f64 = 2e6;

/// Mechanism families that can be instantiated at any `(|X|, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    /// Uniform over `outputs` values, ignoring the input.
    Constant { outputs: usize },
    Identity,
    FirstK { k: usize },
    FirstHalf,
    FirstAndLast,
    Coordinates { coords: Vec<usize> },
    /// k-ary randomized response on `S₁`.
    RandomizedResponse { epsilon: f64 },
    /// Randomized response on every coordinate independently.
    CoordinateRr { epsilon: f64 },
    /// Count of element 0 plus two-sided geometric noise, clipped to `[0, n]`.
    NoisyCount { epsilon: f64 },
    /// Exponential mechanism with the element counts as utility.
    ExponentialCounts { epsilon: f64 },
    PickHeavy { epsilon: f64, delta: f64 },
    /// The multiset of `S` when `S` is heavy, `∅` otherwise.
    HeavyLeak,
    /// The heavy element when `S` is heavy, `⊥` otherwise.
    HeavyMajority,
    Symmetrized { inner: Box<MechanismSpec> },
    Random { outputs: usize, seed: u64 },
}

fn rr_keep(epsilon: f64, d: usize) -> f64 {
    let e = epsilon.exp();
    e / (e + (d - 1) as f64)
}

fn rr_draw<R: Rng + ?Sized>(x: usize, keep: f64, d: usize, rng: &mut R) -> usize {
    if rng.random::<f64>() < keep {
        return x;
    }
    let y = rng.random_range(0..d - 1);
    if y >= x { y + 1 } else { y }
}

/// `Pr[Z ≥ t]` for the two-sided geometric law `Pr[Z = z] ∝ r^{|z|}`.
fn geometric_upper(r: f64, t: i64) -> f64 {
    if t >= 1 {
        r.powi(t as i32) / (1.0 + r)
    } else {
        1.0 - r.powi((1 - t) as i32) / (1.0 + r)
    }
}

fn exp_weights(counts: &[usize], epsilon: f64) -> Vec<f64> {
    counts.iter().map(|&c| (0.5 * epsilon * c as f64).exp()).collect()
}

fn heavy_element(s: &[usize], d: usize) -> Option<usize> {
    if !is_heavy(s) {
        return None;
    }
    let c = counts_of(s, d);
    (0..d).max_by_key(|&x| (c[x], std::cmp::Reverse(x)))
}

impl MechanismSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Constant { outputs } => format!("constant({outputs})"),
            Self::Identity => "identity".into(),
            Self::FirstK { k } => format!("first-{k}"),
            Self::FirstHalf => "first-half".into(),
            Self::FirstAndLast => "first-and-last".into(),
            Self::Coordinates { coords } => {
                let c: Vec<String> = coords.iter().map(|i| i.to_string()).collect();
                format!("coords({})", c.join(","))
            }
            Self::RandomizedResponse { epsilon } => format!("rr(eps={epsilon})"),
            Self::CoordinateRr { epsilon } => format!("coord-rr(eps={epsilon})"),
            Self::NoisyCount { epsilon } => format!("noisy-count(eps={epsilon})"),
            Self::ExponentialCounts { epsilon } => format!("exp-counts(eps={epsilon})"),
            Self::PickHeavy { epsilon, delta } => format!("pick-heavy(eps={epsilon},delta={delta})"),
            Self::HeavyLeak => "heavy-leak".into(),
            Self::HeavyMajority => "heavy-majority".into(),
            Self::Symmetrized { inner } => format!("sym({})", inner.label()),
            Self::Random { outputs, seed } => format!("random({outputs},seed={seed})"),
        }
    }

    fn coords(&self, n: usize) -> Option<Vec<usize>> {
        match self {
            Self::FirstK { k } => (*k <= n).then(|| (0..*k).collect()),
            Self::FirstHalf => Some((0..n / 2).collect()),
            Self::FirstAndLast => (n >= 2).then(|| vec![0, n - 1]),
            Self::Coordinates { coords } => coords.iter().all(|&i| i < n).then(|| coords.clone()),
            _ => None,
        }
    }

    /// `|Y|` at `(|X|, n)`, `None` when the family does not apply there.
    pub fn output_size(&self, d: usize, n: usize) -> Option<usize> {
        let pow = |k: usize| d.checked_pow(k as u32);
        match self {
            Self::Constant { outputs } | Self::Random { outputs, .. } => Some(*outputs),
            Self::Identity | Self::CoordinateRr { .. } => pow(n),
            Self::FirstK { .. } | Self::FirstHalf | Self::FirstAndLast | Self::Coordinates { .. } => {
                pow(self.coords(n)?.len())
            }
            Self::RandomizedResponse { .. } | Self::ExponentialCounts { .. } => (d >= 2 && n >= 1).then_some(d),
            Self::NoisyCount { .. } => Some(n + 1),
            Self::PickHeavy { .. } | Self::HeavyMajority => Some(d + 1),
            Self::HeavyLeak => Some(count_vectors(d, n).len() + 1),
            Self::Symmetrized { inner } => inner.output_size(d, n),
        }
    }

    pub fn build(&self, d: usize, n: usize) -> Result<TabularMechanism> {
        let out = self
            .output_size(d, n)
            .ok_or_else(|| arg(format!("{} does not apply at |X| = {d}, n = {n}", self.label())))?;
        let entries = out as f64 * (d as f64).powi(n as i32);
        if entries > CATALOG_TABLE_BUDGET {
            return Err(Error::Infeasible { entries, limit: CATALOG_TABLE_BUDGET });
        }
        match self {
            Self::Constant { outputs } => TabularMechanism::constant(d, n, &FiniteDistribution::uniform(*outputs)?),
            Self::Identity => TabularMechanism::identity(d, n),
            Self::FirstK { .. } | Self::FirstHalf | Self::FirstAndLast | Self::Coordinates { .. } => {
                TabularMechanism::coordinates(d, n, &self.coords(n).expect("checked"))
            }
            Self::RandomizedResponse { epsilon } => {
                let keep = rr_keep(*epsilon, d);
                let other = (1.0 - keep) / (d - 1) as f64;
                TabularMechanism::from_fn(d, n, d, |s| {
                    let mut w = vec![other; d];
                    w[s[0]] = keep;
                    FiniteDistribution::new(w)
                })
            }
            Self::CoordinateRr { epsilon } => {
                let keep = rr_keep(*epsilon, d);
                let other = (1.0 - keep) / (d - 1) as f64;
                TabularMechanism::from_fn(d, n, out, |s| {
                    let w = crate::mechanisms::DatasetIter::new(d, n)
                        .map(|y| y.iter().zip(s).map(|(a, b)| if a == b { keep } else { other }).product())
                        .collect();
                    FiniteDistribution::new(w)
                })
            }
            Self::NoisyCount { epsilon } => {
                let r = (-epsilon).exp();
                let p0 = (1.0 - r) / (1.0 + r);
                TabularMechanism::from_fn(d, n, n + 1, |s| {
                    let c = s.iter().filter(|&&x| x == 0).count() as i64;
                    let n = n as i64;
                    let w = (0..=n)
                        .map(|y| match y {
                            0 => geometric_upper(r, c),
                            y if y == n => geometric_upper(r, n - c),
                            y => p0 * r.powi((y - c).unsigned_abs() as i32),
                        })
                        .collect();
                    FiniteDistribution::new(w)
                })
            }
            Self::ExponentialCounts { epsilon } => {
                TabularMechanism::from_fn(d, n, d, |s| FiniteDistribution::new(exp_weights(&counts_of(s, d), *epsilon)))
            }
            Self::PickHeavy { epsilon, delta } => pick_heavy_tabular(d, n, *epsilon, *delta),
            Self::HeavyLeak => {
                let index: HashMap<Vec<usize>, usize> =
                    count_vectors(d, n).into_iter().enumerate().map(|(i, c)| (c, i)).collect();
                TabularMechanism::deterministic(d, n, out, |s| {
                    if is_heavy(s) { index[&counts_of(s, d)] } else { out - 1 }
                })
            }
            Self::HeavyMajority => TabularMechanism::deterministic(d, n, d + 1, |s| heavy_element(s, d).unwrap_or(d)),
            Self::Symmetrized { inner } => Ok(symmetrize(&inner.build(d, n)?)),
            Self::Random { outputs, seed } => TabularMechanism::random(d, n, *outputs, *seed),
        }
    }

    /// One draw of the family at an arbitrary domain size, reported as the
    /// elements of `X` it reveals. `None` for families whose outputs are not
    /// defined beyond the tabulated domain.
    pub fn release<R: Rng + ?Sized>(&self, s: &[usize], d: usize, rng: &mut R) -> Option<Vec<usize>> {
        let n = s.len();
        Some(match self {
            Self::Constant { .. } | Self::NoisyCount { .. } => Vec::new(),
            Self::Identity => s.to_vec(),
            Self::FirstK { .. } | Self::FirstHalf | Self::FirstAndLast | Self::Coordinates { .. } => {
                self.coords(n)?.iter().map(|&i| s[i]).collect()
            }
            Self::RandomizedResponse { epsilon } => vec![rr_draw(s[0], rr_keep(*epsilon, d), d, rng)],
            Self::CoordinateRr { epsilon } => {
                let keep = rr_keep(*epsilon, d);
                s.iter().map(|&x| rr_draw(x, keep, d, rng)).collect()
            }
            Self::ExponentialCounts { epsilon } => {
                let mut distinct = s.to_vec();
                distinct.sort_unstable();
                distinct.dedup();
                let c: Vec<usize> = distinct.iter().map(|x| s.iter().filter(|&y| y == x).count()).collect();
                let w = exp_weights(&c, *epsilon);
                let rest = (d - distinct.len()) as f64;
                let mut u = rng.random::<f64>() * (rest + w.iter().sum::<f64>());
                for (x, wx) in distinct.iter().zip(&w) {
                    if u < *wx {
                        return Some(vec![*x]);
                    }
                    u -= wx;
                }
                loop {
                    let y = rng.random_range(0..d);
                    if !distinct.contains(&y) {
                        break vec![y];
                    }
                }
            }
            Self::PickHeavy { epsilon, delta } => {
                let counts: Vec<u64> = counts_of(s, d).into_iter().map(|c| c as u64).collect();
                match pick_heavy(&counts, *epsilon, *delta, rng.random()).ok()? {
                    SelectionOutcome::Value(x) => vec![x],
                    SelectionOutcome::Bot => Vec::new(),
                }
            }
            Self::HeavyLeak => if is_heavy(s) { s.to_vec() } else { Vec::new() },
            Self::HeavyMajority => heavy_element(s, d).into_iter().collect(),
            Self::Symmetrized { inner } => {
                let mut t = s.to_vec();
                t.shuffle(rng);
                inner.release(&t, d, rng)?
            }
            Self::Random { .. } => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub spec: MechanismSpec,
    pub label: String,
    pub mechanism: TabularMechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub version: u32,
    pub mechanisms: Vec<MechanismSpec>,
}

pub fn default_catalog() -> CatalogFile {
    use MechanismSpec::*;
    let mut mechanisms = vec![
        Constant { outputs: 1 },
        Constant { outputs: 2 },
        Identity,
        FirstK { k: 1 },
        FirstHalf,
        FirstAndLast,
    ];
    mechanisms.extend([[0, 1], [2, 3], [4, 5], [6, 7]].map(|c| Coordinates { coords: c.to_vec() }));
    mechanisms.extend([2e-5, 1e-4, 0.02, 1.0].map(|epsilon| RandomizedResponse { epsilon }));
    mechanisms.extend([
        CoordinateRr { epsilon: 0.04 },
        NoisyCount { epsilon: 0.5 },
        ExponentialCounts { epsilon: 0.01 },
        ExponentialCounts { epsilon: 1.0 },
        PickHeavy { epsilon: 0.5, delta: 1e-3 },
        HeavyLeak,
        HeavyMajority,
        Symmetrized { inner: Box::new(FirstK { k: 1 }) },
        Symmetrized { inner: Box::new(FirstHalf) },
        Random { outputs: 3, seed: 1 },
        Random { outputs: 2, seed: 2 },
    ]);
    CatalogFile { version: CATALOG_VERSION, mechanisms }
}

/// Instantiates every spec that applies at `(|X|, n)` within the table budget.
pub fn build_catalog(specs: &[MechanismSpec], d: usize, n: usize) -> Vec<CatalogEntry> {
    specs
        .iter()
        .filter_map(|spec| {
            let mechanism = spec.build(d, n).ok()?;
            Some(CatalogEntry { spec: spec.clone(), label: spec.label(), mechanism })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_analysis::min_epsilon_for_delta;
    use crate::seeding;

    #[test]
    fn catalog_file_matches_registry() {
        let file: CatalogFile = serde_json::from_str(include_str!("../../catalog/v1.json")).unwrap();
        assert_eq!(file, default_catalog());
    }

    #[test]
    fn output_sizes_match_tables() {
        for spec in default_catalog().mechanisms {
            for (d, n) in [(2, 2), (3, 3), (2, 8)] {
                if let Ok(m) = spec.build(d, n) {
                    assert_eq!(Some(m.output_size()), spec.output_size(d, n), "{}", spec.label());
                }
            }
        }
        assert!(MechanismSpec::Identity.build(3, 8).is_err());
        assert!(MechanismSpec::Coordinates { coords: vec![6, 7] }.build(2, 4).is_err());
        assert_eq!(build_catalog(&default_catalog().mechanisms, 2, 8).len(), 25);
    }

    #[test]
    fn pure_families_have_their_epsilon() {
        for (spec, eps) in [
            (MechanismSpec::NoisyCount { epsilon: 0.5 }, 0.5),
            (MechanismSpec::ExponentialCounts { epsilon: 0.3 }, 0.3),
            (MechanismSpec::RandomizedResponse { epsilon: 0.2 }, 0.2),
            (MechanismSpec::CoordinateRr { epsilon: 0.04 }, 0.04),
        ] {
            let m = spec.build(3, 3).unwrap();
            let got = min_epsilon_for_delta(&m, 0.0).unwrap().epsilon_value();
            assert!(got <= eps + 1e-9, "{}: {got}", spec.label());
        }
    }

    #[test]
    fn releases() {
        let mut rng = seeding::rng(3);
        let s = [5, 9, 9, 9, 9, 9, 2, 1];
        let rel = |spec: MechanismSpec, rng: &mut seeding::Rng| spec.release(&s, 6400, rng);
        assert_eq!(rel(MechanismSpec::Identity, &mut rng).unwrap(), s.to_vec());
        assert_eq!(rel(MechanismSpec::FirstHalf, &mut rng).unwrap(), vec![5, 9, 9, 9]);
        assert_eq!(rel(MechanismSpec::HeavyMajority, &mut rng).unwrap(), vec![9]);
        assert_eq!(rel(MechanismSpec::HeavyLeak, &mut rng).unwrap(), s.to_vec());
        assert!(rel(MechanismSpec::Constant { outputs: 2 }, &mut rng).unwrap().is_empty());
        assert!(rel(MechanismSpec::Random { outputs: 2, seed: 0 }, &mut rng).is_none());
        assert_eq!(rel(MechanismSpec::CoordinateRr { epsilon: 0.04 }, &mut rng).unwrap().len(), 8);
        let sym = MechanismSpec::Symmetrized { inner: Box::new(MechanismSpec::FirstK { k: 1 }) };
        assert!(s.contains(&rel(sym, &mut rng).unwrap()[0]));
        let light = [0, 1, 2, 3, 4, 5, 6, 7];
        assert!(MechanismSpec::HeavyLeak.release(&light, 6400, &mut rng).unwrap().is_empty());
    }
}
