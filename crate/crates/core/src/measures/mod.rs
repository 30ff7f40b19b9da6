//! The seven privacy measures, heaviness facts, count-vector tables, the
//! mechanism catalog and the axiom audits.

mod audit;
mod catalog;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::composition::PdpConstants;
use crate::dp_analysis::{min_delta_for_epsilon, min_rdp_epsilon, strides};
use crate::error::{arg, Error, Result};
use crate::finite_prob::{binomial_upper_tail, FiniteDistribution, ETA};
use crate::mechanisms::{symmetrize, DatasetIter, TabularMechanism};
use crate::stability::{failure_of_law, Estimate, SolvesTasks, StatisticalTask};

pub use crate::mechanisms::is_heavy;
pub use audit::*;
pub use catalog::*;

/// Floor on `n` for `P_heavy` at desk scale.
pub const HEAVY_MIN_N_DEFAULT: usize = 8;
/// The floor the heaviness definition asks for.
pub const HEAVY_MIN_N_STRICT: usize = 40;
/// Largest `n` the junta subset search accepts.
pub const JUNTA_MAX_N: usize = 12;

/// A measure value; `+∞` serializes as `null` with `infinite: true`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub value: Option<f64>,
    pub infinite: bool,
}

impl MeasureValue {
    pub fn get(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

impl From<f64> for MeasureValue {
    fn from(v: f64) -> Self {
        if v.is_infinite() {
            Self { value: None, infinite: true }
        } else {
            Self { value: Some(v), infinite: false }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PrivacyMeasure {
    Dp,
    Rdp,
    Half,
    Heavy { min_n: usize },
    All,
    Junta,
    SqrtJunta,
}

/// What a measure is claimed to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimedAxioms {
    pub reorder: bool,
    pub remap: bool,
    pub blatant: bool,
    pub composition_c: f64,
    pub scaling: bool,
}

impl PrivacyMeasure {
    pub fn standard() -> Vec<Self> {
        vec![
            Self::Dp,
            Self::Rdp,
            Self::Half,
            Self::Heavy { min_n: HEAVY_MIN_N_DEFAULT },
            Self::All,
            Self::Junta,
            Self::SqrtJunta,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Dp => "P_DP",
            Self::Rdp => "P_RDP",
            Self::Half => "P_half",
            Self::Heavy { .. } => "P_heavy",
            Self::All => "P_all",
            Self::Junta => "P_junta",
            Self::SqrtJunta => "P_sqrt_junta",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::standard().into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    pub fn evaluate(&self, m: &TabularMechanism) -> Result<f64> {
        match *self {
            Self::Dp => p_dp(m),
            Self::Rdp => p_rdp(m),
            Self::Half => p_half(m),
            Self::Heavy { min_n } => p_heavy(m, min_n),
            Self::All => Ok(p_all(m)),
            Self::Junta => p_junta(m),
            Self::SqrtJunta => p_sqrt_junta(m),
        }
    }

    /// `P(M) ≤ 1`.
    pub fn is_private(&self, m: &TabularMechanism) -> Result<bool> {
        Ok(self.evaluate(m)? <= 1.0 + ETA)
    }

    /// Binary measures satisfy strong composition for every `c`; they are
    /// audited at `c = 1/2`.
    pub fn claimed(&self) -> ClaimedAxioms {
        let mut c = ClaimedAxioms { reorder: true, remap: true, blatant: true, composition_c: 0.5, scaling: true };
        match self {
            Self::Dp => c.composition_c = PdpConstants::default().c,
            Self::Rdp => {}
            Self::All => c.blatant = false,
            Self::Half => c.reorder = false,
            Self::Heavy { .. } => c.remap = false,
            Self::Junta => c.composition_c = 1.0,
            Self::SqrtJunta => c.scaling = false,
        }
        c
    }
}

/// Smallest `ε` with `δ(ε) ≤ ε²/n³`, searched on `[0, n^{3/2})`; `+∞` when
/// `δ` stays at 1 over the whole range.
pub fn dp_threshold_epsilon(m: &TabularMechanism) -> Result<f64> {
    let n3 = (m.sample_size() as f64).powi(3);
    let ok = |e: f64| -> Result<bool> { Ok(min_delta_for_epsilon(m, e)?.delta <= e * e / n3 + 1e-12) };
    if ok(0.0)? {
        return Ok(0.0);
    }
    let mut hi = n3.sqrt() * (1.0 - 1e-9);
    if !ok(hi)? {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `P_DP(M) = (ε*/α)^{5/4}` with `α = 0.05`.
pub fn p_dp(m: &TabularMechanism) -> Result<f64> {
    let eps = dp_threshold_epsilon(m)?;
    Ok((eps / PdpConstants::default().alpha).powf(1.25))
}

/// `√ε` for the smallest `ε` with `M` `(2, ε)`-RDP.
pub fn p_rdp(m: &TabularMechanism) -> Result<f64> {
    Ok(min_rdp_epsilon(m, 2.0)?.max(0.0).sqrt())
}

pub fn p_all(_m: &TabularMechanism) -> f64 {
    0.0
}

fn rows_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ETA)
}

/// Rows agree whenever the datasets agree on `coords`.
pub fn depends_only_on(m: &TabularMechanism, coords: &[usize]) -> bool {
    let (d, n) = (m.domain_size(), m.sample_size());
    let st = strides(d, n);
    let mut keep = vec![false; n];
    for &i in coords {
        keep[i] = true;
    }
    DatasetIter::new(d, n).enumerate().all(|(r, s)| {
        let canon: usize = (0..n).filter(|&i| keep[i]).map(|i| s[i] * st[i]).sum();
        canon == r || rows_close(m.row(r), m.row(canon))
    })
}

/// Smallest `I ⊆ [n]` the mechanism is a junta on, by increasing-size search.
pub fn junta_set(m: &TabularMechanism) -> Result<Vec<usize>> {
    let n = m.sample_size();
    if n > JUNTA_MAX_N {
        return Err(Error::Infeasible { entries: 2f64.powi(n as i32), limit: 2f64.powi(JUNTA_MAX_N as i32) });
    }
    for k in 0..=n {
        for set in crate::mechanisms::k_subsets(n, k) {
            if depends_only_on(m, &set) {
                return Ok(set);
            }
        }
    }
    unreachable!("every mechanism is an n-junta")
}

pub fn junta_size(m: &TabularMechanism) -> Result<usize> {
    junta_set(m).map(|s| s.len())
}

/// `2k/n`.
pub fn p_junta(m: &TabularMechanism) -> Result<f64> {
    Ok(2.0 * junta_size(m)? as f64 / m.sample_size() as f64)
}

/// `√(2k/n)`.
pub fn p_sqrt_junta(m: &TabularMechanism) -> Result<f64> {
    p_junta(m).map(f64::sqrt)
}

/// 0 when rows depend only on the first `⌊n/2⌋` coordinates, else 2.
pub fn p_half(m: &TabularMechanism) -> Result<f64> {
    let n = m.sample_size();
    if n < 2 {
        return Err(arg("P_half needs n ≥ 2"));
    }
    let first: Vec<usize> = (0..n / 2).collect();
    Ok(if depends_only_on(m, &first) { 0.0 } else { 2.0 })
}

fn check_heavy_floor(n: usize, min_n: usize) -> Result<()> {
    if n < min_n {
        return Err(Error::Regime(format!("P_heavy is configured for n ≥ {min_n}, got n = {n}")));
    }
    Ok(())
}

fn point_mass_of(row: &[f64]) -> Option<usize> {
    row.iter().position(|&p| p >= 1.0 - ETA)
}

/// The common point-mass output on non-heavy datasets: `None` when there is
/// none, `Some(None)` when every dataset is heavy.
fn heavy_anchor(m: &TabularMechanism) -> Option<Option<usize>> {
    let mut anchor = None;
    for (r, s) in DatasetIter::new(m.domain_size(), m.sample_size()).enumerate() {
        if is_heavy(&s) {
            continue;
        }
        let y = point_mass_of(m.row(r))?;
        if *anchor.get_or_insert(y) != y {
            return None;
        }
    }
    Some(anchor)
}

/// 0 when all non-heavy datasets map to one common point mass `y*`, else 2.
pub fn p_heavy(m: &TabularMechanism, min_n: usize) -> Result<f64> {
    check_heavy_floor(m.sample_size(), min_n)?;
    Ok(if heavy_anchor(m).is_some() { 0.0 } else { 2.0 })
}

fn counts_heavy(c: &[usize], n: usize) -> bool {
    5 * c.iter().copied().max().unwrap_or(0) >= 3 * n
}

/// `Pr_{S~Dⁿ}[S heavy]`, exact: the events "x appears ≥ 0.6n times" are
/// disjoint across `x`, so the probability is a sum of binomial tails.
pub fn heavy_probability(d: &FiniteDistribution, n: usize) -> f64 {
    let k = (3 * n).div_ceil(5) as u64;
    d.probs().iter().map(|&p| binomial_upper_tail(n as u64, p, k)).sum::<f64>().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyComparison {
    pub n: usize,
    pub m: usize,
    pub p_heavy_n: f64,
    pub p_heavy_m: f64,
    /// `p_heavy_n / p_heavy_m`, 1 when both vanish.
    pub ratio: f64,
    pub holds: bool,
}

/// Checks `Pr_{Dⁿ}[heavy] ≥ (1/20)·Pr_{Dᵐ}[heavy]` for `m ≥ 2n + 1`.
pub fn heavy_comparison_check(d: &FiniteDistribution, n: usize, m: usize) -> Result<HeavyComparison> {
    if m < 2 * n + 1 || n == 0 {
        return Err(arg(format!("the comparison needs n ≥ 1 and m ≥ 2n + 1, got n = {n}, m = {m}")));
    }
    let a = heavy_probability(d, n);
    let b = heavy_probability(d, m);
    let ratio = if b > 0.0 { a / b } else { 1.0 };
    Ok(HeavyComparison { n, m, p_heavy_n: a, p_heavy_m: b, ratio, holds: a * 20.0 >= b * (1.0 - 1e-12) })
}

/// All count vectors of length `d` summing to `n`, lexicographic.
pub fn count_vectors(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(d, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(d, n, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// A symmetric mechanism stored by count vector instead of by dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    domain_size: usize,
    sample_size: usize,
    output_size: usize,
    classes: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    rows: Vec<f64>,
}

impl CountTable {
    pub fn from_fn<F>(domain_size: usize, sample_size: usize, output_size: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Result<FiniteDistribution>,
    {
        let classes = count_vectors(domain_size, sample_size);
        let mut rows = Vec::with_capacity(classes.len() * output_size);
        for c in &classes {
            let row = f(c)?;
            if row.support_size() != output_size {
                return Err(crate::error::dim("row has the wrong output size"));
            }
            rows.extend_from_slice(row.probs());
        }
        let index = classes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self { domain_size, sample_size, output_size, classes, index, rows })
    }

    /// Class averages of a tabular mechanism.
    pub fn from_tabular(m: &TabularMechanism) -> Result<Self> {
        let sym = symmetrize(m);
        let d = m.domain_size();
        let mut reps: HashMap<Vec<usize>, usize> = HashMap::new();
        for (r, s) in DatasetIter::new(d, m.sample_size()).enumerate() {
            reps.entry(crate::mechanisms::counts_of(&s, d)).or_insert(r);
        }
        Self::from_fn(d, m.sample_size(), m.output_size(), |c| {
            Ok(FiniteDistribution::from_normalized(sym.row(reps[c]).to_vec()))
        })
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn row_of_counts(&self, counts: &[usize]) -> Option<&[f64]> {
        let k = self.output_size;
        self.index.get(counts).map(|&i| &self.rows[i * k..(i + 1) * k])
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.output_size..(i + 1) * self.output_size]
    }

    /// Law of `M(S)` for `S ~ Dⁿ`, weighting classes by the multinomial pmf.
    pub fn output_law(&self, d: &FiniteDistribution) -> Result<FiniteDistribution> {
        if d.support_size() != self.domain_size {
            return Err(crate::error::dim("source distribution lives on a different domain"));
        }
        let ln_n = ln_factorial(self.sample_size as u64);
        let mut acc = vec![0.0; self.output_size];
        for (i, c) in self.classes.iter().enumerate() {
            let mut lw = ln_n;
            let mut zero = false;
            for (x, &cx) in c.iter().enumerate() {
                if cx == 0 {
                    continue;
                }
                let p = d.prob(x);
                if p <= 0.0 {
                    zero = true;
                    break;
                }
                lw += cx as f64 * p.ln() - ln_factorial(cx as u64);
            }
            if zero {
                continue;
            }
            let w = lw.exp();
            for (a, &p) in acc.iter_mut().zip(self.row(i)) {
                *a += w * p;
            }
        }
        FiniteDistribution::new(acc)
    }
}

impl SolvesTasks for CountTable {
    fn failure(&self, task: &StatisticalTask, d: &FiniteDistribution) -> Result<Estimate> {
        if !task.contains(d) {
            return Err(arg("distribution is not in the task family"));
        }
        if task.output_size != self.output_size {
            return Err(crate::error::dim("task and mechanism have different output spaces"));
        }
        Ok(Estimate::exact(failure_of_law(task, d, &self.output_law(d)?)))
    }
}

/// `P_heavy` on a count table.
pub fn p_heavy_counts(t: &CountTable, min_n: usize) -> Result<f64> {
    check_heavy_floor(t.sample_size, min_n)?;
    let mut anchor = None;
    for (i, c) in t.classes.iter().enumerate() {
        if counts_heavy(c, t.sample_size) {
            continue;
        }
        let Some(y) = point_mass_of(t.row(i)) else { return Ok(2.0) };
        if *anchor.get_or_insert(y) != y {
            return Ok(2.0);
        }
    }
    Ok(0.0)
}

/// The scaled mechanism on `m ≥ 2n + 1` samples: draw `n` of them without
/// replacement and run `M` if the large sample is heavy, output `y*` otherwise.
/// Needs `P_heavy(M) = 0` (any `n`) so that `y*` exists.
pub fn heavy_subsample(mech: &TabularMechanism, big_m: usize) -> Result<CountTable> {
    let (d, n) = (mech.domain_size(), mech.sample_size());
    if big_m < 2 * n + 1 {
        return Err(arg(format!("heavy subsampling needs m ≥ 2n + 1 = {}, got {big_m}", 2 * n + 1)));
    }
    let y_star = match heavy_anchor(mech) {
        None => return Err(Error::Precondition("mechanism has no common output on light datasets".into())),
        Some(a) => a.unwrap_or(0),
    };
    let base = CountTable::from_tabular(mech)?;
    let ln_total = ln_factorial(big_m as u64) - ln_factorial(n as u64) - ln_factorial((big_m - n) as u64);
    let ln_choose = |a: usize, b: usize| ln_factorial(a as u64) - ln_factorial(b as u64) - ln_factorial((a - b) as u64);
    let k = mech.output_size();
    CountTable::from_fn(d, big_m, k, |big| {
        if !counts_heavy(big, big_m) {
            return FiniteDistribution::point_mass(k, y_star);
        }
        let mut acc = vec![0.0; k];
        for (i, c) in base.classes.iter().enumerate() {
            if c.iter().zip(big).any(|(a, b)| a > b) {
                continue;
            }
            let lw: f64 = c.iter().zip(big).map(|(&a, &b)| ln_choose(b, a)).sum::<f64>() - ln_total;
            let w = lw.exp();
            for (a, &p) in acc.iter_mut().zip(base.row(i)) {
                *a += w * p;
            }
        }
        FiniteDistribution::new(acc)
    })
}
