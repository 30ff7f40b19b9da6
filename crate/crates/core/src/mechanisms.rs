//! Datasets, tabular and sampled mechanisms, preprocessing, symmetrization,
//! tuple composition and subsampling.
//!
//! Datasets in `Xⁿ` are enumerated row-major lexicographically: the first
//! coordinate is the most significant digit of the row index.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, dim, Error, Result};
use crate::finite_prob::{FiniteDistribution, ETA};
use crate::seeding;

/// Largest `|X|ⁿ·|Y|` a tabular mechanism may hold.
pub const MAX_TABLE_ENTRIES: f64 = 1e8;

/// An ordered tuple of `n ≥ 1` domain indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dataset(Vec<usize>);

impl Dataset {
    pub fn new(entries: Vec<usize>, domain_size: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(arg("datasets have at least one entry"));
        }
        if let Some(&x) = entries.iter().find(|&&x| x >= domain_size) {
            return Err(arg(format!("entry {x} outside domain of size {domain_size}")));
        }
        Ok(Self(entries))
    }

    pub fn from_index(index: usize, domain_size: usize, n: usize) -> Self {
        Self(decode_dataset(index, domain_size, n))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, domain_size: usize) -> usize {
        encode_dataset(&self.0, domain_size)
    }

    /// `π(S)ᵢ = S_{π(i)}`.
    pub fn permute(&self, pi: &[usize]) -> Result<Self> {
        if pi.len() != self.0.len() {
            return Err(dim("permutation length differs from dataset length"));
        }
        Ok(Self(pi.iter().map(|&j| self.0[j]).collect()))
    }

    pub fn remap(&self, sigma: &[usize]) -> Result<Self> {
        self.0
            .iter()
            .map(|&x| sigma.get(x).copied().ok_or_else(|| dim("remap does not cover the domain")))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn counts(&self, domain_size: usize) -> Vec<usize> {
        counts_of(&self.0, domain_size)
    }

    /// Some element occupies at least `0.6·n` of the entries.
    pub fn is_heavy(&self) -> bool {
        is_heavy(&self.0)
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub fn counts_of(entries: &[usize], domain_size: usize) -> Vec<usize> {
    let mut c = vec![0; domain_size];
    for &x in entries {
        c[x] += 1;
    }
    c
}

pub fn is_heavy(entries: &[usize]) -> bool {
    let n = entries.len();
    let mut sorted = entries.to_vec();
    sorted.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for i in 0..n {
        run = if i > 0 && sorted[i] == sorted[i - 1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    // count ≥ 0.6n, compared in integers
    5 * best >= 3 * n
}

pub fn encode_dataset(entries: &[usize], domain_size: usize) -> usize {
    entries.iter().fold(0, |acc, &x| acc * domain_size + x)
}

pub fn decode_dataset(mut index: usize, domain_size: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % domain_size;
        index /= domain_size;
    }
    out
}

/// `|X|ⁿ`, or an error when it overflows the feasible range.
pub fn num_datasets(domain_size: usize, n: usize) -> Result<usize> {
    let total = (domain_size as f64).powi(n as i32);
    if total > MAX_TABLE_ENTRIES {
        return Err(Error::Infeasible { entries: total, limit: MAX_TABLE_ENTRIES });
    }
    Ok(domain_size.pow(n as u32))
}

fn check_table_size(domain_size: usize, n: usize, output_size: usize) -> Result<usize> {
    if domain_size == 0 || n == 0 || output_size == 0 {
        return Err(arg("domain size, sample size and output size must be positive"));
    }
    let entries = (domain_size as f64).powi(n as i32) * output_size as f64;
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::Infeasible { entries, limit: MAX_TABLE_ENTRIES });
    }
    Ok(domain_size.pow(n as u32))
}

/// Iterates `Xⁿ` in lexicographic order.
pub struct DatasetIter {
    current: Vec<usize>,
    domain_size: usize,
    done: bool,
}

impl DatasetIter {
    pub fn new(domain_size: usize, n: usize) -> Self {
        Self { current: vec![0; n], domain_size, done: domain_size == 0 }
    }
}

impl Iterator for DatasetIter {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut i = self.current.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < self.domain_size {
                break;
            }
            self.current[i] = 0;
        }
        Some(out)
    }
}

/// `γ = (σ, π)` acting as `γ(S) = (σ(S_{π(1)}), …, σ(S_{π(n)}))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub sigma: Vec<usize>,
    pub pi: Vec<usize>,
}

impl Preprocessor {
    pub fn new(sigma: Vec<usize>, pi: Vec<usize>) -> Result<Self> {
        let d = sigma.len();
        if sigma.iter().any(|&x| x >= d) {
            return Err(arg("sigma must map the domain into itself"));
        }
        let mut seen = vec![false; pi.len()];
        for &j in &pi {
            if j >= pi.len() || seen[j] {
                return Err(arg("pi must be a permutation of 0..n"));
            }
            seen[j] = true;
        }
        Ok(Self { sigma, pi })
    }

    pub fn identity(domain_size: usize, n: usize) -> Self {
        Self { sigma: (0..domain_size).collect(), pi: (0..n).collect() }
    }

    pub fn reorder(domain_size: usize, pi: Vec<usize>) -> Result<Self> {
        Self::new((0..domain_size).collect(), pi)
    }

    pub fn remap(sigma: Vec<usize>, n: usize) -> Result<Self> {
        Self::new(sigma, (0..n).collect())
    }

    /// Uniform `σ` over permutations of `X` and uniform `π` over permutations of `[n]`.
    pub fn random_permutations<R: Rng + ?Sized>(domain_size: usize, n: usize, rng: &mut R) -> Self {
        let mut sigma: Vec<usize> = (0..domain_size).collect();
        sigma.shuffle(rng);
        let mut pi: Vec<usize> = (0..n).collect();
        pi.shuffle(rng);
        Self { sigma, pi }
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.sigma.len()];
        self.sigma.iter().all(|&x| !std::mem::replace(&mut seen[x], true))
    }

    pub fn apply(&self, s: &[usize]) -> Vec<usize> {
        self.pi.iter().map(|&j| self.sigma[s[j]]).collect()
    }

    /// The preprocessor `γ` with `γ(S) = self(inner(S))`.
    pub fn after(&self, inner: &Preprocessor) -> Result<Self> {
        if self.sigma.len() != inner.sigma.len() || self.pi.len() != inner.pi.len() {
            return Err(dim("preprocessors act on different shapes"));
        }
        Ok(Self {
            sigma: inner.sigma.iter().map(|&x| self.sigma[x]).collect(),
            pi: self.pi.iter().map(|&i| inner.pi[i]).collect(),
        })
    }
}

/// A mechanism `M: Xⁿ → Δ(Y)` stored as one probability row per dataset.
#[derive(Clone, PartialEq)]
pub struct TabularMechanism {
    domain_size: usize,
    sample_size: usize,
    output_size: usize,
    table: Vec<f64>,
}

impl fmt::Debug for TabularMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabularMechanism")
            .field("domain_size", &self.domain_size)
            .field("sample_size", &self.sample_size)
            .field("output_size", &self.output_size)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
struct RawMechanism {
    domain_size: usize,
    sample_size: usize,
    output_size: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for TabularMechanism {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawMechanism {
            domain_size: self.domain_size,
            sample_size: self.sample_size,
            output_size: self.output_size,
            rows: self.table.chunks(self.output_size).map(<[f64]>::to_vec).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TabularMechanism {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMechanism::deserialize(deserializer)?;
        let rows = raw
            .rows
            .into_iter()
            .map(FiniteDistribution::new)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        TabularMechanism::from_rows(raw.domain_size, raw.sample_size, raw.output_size, rows)
            .map_err(serde::de::Error::custom)
    }
}

impl TabularMechanism {
    /// Tabulates `f` over every dataset; each returned row is normalized.
    pub fn from_fn<F>(domain_size: usize, sample_size: usize, output_size: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Result<FiniteDistribution>,
    {
        let rows = check_table_size(domain_size, sample_size, output_size)?;
        let mut table = Vec::with_capacity(rows * output_size);
        for s in DatasetIter::new(domain_size, sample_size) {
            let row = f(&s)?;
            if row.support_size() != output_size {
                return Err(dim(format!(
                    "row for {s:?} has support {} but the output size is {output_size}",
                    row.support_size()
                )));
            }
            table.extend_from_slice(row.probs());
        }
        Ok(Self { domain_size, sample_size, output_size, table })
    }

    /// Deterministic mechanism `S ↦ f(S)`.
    pub fn deterministic<F>(domain_size: usize, sample_size: usize, output_size: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> usize,
    {
        Self::from_fn(domain_size, sample_size, output_size, |s| {
            FiniteDistribution::point_mass(output_size, f(s))
        })
    }

    pub fn from_rows(
        domain_size: usize,
        sample_size: usize,
        output_size: usize,
        rows: Vec<FiniteDistribution>,
    ) -> Result<Self> {
        let expected = check_table_size(domain_size, sample_size, output_size)?;
        if rows.len() != expected {
            return Err(dim(format!("expected {expected} rows, got {}", rows.len())));
        }
        let mut table = Vec::with_capacity(expected * output_size);
        for r in rows {
            if r.support_size() != output_size {
                return Err(dim("row support differs from output size"));
            }
            table.extend(r.into_probs());
        }
        Ok(Self { domain_size, sample_size, output_size, table })
    }

    fn from_table(domain_size: usize, sample_size: usize, output_size: usize, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), domain_size.pow(sample_size as u32) * output_size);
        Self { domain_size, sample_size, output_size, table }
    }

    pub fn constant(domain_size: usize, sample_size: usize, output: &FiniteDistribution) -> Result<Self> {
        Self::from_fn(domain_size, sample_size, output.support_size(), |_| Ok(output.clone()))
    }

    /// `Y = Xⁿ`, point mass on the input.
    pub fn identity(domain_size: usize, sample_size: usize) -> Result<Self> {
        let out = num_datasets(domain_size, sample_size)?;
        Self::deterministic(domain_size, sample_size, out, |s| encode_dataset(s, domain_size))
    }

    /// Outputs the listed coordinates, `Y = X^{|coords|}`.
    pub fn coordinates(domain_size: usize, sample_size: usize, coords: &[usize]) -> Result<Self> {
        if coords.iter().any(|&i| i >= sample_size) {
            return Err(arg("coordinate outside the sample"));
        }
        let out = num_datasets(domain_size, coords.len().max(1))?;
        let out = if coords.is_empty() { 1 } else { out };
        Self::deterministic(domain_size, sample_size, out, |s| {
            coords.iter().fold(0, |acc, &i| acc * domain_size + s[i])
        })
    }

    /// Randomized response on a single element: keep with probability `keep`,
    /// otherwise uniform over the other `|X|−1` values.
    pub fn randomized_response(domain_size: usize, keep: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&keep) || domain_size < 2 {
            return Err(arg("randomized response needs keep in [0,1] and |X| ≥ 2"));
        }
        let other = (1.0 - keep) / (domain_size - 1) as f64;
        Self::from_fn(domain_size, 1, domain_size, |s| {
            let mut w = vec![other; domain_size];
            w[s[0]] = keep;
            FiniteDistribution::new(w)
        })
    }

    /// Rows drawn independently with entries `U(0,1) + 10⁻³` before normalization.
    pub fn random(domain_size: usize, sample_size: usize, output_size: usize, seed: u64) -> Result<Self> {
        let mut rng = seeding::rng(seed);
        Self::from_fn(domain_size, sample_size, output_size, |_| {
            FiniteDistribution::new((0..output_size).map(|_| rng.random::<f64>() + 1e-3).collect())
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

    pub fn num_rows(&self) -> usize {
        self.table.len() / self.output_size
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.table[index * self.output_size..(index + 1) * self.output_size]
    }

    pub fn row_of(&self, s: &[usize]) -> &[f64] {
        self.row(encode_dataset(s, self.domain_size))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(self.output_size)
    }

    fn check_dataset(&self, s: &[usize]) -> Result<()> {
        if s.len() != self.sample_size || s.iter().any(|&x| x >= self.domain_size) {
            return Err(dim(format!(
                "dataset {s:?} incompatible with a mechanism on {}^{}",
                self.domain_size, self.sample_size
            )));
        }
        Ok(())
    }

    /// The output distribution `M(S)`.
    pub fn apply(&self, s: &Dataset) -> Result<FiniteDistribution> {
        self.check_dataset(s.entries())?;
        Ok(FiniteDistribution::from_normalized(self.row_of(s.entries()).to_vec()))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.domain_size == other.domain_size
            && self.sample_size == other.sample_size
            && self.output_size == other.output_size
            && self.table.iter().zip(&other.table).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Order-invariant: `M(π(S)) = M(S)` for every `π` within `ETA`.
    pub fn is_symmetric(&self) -> bool {
        DatasetIter::new(self.domain_size, self.sample_size).all(|s| {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            self.row_of(&s).iter().zip(self.row_of(&sorted)).all(|(a, b)| (a - b).abs() <= ETA)
        })
    }

    /// Post-processing by a stochastic kernel `y ↦ kernel[y]` over `out_size` outcomes.
    pub fn post_process(&self, kernel: &[FiniteDistribution]) -> Result<Self> {
        if kernel.len() != self.output_size {
            return Err(dim("kernel needs one row per output"));
        }
        let out = kernel[0].support_size();
        if kernel.iter().any(|k| k.support_size() != out) {
            return Err(dim("kernel rows have different supports"));
        }
        check_table_size(self.domain_size, self.sample_size, out)?;
        let mut table = vec![0.0; self.num_rows() * out];
        for (r, row) in self.rows().enumerate() {
            let dst = &mut table[r * out..(r + 1) * out];
            for (y, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    for (d, &k) in dst.iter_mut().zip(kernel[y].probs()) {
                        *d += p * k;
                    }
                }
            }
        }
        Ok(Self::from_table(self.domain_size, self.sample_size, out, table))
    }

    /// Deterministic relabeling of outputs.
    pub fn relabel(&self, map: &[usize], out_size: usize) -> Result<Self> {
        let kernel = map
            .iter()
            .map(|&y| FiniteDistribution::point_mass(out_size, y))
            .collect::<Result<Vec<_>>>()?;
        self.post_process(&kernel)
    }

    pub fn to_sampled(&self) -> SampledMechanism {
        let me = self.clone();
        SampledMechanism::new(self.domain_size, self.sample_size, self.output_size, move |s, seed| {
            let mut rng = seeding::rng(seed);
            sample_row(me.row_of(s), &mut rng)
        })
    }
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
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

/// `M∘γ`.
pub fn preprocess(m: &TabularMechanism, gamma: &Preprocessor) -> Result<TabularMechanism> {
    if gamma.sigma.len() != m.domain_size || gamma.pi.len() != m.sample_size {
        return Err(dim("preprocessor shape differs from the mechanism"));
    }
    let mut table = Vec::with_capacity(m.table.len());
    for s in DatasetIter::new(m.domain_size, m.sample_size) {
        table.extend_from_slice(m.row_of(&gamma.apply(&s)));
    }
    Ok(TabularMechanism::from_table(m.domain_size, m.sample_size, m.output_size, table))
}

/// Groups dataset indices by their multiset (sorted tuple).
pub(crate) fn multiset_classes(domain_size: usize, n: usize) -> Vec<Vec<usize>> {
    let mut classes: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (i, mut s) in DatasetIter::new(domain_size, n).enumerate() {
        s.sort_unstable();
        classes.entry(s).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = classes.into_values().collect();
    out.sort();
    out
}

/// Uniform input permutation before running `M`.
///
/// The uniform mixture over all `n!` reorderings of `S` puts equal weight on
/// every distinct arrangement of the multiset of `S`, so each row is the
/// average of the rows in its multiset class.
pub fn symmetrize(m: &TabularMechanism) -> TabularMechanism {
    let k = m.output_size;
    let mut table = vec![0.0; m.table.len()];
    for class in multiset_classes(m.domain_size, m.sample_size) {
        let mut avg = vec![0.0; k];
        for &i in &class {
            for (a, &p) in avg.iter_mut().zip(m.row(i)) {
                *a += p;
            }
        }
        let w = 1.0 / class.len() as f64;
        for a in avg.iter_mut() {
            *a *= w;
        }
        for &i in &class {
            table[i * k..(i + 1) * k].copy_from_slice(&avg);
        }
    }
    TabularMechanism::from_table(m.domain_size, m.sample_size, m.output_size, table)
}

/// Non-adaptive composition `(M¹(S), …, M^ℓ(S))` with independent randomness.
/// The first mechanism's output is the most significant digit.
pub fn compose_tuple(ms: &[&TabularMechanism]) -> Result<TabularMechanism> {
    let first = ms.first().ok_or_else(|| arg("compose_tuple needs at least one mechanism"))?;
    let (d, n) = (first.domain_size, first.sample_size);
    if ms.iter().any(|m| m.domain_size != d || m.sample_size != n) {
        return Err(dim("composed mechanisms must share the domain and sample size"));
    }
    let out: f64 = ms.iter().map(|m| m.output_size as f64).product();
    if out * (d as f64).powi(n as i32) > MAX_TABLE_ENTRIES {
        return Err(Error::Infeasible { entries: out * (d as f64).powi(n as i32), limit: MAX_TABLE_ENTRIES });
    }
    let out = out as usize;
    let rows = first.num_rows();
    let mut table = Vec::with_capacity(rows * out);
    let mut cur = Vec::with_capacity(out);
    let mut next = Vec::with_capacity(out);
    for r in 0..rows {
        cur.clear();
        cur.push(1.0);
        for m in ms {
            next.clear();
            for &a in &cur {
                for &b in m.row(r) {
                    next.push(a * b);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        table.extend_from_slice(&cur);
    }
    Ok(TabularMechanism::from_table(d, n, out, table))
}

/// Mechanism on `Xᵐ` that runs `M` on a uniformly random `n`-subset of the
/// positions, presented in uniform random order.
pub fn subsample(m: &TabularMechanism, big_m: usize) -> Result<TabularMechanism> {
    let n = m.sample_size;
    if big_m < n {
        return Err(arg(format!("subsample size {big_m} is smaller than n = {n}")));
    }
    check_table_size(m.domain_size, big_m, m.output_size)?;
    let sym = symmetrize(m);
    let subsets = k_subsets(big_m, n);
    let w = 1.0 / subsets.len() as f64;
    let k = m.output_size;
    let mut table = Vec::with_capacity(m.domain_size.pow(big_m as u32) * k);
    let mut buf = vec![0usize; n];
    let mut acc = vec![0.0; k];
    for s in DatasetIter::new(m.domain_size, big_m) {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for sub in &subsets {
            for (b, &i) in buf.iter_mut().zip(sub) {
                *b = s[i];
            }
            for (a, &p) in acc.iter_mut().zip(sym.row_of(&buf)) {
                *a += p;
            }
        }
        table.extend(acc.iter().map(|a| a * w));
    }
    Ok(TabularMechanism::from_table(m.domain_size, big_m, k, table))
}

/// Mechanism on `Xᵐ` that runs `M` on the first `n` entries.
pub fn first_n(m: &TabularMechanism, big_m: usize) -> Result<TabularMechanism> {
    let n = m.sample_size;
    if big_m < n {
        return Err(arg(format!("first_n target size {big_m} is smaller than n = {n}")));
    }
    TabularMechanism::from_fn(m.domain_size, big_m, m.output_size, |s| {
        Ok(FiniteDistribution::from_normalized(m.row_of(&s[..n]).to_vec()))
    })
}

/// All increasing `k`-tuples of `0..n`.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    fn heap(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, cur, out);
            if k.is_multiple_of(2) {
                cur.swap(i, k - 1);
            } else {
                cur.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut cur, &mut out);
    out
}

type Sampler = dyn Fn(&[usize], u64) -> usize + Send + Sync;

/// A black-box mechanism: a pure function of `(dataset, seed)`.
#[derive(Clone)]
pub struct SampledMechanism {
    domain_size: usize,
    sample_size: usize,
    output_size: usize,
    sampler: Arc<Sampler>,
}

impl fmt::Debug for SampledMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledMechanism")
            .field("domain_size", &self.domain_size)
            .field("sample_size", &self.sample_size)
            .field("output_size", &self.output_size)
            .finish_non_exhaustive()
    }
}

impl SampledMechanism {
    pub fn new<F>(domain_size: usize, sample_size: usize, output_size: usize, sampler: F) -> Self
    where
        F: Fn(&[usize], u64) -> usize + Send + Sync + 'static,
    {
        Self { domain_size, sample_size, output_size, sampler: Arc::new(sampler) }
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

    /// One draw with an explicit seed.
    pub fn sample(&self, s: &[usize], seed: u64) -> usize {
        debug_assert_eq!(s.len(), self.sample_size);
        (self.sampler)(s, seed)
    }

    /// Draw number `index` from the stream keyed by `(master, S)`.
    pub fn draw(&self, s: &[usize], master: u64, index: u64) -> usize {
        self.sample(s, seeding::stream_seed(master, s, index))
    }
}
