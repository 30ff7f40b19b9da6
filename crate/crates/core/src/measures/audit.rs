use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_catalog, default_catalog, heavy_subsample, p_heavy_counts, CatalogEntry, CountTable, MeasureValue,
    MechanismSpec, PrivacyMeasure, CATALOG_VERSION, HEAVY_MIN_N_DEFAULT,
};
use crate::adversary::{recovery_score, RecoveryScore};
use crate::composition::{pdp_composition_params, PdpConstants};
use crate::error::Result;
use crate::finite_prob::{FiniteDistribution, ETA};
use crate::mechanisms::{compose_tuple, first_n, k_subsets, permutations, preprocess, subsample, Preprocessor, TabularMechanism};
use crate::seeding;
use crate::stability::{coverage_task, equivalent_on, SolvesTasks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Axiom {
    /// `P(M∘π) ≤ P(M)`.
    Reorder,
    /// `P(M∘σ) ≤ P(M)` for arbitrary maps `σ: X → X`.
    Remap,
    /// The remap check restricted to bijections `σ`.
    PermuteDomain,
    Blatant,
    Composition { c: f64 },
    Scaling,
}

impl Axiom {
    pub fn label(&self) -> String {
        match self {
            Self::Reorder => "reorder".into(),
            Self::Remap => "remap".into(),
            Self::PermuteDomain => "permute_domain".into(),
            Self::Blatant => "blatant".into(),
            Self::Composition { c } => format!("composition(c={c})"),
            Self::Scaling => "scaling".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditWitness {
    pub mechanism: String,
    pub domain_size: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocessor: Option<Preprocessor>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub components: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub before: MeasureValue,
    pub after: MeasureValue,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomAuditReport {
    pub measure: String,
    pub axiom: Axiom,
    pub verdict: Verdict,
    pub checked: usize,
    pub skipped: usize,
    pub witness: Option<AuditWitness>,
}

fn finish(p: &PrivacyMeasure, axiom: Axiom, checked: usize, skipped: usize, witness: Option<AuditWitness>) -> AxiomAuditReport {
    let verdict = if witness.is_some() {
        Verdict::Fail
    } else if checked == 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    AxiomAuditReport { measure: p.name().into(), axiom, verdict, checked, skipped, witness }
}

fn exceeds(after: f64, bound: f64) -> bool {
    after > bound + 1e-6 * bound.abs().max(1.0)
}

/// Preprocessors for the three preprocessing checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingGammas {
    pub reorder: Vec<Preprocessor>,
    pub remap: Vec<Preprocessor>,
    pub permute_domain: Vec<Preprocessor>,
}

/// All coordinate permutations for `n ≤ 4` (else every transposition, the
/// reversal and four random permutations), every map `X → X` when
/// `|X|^|X| ≤ 256` (else 32 random maps), every bijection of `X` for `|X| ≤ 4`
/// (else 8 random ones).
pub fn preprocessing_gammas(d: usize, n: usize, seed: u64) -> PreprocessingGammas {
    let mut rng = seeding::sub_rng(seed, 0x9e37);
    let id_sigma: Vec<usize> = (0..d).collect();
    let id_pi: Vec<usize> = (0..n).collect();
    let mut pis: Vec<Vec<usize>> = if n <= 4 {
        permutations(n)
    } else {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut p = id_pi.clone();
                p.swap(i, j);
                v.push(p);
            }
        }
        v.push(id_pi.iter().rev().copied().collect());
        for _ in 0..4 {
            let mut p = id_pi.clone();
            p.shuffle(&mut rng);
            v.push(p);
        }
        v
    };
    pis.retain(|p| *p != id_pi);
    let maps: Vec<Vec<usize>> = if (d as f64).powi(d as i32) <= 256.0 {
        crate::mechanisms::DatasetIter::new(d, d).collect()
    } else {
        (0..32).map(|_| (0..d).map(|_| rng.random_range(0..d)).collect()).collect()
    };
    let bijections: Vec<Vec<usize>> = if d <= 4 {
        permutations(d)
    } else {
        (0..8)
            .map(|_| {
                let mut s = id_sigma.clone();
                s.shuffle(&mut rng);
                s
            })
            .collect()
    };
    let wrap = |sigma: Vec<usize>, pi: Vec<usize>| Preprocessor::new(sigma, pi).expect("valid by construction");
    let is_bij = |s: &Vec<usize>| {
        let mut t = s.clone();
        t.sort_unstable();
        t == id_sigma
    };
    PreprocessingGammas {
        reorder: pis.into_iter().map(|p| wrap(id_sigma.clone(), p)).collect(),
        remap: maps.into_iter().filter(|s| !is_bij(s)).map(|s| wrap(s, id_pi.clone())).collect(),
        permute_domain: bijections.into_iter().filter(|s| *s != id_sigma).map(|s| wrap(s, id_pi.clone())).collect(),
    }
}

/// Checks `P(M∘γ) ≤ P(M)` for every catalog mechanism and every `γ`.
pub fn audit_axiom_preprocessing(
    p: &PrivacyMeasure,
    catalog: &[CatalogEntry],
    gammas: &[Preprocessor],
    axiom: Axiom,
) -> AxiomAuditReport {
    let per_entry: Vec<(usize, usize, Option<AuditWitness>)> = catalog
        .par_iter()
        .map(|e| {
            let Ok(before) = p.evaluate(&e.mechanism) else { return (0, gammas.len(), None) };
            let (mut checked, mut skipped) = (0, 0);
            for g in gammas {
                match preprocess(&e.mechanism, g).and_then(|mg| p.evaluate(&mg)) {
                    Ok(after) => {
                        checked += 1;
                        if exceeds(after, before) {
                            let w = AuditWitness {
                                mechanism: e.label.clone(),
                                domain_size: e.mechanism.domain_size(),
                                n: e.mechanism.sample_size(),
                                preprocessor: Some(g.clone()),
                                components: Vec::new(),
                                k: None,
                                before: before.into(),
                                after: after.into(),
                                detail: "P(M∘γ) > P(M)".into(),
                            };
                            return (checked, skipped, Some(w));
                        }
                    }
                    Err(_) => skipped += 1,
                }
            }
            (checked, skipped, None)
        })
        .collect();
    let checked = per_entry.iter().map(|r| r.0).sum();
    let skipped = per_entry.iter().map(|r| r.1).sum();
    let witness = per_entry.into_iter().find_map(|r| r.2);
    finish(p, axiom, checked, skipped, witness)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackBudget {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

/// The best adversary's recovery score against one family at `|X| = 100n²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAttack {
    pub label: String,
    pub domain_size: usize,
    pub adversary: String,
    pub score: RecoveryScore,
}

/// Attacks every family with a release form, under `D` uniform on `100n²`
/// elements. Adversaries: read the released elements, and a fixed guess.
pub fn attack_catalog(specs: &[MechanismSpec], budget: &AttackBudget) -> Result<Vec<FamilyAttack>> {
    let n = budget.n;
    let x = 100 * n * n;
    let d = FiniteDistribution::uniform(x)?;
    let fixed: Vec<usize> = (0..n).collect();
    let mut rng = seeding::rng(0);
    let releasable: Vec<(usize, &MechanismSpec)> = specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.release(&fixed, x, &mut rng).is_some())
        .collect();
    releasable
        .into_par_iter()
        .map(|(i, spec)| {
            let seed = seeding::combine(budget.seed, i as u64);
            let mech = |s: &[usize], r: &mut seeding::Rng| spec.release(s, x, r).unwrap_or_default();
            let decode = recovery_score(mech, |r: &Vec<usize>| r.clone(), &d, n, budget.trials, seed, false)?;
            let guess = recovery_score(mech, |_: &Vec<usize>| fixed.clone(), &d, n, budget.trials, seed, false)?;
            let (adversary, score) =
                if guess.mean > decode.mean { ("fixed-guess", guess) } else { ("decode", decode) };
            Ok(FamilyAttack { label: spec.label(), domain_size: x, adversary: adversary.into(), score })
        })
        .collect()
}

/// For each `P`-private catalog mechanism with an attack on record, fails iff
/// the best adversary reaches `score − 3·SE ≥ 0.9n`.
pub fn audit_axiom_blatant(p: &PrivacyMeasure, catalog: &[CatalogEntry], attacks: &[FamilyAttack]) -> AxiomAuditReport {
    let (mut checked, mut skipped, mut witness) = (0, 0, None);
    for e in catalog {
        let Some(a) = attacks.iter().find(|a| a.label == e.label) else {
            skipped += 1;
            continue;
        };
        let Ok(v) = p.evaluate(&e.mechanism) else {
            skipped += 1;
            continue;
        };
        if v > 1.0 + ETA {
            continue;
        }
        checked += 1;
        if a.score.blatant && witness.is_none() {
            witness = Some(AuditWitness {
                mechanism: e.label.clone(),
                domain_size: e.mechanism.domain_size(),
                n: e.mechanism.sample_size(),
                preprocessor: None,
                components: Vec::new(),
                k: None,
                before: v.into(),
                after: a.score.mean.into(),
                detail: format!(
                    "{} adversary recovers {:.3} ± {:.3} of n = {} at |X| = {}",
                    a.adversary,
                    a.score.mean,
                    a.score.standard_error,
                    e.mechanism.sample_size(),
                    a.domain_size
                ),
            });
        }
    }
    finish(p, Axiom::Blatant, checked, skipped, witness)
}

/// Cap on composed tuples evaluated per `ℓ`.
pub const COMPOSITION_TUPLE_CAP: usize = 96;
/// Cap on `|Y|` of a composed tuple.
pub const COMPOSITION_OUTPUT_BUDGET: usize = 4096;

/// Whether `ε′ ≤ 1` holds for `ℓ` mechanisms with `P ≤ ε`. `P_DP` uses the
/// explicit regime `ε ≤ ℓ^{−c}(β ln² n)^{−2c}`; the others `ε·ℓ^c ≤ 1`.
pub fn composition_applies(p: &PrivacyMeasure, epsilon: f64, n: usize, ell: usize, c: f64) -> bool {
    match p {
        PrivacyMeasure::Dp => {
            let k = PdpConstants { c, ..PdpConstants::default() };
            pdp_composition_params(epsilon, n, ell, &k).is_ok()
        }
        _ => epsilon * (ell as f64).powf(c) <= 1.0 + 1e-9,
    }
}

/// For `ℓ`-tuples of distinct catalog mechanisms with `P(Mⁱ) ≤ ε` and
/// `ε′ ≤ 1`, asserts `P(compose_tuple) ≤ 1`.
pub fn audit_axiom_composition(
    p: &PrivacyMeasure,
    catalog: &[CatalogEntry],
    ell_values: &[usize],
    c: f64,
    seed: u64,
) -> AxiomAuditReport {
    let values: Vec<Option<f64>> = catalog.par_iter().map(|e| p.evaluate(&e.mechanism).ok()).collect();
    let private: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|&v| v <= 1.0 + ETA).map(|v| (i, v)))
        .collect();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    for &ell in ell_values {
        let mut rng = seeding::sub_rng(seed, ell as u64);
        let mut found: Vec<Vec<usize>> = k_subsets(private.len(), ell)
            .into_iter()
            .filter(|t| {
                let out: f64 = t.iter().map(|&j| catalog[private[j].0].mechanism.output_size() as f64).product();
                let eps = t.iter().map(|&j| private[j].1).fold(0.0, f64::max);
                let n = catalog[private[t[0]].0].mechanism.sample_size();
                out <= COMPOSITION_OUTPUT_BUDGET as f64 && composition_applies(p, eps, n, ell, c)
            })
            .map(|t| t.into_iter().map(|j| private[j].0).collect())
            .collect();
        found.shuffle(&mut rng);
        found.truncate(COMPOSITION_TUPLE_CAP);
        tuples.extend(found);
    }
    let results: Vec<Option<Option<AuditWitness>>> = tuples
        .par_iter()
        .map(|t| {
            let ms: Vec<&TabularMechanism> = t.iter().map(|&i| &catalog[i].mechanism).collect();
            let composed = compose_tuple(&ms).ok()?;
            let after = p.evaluate(&composed).ok()?;
            let eps = t.iter().map(|&i| values[i].unwrap_or(0.0)).fold(0.0, f64::max);
            Some((after > 1.0 + 1e-9).then(|| AuditWitness {
                mechanism: "compose_tuple".into(),
                domain_size: composed.domain_size(),
                n: composed.sample_size(),
                preprocessor: None,
                components: t.iter().map(|&i| catalog[i].label.clone()).collect(),
                k: Some(t.len()),
                before: eps.into(),
                after: after.into(),
                detail: format!("each P(Mⁱ) ≤ {eps}, ε′ = ε·ℓ^c = {} ≤ 1", eps * (t.len() as f64).powf(c)),
            }))
        })
        .collect();
    let checked = results.iter().filter(|r| r.is_some()).count();
    let skipped = results.len() - checked;
    let witness = results.into_iter().flatten().flatten().next();
    finish(p, Axiom::Composition { c }, checked, skipped, witness)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaler {
    /// `M′(S′)` runs `M` on a uniform `n`-subsample of the `m = kn` points.
    Subsample,
    /// `M′(S′) = M(S′₁, …, S′ₙ)`.
    FirstN,
    /// Subsample, but only when `S′` is heavy; `y*` otherwise.
    HeavySubsample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    pub scaler: Scaler,
    /// `C` in `P(M′) ≤ C/k`.
    pub constant: f64,
    pub k_values: Vec<usize>,
    pub beta: f64,
    pub beta_prime: f64,
}

/// The registered constructive scaler of each measure.
pub fn scaling_plan(p: &PrivacyMeasure) -> Option<ScalingPlan> {
    let plan = |scaler, constant, k_values: &[usize], beta, beta_prime| ScalingPlan {
        scaler,
        constant,
        k_values: k_values.to_vec(),
        beta,
        beta_prime,
    };
    Some(match p {
        PrivacyMeasure::Dp => plan(Scaler::Subsample, 1.0, &[2, 3, 4], 0.1, 0.1),
        PrivacyMeasure::Rdp => plan(Scaler::Subsample, 4.0, &[2, 3, 4], 0.1, 0.1),
        PrivacyMeasure::Heavy { .. } => plan(Scaler::HeavySubsample, 1.0, &[3, 4], 0.01, 0.21),
        PrivacyMeasure::Half | PrivacyMeasure::All | PrivacyMeasure::Junta | PrivacyMeasure::SqrtJunta => {
            plan(Scaler::FirstN, 1.0, &[2, 3, 4], 0.1, 0.1)
        }
    })
}

enum Scaled {
    Table(TabularMechanism),
    Counts(CountTable),
}

impl Scaled {
    fn solver(&self) -> &dyn SolvesTasks {
        match self {
            Self::Table(t) => t,
            Self::Counts(c) => c,
        }
    }
}

fn scale(p: &PrivacyMeasure, scaler: Scaler, m: &TabularMechanism, big_m: usize) -> Result<(Scaled, f64)> {
    Ok(match scaler {
        Scaler::Subsample | Scaler::FirstN => {
            let t = if scaler == Scaler::Subsample { subsample(m, big_m)? } else { first_n(m, big_m)? };
            let v = p.evaluate(&t)?;
            (Scaled::Table(t), v)
        }
        Scaler::HeavySubsample => {
            let t = heavy_subsample(m, big_m)?;
            let min_n = match p {
                PrivacyMeasure::Heavy { min_n } => *min_n,
                _ => HEAVY_MIN_N_DEFAULT,
            };
            let v = p_heavy_counts(&t, min_n)?;
            (Scaled::Counts(t), v)
        }
    })
}

/// Applies the registered scaler at each `k`: asserts `P(M′) ≤ C/k` and that
/// `M′` solves every coverage task `M` solves at β with failure ≤ β′.
pub fn audit_axiom_scaling(
    p: &PrivacyMeasure,
    catalog: &[CatalogEntry],
    plan: Option<&ScalingPlan>,
    dists: &[FiniteDistribution],
) -> AxiomAuditReport {
    let Some(plan) = plan else { return finish(p, Axiom::Scaling, 0, catalog.len(), None) };
    let per_entry: Vec<(usize, usize, Option<AuditWitness>)> = catalog
        .par_iter()
        .map(|e| {
            let Ok(before) = p.evaluate(&e.mechanism) else { return (0, plan.k_values.len(), None) };
            if before > 1.0 + ETA {
                return (0, 0, None);
            }
            let n = e.mechanism.sample_size();
            let (mut checked, mut skipped) = (0, 0);
            for &k in &plan.k_values {
                let outcome = (|| -> Result<Option<AuditWitness>> {
                    let (scaled, after) = scale(p, plan.scaler, &e.mechanism, k * n)?;
                    let task = coverage_task(&e.mechanism, dists, plan.beta)?;
                    let eq = equivalent_on(&e.mechanism, scaled.solver(), &[task], plan.beta, plan.beta_prime)?;
                    let bound = plan.constant / k as f64;
                    let too_big = after > bound + 1e-9;
                    Ok((too_big || !eq.holds).then(|| AuditWitness {
                        mechanism: e.label.clone(),
                        domain_size: e.mechanism.domain_size(),
                        n,
                        preprocessor: None,
                        components: Vec::new(),
                        k: Some(k),
                        before: before.into(),
                        after: after.into(),
                        detail: if too_big {
                            format!("P(M′) = {after} > C/k = {bound} with {:?}", plan.scaler)
                        } else {
                            format!("equivalence fails: max failure/β′ = {}", eq.max_ratio)
                        },
                    }))
                })();
                match outcome {
                    Ok(w) => {
                        checked += 1;
                        if w.is_some() {
                            return (checked, skipped, w);
                        }
                    }
                    Err(_) => skipped += 1,
                }
            }
            (checked, skipped, None)
        })
        .collect();
    let checked = per_entry.iter().map(|r| r.0).sum();
    let skipped = per_entry.iter().map(|r| r.1).sum();
    let witness = per_entry.into_iter().find_map(|r| r.2);
    finish(p, Axiom::Scaling, checked, skipped, witness)
}

/// Uniform, one 0.8-peak per element, and three seeded random sources.
pub fn scaling_dists(d: usize, seed: u64) -> Result<Vec<FiniteDistribution>> {
    let mut out = vec![FiniteDistribution::uniform(d)?];
    for x in 0..d {
        let mut w = vec![0.2 / (d - 1).max(1) as f64; d];
        w[x] = 0.8;
        out.push(FiniteDistribution::new(w)?);
    }
    let mut rng = seeding::sub_rng(seed, 0x5ca1e);
    for _ in 0..3 {
        out.push(FiniteDistribution::new((0..d).map(|_| rng.random::<f64>() + 0.05).collect())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub seed: u64,
    pub attack_trials: usize,
    pub heavy_min_n: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self { seed: 7, attack_trials: 1000, heavy_min_n: HEAVY_MIN_N_DEFAULT }
    }
}

/// `(|X|, n)` at which each audit instantiates the catalog. `P_heavy` swaps
/// `n` for its floor.
pub const PREPROCESSING_SCALE: (usize, usize) = (3, 3);
pub const BLATANT_SCALE: (usize, usize) = (2, 8);
pub const COMPOSITION_SCALE: (usize, usize) = (2, 8);
pub const SCALING_SCALE: (usize, usize) = (3, 2);
pub const COMPOSITION_ELLS: [usize; 3] = [2, 3, 4];

fn scale_for(p: &PrivacyMeasure, axiom: &Axiom) -> (usize, usize) {
    let base = match axiom {
        Axiom::Reorder | Axiom::Remap | Axiom::PermuteDomain => PREPROCESSING_SCALE,
        Axiom::Blatant => BLATANT_SCALE,
        Axiom::Composition { .. } => COMPOSITION_SCALE,
        Axiom::Scaling => SCALING_SCALE,
    };
    match (p, axiom) {
        (PrivacyMeasure::Heavy { min_n }, Axiom::Blatant | Axiom::Composition { .. }) => (2, *min_n),
        (PrivacyMeasure::Heavy { min_n }, _) => (3, *min_n),
        _ => base,
    }
}

/// The audited axioms of a measure: the three preprocessing checks, blatant,
/// composition at the claimed `c` (and at `c = 1/2` for `P_junta`), scaling.
pub fn matrix_axioms(p: &PrivacyMeasure) -> Vec<Axiom> {
    let mut v = vec![
        Axiom::Reorder,
        Axiom::Remap,
        Axiom::PermuteDomain,
        Axiom::Blatant,
        Axiom::Composition { c: p.claimed().composition_c },
    ];
    if matches!(p, PrivacyMeasure::Junta) {
        v.push(Axiom::Composition { c: 0.5 });
    }
    v.push(Axiom::Scaling);
    v
}

/// The expected verdict of each cell.
pub fn golden_verdict(p: &PrivacyMeasure, axiom: &Axiom) -> Verdict {
    let fail = match (p, axiom) {
        (PrivacyMeasure::Half, Axiom::Reorder) => true,
        (PrivacyMeasure::Heavy { .. }, Axiom::Remap) => true,
        (PrivacyMeasure::All, Axiom::Blatant) => true,
        (PrivacyMeasure::Junta, Axiom::Composition { c }) => *c < 1.0,
        (PrivacyMeasure::SqrtJunta, Axiom::Scaling) => true,
        _ => false,
    };
    if fail { Verdict::Fail } else { Verdict::Pass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub report: AxiomAuditReport,
    pub expected: Verdict,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomMatrix {
    pub catalog_version: u32,
    pub config: MatrixConfig,
    pub attacks: Vec<FamilyAttack>,
    pub cells: Vec<MatrixCell>,
    pub matches_golden: bool,
}

/// Runs one audit cell.
pub fn audit_cell(
    p: &PrivacyMeasure,
    axiom: &Axiom,
    specs: &[MechanismSpec],
    attacks: &[FamilyAttack],
    seed: u64,
) -> Result<AxiomAuditReport> {
    let (d, n) = scale_for(p, axiom);
    let catalog = build_catalog(specs, d, n);
    Ok(match axiom {
        Axiom::Reorder | Axiom::Remap | Axiom::PermuteDomain => {
            let g = preprocessing_gammas(d, n, seed);
            let gammas = match axiom {
                Axiom::Reorder => &g.reorder,
                Axiom::Remap => &g.remap,
                _ => &g.permute_domain,
            };
            audit_axiom_preprocessing(p, &catalog, gammas, *axiom)
        }
        Axiom::Blatant => audit_axiom_blatant(p, &catalog, attacks),
        Axiom::Composition { c } => audit_axiom_composition(p, &catalog, &COMPOSITION_ELLS, *c, seed),
        Axiom::Scaling => audit_axiom_scaling(p, &catalog, scaling_plan(p).as_ref(), &scaling_dists(d, seed)?),
    })
}

/// The measure × axiom matrix over the default catalog, cells in parallel.
pub fn axiom_matrix(config: &MatrixConfig) -> Result<AxiomMatrix> {
    let specs = default_catalog().mechanisms;
    let measures: Vec<PrivacyMeasure> = PrivacyMeasure::standard()
        .into_iter()
        .map(|p| match p {
            PrivacyMeasure::Heavy { .. } => PrivacyMeasure::Heavy { min_n: config.heavy_min_n },
            p => p,
        })
        .collect();
    let attacks = attack_catalog(&specs, &AttackBudget { n: BLATANT_SCALE.1, trials: config.attack_trials, seed: config.seed })?;
    let cells: Vec<(PrivacyMeasure, Axiom)> =
        measures.iter().flat_map(|p| matrix_axioms(p).into_iter().map(move |a| (*p, a))).collect();
    let reports: Vec<AxiomAuditReport> = cells
        .par_iter()
        .map(|(p, a)| audit_cell(p, a, &specs, &attacks, config.seed))
        .collect::<Result<_>>()?;
    let cells: Vec<MatrixCell> = cells
        .iter()
        .zip(reports)
        .map(|((p, a), report)| {
            let expected = golden_verdict(p, a);
            MatrixCell { matches: report.verdict == expected, report, expected }
        })
        .collect();
    let matches_golden = cells.iter().all(|c| c.matches);
    Ok(AxiomMatrix { catalog_version: CATALOG_VERSION, config: *config, attacks, cells, matches_golden })
}

/// One row per measure; `*` marks a cell that differs from the golden matrix.
pub fn render_matrix(m: &AxiomMatrix) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for c in &m.cells {
        let i = *index.entry(c.report.measure.clone()).or_insert_with(|| {
            rows.push((c.report.measure.clone(), Vec::new()));
            rows.len() - 1
        });
        let mark = if c.matches { "" } else { "*" };
        rows[i].1.push(format!("{}={}{}", c.report.axiom.label(), c.report.verdict.as_str(), mark));
    }
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (name, cells) in rows {
        out.push_str(&format!("{name:<width$}  {}\n", cells.join("  ")));
    }
    out.push_str(if m.matches_golden { "matrix matches the golden verdicts\n" } else { "matrix DIFFERS from the golden verdicts\n" });
    out
}
