//! Closed-form composition and amplification bounds, and a numeric replay of
//! the strong-composition parameter chain behind `P_DP`.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Constants pinned for the `P_DP` derivations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdpConstants {
    /// The amplification constant α in `P_DP = (ε/α)^{5/4}`.
    pub alpha: f64,
    /// The "suitably large" β in the composition regime.
    pub beta: f64,
    /// Composition exponent.
    pub c: f64,
}

impl Default for PdpConstants {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 64.0, c: 5.0 / 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionInput {
    pub epsilon: f64,
    pub delta: f64,
    pub ell: usize,
}

impl CompositionInput {
    pub fn new(epsilon: f64, delta: f64, ell: usize) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(arg("epsilon must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(arg("delta must lie in [0, 1]"));
        }
        if ell == 0 {
            return Err(arg("ell must be at least 1"));
        }
        Ok(Self { epsilon, delta, ell })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComposedBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// δ′ exceeded 1 and was capped.
    pub delta_clamped: bool,
    /// ε′ ≥ 1, outside the regime the axioms use.
    pub outside_regime: bool,
}

/// `(ℓε, ℓδ)` with δ′ capped at 1.
pub fn basic_composition(input: &CompositionInput) -> ComposedBudget {
    let l = input.ell as f64;
    let raw = l * input.delta;
    let epsilon = l * input.epsilon;
    ComposedBudget {
        epsilon,
        delta: raw.min(1.0),
        delta_clamped: raw > 1.0,
        outside_regime: epsilon >= 1.0,
    }
}

/// `δ′ = 2ℓδ`, `ε′ = ε√(ℓ ln(1/(ℓδ))) + ℓε(e^ε − 1)`.
///
/// With `sqrt2` the first term becomes `ε√(2ℓ ln(1/(ℓδ)))`.
pub fn strong_composition(input: &CompositionInput, sqrt2: bool) -> Result<ComposedBudget> {
    let l = input.ell as f64;
    if l * input.delta >= 1.0 {
        return Err(Error::Domain(format!("ℓδ = {} must be below 1", l * input.delta)));
    }
    let eps = input.epsilon;
    let epsilon = if eps == 0.0 {
        0.0
    } else {
        let factor = if sqrt2 { 2.0 } else { 1.0 };
        eps * (factor * l * (1.0 / (l * input.delta)).ln()).sqrt() + l * eps * eps.exp_m1()
    };
    let raw = 2.0 * l * input.delta;
    Ok(ComposedBudget {
        epsilon,
        delta: raw.min(1.0),
        delta_clamped: raw > 1.0,
        outside_regime: epsilon >= 1.0,
    })
}

/// `ℓε` at the same order α.
pub fn rdp_composition(epsilon: f64, _alpha: f64, ell: usize) -> f64 {
    ell as f64 * epsilon
}

/// `ln(1 + 4(n/m)²(e^ε − 1))` for order 2.
pub fn rdp_subsample_amplify(epsilon: f64, n: usize, m: usize) -> Result<f64> {
    if m < n || n == 0 {
        return Err(arg(format!("subsampling needs 1 ≤ n ≤ m, got n = {n}, m = {m}")));
    }
    let ratio = n as f64 / m as f64;
    Ok((4.0 * ratio * ratio * epsilon.exp_m1()).ln_1p())
}

/// Every intermediate of the strong-composition chain for `P_DP`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpDerivation {
    pub epsilon: f64,
    pub n: usize,
    pub ell: usize,
    pub constants: PdpConstants,
    /// `ℓ^{−c}(β ln² n)^{−2c}`.
    pub regime_boundary: f64,
    /// `αε^{4/5}`.
    pub mu: f64,
    /// `μ²/n³`.
    pub delta: f64,
    pub ell_delta: f64,
    pub epsilon_star: f64,
    pub delta_star: f64,
    pub delta_target: f64,
    pub epsilon_ok: bool,
    pub delta_ok: bool,
}

/// Replays the chain: `μ = αε^{4/5}`, `δ = μ²/n³`, strong composition (in the
/// `√2` form the chain uses), then `ε* ≤ 0.1` and `δ* ≤ α²/n³`.
///
/// `log² n` is read as the squared natural logarithm, so `n ≥ 2`.
pub fn pdp_composition_params(epsilon: f64, n: usize, ell: usize, k: &PdpConstants) -> Result<PdpDerivation> {
    if n < 2 {
        return Err(arg("the composition regime needs n ≥ 2 so that log n > 0"));
    }
    if ell == 0 || !(epsilon >= 0.0) {
        return Err(arg("need ell ≥ 1 and epsilon ≥ 0"));
    }
    let nf = n as f64;
    let l = ell as f64;
    let polylog = k.beta * nf.ln().powi(2);
    let regime_boundary = l.powf(-k.c) * polylog.powf(-2.0 * k.c);
    if epsilon > regime_boundary * (1.0 + 1e-12) {
        return Err(Error::Regime(format!(
            "epsilon = {epsilon:e} exceeds ℓ^(-c)(β log² n)^(-2c) = {regime_boundary:e}"
        )));
    }
    let mu = k.alpha * epsilon.powf(0.8);
    let delta = mu * mu / nf.powi(3);
    let delta_target = k.alpha * k.alpha / nf.powi(3);
    let (epsilon_star, delta_star) = if mu == 0.0 {
        (0.0, 0.0)
    } else {
        let b = strong_composition(&CompositionInput::new(mu, delta, ell)?, true)?;
        (b.epsilon, b.delta)
    };
    Ok(PdpDerivation {
        epsilon,
        n,
        ell,
        constants: *k,
        regime_boundary,
        mu,
        delta,
        ell_delta: l * delta,
        epsilon_star,
        delta_star,
        delta_target,
        epsilon_ok: epsilon_star <= 0.1,
        delta_ok: delta_star <= delta_target * (1.0 + 1e-12),
    })
}

/// Smallest `m` with `|Y|·(e^{−ε}/2)^{2^m} ≤ 1`, i.e. `2^m ≥ ln|Y|/(ε + ln 2)`.
pub fn rdp_separation_min_samples(output_log2: f64, epsilon: f64) -> Result<u32> {
    if !(output_log2 > 0.0) || !(epsilon > 0.0) {
        return Err(arg("need log2|Y| > 0 and epsilon > 0"));
    }
    if epsilon.is_infinite() {
        return Ok(0);
    }
    let threshold = output_log2 * std::f64::consts::LN_2 / (epsilon + std::f64::consts::LN_2);
    let mut m = 0u32;
    while 2f64.powi(m as i32) < threshold {
        m += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_analysis::{min_delta_for_epsilon, min_epsilon_for_delta, min_rdp_epsilon};
    use crate::mechanisms::{compose_tuple, subsample, TabularMechanism};
    use proptest::prelude::*;

    fn inp(e: f64, d: f64, l: usize) -> CompositionInput {
        CompositionInput::new(e, d, l).unwrap()
    }

    #[test]
    fn basic_examples() {
        let b = basic_composition(&inp(0.0, 0.0, 7));
        assert_eq!((b.epsilon, b.delta), (0.0, 0.0));
        let b = basic_composition(&inp(0.1, 1e-6, 3));
        assert!((b.epsilon - 0.3).abs() < 1e-15 && (b.delta - 3e-6).abs() < 1e-20);
        let b = basic_composition(&inp(1.0, 0.4, 3));
        assert_eq!((b.epsilon, b.delta, b.delta_clamped), (3.0, 1.0, true));
    }

    #[test]
    fn strong_examples() {
        let b = strong_composition(&inp(0.0, 1e-3, 5), false).unwrap();
        assert_eq!(b.epsilon, 0.0);
        assert!((b.delta - 1e-2).abs() < 1e-15);
        // 0.1·√(ln 10⁶) + 0.1(e^0.1 − 1) = 0.371692 + 0.010517
        let b = strong_composition(&inp(0.1, 1e-6, 1), false).unwrap();
        assert!((b.epsilon - 0.382209).abs() < 1e-5, "{}", b.epsilon);
        assert!((b.delta - 2e-6).abs() < 1e-18);
        // 0.01·√(100 ln 10⁷) + 100·0.01·(e^0.01 − 1) = 0.401469 + 0.010050
        let b = strong_composition(&inp(0.01, 1e-9, 100), false).unwrap();
        assert!((b.epsilon - 0.411519).abs() < 1e-5, "{}", b.epsilon);
        assert!(matches!(strong_composition(&inp(0.1, 0.5, 2), false), Err(Error::Domain(_))));
        let with = strong_composition(&inp(0.1, 1e-6, 4), true).unwrap().epsilon;
        let without = strong_composition(&inp(0.1, 1e-6, 4), false).unwrap().epsilon;
        assert!(with > without);
    }

    #[test]
    fn strong_dominates_single_mechanism() {
        for &eps in &[0.01, 0.1, 0.5, 1.0] {
            for &delta in &[1e-9, 1e-6, 0.1, 1.0 / std::f64::consts::E] {
                let b = strong_composition(&inp(eps, delta, 1), false).unwrap();
                assert!(b.epsilon >= eps);
            }
        }
    }

    #[test]
    fn rdp_examples() {
        assert_eq!(rdp_composition(0.3, 2.0, 1), 0.3);
        assert!((rdp_composition(1.0 / 16.0, 2.0, 16) - 1.0).abs() < 1e-15);
        assert_eq!(rdp_composition(0.25, 2.0, 3), 0.75);
        assert!((rdp_subsample_amplify(1.0, 1, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rdp_subsample_amplify(0.0, 3, 5).unwrap(), 0.0);
        for k in 1..20 {
            let e = rdp_subsample_amplify(1.0, 1, k).unwrap();
            assert!(e <= 16.0 / (k * k) as f64 + 1e-15);
            assert!(e.sqrt() <= 4.0 / k as f64 + 1e-15);
        }
        assert!(rdp_subsample_amplify(1.0, 3, 2).is_err());
    }

    #[test]
    fn pdp_chain() {
        let k = PdpConstants::default();
        let boundary = 4f64.powf(-k.c) * (k.beta * 64f64.ln().powi(2)).powf(-2.0 * k.c);
        let d = pdp_composition_params(boundary, 64, 4, &k).unwrap();
        assert!(d.epsilon_ok && d.delta_ok, "{d:?}");
        // μ at the boundary is α/(β log² n)·ℓ^{-1/2}
        assert!((d.mu - k.alpha / (k.beta * 64f64.ln().powi(2)) / 2.0).abs() < 1e-15);
        let d = pdp_composition_params(1e-9, 10, 1, &k).unwrap();
        assert!(d.epsilon_ok && d.delta_ok);
        assert!(matches!(pdp_composition_params(boundary * 1.01, 64, 4, &k), Err(Error::Regime(_))));
    }

    #[test]
    fn separation_examples() {
        assert_eq!(rdp_separation_min_samples(1024.0, 1.0).unwrap(), 9);
        assert_eq!(rdp_separation_min_samples(1.0, 1.0).unwrap(), 0);
        assert_eq!(rdp_separation_min_samples(1e6, f64::INFINITY).unwrap(), 0);
        // the defining inequality holds at m and fails at m − 1
        let (lg, eps) = (1024.0f64, 1.0f64);
        let lhs = |m: i32| lg * 2f64.ln() + 2f64.powi(m) * (-eps - 2f64.ln());
        assert!(lhs(9) <= 0.0 && lhs(8) > 0.0);
    }

    fn pure_mechanism(seed: u64, d: usize, n: usize, y: usize) -> (TabularMechanism, f64) {
        let m = TabularMechanism::random(d, n, y, seed).unwrap();
        let e = min_epsilon_for_delta(&m, 0.0).unwrap().epsilon.unwrap();
        (m, e)
    }

    #[test]
    fn formulas_bound_exact_composition() {
        for seed in 0..40u64 {
            let (d, n, y) = (2 + (seed % 2) as usize, 1 + (seed % 3) as usize % 2, 2 + (seed % 2) as usize);
            let (m, eps) = pure_mechanism(seed, d, n, y);
            for ell in 1..=3 {
                let ms: Vec<&TabularMechanism> = std::iter::repeat_n(&m, ell).collect();
                let c = compose_tuple(&ms).unwrap();
                let b = basic_composition(&inp(eps, 0.0, ell));
                assert!(min_delta_for_epsilon(&c, b.epsilon + 1e-9).unwrap().delta <= b.delta + 1e-9);
                let s = strong_composition(&inp(eps, 1e-3, ell), false).unwrap();
                assert!(min_delta_for_epsilon(&c, s.epsilon).unwrap().delta <= s.delta + 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rdp_formulas_are_sound(seed in any::<u64>(), big_m in 2usize..=4) {
            let m = TabularMechanism::random(3, 1, 3, seed).unwrap();
            let e = min_rdp_epsilon(&m, 2.0).unwrap();
            let sub = subsample(&m, big_m).unwrap();
            prop_assert!(min_rdp_epsilon(&sub, 2.0).unwrap() <= rdp_subsample_amplify(e, 1, big_m).unwrap() + 1e-9);
            let c = compose_tuple(&[&m, &m]).unwrap();
            prop_assert!(min_rdp_epsilon(&c, 2.0).unwrap() <= rdp_composition(e, 2.0, 2) + 1e-9);
        }
    }
}
