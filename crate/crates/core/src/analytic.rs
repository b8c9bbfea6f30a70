//! Closed-form reference values: mapped Hermitian hoppings, the open-chain
//! bulk gap and the zero-energy localization length.
//!
//! The localization formulas use `t = 1` as the energy unit. All of them are
//! evaluated in log domain: `|2 ± 2W|^{1/2W}` overflows long before the
//! logarithm of the ratio does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModelSpec, Variant};

/// Upper end of the disorder range searched by [`critical_disorder`].
pub const ROOT_BRACKET_MAX: f64 = 10.0;
/// Scan resolution for sign changes before bisection.
const ROOT_SCAN_STEP: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedParams {
    pub t_intra_eff: f64,
    pub t_inter_eff: f64,
    pub valid: bool,
}

/// Hoppings of the Hermitian chain that shares the open-chain spectrum.
///
/// Nonreciprocal: `(t, √(t_l t_r))`, i.e. `t'√(1+γ)` for the linear form.
/// Gain/loss: `(√(t² − Γ²/4), t')`.
pub fn mapped_params(spec: &ModelSpec) -> Result<MappedParams> {
    match spec.variant {
        Variant::Nonreciprocal => {
            if spec.w2 != 0.0 {
                return Err(Error::InvalidArgument(
                    "no exact Hermitian mapping with intercell disorder (W2 != 0)".into(),
                ));
            }
            let t_r = spec.t_prime + spec.form.eval(spec.t_prime, spec.gamma);
            let product = spec.t_prime * t_r;
            let valid = product >= 0.0 && (1.0 + spec.form.eval(1.0, spec.gamma)) > 0.0;
            Ok(MappedParams {
                t_intra_eff: spec.t,
                t_inter_eff: if valid { product.sqrt() } else { f64::NAN },
                valid,
            })
        }
        Variant::GainLoss => {
            let radicand = spec.t * spec.t - spec.gain_loss * spec.gain_loss / 4.0;
            let valid = spec.gain_loss.abs() < 2.0 * spec.t.abs();
            Ok(MappedParams {
                t_intra_eff: if radicand >= 0.0 { radicand.sqrt() } else { f64::NAN },
                t_inter_eff: spec.t_prime,
                valid,
            })
        }
        other => Err(Error::UnsupportedVariant { op: "Hermitian mapping", variant: other }),
    }
}

/// `2 |t̃' − t̃|`
pub fn bulk_gap_formula(spec: &ModelSpec) -> Result<f64> {
    let mapped = mapped_params(spec)?;
    if !mapped.valid {
        return Err(Error::InvalidArgument(format!(
            "mapping is invalid for {:?} with these parameters",
            spec.variant
        )));
    }
    Ok(2.0 * (mapped.t_inter_eff - mapped.t_intra_eff).abs())
}

/// `x ln|x|`, continuously extended to 0 at `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln()
    }
}

/// Mean of `ln|a + W ω|` over `ω ~ U[-1, 1]`, shifted by one:
/// `[(a+W) ln|a+W| − (a−W) ln|a−W|] / 2W`, with the `W → 0` limit `ln|a| + 1`.
fn mean_log_plus_one(a: f64, w: f64) -> f64 {
    if w.abs() < 1e-4 * a.abs().max(f64::MIN_POSITIVE) {
        let x = (w / a).powi(2);
        a.abs().ln() + 1.0 - x / 6.0 - x * x / 20.0
    } else {
        (xlogx(a + w) - xlogx(a - w)) / (2.0 * w)
    }
}

/// Signed Lyapunov sum `⟨ln|t̃_j|⟩ − ⟨ln|m_j|⟩`; its absolute value is `Λ⁻¹`.
pub fn lyapunov_sum(t_prime: f64, gamma: f64, w1: f64, w2: f64) -> f64 {
    let t_eff = t_prime * (1.0 + gamma).sqrt();
    mean_log_plus_one(t_eff, w2) - mean_log_plus_one(1.0, w1)
}

/// Inverse zero-energy localization length for intracell disorder `W₁` and
/// intercell disorder `W₂`, with `t̃' = t'√(1+γ)` and `t = 1`:
///
/// ```text
/// Λ⁻¹ = | ln[ |2t̃'+2W₂|^(t̃'/2W₂+½) / |2t̃'−2W₂|^(t̃'/2W₂−½)
///            · |2−2W₁|^(1/2W₁−½) / |2+2W₁|^(1/2W₁+½) ] |
/// ```
///
/// The `W₂ > 0` branch is derived for the Hermitian chain; with nonreciprocity
/// it is only indicative.
pub fn localization_length_inverse(t_prime: f64, gamma: f64, w1: f64, w2: f64) -> f64 {
    lyapunov_sum(t_prime, gamma, w1, w2).abs()
}

/// The `W₂ = 0` specialization written out directly:
/// `Λ⁻¹ = | ln[ 2e t'√(1+γ) |2−2W|^(1/2W−½) / |2+2W|^(1/2W+½) ] |`.
pub fn localization_length_inverse_intracell(t_prime: f64, gamma: f64, w: f64) -> f64 {
    let t_eff = t_prime * (1.0 + gamma).sqrt();
    let prefactor = (2.0 * t_eff).ln() + 1.0;
    let disorder = if w.abs() < 1e-4 {
        // ln(2−2W)(1/2W−½) − ln(2+2W)(1/2W+½) → −1 − ln 2 + W²/6 + W⁴/20
        let x = w * w;
        -1.0 - std::f64::consts::LN_2 + x / 6.0 + x * x / 20.0
    } else {
        let lower = (2.0 - 2.0 * w).abs();
        let upper = (2.0 + 2.0 * w).abs();
        let lower_exp = 1.0 / (2.0 * w) - 0.5;
        let lower_term = if lower == 0.0 { 0.0 } else { lower_exp * lower.ln() };
        lower_term - (1.0 / (2.0 * w) + 0.5) * upper.ln()
    };
    (prefactor + disorder).abs()
}

/// Disorder strengths `W ∈ (0, 10]` where `Λ⁻¹(W) = 0` for `W₁ = W, W₂ = 0`.
///
/// Sign changes of the signed Lyapunov sum are bracketed on a `10⁻³` grid and
/// refined by bisection to `10⁻⁶`.
pub fn critical_disorder(t_prime: f64, gamma: f64) -> Vec<f64> {
    let f = |w: f64| lyapunov_sum(t_prime, gamma, w, 0.0);
    let steps = (ROOT_BRACKET_MAX / ROOT_SCAN_STEP).round() as usize;
    let mut roots = Vec::new();
    let mut lo = ROOT_SCAN_STEP;
    let mut f_lo = f(lo);
    for k in 2..=steps {
        let hi = k as f64 * ROOT_SCAN_STEP;
        let f_hi = f(hi);
        if f_lo == 0.0 {
            roots.push(lo);
        } else if f_lo.signum() != f_hi.signum() && f_hi != 0.0 {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            while b - a > ROOT_TOL {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    if f_lo == 0.0 {
        roots.push(lo);
    }
    roots
}

/// Gain/loss strength at which PT symmetry of the clean open chain breaks.
pub fn pt_threshold(t: f64) -> f64 {
    2.0 * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NonreciprocalForm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Monte Carlo estimate of `⟨ln|t̃+W₂ω'|⟩ − ⟨ln|1+W₁ω|⟩`.
    fn sampled_lyapunov(t_eff: f64, w1: f64, w2: f64, n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut acc = 0.0;
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..=1.0);
            let b: f64 = rng.random_range(-1.0..=1.0);
            acc += (t_eff + w2 * b).abs().ln() - (1.0 + w1 * a).abs().ln();
        }
        acc / n as f64
    }

    #[test]
    fn mapped_hoppings() {
        let nr = ModelSpec { t_prime: 0.5, gamma: 3.0, ..ModelSpec::default() };
        let m = mapped_params(&nr).unwrap();
        assert!(m.valid && (m.t_inter_eff - 1.0).abs() < 1e-15);
        let gl = ModelSpec { variant: Variant::GainLoss, t: 1.0, gain_loss: 1.2, ..ModelSpec::default() };
        assert!((mapped_params(&gl).unwrap().t_intra_eff - 0.8).abs() < 1e-15);
        let broken = ModelSpec { gain_loss: 2.5, ..gl };
        assert!(!mapped_params(&broken).unwrap().valid && bulk_gap_formula(&broken).is_err());
        assert!(mapped_params(&ModelSpec { w2: 0.1, ..nr }).is_err());
        assert!(mapped_params(&ModelSpec { variant: Variant::Modified, ..nr }).is_err());
        assert!(!mapped_params(&ModelSpec { gamma: -1.5, ..nr }).unwrap().valid);
        let quad = ModelSpec { form: NonreciprocalForm::Quadratic, t_prime: 1.0, gamma: 1.0, ..ModelSpec::default() };
        assert!((mapped_params(&quad).unwrap().t_inter_eff - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gap_formula() {
        let spec = ModelSpec { t_prime: 1.2, gamma: 1.0, ..ModelSpec::default() };
        assert!((bulk_gap_formula(&spec).unwrap() - 2.0 * (1.2 * 2f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn clean_limit() {
        // W → 0: Λ⁻¹ = |ln(t'√(1+γ))|
        for (tp, gamma) in [(1.2, 0.0), (0.5, 1.0), (1.0, 3.0)] {
            let expect = (tp * (1.0f64 + gamma).sqrt()).ln().abs();
            assert!((localization_length_inverse(tp, gamma, 0.0, 0.0) - expect).abs() < 1e-14);
            assert!((localization_length_inverse_intracell(tp, gamma, 1e-6) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn agrees_with_sampled_average() {
        for (tp, gamma, w1, w2) in [(1.2, 0.5, 1.5, 0.0), (1.2, 0.0, 3.0, 1.5), (0.8, 1.0, 0.7, 0.4)] {
            let t_eff = tp * (1.0f64 + gamma).sqrt();
            let mc = sampled_lyapunov(t_eff, w1, w2, 400_000);
            let exact = lyapunov_sum(tp, gamma, w1, w2);
            assert!((mc - exact).abs() < 0.01, "{mc} vs {exact}");
        }
    }

    #[test]
    fn roots_of_clean_topological_chain() {
        let roots = critical_disorder(1.2, 0.0);
        assert_eq!(roots.len(), 1);
        for &w in &roots {
            assert!(localization_length_inverse(1.2, 0.0, w, 0.0) < 1e-5);
        }
        // Trivial clean chain enters and leaves the Anderson phase.
        let two = critical_disorder(0.6, 1.0);
        assert_eq!(two.len(), 2);
        assert!(two[0] < two[1]);
        assert_eq!(pt_threshold(1.0), 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn general_formula_reduces_to_intracell(tp in 0.05f64..3.0, gamma in -0.9f64..4.0, w in 0.0f64..8.0) {
            let a = localization_length_inverse(tp, gamma, w, 0.0);
            let b = localization_length_inverse_intracell(tp, gamma, w);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }

        #[test]
        fn small_intercell_disorder_is_continuous(tp in 0.2f64..3.0, gamma in -0.5f64..3.0, w in 0.0f64..6.0) {
            let a = localization_length_inverse(tp, gamma, w, 0.0);
            let b = localization_length_inverse(tp, gamma, w, 1e-7);
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
