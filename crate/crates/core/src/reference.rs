//! Long-time NIBA reference values for the Ohmic spin-boson model.
//!
//! These are standard literature closed forms used as comparison plumbing,
//! not outputs of the flow.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{DrgError, Result};
use crate::flow::kondo_scale;
use crate::se_exact::RatePair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NibaValues {
    pub delta_niba: f64,
    pub gamma_niba: f64,
    pub q_niba: f64,
}

/// `cos(πα)Γ(1−2α)` rewritten with `ε = ½ − α` as `sin(πε)Γ(1+2ε)/(2ε)`,
/// which is regular at `α = ½` (limit `π/2`).
fn renormalization_factor(alpha: f64) -> f64 {
    let eps = 0.5 - alpha;
    let x = PI * eps;
    let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    FRAC_PI_2 * sinc * libm::tgamma(1.0 + 2.0 * eps)
}

/// `Δ_N = T_K [cos(πα)Γ(1−2α)]^{1/(2(1−α))}`, `γ_N = 2Δ_N sin(πα/(2(1−α)))`.
pub fn niba_parameters(alpha: f64, delta0: f64, omega_c: f64) -> Result<NibaValues> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(DrgError::Domain(format!("NIBA values need 0 < alpha <= 1/2, got {alpha}")));
    }
    if !(delta0 > 0.0 && omega_c > 0.0 && delta0 < omega_c) {
        return Err(DrgError::Domain(format!(
            "NIBA values need 0 < delta0 < omega_c (delta0={delta0}, omega_c={omega_c})"
        )));
    }
    let tk = kondo_scale(alpha, delta0, omega_c)?;
    let delta_niba = tk * renormalization_factor(alpha).powf(1.0 / (2.0 * (1.0 - alpha)));
    let gamma_niba = 2.0 * delta_niba * (PI * alpha / (2.0 * (1.0 - alpha))).sin();
    Ok(NibaValues { delta_niba, gamma_niba, q_niba: delta_niba / gamma_niba })
}

/// Relative differences `(x_DRG − x_NIBA)/x_NIBA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NibaComparison {
    pub delta_rel: f64,
    /// `τ = γ⁻¹`; infinite when the DRG rate vanishes.
    pub tau_rel: f64,
    pub q_rel: f64,
    pub tau_drg: f64,
    pub q_drg: f64,
    pub tau_infinite: bool,
}

pub fn drg_vs_niba_report(drg: RatePair, niba: &NibaValues) -> NibaComparison {
    let tau_niba = 1.0 / niba.gamma_niba;
    let tau_infinite = drg.gamma == 0.0;
    let (tau_drg, q_drg) = if tau_infinite {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (1.0 / drg.gamma, drg.delta / drg.gamma)
    };
    let rel = |x: f64, reference: f64| if x == reference { 0.0 } else { (x - reference) / reference };
    NibaComparison {
        delta_rel: rel(drg.delta, niba.delta_niba),
        tau_rel: rel(tau_drg, tau_niba),
        q_rel: rel(q_drg, niba.q_niba),
        tau_drg,
        q_drg,
        tau_infinite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn weak_coupling_limit() {
        let v = niba_parameters(1e-9, 0.01, 1.0).unwrap();
        assert_relative_eq!(v.delta_niba, 0.01, max_relative = 1e-6);
        assert!(v.gamma_niba < 1e-9);
        assert!(v.q_niba > 1e6);
    }

    #[test]
    fn toulouse_point() {
        let v = niba_parameters(0.5, 0.01, 1.0).unwrap();
        let tk = kondo_scale(0.5, 0.01, 1.0).unwrap();
        assert_relative_eq!(v.delta_niba, FRAC_PI_2 * tk, max_relative = 1e-14);
        assert_relative_eq!(v.gamma_niba, 2.0 * v.delta_niba, max_relative = 1e-14);
        assert_relative_eq!(v.q_niba, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn factor_matches_direct_product_away_from_half() {
        for &a in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.45] {
            let direct = (PI * a).cos() * libm::tgamma(1.0 - 2.0 * a);
            assert_relative_eq!(renormalization_factor(a), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn continuous_at_half() {
        let limit = niba_parameters(0.5, 0.01, 1.0).unwrap();
        for k in 3..=6 {
            let a = 0.5 - 10f64.powi(-k);
            let v = niba_parameters(a, 0.01, 1.0).unwrap();
            let f = renormalization_factor(a);
            assert!((f / FRAC_PI_2 - 1.0).abs() < 10f64.powi(-k + 1));
            // T_K itself moves with α; compare the α-independent ratio.
            let tk = kondo_scale(a, 0.01, 1.0).unwrap();
            let tk_half = kondo_scale(0.5, 0.01, 1.0).unwrap();
            assert!(((v.delta_niba / tk) / (limit.delta_niba / tk_half) - 1.0).abs() < 10f64.powi(-k + 1));
            assert!((v.q_niba / limit.q_niba - 1.0).abs() < 10f64.powi(-k + 1));
        }
    }

    #[test]
    fn delta_decreases_with_alpha() {
        let values: Vec<f64> = (1..=9)
            .map(|k| niba_parameters(0.05 * k as f64, 0.01, 1.0).unwrap().delta_niba)
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn domain_errors() {
        assert!(niba_parameters(0.0, 0.01, 1.0).is_err());
        assert!(niba_parameters(0.6, 0.01, 1.0).is_err());
        assert!(niba_parameters(0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn report_of_identical_inputs_is_zero() {
        let v = niba_parameters(0.2, 0.01, 1.0).unwrap();
        let r = drg_vs_niba_report(RatePair { delta: v.delta_niba, gamma: v.gamma_niba }, &v);
        assert_eq!((r.delta_rel, r.tau_rel, r.q_rel), (0.0, 0.0, 0.0));
        assert!(!r.tau_infinite);
    }

    #[test]
    fn zero_rate_flags_infinite_tau() {
        let v = niba_parameters(0.2, 0.01, 1.0).unwrap();
        let r = drg_vs_niba_report(RatePair { delta: v.delta_niba, gamma: 0.0 }, &v);
        assert!(r.tau_infinite && r.tau_drg.is_infinite() && r.tau_rel.is_infinite());
    }

    proptest! {
        #[test]
        fn quality_factor_decreases(a in 0.01f64..0.49, da in 1e-3f64..0.01) {
            let b = (a + da).min(0.5);
            let qa = niba_parameters(a, 0.01, 1.0).unwrap().q_niba;
            let qb = niba_parameters(b, 0.01, 1.0).unwrap().q_niba;
            prop_assert!(qb < qa);
        }

        #[test]
        fn values_positive(a in 1e-3f64..=0.5) {
            let v = niba_parameters(a, 0.01, 1.0).unwrap();
            prop_assert!(v.delta_niba > 0.0 && v.gamma_niba > 0.0 && v.q_niba > 0.0);
            prop_assert!((v.q_niba - v.delta_niba / v.gamma_niba).abs() <= 1e-12 * v.q_niba);
        }
    }
}
