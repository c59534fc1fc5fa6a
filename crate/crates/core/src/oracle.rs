//! Brute-force single-excitation evolution with a finite discretized bath.
//!
//! With one excitation shared between the emitter and the modes the state is
//! `c_e|e,0⟩ + Σ c_k|g,1_k⟩` and the Schrödinger equation is linear:
//! `i ċ_e = Δ₀c_e + Σ κ_k c_k`, `i ċ_k = ω_k c_k + κ_k c_e`.
//! Eliminating the modes gives `ċ_e = −iΔ₀c_e − Σκ_k² ∫ e^{−iω_k(t−t′)} c_e dt′`,
//! which reproduces the amplitude equation of [`crate::se_exact`] when
//! `κ_k = g_k/√2`, because `Σ g_k² e^{−iω_kτ}` discretizes `μ(τ)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::bath::DiscreteBath;
use crate::error::{DrgError, Result};
use crate::se_exact::AmplitudeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    pub c_e: Complex64,
    pub c_k: Vec<Complex64>,
}

impl SingleExcitationState {
    /// Emitter excited, all modes empty.
    pub fn excited(n_modes: usize) -> Self {
        Self { c_e: Complex64::new(1.0, 0.0), c_k: vec![Complex64::new(0.0, 0.0); n_modes] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_e.norm_sqr() + self.c_k.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    /// `c_e(t)` on the uniform grid `n·dt`.
    pub amplitude: AmplitudeSeries,
    pub final_state: SingleExcitationState,
    /// Largest `|norm − 1|` seen during the run.
    pub max_norm_drift: f64,
    /// Time up to which the finite bath is free of revivals, if defined.
    pub valid_until: Option<f64>,
}

/// Largest `dt·ω_max` accepted.
pub const MAX_DT_OMEGA: f64 = 0.1;

// Fourth-order triple-jump composition of a symmetric second-order map.
const YOSHIDA_OUTER: f64 = 1.351_207_191_959_657_8;
const YOSHIDA_INNER: f64 = -1.702_414_383_919_315_3;

/// One Cayley (implicit midpoint) step `(1 + iθH)x = (1 − iθH)c`, `θ = τ/2`,
/// solved exactly for the arrowhead Hamiltonian.
struct CayleyMap {
    theta: f64,
    /// `1/(1 + iθω_k)`.
    inv: Vec<Complex64>,
    /// `1 + iθΔ₀ + θ² Σ κ_k²/(1 + iθω_k)`.
    pivot: Complex64,
}

impl CayleyMap {
    fn new(tau: f64, delta0: f64, omega: &[f64], kappa: &[f64]) -> Self {
        let theta = 0.5 * tau;
        let inv: Vec<Complex64> = omega.iter().map(|&w| Complex64::new(1.0, theta * w).inv()).collect();
        let schur: Complex64 = kappa.iter().zip(&inv).map(|(&k, &d)| d * (k * k)).sum();
        let pivot = Complex64::new(1.0, theta * delta0) + schur * (theta * theta);
        Self { theta, inv, pivot }
    }

    fn apply(&self, state: &mut SingleExcitationState, delta0: f64, omega: &[f64], kappa: &[f64], scratch: &mut Vec<Complex64>) {
        let i_theta = Complex64::new(0.0, self.theta);
        let ce = state.c_e;
        // b = (1 − iθH)c
        let coupling: Complex64 = kappa.iter().zip(&state.c_k).map(|(&k, &c)| c * k).sum();
        let b_e = ce - i_theta * (ce * delta0 + coupling);
        scratch.clear();
        scratch.extend(
            state
                .c_k
                .iter()
                .zip(omega)
                .zip(kappa)
                .map(|((&c, &w), &k)| c - i_theta * (c * w + ce * k)),
        );
        let reduced: Complex64 = kappa.iter().zip(scratch.iter()).zip(&self.inv).map(|((&k, &b), &d)| b * d * k).sum();
        let x_e = (b_e - i_theta * reduced) / self.pivot;
        for (((c, &b), &d), &k) in state.c_k.iter_mut().zip(scratch.iter()).zip(&self.inv).zip(kappa) {
            *c = (b - i_theta * x_e * k) * d;
        }
        state.c_e = x_e;
    }
}

/// Exact (to integrator order) single-excitation dynamics of the emitter
/// coupled to `bath`, starting from the excited emitter.
///
/// Uses a fourth-order composition of Cayley steps, which is unitary for any
/// step size, so the norm is conserved to roundoff.
pub fn evolve_discrete_bath(bath: &DiscreteBath, delta0: f64, dt: f64, t_max: f64) -> Result<OracleRun> {
    bath.params.validate()?;
    if bath.is_empty() {
        return Err(DrgError::Domain("bath has no modes".into()));
    }
    if !(dt > 0.0 && t_max > 0.0 && t_max.is_finite() && delta0.is_finite()) {
        return Err(DrgError::Domain(format!("need dt > 0 and t_max > 0 (dt={dt}, t_max={t_max})")));
    }
    let omega_top = bath.modes.iter().map(|m| m.omega).fold(bath.omega_max, f64::max);
    if dt * omega_top > MAX_DT_OMEGA * (1.0 + 1e-12) {
        return Err(DrgError::Stability(format!(
            "dt={dt} does not resolve the fastest mode: dt*omega_max={} > {MAX_DT_OMEGA}",
            dt * omega_top
        )));
    }
    let omega: Vec<f64> = bath.modes.iter().map(|m| m.omega).collect();
    let kappa: Vec<f64> = bath.modes.iter().map(|m| m.coupling / SQRT_2).collect();
    let outer = CayleyMap::new(YOSHIDA_OUTER * dt, delta0, &omega, &kappa);
    let inner = CayleyMap::new(YOSHIDA_INNER * dt, delta0, &omega, &kappa);

    let steps = (t_max / dt).round() as usize;
    let mut state = SingleExcitationState::excited(bath.len());
    let mut values = Vec::with_capacity(steps + 1);
    values.push(state.c_e);
    let mut scratch = Vec::with_capacity(bath.len());
    let mut max_norm_drift: f64 = 0.0;
    for _ in 0..steps {
        outer.apply(&mut state, delta0, &omega, &kappa, &mut scratch);
        inner.apply(&mut state, delta0, &omega, &kappa, &mut scratch);
        outer.apply(&mut state, delta0, &omega, &kappa, &mut scratch);
        values.push(state.c_e);
        max_norm_drift = max_norm_drift.max((state.norm_sqr() - 1.0).abs());
    }
    Ok(OracleRun {
        amplitude: AmplitudeSeries { dt, values, params: bath.params, delta0 },
        final_state: state,
        max_norm_drift,
        valid_until: recurrence_time(bath).ok(),
    })
}

/// Revival time `2π/Δω` of a uniformly spaced bath.
pub fn recurrence_time(bath: &DiscreteBath) -> Result<f64> {
    if bath.len() < 2 {
        return Err(DrgError::Domain("recurrence time needs at least two modes".into()));
    }
    let spacing = bath
        .uniform_spacing()
        .ok_or_else(|| DrgError::Unsupported("recurrence time needs a uniform frequency grid".into()))?;
    Ok(2.0 * PI / spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{discretize_bath, BathMode, SpectralParams};
    use approx::assert_relative_eq;

    fn single_mode(omega: f64, coupling: f64) -> DiscreteBath {
        DiscreteBath {
            modes: vec![BathMode { omega, coupling }],
            omega_max: omega,
            params: SpectralParams::ohmic(0.0),
        }
    }

    #[test]
    fn uncoupled_emitter_rotates_freely() {
        let bath = discretize_bath(&SpectralParams::ohmic(0.0), 50, 10.0).unwrap();
        let run = evolve_discrete_bath(&bath, 0.1, 0.01, 20.0).unwrap();
        for (n, c) in run.amplitude.values.iter().enumerate() {
            let exact = Complex64::from_polar(1.0, -0.1 * n as f64 * 0.01);
            assert!((c - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn resonant_mode_gives_rabi_oscillation() {
        // κ = g/√2, so g = √2·κ.
        let kappa = 0.05;
        let bath = single_mode(0.3, SQRT_2 * kappa);
        let run = evolve_discrete_bath(&bath, 0.3, 0.005, 100.0).unwrap();
        let worst = run
            .amplitude
            .values
            .iter()
            .enumerate()
            .map(|(n, c)| (c.norm_sqr() - (kappa * n as f64 * 0.005).cos().powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "worst {worst:e}");
    }

    #[test]
    fn fourth_order_in_dt() {
        let bath = single_mode(0.5, 0.4);
        let exact_pop = |t: f64| {
            // Detuned two-level reduction: |c_e|² = 1 − (4κ²/W²) sin²(Wt/2).
            let (kappa, det) = (0.4 / SQRT_2, 0.2);
            let w = (det * det + 4.0 * kappa * kappa).sqrt();
            1.0 - 4.0 * kappa * kappa / (w * w) * (0.5 * w * t).sin().powi(2)
        };
        let err = |dt: f64| {
            let run = evolve_discrete_bath(&bath, 0.3, dt, 20.0).unwrap();
            (run.amplitude.values.last().unwrap().norm_sqr() - exact_pop(20.0)).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((ratio.log2() - 4.0).abs() < 0.3, "order {}", ratio.log2());
    }

    #[test]
    fn norm_is_conserved() {
        let bath = discretize_bath(&SpectralParams::ohmic(0.05), 2000, 10.0).unwrap();
        let run = evolve_discrete_bath(&bath, 0.1, 0.01, 500.0).unwrap();
        assert!(run.max_norm_drift < 1e-10, "drift {}", run.max_norm_drift);
    }

    #[test]
    fn coarse_steps_rejected() {
        let bath = discretize_bath(&SpectralParams::ohmic(0.05), 100, 10.0).unwrap();
        assert!(matches!(evolve_discrete_bath(&bath, 0.1, 0.02, 1.0), Err(DrgError::Stability(_))));
    }

    #[test]
    fn recurrence_time_examples() {
        let p = SpectralParams::ohmic(0.05);
        let bath = discretize_bath(&p, 2000, 10.0).unwrap();
        assert_relative_eq!(recurrence_time(&bath).unwrap(), 400.0 * PI, max_relative = 1e-9);
        let doubled = discretize_bath(&p, 4000, 10.0).unwrap();
        assert_relative_eq!(recurrence_time(&doubled).unwrap(), 800.0 * PI, max_relative = 1e-9);
        assert!(matches!(recurrence_time(&single_mode(1.0, 0.1)), Err(DrgError::Domain(_))));
        let mut uneven = bath.clone();
        uneven.modes[1].omega += 1e-3;
        assert!(matches!(recurrence_time(&uneven), Err(DrgError::Unsupported(_))));
    }
}
