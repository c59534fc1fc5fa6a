//! Bosonic bath: spectral density, thermal occupation, memory kernel and a
//! discretized-mode representation.
//!
//! Frequencies are measured in units of the cutoff, so `omega_c = 1` in every
//! shipped experiment; the field is kept explicit so the formulas stay honest.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{DrgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CutoffShape {
    /// `J(ω) = 2πα ω_c^{1−s} ω^s e^{−ω/ω_c}`.
    #[default]
    Exponential,
    /// `J(ω) = 2πα ω_c^{1−s} ω^s` for `ω < ω_c`, zero above.
    Sharp,
}

impl CutoffShape {
    pub fn name(&self) -> &'static str {
        match self {
            CutoffShape::Exponential => "exp",
            CutoffShape::Sharp => "sharp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub alpha: f64,
    pub s: f64,
    pub omega_c: f64,
    pub cutoff_shape: CutoffShape,
    pub temperature: f64,
}

impl SpectralParams {
    /// Zero-temperature Ohmic bath with an exponential cutoff at `ω_c = 1`.
    pub fn ohmic(alpha: f64) -> Self {
        Self {
            alpha,
            s: 1.0,
            omega_c: 1.0,
            cutoff_shape: CutoffShape::Exponential,
            temperature: 0.0,
        }
    }

    pub fn with_cutoff(mut self, shape: CutoffShape) -> Self {
        self.cutoff_shape = shape;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(DrgError::Domain(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(DrgError::Domain(format!("omega_c must be > 0, got {}", self.omega_c)));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(DrgError::Domain(format!("s must be > 0, got {}", self.s)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(DrgError::Domain(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn is_ohmic(&self) -> bool {
        self.s == 1.0
    }
}

/// Spectral weight `J(ω)`; non-negative for every `ω ≥ 0`.
pub fn spectral_density(omega: f64, p: &SpectralParams) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(DrgError::Domain(format!("omega must be >= 0, got {omega}")));
    }
    Ok(spectral_density_unchecked(omega, p))
}

pub(crate) fn spectral_density_unchecked(omega: f64, p: &SpectralParams) -> f64 {
    if omega == 0.0 || p.alpha == 0.0 {
        return 0.0;
    }
    let power = if p.s == 1.0 {
        omega
    } else {
        p.omega_c.powf(1.0 - p.s) * omega.powf(p.s)
    };
    match p.cutoff_shape {
        CutoffShape::Exponential => 2.0 * PI * p.alpha * power * (-omega / p.omega_c).exp(),
        CutoffShape::Sharp => {
            if omega < p.omega_c {
                2.0 * PI * p.alpha * power
            } else {
                0.0
            }
        }
    }
}

/// Bose occupation `1/(e^{ω/T} − 1)`, exactly zero at `T = 0`.
pub fn bath_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(DrgError::Domain(format!("omega must be > 0, got {omega}")));
    }
    if !(temperature >= 0.0) {
        return Err(DrgError::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

fn check_kernel_support(p: &SpectralParams) -> Result<()> {
    p.validate()?;
    if p.cutoff_shape != CutoffShape::Exponential {
        return Err(DrgError::Unsupported(
            "memory kernel is only available for the exponential cutoff".into(),
        ));
    }
    if !p.is_ohmic() {
        return Err(DrgError::Unsupported(format!(
            "memory kernel is only available for s = 1 (got s = {})",
            p.s
        )));
    }
    Ok(())
}

/// `μ(τ) = (1/π)∫₀^∞ J(ω) e^{−iωτ} dω = 2α ω_c² / (1 + iω_cτ)²`.
pub fn memory_kernel(tau: f64, p: &SpectralParams) -> Result<Complex64> {
    check_kernel_support(p)?;
    Ok(kernel_closed_form(tau, p.alpha, p.omega_c))
}

#[inline]
pub(crate) fn kernel_closed_form(tau: f64, alpha: f64, omega_c: f64) -> Complex64 {
    let z = Complex64::new(1.0, omega_c * tau);
    2.0 * alpha * omega_c * omega_c / (z * z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub omega: f64,
    pub coupling: f64,
}

/// Finite set of bath modes with `J(ω) ≈ π Σ g_k² δ(ω − ω_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    pub modes: Vec<BathMode>,
    pub omega_max: f64,
    /// Continuum the modes were sampled from.
    pub params: SpectralParams,
}

impl DiscreteBath {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `Σ g_k²`, which approaches `(1/π)∫J(ω)dω` as the grid is refined.
    pub fn coupling_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling * m.coupling).sum()
    }

    /// Grid spacing if the modes lie on a uniform grid.
    pub fn uniform_spacing(&self) -> Option<f64> {
        match self.modes.as_slice() {
            [] => None,
            [only] => Some(2.0 * only.omega),
            [first, second, ..] => {
                let d = second.omega - first.omega;
                let uniform = self
                    .modes
                    .windows(2)
                    .all(|w| ((w[1].omega - w[0].omega) - d).abs() <= 1e-9 * d);
                uniform.then_some(d)
            }
        }
    }
}

/// Midpoint discretization on a linear grid: `ω_k = (k − ½)Δω`,
/// `g_k = sqrt(J(ω_k) Δω / π)`.
pub fn discretize_bath(p: &SpectralParams, n: usize, omega_max: f64) -> Result<DiscreteBath> {
    p.validate()?;
    if n == 0 {
        return Err(DrgError::Domain("bath needs at least one mode".into()));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(DrgError::Domain(format!("omega_max must be > 0, got {omega_max}")));
    }
    let d_omega = omega_max / n as f64;
    let modes = (1..=n)
        .map(|k| {
            let omega = (k as f64 - 0.5) * d_omega;
            let weight = spectral_density_unchecked(omega, p) * d_omega / PI;
            BathMode { omega, coupling: weight.sqrt() }
        })
        .collect();
    Ok(DiscreteBath { modes, omega_max, params: *p })
}
