//! Exact spontaneous-emission dynamics in the single-excitation sector.
//!
//! The survival amplitude obeys
//! `u̇ + iΔ₀u + ½∫₀ᵗ μ(t−t′) u(t′) dt′ = 0` with `u(0) = 1`, and the exact
//! time-local rates follow from `u̇/u = −γ(t) − iΔ(t)`.

use std::f64::consts::FRAC_PI_4;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::bath::{kernel_closed_form, memory_kernel, SpectralParams};
use crate::error::{DrgError, Result};
use crate::flow::{Interpolation, RateSample, RateSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub delta: f64,
    pub gamma: f64,
}

/// Complex amplitude sampled on the uniform grid `t_n = n·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSeries {
    pub dt: f64,
    pub values: Vec<Complex64>,
    pub params: SpectralParams,
    pub delta0: f64,
}

impl AmplitudeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    /// `⟨σz⟩ = 2|u|² − 1` in the spontaneous-emission basis.
    pub fn excited_population_sz(&self) -> Vec<f64> {
        self.values.iter().map(|u| 2.0 * u.norm_sqr() - 1.0).collect()
    }

    /// Linear interpolation of `u` at `t` inside the grid.
    pub fn at(&self, t: f64) -> Option<Complex64> {
        if !(t >= 0.0) || t > self.t_max() {
            return None;
        }
        let x = t / self.dt;
        let i = (x.floor() as usize).min(self.values.len() - 1);
        if i + 1 >= self.values.len() {
            return Some(self.values[i]);
        }
        let w = x - i as f64;
        Some(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

const MAX_DT_OMEGA_C: f64 = 0.01;
const WEIGHT_NODES: usize = 8;

/// Second-order product-trapezoidal solution of the amplitude equation.
///
/// The free phase is removed first (`v = u e^{iΔ₀t}`), the memory integral is
/// product-integrated against the piecewise-linear interpolant of `v`, and the
/// resulting equation is advanced with the implicit trapezoidal rule.
pub fn solve_volterra(p: &SpectralParams, delta0: f64, dt: f64, t_max: f64) -> Result<AmplitudeSeries> {
    memory_kernel(0.0, p)?;
    if !(dt > 0.0 && dt <= MAX_DT_OMEGA_C / p.omega_c * (1.0 + 1e-12)) {
        return Err(DrgError::Domain(format!(
            "dt must lie in (0, {}/omega_c], got {dt}",
            MAX_DT_OMEGA_C
        )));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(DrgError::Domain(format!("t_max must be > 0, got {t_max}")));
    }
    if !delta0.is_finite() {
        return Err(DrgError::Domain("delta0 must be finite".into()));
    }
    let steps = (t_max / dt).round() as usize;
    let (alpha, omega_c) = (p.alpha, p.omega_c);

    // Interval weights for k̃(τ) = μ(τ)e^{iΔ₀τ} on τ ∈ [kh, (k+1)h]:
    // `early[k]` multiplies the earlier node, `late[k]` the later one.
    let rule = GaussLegendre::new(NonZeroUsize::new(WEIGHT_NODES).unwrap());
    let nodes: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let mut early = Vec::with_capacity(steps);
    let mut late = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for &(xi, w) in &nodes {
            let tau = (k as f64 + xi) * dt;
            let kern = kernel_closed_form(tau, alpha, omega_c) * Complex64::from_polar(1.0, delta0 * tau);
            a += kern * (w * xi);
            b += kern * (w * (1.0 - xi));
        }
        early.push(a * dt);
        late.push(b * dt);
    }
    // Combined weight on v_{m-k}: early[k-1] + late[k] for 1 <= k < m.
    let (mut w_re, mut w_im) = (vec![0.0; steps + 1], vec![0.0; steps + 1]);
    for k in 1..steps {
        let w = early[k - 1] + late[k];
        w_re[k] = w.re;
        w_im[k] = w.im;
    }

    let mut v_re = Vec::with_capacity(steps + 1);
    let mut v_im = Vec::with_capacity(steps + 1);
    v_re.push(1.0);
    v_im.push(0.0);
    let mut g_prev = Complex64::new(0.0, 0.0);
    let denom = Complex64::new(1.0, 0.0) + late[0] * (dt / 4.0);

    for m in 1..=steps {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, (wr, wi)) in w_re[1..m].iter().rev().zip(w_im[1..m].iter().rev()).enumerate() {
            let (vr, vi) = (v_re[j + 1], v_im[j + 1]);
            re += wr * vr - wi * vi;
            im += wr * vi + wi * vr;
        }
        let rest = Complex64::new(re, im) + early[m - 1] * Complex64::new(v_re[0], v_im[0]);
        let v_prev = Complex64::new(v_re[m - 1], v_im[m - 1]);
        let v = (v_prev + g_prev * (dt / 2.0) - rest * (dt / 4.0)) / denom;
        g_prev = -0.5 * (late[0] * v + rest);
        v_re.push(v.re);
        v_im.push(v.im);
    }

    let values = v_re
        .iter()
        .zip(&v_im)
        .enumerate()
        .map(|(n, (&re, &im))| Complex64::new(re, im) * Complex64::from_polar(1.0, -delta0 * n as f64 * dt))
        .collect();
    Ok(AmplitudeSeries { dt, values, params: *p, delta0 })
}

/// Exact instantaneous rates recovered from an amplitude series.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRates {
    pub samples: Vec<RateSample>,
    /// Set when `|u|` underflowed and the window was cut short.
    pub truncated_at: Option<f64>,
}

impl ExtractedRates {
    /// Mean rates over the trailing part of the window starting at
    /// `from_fraction` of its length.
    pub fn long_time(&self, from_fraction: f64) -> RatePair {
        let t_end = self.samples.last().map_or(0.0, |s| s.t);
        let tail: Vec<_> = self.samples.iter().filter(|s| s.t >= from_fraction * t_end).collect();
        let n = tail.len().max(1) as f64;
        RatePair {
            delta: tail.iter().map(|s| s.delta).sum::<f64>() / n,
            gamma: tail.iter().map(|s| s.gamma).sum::<f64>() / n,
        }
    }

    /// Linear-in-time schedule over the extracted window (no frozen tail).
    pub fn to_schedule(&self) -> Result<RateSchedule> {
        RateSchedule::new(self.samples.clone(), None, None, Interpolation::Linear)
    }
}

/// Amplitudes below this are treated as underflow.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

/// `γ(t) = −Re(u̇/u)`, `Δ(t) = −Im(u̇/u)` with centred differences in the
/// interior and second-order one-sided differences at the ends.
pub fn extract_rates(u: &AmplitudeSeries) -> Result<ExtractedRates> {
    let n_total = u.values.len();
    if n_total < 3 {
        return Err(DrgError::Domain("need at least three amplitude samples".into()));
    }
    let cut = u.values.iter().position(|z| z.norm() <= AMPLITUDE_FLOOR);
    let n = cut.unwrap_or(n_total);
    if n < 3 {
        return Err(DrgError::Domain("amplitude underflows before three samples".into()));
    }
    let h = u.dt;
    let v = &u.values[..n];
    let samples = (0..n)
        .map(|i| {
            let deriv = if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            };
            let rate = -deriv / v[i];
            RateSample { t: u.time(i), delta: rate.im, gamma: rate.re }
        })
        .collect();
    Ok(ExtractedRates { samples, truncated_at: cut.map(|c| u.time(c)) })
}

/// `K(Δ₀) = ∫₀^∞ μ(τ) e^{iΔ₀τ} dτ`, evaluated along the ray `τ = r e^{iπ/4}`.
///
/// The kernel's only singularity sits at `τ = i/ω_c`, so rotating into the
/// first quadrant turns the oscillatory, slowly decaying integrand into an
/// exponentially decaying one and sidesteps the principal-value structure.
pub fn markov_transform(p: &SpectralParams, delta0: f64) -> Result<Complex64> {
    memory_kernel(0.0, p)?;
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(DrgError::Domain(format!("delta0 must be > 0, got {delta0}")));
    }
    let coarse = ray_integral(p, delta0, 24);
    let fine = ray_integral(p, delta0, 40);
    let scale = 2.0 * p.alpha * p.omega_c;
    let diff = (coarse - fine).norm();
    if !(diff <= 1e-12 * scale.max(f64::MIN_POSITIVE)) || !fine.re.is_finite() || !fine.im.is_finite() {
        return Err(DrgError::Quadrature(format!(
            "ray integral unresolved: |K24 - K40| = {diff:e} (K = {fine})"
        )));
    }
    Ok(fine)
}

fn ray_integral(p: &SpectralParams, delta0: f64, degree: usize) -> Complex64 {
    if p.alpha == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let dir = Complex64::from_polar(1.0, FRAC_PI_4);
    let decay = delta0 * FRAC_PI_4.sin();
    let rule = GaussLegendre::new(NonZeroUsize::new(degree).unwrap());
    let integrand = |r: f64| {
        let tau = dir * r;
        let z = Complex64::new(1.0, 0.0) + Complex64::i() * p.omega_c * tau;
        let mu = 2.0 * p.alpha * p.omega_c * p.omega_c / (z * z);
        mu * (Complex64::i() * delta0 * tau).exp() * dir
    };
    let max_width = 2.0 / delta0;
    let (mut a, mut width) = (0.0, 0.25 / p.omega_c);
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let b = a + width;
        let re = rule.integrate(a, b, |r| integrand(r).re);
        let im = rule.integrate(a, b, |r| integrand(r).im);
        total += Complex64::new(re, im);
        a = b;
        // |integrand| ≤ 2α/r² · e^{−Δ₀ r sin(π/4)} beyond r ≫ 1/ω_c.
        let tail_bound = 2.0 * p.alpha / (a * a) * (-decay * a).exp() / decay;
        if a * p.omega_c > 10.0 && tail_bound < 1e-17 * 2.0 * p.alpha * p.omega_c {
            return total;
        }
        width = (2.0 * width).min(max_width);
    }
}

/// Constant Born–Markov rates: `γ = ½ Re K(Δ₀)`, `Δ = Δ₀ + ½ Im K(Δ₀)`.
pub fn born_markov_rates(p: &SpectralParams, delta0: f64) -> Result<RatePair> {
    let k = markov_transform(p, delta0)?;
    Ok(RatePair { delta: delta0 + 0.5 * k.im, gamma: 0.5 * k.re })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::spectral_density;
    use crate::bath::CutoffShape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exponential integral `Ei(x)` for small positive `x` via its power series.
    fn ei(x: f64) -> f64 {
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= x / k as f64;
            sum += term / k as f64;
        }
        EULER_GAMMA + x.ln() + sum
    }

    #[test]
    fn free_evolution_without_coupling() {
        let u = solve_volterra(&SpectralParams::ohmic(0.0), 0.3, 0.01, 50.0).unwrap();
        for (n, z) in u.values.iter().enumerate() {
            let exact = Complex64::from_polar(1.0, -0.3 * n as f64 * 0.01);
            assert!((z - exact).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_coarse_steps_and_unsupported_kernels() {
        let p = SpectralParams::ohmic(0.05);
        assert!(matches!(solve_volterra(&p, 0.1, 0.02, 1.0), Err(DrgError::Domain(_))));
        let sharp = p.with_cutoff(CutoffShape::Sharp);
        assert!(matches!(solve_volterra(&sharp, 0.1, 0.01, 1.0), Err(DrgError::Unsupported(_))));
    }

    #[test]
    fn amplitude_bounded_and_starts_at_one() {
        let u = solve_volterra(&SpectralParams::ohmic(0.05), 0.1, 0.01, 100.0).unwrap();
        assert_eq!(u.values[0], Complex64::new(1.0, 0.0));
        assert!(u.values.iter().all(|z| z.norm() <= 1.0 + 1e-9));
    }

    #[test]
    fn second_order_convergence() {
        let p = SpectralParams::ohmic(0.05);
        let runs: Vec<_> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dt| solve_volterra(&p, 0.1, dt, 20.0).unwrap())
            .collect();
        let sup = |a: &AmplitudeSeries, b: &AmplitudeSeries| {
            a.values
                .iter()
                .enumerate()
                .map(|(i, z)| (z - b.values[2 * i]).norm())
                .fold(0.0, f64::max)
        };
        let ratio = sup(&runs[0], &runs[1]) / sup(&runs[1], &runs[2]);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn rates_of_pure_exponential() {
        let (g0, d0, dt) = (0.02, 0.3, 0.01);
        let values = (0..2000)
            .map(|n| Complex64::new(-g0, -d0).scale(n as f64 * dt).exp())
            .collect();
        let u = AmplitudeSeries { dt, values, params: SpectralParams::ohmic(0.0), delta0: d0 };
        let rates = extract_rates(&u).unwrap();
        assert!(rates.truncated_at.is_none());
        for s in &rates.samples {
            // Centred differences: relative error ~ (|λ| dt)²/6.
            assert!((s.gamma - g0).abs() < 1e-5 * d0);
            assert!((s.delta - d0).abs() < 1e-5 * d0);
        }
    }

    #[test]
    fn extraction_error_is_second_order() {
        let err = |dt: f64| {
            let values = (0..=(10.0 / dt) as usize)
                .map(|n| Complex64::new(-0.05, -0.7).scale(n as f64 * dt).exp())
                .collect();
            let u = AmplitudeSeries { dt, values, params: SpectralParams::ohmic(0.0), delta0: 0.7 };
            let r = extract_rates(&u).unwrap();
            r.samples[1..r.samples.len() - 1]
                .iter()
                .map(|s| (s.delta - 0.7).abs().max((s.gamma - 0.05).abs()))
                .fold(0.0, f64::max)
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rates_without_coupling() {
        let u = solve_volterra(&SpectralParams::ohmic(0.0), 0.1, 0.01, 20.0).unwrap();
        let rates = extract_rates(&u).unwrap();
        for s in &rates.samples {
            assert!(s.gamma.abs() < 1e-9);
            assert!((s.delta - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn underflow_truncates_window() {
        let values = (0..100)
            .map(|n| Complex64::new((-(n as f64)).exp().powi(1) * 1e-8f64.powf(n as f64 / 10.0), 0.0))
            .collect();
        let u = AmplitudeSeries { dt: 0.01, values, params: SpectralParams::ohmic(0.0), delta0: 0.0 };
        let rates = extract_rates(&u).unwrap();
        let cut = rates.truncated_at.expect("window should be truncated");
        assert!(rates.samples.iter().all(|s| s.t < cut));
    }

    #[test]
    fn markov_transform_matches_spectral_representation() {
        // Re K = J(Δ₀); Im K = (1/π) P∫ J(ω)/(Δ₀ − ω) dω = 2α(−1 + Δ₀e^{−Δ₀}Ei(Δ₀)).
        for &(alpha, d0) in &[(0.05, 0.1), (0.01, 0.1), (0.2, 0.5), (0.1, 0.01)] {
            let p = SpectralParams::ohmic(alpha);
            let k = markov_transform(&p, d0).unwrap();
            assert_relative_eq!(k.re, spectral_density(d0, &p).unwrap(), max_relative = 1e-10);
            let im = 2.0 * alpha * (-1.0 + d0 * (-d0).exp() * ei(d0));
            assert_relative_eq!(k.im, im, max_relative = 1e-10);
        }
    }

    #[test]
    fn born_markov_limits() {
        let p = SpectralParams::ohmic(0.0);
        assert_eq!(born_markov_rates(&p, 0.1).unwrap(), RatePair { delta: 0.1, gamma: 0.0 });
        let g1 = born_markov_rates(&SpectralParams::ohmic(0.02), 0.1).unwrap().gamma;
        let g2 = born_markov_rates(&SpectralParams::ohmic(0.04), 0.1).unwrap().gamma;
        assert_relative_eq!(g2, 2.0 * g1, max_relative = 1e-12);
    }

    #[test]
    fn born_markov_is_the_weak_coupling_limit() {
        let (alpha, d0) = (1e-3, 0.1);
        let p = SpectralParams::ohmic(alpha);
        let bm = born_markov_rates(&p, d0).unwrap();
        let u = solve_volterra(&p, d0, 0.01, 300.0).unwrap();
        let exact = extract_rates(&u).unwrap().long_time(0.5);
        assert_relative_eq!(bm.gamma, exact.gamma, max_relative = 2e-2);
        assert_relative_eq!(bm.delta, exact.delta, max_relative = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn amplitude_never_exceeds_one(alpha in 0.0f64..0.2, d0 in 0.02f64..0.5) {
            let u = solve_volterra(&SpectralParams::ohmic(alpha), d0, 0.01, 30.0).unwrap();
            prop_assert!(u.values.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        }
    }
}
