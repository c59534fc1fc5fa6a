//! Renormalization-group flow of the two-level-system frequency `Δ` and decay
//! rate `γ` as bath modes above the running cutoff `Λ` are averaged out.
//!
//! Mode-removal convention: lowering the cutoff by `|dΛ|` updates every flowing
//! parameter as `P ← P + RHS_P·|dΛ|`, where `RHS_P` is what [`flow_rhs_sb`] and
//! [`flow_rhs_se`] return. Internally the flow is integrated in `x = −ln Λ`, so
//! `dP/dx = Λ·RHS_P`.

use std::f64::consts::PI;

use crate::bath::{bath_occupation, spectral_density_unchecked, CutoffShape, SpectralParams};
use crate::error::{DrgError, Result};
use crate::rk::{dopri_step, error_norm, step_factor, Tolerance};
use crate::se_exact::RatePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FlowModel {
    /// Full Ohmic spin-boson model.
    #[default]
    SpinBoson,
    /// Rotating-wave (spontaneous-emission) model.
    SpontaneousEmission,
}

impl FlowModel {
    pub fn name(&self) -> &'static str {
        match self {
            FlowModel::SpinBoson => "spin-boson",
            FlowModel::SpontaneousEmission => "spontaneous-emission",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl FlowState {
    pub fn new(lambda: f64, delta: f64, gamma: f64) -> Self {
        Self { lambda, delta, gamma }
    }

    fn check(&self) -> Result<()> {
        let finite = self.lambda.is_finite() && self.delta.is_finite() && self.gamma.is_finite();
        if !finite || self.lambda <= 0.0 || self.delta <= 0.0 || self.gamma < 0.0 {
            return Err(DrgError::Domain(format!("invalid flow state {self:?}")));
        }
        Ok(())
    }
}

/// Limits applied to every accepted flow step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Largest relative change of `Δ` or `γ` in one step.
    pub max_rel_change: f64,
    /// Largest relative change of `Λ` in one step.
    pub max_rel_lambda_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { max_rel_change: 1e-3, max_rel_lambda_step: 1e-3 }
    }
}

impl StepControl {
    pub fn halved(self) -> Self {
        Self {
            max_rel_change: 0.5 * self.max_rel_change,
            max_rel_lambda_step: 0.5 * self.max_rel_lambda_step,
        }
    }

    fn tolerance(&self) -> Tolerance {
        // The embedded error estimate is held far below the per-step limiter so
        // that the limiter, not truncation error, decides the step size.
        Tolerance { rtol: 1e-7 * self.max_rel_change, atol: 1e-300 }
    }
}

/// Relative size of the default decay-rate seed, `γ_seed = 1e−6·Δ₀`.
pub const DEFAULT_GAMMA_SEED_RATIO: f64 = 1e-6;
/// Default starting cutoff in units of `ω_c`.
pub const DEFAULT_LAMBDA_START: f64 = 10.0;
/// Default stopping cutoff as a fraction of `Δ₀`.
pub const DEFAULT_LAMBDA_MIN_RATIO: f64 = 1e-2;
/// Accepted steps after which the flow gives up (bounds time and memory).
pub const MAX_FLOW_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub params: SpectralParams,
    pub delta0: f64,
    pub gamma_seed: f64,
    pub lambda_start: f64,
    pub lambda_min: f64,
    pub eta: f64,
    pub model: FlowModel,
    pub step: StepControl,
}

impl FlowConfig {
    /// Spin-boson flow with every default derived from `delta0` and `ω_c`.
    pub fn new(params: SpectralParams, delta0: f64) -> Self {
        Self {
            params,
            delta0,
            gamma_seed: DEFAULT_GAMMA_SEED_RATIO * delta0,
            lambda_start: DEFAULT_LAMBDA_START * params.omega_c,
            lambda_min: DEFAULT_LAMBDA_MIN_RATIO * delta0,
            eta: 1.0,
            model: FlowModel::SpinBoson,
            step: StepControl::default(),
        }
    }

    pub fn with_model(mut self, model: FlowModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_gamma_seed(mut self, gamma_seed: f64) -> Self {
        self.gamma_seed = gamma_seed;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_step(mut self, step: StepControl) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.params.is_ohmic() {
            return Err(DrgError::Unsupported(format!(
                "flow equations are implemented for the Ohmic bath only (s = {})",
                self.params.s
            )));
        }
        if !(self.delta0.is_finite() && self.delta0 > 0.0) {
            return Err(DrgError::Config(format!("delta0 must be > 0, got {}", self.delta0)));
        }
        if !(self.gamma_seed.is_finite() && self.gamma_seed >= 0.0) {
            return Err(DrgError::Config(format!("gamma seed must be >= 0, got {}", self.gamma_seed)));
        }
        if !(self.lambda_min > 0.0 && self.lambda_start > self.lambda_min && self.lambda_start.is_finite()) {
            return Err(DrgError::Config(format!(
                "need lambda_start > lambda_min > 0, got {} and {}",
                self.lambda_start, self.lambda_min
            )));
        }
        check_eta(self.eta)?;
        let s = self.step;
        let ok = |v: f64| v.is_finite() && v > 0.0 && v < 1.0;
        if !ok(s.max_rel_change) || !ok(s.max_rel_lambda_step) {
            return Err(DrgError::Config(format!("step controls must lie in (0, 1): {s:?}")));
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(DrgError::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn check_flow_support(p: &SpectralParams) -> Result<()> {
    if !p.is_ohmic() {
        return Err(DrgError::Unsupported(format!(
            "flow equations are implemented for s = 1 only (got s = {})",
            p.s
        )));
    }
    Ok(())
}

fn singular(state: &FlowState) -> DrgError {
    DrgError::SingularFlow { lambda: state.lambda, delta: state.delta, gamma: state.gamma }
}

/// Per-unit-bandwidth increments `(dΔ, dγ)` of the spin-boson flow at `state`,
/// including the thermal factor `2n_b(Λ) + 1`.
pub fn flow_rhs_sb(state: &FlowState, p: &SpectralParams) -> Result<(f64, f64)> {
    state.check()?;
    check_flow_support(p)?;
    rhs_sb(state, p)
}

#[inline]
fn rhs_sb(state: &FlowState, p: &SpectralParams) -> Result<(f64, f64)> {
    let FlowState { lambda, delta, gamma } = *state;
    let j = spectral_density_unchecked(lambda, p);
    if j == 0.0 {
        return Ok((0.0, 0.0));
    }
    let thermal = if p.temperature > 0.0 {
        2.0 * bath_occupation(lambda, p.temperature)? + 1.0
    } else {
        1.0
    };
    let detuning = delta * delta - lambda * lambda;
    let den = detuning * detuning + gamma * gamma * lambda * lambda;
    if den == 0.0 {
        return Err(singular(state));
    }
    let weight = j * thermal / den;
    let d_delta = delta / (2.0 * PI) * weight * detuning;
    let d_gamma = delta * delta / PI * weight * gamma;
    if !(d_delta.is_finite() && d_gamma.is_finite()) {
        return Err(singular(state));
    }
    Ok((d_delta, d_gamma))
}

/// Per-unit-bandwidth increments `(dΔ, dγ)` of the spontaneous-emission flow.
pub fn flow_rhs_se(state: &FlowState, p: &SpectralParams) -> Result<(f64, f64)> {
    state.check()?;
    check_flow_support(p)?;
    rhs_se(state, p)
}

#[inline]
fn rhs_se(state: &FlowState, p: &SpectralParams) -> Result<(f64, f64)> {
    let FlowState { lambda, delta, gamma } = *state;
    let j = spectral_density_unchecked(lambda, p);
    if j == 0.0 {
        return Ok((0.0, 0.0));
    }
    let detuning = delta - lambda;
    let den = detuning * detuning + gamma * gamma;
    if den == 0.0 {
        return Err(singular(state));
    }
    let weight = j / (4.0 * PI * den);
    let (d_delta, d_gamma) = (weight * detuning, weight * gamma);
    if !(d_delta.is_finite() && d_gamma.is_finite()) {
        return Err(singular(state));
    }
    Ok((d_delta, d_gamma))
}

/// Flow record ordered by strictly decreasing `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub samples: Vec<FlowState>,
    pub config: FlowConfig,
}

impl FlowTrajectory {
    pub fn first(&self) -> &FlowState {
        &self.samples[0]
    }

    pub fn last(&self) -> &FlowState {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn delta_inf(&self) -> f64 {
        self.last().delta
    }

    pub fn gamma_inf(&self) -> f64 {
        self.last().gamma
    }

    pub fn terminal(&self) -> RatePair {
        RatePair { delta: self.delta_inf(), gamma: self.gamma_inf() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// State at cutoff `lambda`: `Δ` linear in `ln Λ`, `γ` linear in
    /// `(ln Λ, ln γ)` when both neighbours are positive.
    pub fn interpolate(&self, lambda: f64) -> Result<FlowState> {
        let (hi, lo) = (self.first().lambda, self.last().lambda);
        if !(lambda <= hi && lambda >= lo) {
            return Err(DrgError::Domain(format!(
                "lambda={lambda:e} outside trajectory range [{lo:e}, {hi:e}]"
            )));
        }
        // First index whose Λ is <= the query.
        let idx = self.samples.partition_point(|s| s.lambda > lambda);
        if idx == 0 {
            return Ok(self.samples[0]);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        if b.lambda == lambda {
            return Ok(*b);
        }
        let w = (lambda.ln() - a.lambda.ln()) / (b.lambda.ln() - a.lambda.ln());
        Ok(FlowState {
            lambda,
            delta: lerp(a.delta, b.delta, w),
            gamma: interp_rate(a.gamma, b.gamma, w),
        })
    }
}

#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

#[inline]
fn interp_rate(a: f64, b: f64, w: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a.ln() + (b.ln() - a.ln()) * w).exp()
    } else {
        lerp(a, b, w)
    }
}

/// Integrates the flow from `lambda_start` down to `lambda_min`.
pub fn integrate_flow(cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let p = cfg.params;
    let model = cfg.model;
    let control = cfg.step;
    let tol = control.tolerance();

    let mut rhs = move |x: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let lambda = (-x).exp();
        let state = FlowState { lambda, delta: y[0], gamma: y[1] };
        let (dd, dg) = match model {
            FlowModel::SpinBoson => rhs_sb(&state, &p)?,
            FlowModel::SpontaneousEmission => rhs_se(&state, &p)?,
        };
        Ok([lambda * dd, lambda * dg])
    };

    let x_end = -cfg.lambda_min.ln();
    let mut x = -cfg.lambda_start.ln();
    // Sharp cutoffs make J discontinuous at ω_c; land a step exactly there.
    let breakpoint = match p.cutoff_shape {
        CutoffShape::Sharp => Some(-p.omega_c.ln()).filter(|&b| b > x && b < x_end),
        CutoffShape::Exponential => None,
    };

    let mut y = [cfg.delta0, cfg.gamma_seed];
    let mut samples = vec![FlowState { lambda: cfg.lambda_start, delta: y[0], gamma: y[1] }];
    let mut k1 = rhs(x, &y)?;
    let h_max = control.max_rel_lambda_step;
    let mut h = h_max;
    let h_min = 1e-14;
    let delta_floor = 1e-3 * cfg.delta0;

    while x < x_end {
        let target = match breakpoint {
            Some(b) if x < b => b,
            _ => x_end,
        };
        let mut step_h = h.min(h_max);
        let clipped = step_h >= target - x;
        if clipped {
            step_h = target - x;
        }
        let step = dopri_step(&mut rhs, x, &y, &k1, step_h)?;
        let err = error_norm(&y, &step.y, &step.err, tol);
        let change = relative_change(&y, &step.y, delta_floor);
        // The emission shift may push Δ through zero; the spin-boson gap may not.
        let delta_ok = model == FlowModel::SpontaneousEmission || step.y[0] > 0.0;
        let admissible = delta_ok && step.y[1] >= 0.0 && step.y.iter().all(|v| v.is_finite());

        if admissible && err <= 1.0 && change <= control.max_rel_change {
            x = if clipped { target } else { x + step_h };
            y = step.y;
            // At a cutoff discontinuity the stage derivative is one-sided.
            k1 = if clipped && Some(target) == breakpoint { rhs(x, &y)? } else { step.k_end };
            samples.push(FlowState { lambda: (-x).exp(), delta: y[0], gamma: y[1] });
            if samples.len() > MAX_FLOW_STEPS {
                return Err(DrgError::StepLimit { lambda: (-x).exp(), steps: MAX_FLOW_STEPS });
            }
            if !clipped {
                let grow = step_factor(err).min(if change > 0.0 {
                    0.9 * control.max_rel_change / change
                } else {
                    5.0
                });
                h = (step_h * grow.max(1.0)).min(h_max);
            }
        } else {
            let mut shrink = if admissible { step_factor(err.max(1.0)).min(0.9) } else { 0.25 };
            if admissible && change > control.max_rel_change {
                shrink = shrink.min(0.9 * control.max_rel_change / change);
            }
            h = step_h * shrink.max(0.05);
            if h < h_min {
                return Err(DrgError::StepUnderflow { lambda: (-x).exp(), step: h });
            }
        }
    }
    Ok(FlowTrajectory { samples, config: *cfg })
}

/// Largest relative change of (Δ, γ); Δ is measured against `delta_floor`
/// when it passes near zero.
fn relative_change(old: &[f64; 2], new: &[f64; 2], delta_floor: f64) -> f64 {
    let d = (new[0] - old[0]).abs() / old[0].abs().max(delta_floor);
    let g = if old[1] > 0.0 {
        ((new[1] - old[1]) / old[1]).abs()
    } else if new[1] != 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    d.max(g)
}

/// Emergent low-energy scale `T_K = Δ₀ (Δ₀/ω_c)^{α/(1−α)}`.
pub fn kondo_scale(alpha: f64, delta0: f64, omega_c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(DrgError::Domain(format!("kondo scale needs 0 <= alpha < 1, got {alpha}")));
    }
    if !(delta0 > 0.0 && omega_c > 0.0) {
        return Err(DrgError::Domain("delta0 and omega_c must be positive".into()));
    }
    Ok(delta0 * (delta0 / omega_c).powf(alpha / (1.0 - alpha)))
}

/// Cutoff `Λ*` of the first crossing `Δ(Λ*) = Λ*` along the flow.
pub fn fixed_point_scale(traj: &FlowTrajectory) -> Result<f64> {
    let gap = |s: &FlowState| s.delta - s.lambda;
    let first = gap(traj.first());
    if first == 0.0 {
        return Ok(traj.first().lambda);
    }
    let idx = traj
        .samples
        .windows(2)
        .position(|w| gap(&w[1]) == 0.0 || gap(&w[1]).signum() != first.signum())
        .ok_or_else(|| {
            DrgError::NotFound(format!(
                "no crossing delta = lambda for lambda in [{:e}, {:e}]",
                traj.last().lambda,
                traj.first().lambda
            ))
        })?;
    let (a, b) = (traj.samples[idx], traj.samples[idx + 1]);
    if gap(&b) == 0.0 {
        return Ok(b.lambda);
    }
    let mut hi = a.lambda.ln();
    let mut lo = b.lambda.ln();
    let sign_hi = gap(&a).signum();
    for _ in 0..200 {
        let mid = 0.5 * (hi + lo);
        if mid == hi || mid == lo {
            break;
        }
        let s = traj.interpolate(mid.exp())?;
        if gap(&s).signum() == sign_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (hi + lo)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Linear in `ln t` (equivalently `ln Λ`); `γ` log-linear where positive.
    LogTime,
    /// Linear in `t` for both rates.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub t: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// Time-dependent `(Δ(t), γ(t))` consumed by the dynamics solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    samples: Vec<RateSample>,
    head: Option<RatePair>,
    tail: Option<RatePair>,
    interpolation: Interpolation,
}

impl RateSchedule {
    /// `head` applies for `t` before the first sample, `tail` after the last;
    /// either may be absent, in which case queries there are schedule gaps.
    pub fn new(
        samples: Vec<RateSample>,
        head: Option<RatePair>,
        tail: Option<RatePair>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(DrgError::Config("rate schedule needs at least one sample".into()));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(DrgError::Config("rate schedule times must increase strictly".into()));
        }
        let finite = |d: f64, g: f64| d.is_finite() && g.is_finite();
        if samples.iter().any(|s| !finite(s.delta, s.gamma) || s.t < 0.0 || !s.t.is_finite()) {
            return Err(DrgError::Config("rate schedule contains non-finite values".into()));
        }
        if interpolation == Interpolation::LogTime && samples[0].t <= 0.0 {
            return Err(DrgError::Config("log-time interpolation needs t > 0".into()));
        }
        Ok(Self { samples, head, tail, interpolation })
    }

    /// Constant rates for all `t ≥ 0`.
    pub fn constant(delta: f64, gamma: f64) -> Self {
        let pair = RatePair { delta, gamma };
        Self {
            samples: vec![RateSample { t: 0.0, delta, gamma }],
            head: None,
            tail: Some(pair),
            interpolation: Interpolation::Linear,
        }
    }

    pub fn samples(&self) -> &[RateSample] {
        &self.samples
    }

    pub fn head(&self) -> Option<RatePair> {
        self.head
    }

    pub fn tail(&self) -> Option<RatePair> {
        self.tail
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Latest time with defined rates (`+∞` with a frozen tail).
    pub fn covered_until(&self) -> f64 {
        if self.tail.is_some() {
            f64::INFINITY
        } else {
            self.samples.last().map_or(0.0, |s| s.t)
        }
    }

    pub fn covers(&self, t_max: f64) -> Result<()> {
        let first = self.samples[0].t;
        if first > 0.0 && self.head.is_none() {
            return Err(DrgError::ScheduleGap { t: 0.0, covered: first });
        }
        if t_max > self.covered_until() {
            return Err(DrgError::ScheduleGap { t: t_max, covered: self.covered_until() });
        }
        Ok(())
    }

    /// Sample times strictly inside `(t0, t1)`; the rates are smooth between them.
    pub fn knots_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        let start = self.samples.partition_point(|s| s.t <= t0);
        self.samples[start..].iter().map(|s| s.t).take_while(move |&t| t < t1)
    }

    pub fn rates_at(&self, t: f64) -> Result<RatePair> {
        let first = &self.samples[0];
        if t < first.t {
            return self.head.ok_or(DrgError::ScheduleGap { t, covered: first.t });
        }
        let last = self.samples.last().unwrap();
        if t >= last.t {
            if t == last.t {
                return Ok(RatePair { delta: last.delta, gamma: last.gamma });
            }
            return self.tail.ok_or(DrgError::ScheduleGap { t, covered: last.t });
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        Ok(match self.interpolation {
            Interpolation::Linear => {
                let w = (t - a.t) / (b.t - a.t);
                RatePair { delta: lerp(a.delta, b.delta, w), gamma: lerp(a.gamma, b.gamma, w) }
            }
            Interpolation::LogTime => {
                let w = (t.ln() - a.t.ln()) / (b.t.ln() - a.t.ln());
                RatePair { delta: lerp(a.delta, b.delta, w), gamma: interp_rate(a.gamma, b.gamma, w) }
            }
        })
    }
}

/// Maps the flow onto real time with `t = η/Λ`.
///
/// Before `η/lambda_start` the bare values `(Δ₀, γ_seed)` apply; after
/// `η/lambda_min` the terminal values are frozen.
pub fn to_time_schedule(traj: &FlowTrajectory, eta: f64) -> Result<RateSchedule> {
    check_eta(eta)?;
    let samples = traj
        .samples
        .iter()
        .map(|s| RateSample { t: eta / s.lambda, delta: s.delta, gamma: s.gamma })
        .collect();
    let head = RatePair { delta: traj.config.delta0, gamma: traj.config.gamma_seed };
    RateSchedule::new(samples, Some(head), Some(traj.terminal()), Interpolation::LogTime)
}
