//! Time-local equations of motion driven by a [`RateSchedule`], and
//! long-time characterization of the resulting trajectories.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};

use crate::error::{DrgError, Result};
use crate::flow::RateSchedule;
use crate::rk::{integrate_to, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochState {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Self { sx, sy, sz }
    }

    /// Initially excited TLS, `(0, 0, 1)`.
    pub fn excited() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (-1.0..=1.0).contains(&v);
        if ok(self.sx) && ok(self.sy) && ok(self.sz) {
            Ok(())
        } else {
            Err(DrgError::Domain(format!("initial Bloch components must lie in [-1, 1]: {self:?}")))
        }
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Sx => self.sx,
            Component::Sy => self.sy,
            Component::Sz => self.sz,
        }
    }
}

impl Default for BlochState {
    fn default() -> Self {
        Self::excited()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Sx,
    Sy,
    Sz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSample {
    pub t: f64,
    pub state: BlochState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub samples: Vec<BlochSample>,
    pub schedule: RateSchedule,
    pub tolerance: Tolerance,
}

impl BlochTrajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn last(&self) -> &BlochSample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn t_max(&self) -> f64 {
        self.last().t
    }
}

/// Local tolerance used unless the caller asks otherwise.
pub const DEFAULT_TOLERANCE: Tolerance = Tolerance { rtol: 1e-9, atol: 1e-12 };

/// Spin-boson equations of motion
/// `ṡx = −γ(sx − 1)`, `ṡy = Δsz − γsy`, `ṡz = −Δsy`.
pub fn evolve_bloch(schedule: &RateSchedule, init: BlochState, t_max: f64, dt_out: f64) -> Result<BlochTrajectory> {
    evolve_bloch_with_tolerance(schedule, init, t_max, dt_out, DEFAULT_TOLERANCE)
}

pub fn evolve_bloch_with_tolerance(
    schedule: &RateSchedule,
    init: BlochState,
    t_max: f64,
    dt_out: f64,
    tol: Tolerance,
) -> Result<BlochTrajectory> {
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let r = schedule.rates_at(t)?;
        Ok([-r.gamma * (y[0] - 1.0), r.delta * y[2] - r.gamma * y[1], -r.delta * y[1]])
    };
    let y0 = [init.sx, init.sy, init.sz];
    let samples = evolve(schedule, init, y0, t_max, dt_out, tol, rhs, |y| BlochState::new(y[0], y[1], y[2]))?;
    Ok(BlochTrajectory { samples, schedule: schedule.clone(), tolerance: tol })
}

/// Spontaneous-emission Lindblad equations
/// `∂σ₊ = (iΔ − γ)σ₊`, `∂sz = −2γ(sz + 1)`, with `σ₊ = (sx + i sy)/2`.
pub fn evolve_se_lindblad(schedule: &RateSchedule, init: BlochState, t_max: f64, dt_out: f64) -> Result<BlochTrajectory> {
    evolve_se_lindblad_with_tolerance(schedule, init, t_max, dt_out, DEFAULT_TOLERANCE)
}

pub fn evolve_se_lindblad_with_tolerance(
    schedule: &RateSchedule,
    init: BlochState,
    t_max: f64,
    dt_out: f64,
    tol: Tolerance,
) -> Result<BlochTrajectory> {
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let r = schedule.rates_at(t)?;
        Ok([
            -r.delta * y[1] - r.gamma * y[0],
            r.delta * y[0] - r.gamma * y[1],
            -2.0 * r.gamma * (y[2] + 1.0),
        ])
    };
    let y0 = [0.5 * init.sx, 0.5 * init.sy, init.sz];
    let samples = evolve(schedule, init, y0, t_max, dt_out, tol, rhs, |y| {
        BlochState::new(2.0 * y[0], 2.0 * y[1], y[2])
    })?;
    Ok(BlochTrajectory { samples, schedule: schedule.clone(), tolerance: tol })
}

/// Output grid `0, dt_out, 2dt_out, …` closed by `t_max`.
fn output_times(t_max: f64, dt_out: f64) -> Vec<f64> {
    let n = (t_max / dt_out * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt_out).collect();
    if t_max - times[n] > 1e-9 * dt_out {
        times.push(t_max);
    } else {
        times[n] = t_max;
    }
    times
}

#[allow(clippy::too_many_arguments)]
fn evolve<F, M>(
    schedule: &RateSchedule,
    init: BlochState,
    y0: [f64; 3],
    t_max: f64,
    dt_out: f64,
    tol: Tolerance,
    mut rhs: F,
    map: M,
) -> Result<Vec<BlochSample>>
where
    F: FnMut(f64, &[f64; 3]) -> Result<[f64; 3]>,
    M: Fn(&[f64; 3]) -> BlochState,
{
    init.validate()?;
    if !(t_max > 0.0 && t_max.is_finite() && dt_out > 0.0) {
        return Err(DrgError::Domain(format!("need t_max > 0 and dt_out > 0 (t_max={t_max}, dt_out={dt_out})")));
    }
    schedule.covers(t_max)?;
    let outputs = output_times(t_max, dt_out);
    let mut samples = Vec::with_capacity(outputs.len());
    samples.push(BlochSample { t: 0.0, state: init });

    // Integrate piecewise between schedule knots so the stepper never straddles
    // a kink of the interpolated rates.
    let mut y = y0;
    let mut t = 0.0;
    let mut h = dt_out.min(t_max);
    for &t_out in &outputs[1..] {
        let knots: Vec<f64> = schedule.knots_between(t, t_out).collect();
        for stop in knots.into_iter().chain(std::iter::once(t_out)) {
            y = integrate_to(&mut rhs, t, y, stop, &mut h, tol)?;
            t = stop;
        }
        samples.push(BlochSample { t: t_out, state: map(&y) });
    }
    Ok(samples)
}

/// `Δ/γ`.
pub fn quality_factor(delta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(DrgError::Domain(format!("quality factor needs gamma > 0, got {gamma}")));
    }
    Ok(delta / gamma)
}

/// Result of fitting `A e^{−γt/2} cos(Δt + φ)` (or `A e^{−γt/2}` when
/// overdamped) to a trajectory component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedCosineFit {
    pub amplitude: f64,
    /// Observed angular frequency; zero when overdamped.
    pub frequency: f64,
    pub rate: f64,
    pub phase: f64,
    /// Root-mean-square residual over the fitted samples.
    pub residual_norm: f64,
    pub overdamped: bool,
    /// Fitted time window.
    pub window: (f64, f64),
}

/// Fraction of the span, counted from the end, fitted by default.
pub const DEFAULT_FIT_FRACTION: f64 = 0.6;

/// Samples whose magnitude falls below this fraction of the window maximum
/// at the end of the window are dropped as integrator noise.
const FIT_NOISE_FLOOR: f64 = 1e-8;
const MIN_PERIODS: f64 = 3.0;

/// Fits a damped cosine to one component over `window` (default: the last
/// 60% of the trajectory).
///
/// For `Sx`, which relaxes towards 1, the fitted signal is `1 − sx`.
pub fn fit_damped_cosine(
    traj: &BlochTrajectory,
    component: Component,
    window: Option<(f64, f64)>,
) -> Result<DampedCosineFit> {
    let t_end = traj.t_max();
    let (t0, t1) = window.unwrap_or(((1.0 - DEFAULT_FIT_FRACTION) * t_end, t_end));
    if !(t1 > t0) {
        return Err(DrgError::Domain(format!("empty fit window [{t0}, {t1}]")));
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| {
            let v = s.state.component(component);
            (s.t, if component == Component::Sx { 1.0 - v } else { v })
        })
        .unzip();
    fit_samples(&ts, &ys)
}

/// Core of [`fit_damped_cosine`] on raw samples.
pub fn fit_samples(ts: &[f64], ys: &[f64]) -> Result<DampedCosineFit> {
    if ts.len() != ys.len() || ts.len() < 8 {
        return Err(DrgError::Fit { reason: "need at least 8 samples".into(), residual_norm: f64::NAN });
    }
    let peak = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if peak == 0.0 {
        return Err(DrgError::Fit { reason: "signal vanishes identically".into(), residual_norm: 0.0 });
    }
    let keep = ys.iter().rposition(|y| y.abs() >= FIT_NOISE_FLOOR * peak).unwrap_or(0) + 1;
    let (ts, ys) = (&ts[..keep], &ys[..keep]);
    if ts.len() < 8 {
        return Err(DrgError::Fit { reason: "signal decays into noise too early".into(), residual_norm: f64::NAN });
    }
    let origin = ts[0];
    let shifted: Vec<f64> = ts.iter().map(|t| t - origin).collect();

    let crossings = zero_crossings(&shifted, ys);
    let (model, guess) = if crossings.len() < 2 {
        (Model::Exponential, exponential_guess(&shifted, ys)?)
    } else {
        let spacing = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let frequency = std::f64::consts::PI / spacing;
        let periods = frequency * shifted[shifted.len() - 1] / std::f64::consts::TAU;
        if periods < MIN_PERIODS {
            return Err(DrgError::Fit {
                reason: format!("window holds {periods:.2} oscillation periods, need {MIN_PERIODS}"),
                residual_norm: f64::NAN,
            });
        }
        (Model::Cosine, cosine_guess(&shifted, ys, frequency))
    };

    let problem = FitProblem { t: shifted, y: ys.to_vec(), model, p: guess.clone(), scale: peak };
    let (problem, report) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
    let residual_norm = problem
        .residuals()
        .map(|r| (r.norm_squared() / r.len() as f64).sqrt() * peak)
        .unwrap_or(f64::NAN);
    if !report.termination.was_successful() || !residual_norm.is_finite() {
        return Err(DrgError::Fit { reason: format!("{:?}", report.termination), residual_norm });
    }
    let p = &problem.p;
    // Parameters refer to the window start; move them back to t = 0.
    let (amp, rate) = (p[0] * peak, p[1]);
    if rate < 0.0 {
        return Err(DrgError::Fit { reason: format!("negative decay rate {rate}"), residual_norm });
    }
    let amplitude = amp * (0.5 * rate * origin).exp();
    let window = (ts[0], ts[ts.len() - 1]);
    Ok(match model {
        Model::Exponential => DampedCosineFit {
            amplitude,
            frequency: 0.0,
            rate,
            phase: 0.0,
            residual_norm,
            overdamped: true,
            window,
        },
        Model::Cosine => {
            let (mut amplitude, mut frequency, mut phase) = (amplitude, p[2], p[3] - p[2] * origin);
            if frequency < 0.0 {
                frequency = -frequency;
                phase = -phase;
            }
            if amplitude < 0.0 {
                amplitude = -amplitude;
                phase += std::f64::consts::PI;
            }
            DampedCosineFit {
                amplitude,
                frequency,
                rate,
                phase: wrap_phase(phase),
                residual_norm,
                overdamped: false,
                window,
            }
        }
    })
}

fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = phase.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Linearly interpolated sign changes.
fn zero_crossings(t: &[f64], y: &[f64]) -> Vec<f64> {
    (1..t.len())
        .filter(|&i| y[i - 1] != 0.0 && y[i - 1].signum() != y[i].signum())
        .map(|i| t[i - 1] + (t[i] - t[i - 1]) * y[i - 1] / (y[i - 1] - y[i]))
        .collect()
}

/// Log-linear regression of `|y|` against `t`; parameters `[A/peak, γ]`.
fn exponential_guess(t: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| v.abs() > 0.0).map(|(&t, &v)| (t, (v.abs() / peak).ln())).collect();
    let (slope, intercept) = linear_regression(&pts).ok_or_else(|| DrgError::Fit {
        reason: "degenerate exponential guess".into(),
        residual_norm: f64::NAN,
    })?;
    Ok(vec![y[0].signum() * intercept.exp(), (-2.0 * slope).max(0.0)])
}

/// Frequency from zero crossings, decay from the envelope of local extrema,
/// amplitude and phase from linear least squares; parameters `[A/peak, γ, Δ, φ]`.
fn cosine_guess(t: &[f64], y: &[f64], frequency: f64) -> Vec<f64> {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let extrema: Vec<(f64, f64)> = (1..y.len() - 1)
        .filter(|&i| y[i].abs() >= y[i - 1].abs() && y[i].abs() > y[i + 1].abs() && y[i] != 0.0)
        .map(|i| (t[i], (y[i].abs() / peak).ln()))
        .collect();
    let rate = linear_regression(&extrema).map_or(0.0, |(slope, _)| (-2.0 * slope).max(0.0));
    // y ≈ e^{−γt/2}(a cos Δt + b sin Δt)
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-0.5 * rate * ti).exp();
        let (c, s) = ((frequency * ti).cos() * e, (frequency * ti).sin() * e);
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += yi / peak * c;
        sys += yi / peak * s;
    }
    let det = scc * sss - scs * scs;
    let (a, b) = if det.abs() > 0.0 {
        ((syc * sss - sys * scs) / det, (sys * scc - syc * scs) / det)
    } else {
        (1.0, 0.0)
    };
    vec![a.hypot(b), rate, frequency, (-b).atan2(a)]
}

fn linear_regression(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| (sxy / sxx, my - sxy / sxx * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Exponential,
    Cosine,
}

/// Residuals are normalized by the window peak.
struct FitProblem {
    t: Vec<f64>,
    y: Vec<f64>,
    model: Model,
    p: Vec<f64>,
    scale: f64,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for FitProblem {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p = x.iter().copied().collect();
    }

    fn params(&self) -> DVector<f64> {
        DVector::from_vec(self.p.clone())
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = &self.p;
        Some(DVector::from_iterator(
            self.t.len(),
            self.t.iter().zip(&self.y).map(|(&t, &y)| {
                let env = p[0] * (-0.5 * p[1] * t).exp();
                let model = match self.model {
                    Model::Exponential => env,
                    Model::Cosine => env * (p[2] * t + p[3]).cos(),
                };
                model - y / self.scale
            }),
        ))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let p = &self.p;
        let cols = self.p.len();
        let mut jac = DMatrix::zeros(self.t.len(), cols);
        for (i, &t) in self.t.iter().enumerate() {
            let e = (-0.5 * p[1] * t).exp();
            match self.model {
                Model::Exponential => {
                    jac[(i, 0)] = e;
                    jac[(i, 1)] = -0.5 * t * p[0] * e;
                }
                Model::Cosine => {
                    let (s, c) = (p[2] * t + p[3]).sin_cos();
                    jac[(i, 0)] = e * c;
                    jac[(i, 1)] = -0.5 * t * p[0] * e * c;
                    jac[(i, 2)] = -t * p[0] * e * s;
                    jac[(i, 3)] = -p[0] * e * s;
                }
            }
        }
        Some(jac)
    }
}
