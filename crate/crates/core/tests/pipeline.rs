//! Cross-module checks of the solver pipelines.

use drg::bath::{discretize_bath, SpectralParams};
use drg::dynamics::{evolve_bloch, evolve_se_lindblad, BlochState};
use drg::flow::{integrate_flow, to_time_schedule, FlowConfig, FlowModel, RateSchedule};
use drg::oracle::evolve_discrete_bath;
use drg::se_exact::{extract_rates, solve_volterra};

fn reconstruction_error(dt: f64) -> f64 {
    let u = solve_volterra(&SpectralParams::ohmic(0.05), 0.1, dt, 100.0).unwrap();
    let rates = extract_rates(&u).unwrap();
    let sched = rates.to_schedule().unwrap();
    let t_end = rates.samples.last().unwrap().t;
    let traj = evolve_se_lindblad(&sched, BlochState::excited(), t_end, 0.5).unwrap();
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        let n = (s.t / u.dt).round() as usize;
        if u.values[n].norm() > 1e-6 {
            let exact = 2.0 * u.values[n].norm_sqr() - 1.0;
            worst = worst.max((s.state.sz - exact).abs());
        }
    }
    worst
}

#[test]
fn lindblad_with_exact_rates_reconstructs_population() {
    // Linear interpolation of the extracted rate costs O(dt^2) in the integrated decay.
    let coarse = reconstruction_error(0.01);
    let fine = reconstruction_error(0.005);
    assert!(coarse < 1e-5, "coarse={coarse:e}");
    let ratio = coarse / fine;
    assert!((3.0..5.0).contains(&ratio), "coarse={coarse:e} fine={fine:e}");
}

#[test]
fn volterra_amplitude_decays_after_transient() {
    let u = solve_volterra(&SpectralParams::ohmic(0.05), 0.1, 0.01, 200.0).unwrap();
    let mags: Vec<f64> = u.values.iter().map(|z| z.norm()).collect();
    // Past a few bath correlation times the decay is monotone.
    assert!(mags[1000..].windows(2).all(|w| w[1] <= w[0]));
    let rates = extract_rates(&u).unwrap().long_time(0.5);
    assert!(rates.gamma > 0.0 && rates.gamma.is_finite());
}

#[test]
fn oracle_and_volterra_agree_without_coupling() {
    let p = SpectralParams::ohmic(0.0);
    let u = solve_volterra(&p, 0.1, 0.01, 50.0).unwrap();
    let bath = discretize_bath(&p, 200, 10.0).unwrap();
    let run = evolve_discrete_bath(&bath, 0.1, 0.01, 50.0).unwrap();
    for (a, b) in u.values.iter().zip(&run.amplitude.values) {
        assert!((a - b).norm() < 1e-11);
    }
}

#[test]
fn uncoupled_quench_is_an_undamped_cosine() {
    let cfg = FlowConfig::new(SpectralParams::ohmic(0.0), 0.01);
    let traj = integrate_flow(&cfg).unwrap();
    let sched = to_time_schedule(&traj, 1.0).unwrap();
    let bloch = evolve_bloch(&sched, BlochState::excited(), 3000.0, 10.0).unwrap();
    for s in &bloch.samples {
        // γ stays at the 1e-8 seed, so the envelope is e^{-γt/2} ≈ 1 − 1.5e-5.
        assert!((s.state.sz - (0.01 * s.t).cos()).abs() < 2e-5, "t={}", s.t);
    }
}

#[test]
fn se_flow_schedule_drives_lindblad_decay() {
    let cfg = FlowConfig::new(SpectralParams::ohmic(0.05), 0.1).with_model(FlowModel::SpontaneousEmission);
    let traj = integrate_flow(&cfg).unwrap();
    let sched = to_time_schedule(&traj, 1.0).unwrap();
    let out = evolve_se_lindblad(&sched, BlochState::excited(), 3000.0, 10.0).unwrap();
    assert!(out.samples.windows(2).all(|w| w[1].state.sz <= w[0].state.sz + 1e-12));
    let g = traj.gamma_inf();
    let frozen = RateSchedule::constant(traj.delta_inf(), g);
    let tail = evolve_se_lindblad(&frozen, BlochState::excited(), 100.0, 1.0).unwrap();
    assert!((tail.last().state.sz - (-1.0 + 2.0 * (-2.0 * g * 100.0).exp())).abs() < 1e-8);
}
