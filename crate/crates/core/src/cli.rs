//! Command-line front end. Every command renders a CSV document whose `#`
//! comment block records the resolved configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bath::{discretize_bath, CutoffShape, SpectralParams};
use crate::dynamics::{evolve_bloch, evolve_se_lindblad, BlochState};
use crate::error::DrgError;
use crate::flow::{integrate_flow, to_time_schedule, FlowConfig, FlowModel, FlowTrajectory, RateSchedule};
use crate::oracle::evolve_discrete_bath;
use crate::reference::{drg_vs_niba_report, niba_parameters};
use crate::se_exact::{born_markov_rates, extract_rates, solve_volterra};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Couplings above this are refused unless `--force` is given.
pub const ALPHA_GUARD: f64 = 0.5;

/// Default number of output rows for quench runs without `--dt-out`.
const DEFAULT_QUENCH_ROWS: f64 = 20_000.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] DrgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} sweep points failed")]
    PartialFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "drg", version, about = "Dynamical renormalization group for the Ohmic spin-boson model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow of (delta, gamma) as the cutoff is lowered.
    Flow(FlowArgs),
    /// Quench dynamics: flow, time map, Bloch equations.
    Quench(QuenchArgs),
    /// Spontaneous-emission comparison: exact, DRG, Born-Markov (and oracle).
    Se(SeArgs),
    /// Sweep the coupling and report long-time values.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cutoff {
    Exp,
    Sharp,
}

impl From<Cutoff> for CutoffShape {
    fn from(c: Cutoff) -> Self {
        match c {
            Cutoff::Exp => CutoffShape::Exponential,
            Cutoff::Sharp => CutoffShape::Sharp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Sb,
    Se,
}

/// Bath and flow settings shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct BathArgs {
    /// Bare tunnelling frequency in units of omega_c.
    #[arg(long, default_value_t = 0.01)]
    pub delta0: f64,
    /// Time map parameter in t = eta / Lambda.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Initial decay rate [default: 1e-6 * delta0].
    #[arg(long)]
    pub gamma_seed: Option<f64>,
    #[arg(long, value_enum, default_value_t = Cutoff::Exp)]
    pub cutoff: Cutoff,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_start: f64,
    /// Lowest cutoff of the flow [default: delta0 / 100].
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Allow alpha > 0.5, outside the regime the method targets.
    #[arg(long)]
    pub force: bool,
    /// Output file (standard output if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub bath: BathArgs,
}

#[derive(Debug, Clone, Args)]
pub struct QuenchArgs {
    #[arg(long)]
    pub alpha: f64,
    /// End time [default: end of the flow plus 12 terminal decay times].
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Output spacing [default: tmax / 20000].
    #[arg(long)]
    pub dt_out: Option<f64>,
    /// Comma-separated eta values; writes one file per value next to --output.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eta_list: Option<Vec<f64>>,
    #[command(flatten)]
    pub bath: BathArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SeArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200.0)]
    pub tmax: f64,
    /// Volterra time step (at most 0.01 / omega_c).
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Output spacing, rounded to a multiple of --dt.
    #[arg(long, default_value_t = 0.5)]
    pub dt_out: f64,
    /// Add the discretized-bath column.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 2000)]
    pub n_modes: usize,
    #[arg(long, default_value_t = 10.0)]
    pub omega_max: f64,
    #[command(flatten)]
    pub bath: BathArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepMode::Sb)]
    pub mode: SweepMode,
    /// Comma-separated coupling values.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub alphas: Vec<f64>,
    /// Volterra end time (SE mode).
    #[arg(long, default_value_t = 200.0)]
    pub tmax: f64,
    /// Volterra time step (SE mode).
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[command(flatten)]
    pub bath: BathArgs,
}

/// Floats are written with 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

fn row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl BathArgs {
    fn params(&self, alpha: f64) -> SpectralParams {
        SpectralParams::ohmic(alpha).with_cutoff(self.cutoff.into()).with_temperature(self.temperature)
    }

    fn check_alpha(&self, alpha: f64) -> CliResult<()> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(usage(format!("--alpha must be >= 0, got {alpha}")));
        }
        if alpha > ALPHA_GUARD && !self.force {
            return Err(usage(format!(
                "alpha = {alpha} exceeds {ALPHA_GUARD}, where the flow is not expected to be meaningful; pass --force to run anyway"
            )));
        }
        Ok(())
    }

    /// Resolves defaults and validates; any problem is a usage error.
    fn flow_config(&self, alpha: f64, model: FlowModel) -> CliResult<FlowConfig> {
        self.check_alpha(alpha)?;
        let mut cfg = FlowConfig::new(self.params(alpha), self.delta0).with_model(model).with_eta(self.eta);
        if let Some(seed) = self.gamma_seed {
            cfg.gamma_seed = seed;
        }
        cfg.lambda_start = self.lambda_start;
        if let Some(lmin) = self.lambda_min {
            cfg.lambda_min = lmin;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn header(command: &str, cfg: &FlowConfig, extra: &[(&str, String)]) -> String {
    let p = &cfg.params;
    let mut s = String::new();
    let _ = writeln!(s, "# drg {VERSION}");
    let _ = writeln!(s, "# command={command}");
    let _ = writeln!(
        s,
        "# alpha={} s={} omega_c={} cutoff={} temperature={}",
        p.alpha,
        p.s,
        p.omega_c,
        p.cutoff_shape.name(),
        p.temperature
    );
    let _ = writeln!(
        s,
        "# delta0={} eta={} gamma_seed={} lambda_start={} lambda_min={} model={}",
        cfg.delta0,
        cfg.eta,
        cfg.gamma_seed,
        cfg.lambda_start,
        cfg.lambda_min,
        cfg.model.name()
    );
    let _ = writeln!(
        s,
        "# step max_rel_change={} max_rel_lambda_step={}",
        cfg.step.max_rel_change, cfg.step.max_rel_lambda_step
    );
    for (k, v) in extra {
        let _ = writeln!(s, "# {k}={v}");
    }
    s
}

fn terminal_line(traj: &FlowTrajectory) -> String {
    format!("# terminal delta_inf={} gamma_inf={}\n", fmt_f64(traj.delta_inf()), fmt_f64(traj.gamma_inf()))
}

/// Reruns the flow with the seed scaled by 1e-2 and 1e2 and reports how far
/// `gamma_inf` moves per factor of 100.
pub fn seed_sensitivity_line(cfg: &FlowConfig, traj: &FlowTrajectory) -> String {
    if cfg.gamma_seed == 0.0 {
        return "# gamma_seed_sensitivity n/a (gamma_seed=0)\n".into();
    }
    let run = |factor: f64| integrate_flow(&cfg.with_gamma_seed(cfg.gamma_seed * factor)).map(|t| t.gamma_inf());
    match (run(1e-2), run(1e2)) {
        (Ok(lo), Ok(hi)) => {
            let mid = traj.gamma_inf();
            format!(
                "# gamma_seed_sensitivity seed_factors=1e-2,1,1e2 gamma_inf={},{},{} rel_change_low={} rel_change_high={} (gamma_seed pinned at {})\n",
                fmt_f64(lo),
                fmt_f64(mid),
                fmt_f64(hi),
                fmt_f64((mid - lo) / lo),
                fmt_f64((hi - mid) / mid),
                cfg.gamma_seed
            )
        }
        (Err(e), _) | (_, Err(e)) => format!("# gamma_seed_sensitivity unavailable: {e}\n"),
    }
}

pub fn render_flow(args: &FlowArgs) -> CliResult<String> {
    let cfg = args.bath.flow_config(args.alpha, FlowModel::SpinBoson)?;
    let traj = integrate_flow(&cfg)?;
    let mut out = header("flow", &cfg, &[]);
    out.push_str(&seed_sensitivity_line(&cfg, &traj));
    out.push_str("lambda,delta,gamma\n");
    for s in &traj.samples {
        out.push_str(&row(&[s.lambda, s.delta, s.gamma]));
        out.push('\n');
    }
    out.push_str(&terminal_line(&traj));
    Ok(out)
}

/// Default end time: end of the flow's time map plus twelve terminal decay
/// times, capped at a hundred flow durations.
pub fn default_quench_tmax(cfg: &FlowConfig, traj: &FlowTrajectory) -> f64 {
    let t_end = cfg.eta / cfg.lambda_min;
    let g = traj.gamma_inf();
    let relax = if g > 0.0 { 12.0 / g } else { f64::INFINITY };
    t_end + relax.min(100.0 * t_end)
}

pub fn render_quench(args: &QuenchArgs, eta: f64) -> CliResult<String> {
    let mut bath = args.bath.clone();
    bath.eta = eta;
    let cfg = bath.flow_config(args.alpha, FlowModel::SpinBoson)?;
    let traj = integrate_flow(&cfg)?;
    let t_max = args.tmax.unwrap_or_else(|| default_quench_tmax(&cfg, &traj));
    let dt_out = args.dt_out.unwrap_or(t_max / DEFAULT_QUENCH_ROWS);
    if !(t_max > 0.0 && dt_out > 0.0) {
        return Err(usage("--tmax and --dt-out must be > 0"));
    }
    let sched = to_time_schedule(&traj, eta)?;
    let bloch = evolve_bloch(&sched, BlochState::excited(), t_max, dt_out)?;
    let extra = [("tmax", t_max.to_string()), ("dt_out", dt_out.to_string())];
    let mut out = header("quench", &cfg, &extra);
    out.push_str(&seed_sensitivity_line(&cfg, &traj));
    out.push_str("t,sx,sy,sz,delta_t,gamma_t\n");
    for s in &bloch.samples {
        let r = sched.rates_at(s.t)?;
        out.push_str(&row(&[s.t, s.state.sx, s.state.sy, s.state.sz, r.delta, r.gamma]));
        out.push('\n');
    }
    out.push_str(&terminal_line(&traj));
    Ok(out)
}

pub fn render_se(args: &SeArgs) -> CliResult<String> {
    let cfg = args.bath.flow_config(args.alpha, FlowModel::SpontaneousEmission)?;
    let p = cfg.params;
    if p.cutoff_shape != CutoffShape::Exponential {
        return Err(usage("se requires the exponential cutoff"));
    }
    if !(args.dt > 0.0 && args.dt <= 0.01 / p.omega_c) {
        return Err(usage(format!("--dt must lie in (0, 0.01], got {}", args.dt)));
    }
    if !(args.tmax > 0.0 && args.dt_out >= args.dt) {
        return Err(usage("need --tmax > 0 and --dt-out >= --dt"));
    }
    let stride = (args.dt_out / args.dt).round() as usize;

    let u = solve_volterra(&p, cfg.delta0, args.dt, args.tmax)?;
    let rates = extract_rates(&u)?;
    let traj = integrate_flow(&cfg)?;
    let drg_sched = to_time_schedule(&traj, cfg.eta)?;
    let bm = born_markov_rates(&p, cfg.delta0)?;
    let t_max = u.t_max();
    let dt_out = stride as f64 * args.dt;
    let drg = evolve_se_lindblad(&drg_sched, BlochState::excited(), t_max, dt_out)?;
    let bm_traj = evolve_se_lindblad(&RateSchedule::constant(bm.delta, bm.gamma), BlochState::excited(), t_max, dt_out)?;

    let oracle = if args.oracle {
        if args.n_modes < 2 || !(args.omega_max > 0.0) {
            return Err(usage("--n-modes must be >= 2 and --omega-max > 0"));
        }
        let bath = discretize_bath(&p, args.n_modes, args.omega_max)?;
        let dt = args.dt.min(0.1 / args.omega_max);
        let sub = (args.dt / dt).round() as usize;
        if (sub as f64 * dt - args.dt).abs() > 1e-12 * args.dt {
            return Err(usage("--dt must be a multiple of the oracle step 0.1/omega_max"));
        }
        Some((evolve_discrete_bath(&bath, cfg.delta0, dt, t_max)?, sub))
    } else {
        None
    };

    let mut extra = vec![
        ("tmax", t_max.to_string()),
        ("dt", args.dt.to_string()),
        ("dt_out", dt_out.to_string()),
        ("born_markov", format!("delta={} gamma={}", fmt_f64(bm.delta), fmt_f64(bm.gamma))),
    ];
    if let Some(cut) = rates.truncated_at {
        extra.push(("exact_rates_truncated_at", fmt_f64(cut)));
    }
    if let Some((run, _)) = &oracle {
        extra.push(("oracle", format!("n_modes={} omega_max={}", args.n_modes, args.omega_max)));
        extra.push((
            "oracle_valid_until",
            run.valid_until.map_or("n/a".into(), |w| fmt_f64(w.min(t_max))),
        ));
        extra.push(("oracle_norm_drift", fmt_f64(run.max_norm_drift)));
    }
    let mut out = header("se", &cfg, &extra);
    out.push_str("t,sz_exact,sz_drg,sz_bm,gamma_exact_t,delta_exact_t");
    out.push_str(if oracle.is_some() { ",sz_oracle\n" } else { "\n" });
    for (k, (d, b)) in drg.samples.iter().zip(&bm_traj.samples).enumerate() {
        let n = k * stride;
        let sz_exact = 2.0 * u.values[n].norm_sqr() - 1.0;
        let (g, dl) = rates.samples.get(n).map_or((f64::NAN, f64::NAN), |r| (r.gamma, r.delta));
        let mut vals = vec![d.t, sz_exact, d.state.sz, b.state.sz, g, dl];
        if let Some((run, sub)) = &oracle {
            vals.push(2.0 * run.amplitude.values[n * sub].norm_sqr() - 1.0);
        }
        out.push_str(&row(&vals));
        out.push('\n');
    }
    out.push_str(&terminal_line(&traj));
    Ok(out)
}

/// Renders a sweep together with the number of failed points.
pub fn render_sweep(args: &SweepArgs) -> CliResult<(String, usize)> {
    if args.alphas.is_empty() {
        return Err(usage("--alphas needs at least one value"));
    }
    let model = match args.mode {
        SweepMode::Sb => FlowModel::SpinBoson,
        SweepMode::Se => FlowModel::SpontaneousEmission,
    };
    let configs = args
        .alphas
        .iter()
        .map(|&a| args.bath.flow_config(a, model))
        .collect::<CliResult<Vec<_>>>()?;
    if args.mode == SweepMode::Se && !(args.dt > 0.0 && args.dt <= 0.01 && args.tmax > 0.0) {
        return Err(usage("SE sweeps need 0 < --dt <= 0.01 and --tmax > 0"));
    }

    let rows: Vec<std::result::Result<Vec<f64>, DrgError>> = configs
        .par_iter()
        .map(|cfg| match args.mode {
            SweepMode::Sb => sweep_point_sb(cfg),
            SweepMode::Se => sweep_point_se(cfg, args.dt, args.tmax),
        })
        .collect();

    let extra = [("mode", format!("{:?}", args.mode).to_lowercase()), ("alphas", format!("{:?}", args.alphas))];
    let mut out = header("sweep", &configs[0], &extra);
    let columns = match args.mode {
        SweepMode::Sb => "alpha,delta_inf,gamma_inf,tau,q_drg,delta_niba,gamma_niba,q_niba,error",
        SweepMode::Se => "alpha,delta_drg,gamma_drg,delta_exact,gamma_exact,delta_bm,gamma_bm,error",
    };
    out.push_str(columns);
    out.push('\n');
    let width = columns.split(',').count() - 2;
    let mut failed = 0;
    for (cfg, result) in configs.iter().zip(rows) {
        match result {
            Ok(vals) => {
                out.push_str(&row(&vals));
                out.push_str(",\n");
            }
            Err(e) => {
                failed += 1;
                let mut vals = vec![cfg.params.alpha];
                vals.extend(std::iter::repeat_n(f64::NAN, width));
                out.push_str(&row(&vals));
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(out, ",{msg}");
            }
        }
    }
    Ok((out, failed))
}

fn sweep_point_sb(cfg: &FlowConfig) -> crate::error::Result<Vec<f64>> {
    let traj = integrate_flow(cfg)?;
    let terminal = traj.terminal();
    let alpha = cfg.params.alpha;
    // NIBA values exist for 0 < α ≤ ½ only.
    let niba = niba_parameters(alpha, cfg.delta0, cfg.params.omega_c).ok();
    let (tau, q) = match &niba {
        Some(n) => {
            let r = drg_vs_niba_report(terminal, n);
            (r.tau_drg, r.q_drg)
        }
        None if terminal.gamma > 0.0 => (1.0 / terminal.gamma, terminal.delta / terminal.gamma),
        None => (f64::INFINITY, f64::INFINITY),
    };
    let (dn, gn, qn) = niba.map_or((f64::NAN, f64::NAN, f64::NAN), |n| (n.delta_niba, n.gamma_niba, n.q_niba));
    Ok(vec![alpha, terminal.delta, terminal.gamma, tau, q, dn, gn, qn])
}

fn sweep_point_se(cfg: &FlowConfig, dt: f64, t_max: f64) -> crate::error::Result<Vec<f64>> {
    let traj = integrate_flow(cfg)?;
    let u = solve_volterra(&cfg.params, cfg.delta0, dt, t_max)?;
    let exact = extract_rates(&u)?.long_time(0.5);
    let bm = born_markov_rates(&cfg.params, cfg.delta0)?;
    Ok(vec![cfg.params.alpha, traj.delta_inf(), traj.gamma_inf(), exact.delta, exact.gamma, bm.delta, bm.gamma])
}

fn write_output(path: Option<&Path>, body: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => {
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            // A closed pipe (e.g. `| head`) is not a failure of the run.
            match lock.write_all(body.as_bytes()).and_then(|_| lock.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

/// `out.csv` with η = 0.5 becomes `out_eta0.5.csv`.
pub fn eta_path(base: &Path, eta: f64) -> PathBuf {
    let stem = base.file_stem().map_or_else(|| "quench".into(), |s| s.to_string_lossy().into_owned());
    let ext = base.extension().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}_eta{eta}.{ext}"))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Flow(a) => write_output(a.bath.output.as_deref(), &render_flow(&a)?),
        Command::Quench(a) => match &a.eta_list {
            None => write_output(a.bath.output.as_deref(), &render_quench(&a, a.bath.eta)?),
            Some(etas) => {
                let base = a.bath.output.as_deref().ok_or_else(|| usage("--eta-list requires --output"))?;
                for &eta in etas {
                    write_output(Some(&eta_path(base, eta)), &render_quench(&a, eta)?)?;
                }
                Ok(())
            }
        },
        Command::Se(a) => write_output(a.bath.output.as_deref(), &render_se(&a)?),
        Command::Sweep(a) => {
            let (body, failed) = render_sweep(&a)?;
            write_output(a.bath.output.as_deref(), &body)?;
            if failed > 0 {
                return Err(CliError::PartialFailure { failed, total: a.alphas.len() });
            }
            Ok(())
        }
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("drg: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("drg").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn float_format_has_twelve_digits() {
        assert_eq!(fmt_f64(0.1), "1.00000000000e-1");
        assert_eq!(fmt_f64(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn defaults_resolve() {
        let Command::Flow(a) = parse(&["flow", "--alpha", "0.2"]).command else { panic!() };
        let cfg = a.bath.flow_config(a.alpha, FlowModel::SpinBoson).unwrap();
        assert_eq!(cfg.delta0, 0.01);
        assert_eq!(cfg.gamma_seed, 1e-8);
        assert_eq!(cfg.lambda_min, 1e-4);
        assert_eq!(cfg.lambda_start, 10.0);
        assert_eq!(cfg.eta, 1.0);
        assert_eq!(cfg.params.cutoff_shape, CutoffShape::Exponential);
    }

    #[test]
    fn alpha_guard() {
        let Command::Flow(a) = parse(&["flow", "--alpha", "0.6"]).command else { panic!() };
        assert!(matches!(render_flow(&a), Err(CliError::Usage(_))));
        let Command::Flow(a) = parse(&["flow", "--alpha", "0.6", "--force"]).command else { panic!() };
        assert!(a.bath.flow_config(a.alpha, FlowModel::SpinBoson).is_ok());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let Command::Flow(a) = parse(&["flow", "--alpha", "0.1", "--eta", "2"]).command else { panic!() };
        assert_eq!(render_flow(&a).unwrap_err().exit_code(), 2);
        let Command::Flow(a) = parse(&["flow", "--alpha", "0.1", "--delta0=-1"]).command else { panic!() };
        assert_eq!(render_flow(&a).unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["drg", "flow", "--alpha", "x"]).is_err());
    }

    #[test]
    fn eta_file_names() {
        assert_eq!(eta_path(Path::new("/tmp/out.csv"), 0.5), PathBuf::from("/tmp/out_eta0.5.csv"));
        assert_eq!(eta_path(Path::new("run"), 1.0), PathBuf::from("run_eta1.csv"));
    }

    #[test]
    fn flow_csv_layout() {
        let Command::Flow(a) = parse(&["flow", "--alpha", "0"]).command else { panic!() };
        let csv = render_flow(&a).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# drg "));
        let head = lines.iter().position(|l| *l == "lambda,delta,gamma").unwrap();
        assert!(lines[..head].iter().all(|l| l.starts_with('#')));
        assert!(lines.last().unwrap().starts_with("# terminal delta_inf=1.00000000000e-2"));
        for l in &lines[head + 1..lines.len() - 1] {
            let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols[1], 0.01);
        }
    }
}
