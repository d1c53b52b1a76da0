//! `circkf` — command-line front end for the circular filtering toolkit.
//!
//! Subcommands: `simulate` (generate a trajectory CSV), `filter` (run one
//! filter over a trajectory), `mc` (Monte Carlo summary), `sweep`
//! (parameter sweeps), `timing` (wall-clock comparison), `selftest`
//! (oracle suites).
//!
//! Exit codes: 0 success, 2 usage, 3 config, 4 numeric failure, 5 I/O.

mod config;
mod plot;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use circkf::experiments::{
    run_monte_carlo, sweep as run_sweep, timing_report, ExperimentConfig, ExperimentError,
    SweepParam,
};
use circkf::io as csvio;
use circkf::models::{
    simulate_circular_from, simulate_linear, CircularModelParams, LinearModelParams,
    TrajectoryRecord,
};
use circkf::special::Angle;

use config::{ConfigError, Overrides, RawConfig};

#[derive(Parser)]
#[command(name = "circkf", version, about = "Continuous-time circular filtering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonOverrides {
    /// Configuration file (flat key = value with [sections])
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of Monte Carlo runs
    #[arg(long)]
    runs: Option<usize>,
    /// Horizon T (in units of 1/kappa_phi)
    #[arg(long = "T", value_name = "T")]
    t_end: Option<f64>,
    /// Master seed; all streams derive from it
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated filters (circkf, vm_increment, gauss_adf[:verbatim], gkbf, gvm:K[:QUAD], pf:N)
    #[arg(long)]
    filters: Option<String>,
    /// Belief initialization: calibrated:<k0> | at_truth:<k0> | uniform
    #[arg(long)]
    init: Option<String>,
    /// Observation concentration scaling: ideal | sqrt | sqrt-unscaled | linear
    #[arg(long)]
    alpha_mode: Option<String>,
    /// State diffusion precision
    #[arg(long)]
    kappa_phi: Option<f64>,
    /// Increment observation precision
    #[arg(long)]
    kappa_u: Option<f64>,
    /// Direct observation information rate
    #[arg(long)]
    kappa_z: Option<f64>,
    /// Simulation time step
    #[arg(long)]
    dt: Option<f64>,
    /// Direct observations every STRIDE steps
    #[arg(long, value_name = "STRIDE")]
    obs_stride: Option<usize>,
    /// Keep full traces of the first N runs
    #[arg(long)]
    trace_runs: Option<usize>,
    /// Worker threads for the run pool (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory with its observation streams
    Simulate {
        #[arg(long, default_value = "circular")]
        model: String,
        #[arg(long, default_value_t = 1.0)]
        kappa_phi: f64,
        #[arg(long, default_value_t = 10.0)]
        kappa_u: f64,
        #[arg(long)]
        kappa_z: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long = "T", value_name = "T", default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1)]
        obs_stride: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "ideal")]
        alpha_mode: String,
        /// Initial state (radians for circular, position for linear)
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        /// Pin the hidden state at x0 (direct observations only)
        #[arg(long, default_value_t = false)]
        frozen: bool,
        // linear model parameters
        #[arg(long, default_value_t = -1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_x2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_u2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one filter over a trajectory CSV and write its trace
    Filter {
        /// Trajectory CSV produced by `simulate` (parameters default from
        /// its header)
        #[arg(long)]
        traj: PathBuf,
        /// Filter to run (same syntax as --filters, single entry)
        #[arg(long, default_value = "circkf")]
        filter: String,
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        kappa_phi: Option<f64>,
        #[arg(long)]
        kappa_u: Option<f64>,
        #[arg(long)]
        kappa_z: Option<f64>,
        #[arg(long)]
        alpha_mode: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo experiment: summary.csv with r_mean and r_hat per filter
    Mc {
        #[command(flatten)]
        common: CommonOverrides,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Also write summary.svg
        #[arg(long, default_value_t = false)]
        plots: bool,
    },
    /// Sweep one model parameter over a list of values
    Sweep {
        #[command(flatten)]
        common: CommonOverrides,
        /// Parameter to sweep: kappa_u | kappa_z | dt
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long)]
        values: String,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        plots: bool,
    },
    /// Median-of-5 wall-clock comparison of the configured filters
    Timing {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Run the oracle suites (conjugacy grid, xi round trip, K=1 reduction,
    /// gKBF steady state)
    Selftest,
}

enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 3,
            Self::Numeric(_) => 4,
            Self::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Numeric(m) | Self::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Self::Config(e.to_string()),
            other => Self::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            model,
            kappa_phi,
            kappa_u,
            kappa_z,
            dt,
            t_end,
            obs_stride,
            seed,
            alpha_mode,
            x0,
            frozen,
            a,
            c,
            sigma_x2,
            sigma_u2,
            out,
        } => {
            let mode = config::parse_alpha_mode(&alpha_mode)?;
            let (rec, kvs): (TrajectoryRecord, Vec<(&str, String)>) = match model.as_str() {
                "circular" => {
                    let params =
                        CircularModelParams::new(kappa_phi, kappa_u, kappa_z, dt, obs_stride)
                            .map_err(|e| CliError::Config(e.to_string()))?;
                    let phi0 = Angle::new(x0).map_err(|e| CliError::Config(e.to_string()))?;
                    let rec = simulate_circular_from(&params, phi0, frozen, mode, t_end, seed)
                        .map_err(|e| CliError::Numeric(e.to_string()))?;
                    let mut kvs = vec![
                        ("kind", "circular".to_string()),
                        ("kappa_phi", kappa_phi.to_string()),
                        ("kappa_u", kappa_u.to_string()),
                    ];
                    if let Some(kz) = kappa_z {
                        kvs.push(("kappa_z", kz.to_string()));
                    }
                    kvs.extend([
                        ("dt", dt.to_string()),
                        ("obs_stride", obs_stride.to_string()),
                        ("T", t_end.to_string()),
                        ("seed", seed.to_string()),
                        ("alpha_mode", mode.name().to_string()),
                        ("x0", x0.to_string()),
                        ("frozen_state", frozen.to_string()),
                    ]);
                    (rec, kvs)
                }
                "linear" => {
                    let params = LinearModelParams::new(a, c, sigma_x2, sigma_u2, dt)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    let rec = simulate_linear(&params, x0, t_end, seed)
                        .map_err(|e| CliError::Numeric(e.to_string()))?;
                    (
                        rec,
                        vec![
                            ("kind", "linear".to_string()),
                            ("a", a.to_string()),
                            ("c", c.to_string()),
                            ("sigma_x2", sigma_x2.to_string()),
                            ("sigma_u2", sigma_u2.to_string()),
                            ("dt", dt.to_string()),
                            ("T", t_end.to_string()),
                            ("seed", seed.to_string()),
                            ("x0", x0.to_string()),
                        ],
                    )
                }
                other => {
                    return Err(CliError::Config(format!(
                        "unknown model '{other}'; valid: circular, linear"
                    )))
                }
            };
            let mut w = BufWriter::new(fs::File::create(&out)?);
            csvio::write_trajectory(&mut w, &rec, &kvs)?;
            w.flush()?;
            println!("wrote {} ({} rows)", out.display(), rec.times.len());
            Ok(())
        }
        Command::Filter { traj, filter, init, kappa_phi, kappa_u, kappa_z, alpha_mode, out } => {
            run_filter_cmd(&traj, &filter, init, kappa_phi, kappa_u, kappa_z, alpha_mode, &out)
        }
        Command::Mc { common, out_dir, plots } => {
            let cfg = load_config(&common)?;
            init_pool(common.jobs);
            let summary = run_monte_carlo(&cfg)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
            fs::create_dir_all(&dir)?;
            let kvs = config::echo_config(&cfg);
            let path = dir.join("summary.csv");
            let mut w = BufWriter::new(fs::File::create(&path)?);
            csvio::write_summary(&mut w, &summary, &kvs)?;
            w.flush()?;
            println!("wrote {}", path.display());
            for trace in &summary.traces {
                let tdir = dir.join("traces");
                fs::create_dir_all(&tdir)?;
                let tpath = tdir.join(format!("run_{}.csv", trace.run));
                let mut tw = BufWriter::new(fs::File::create(&tpath)?);
                csvio::write_header(&mut tw, &kvs)?;
                writeln!(tw, "t,phi{}", trace
                    .filters
                    .iter()
                    .map(|(n, _)| format!(",mu_{n},r_{n}"))
                    .collect::<String>())?;
                for (i, &t) in summary.times.iter().enumerate() {
                    write!(tw, "{},{}", csvio::fmt_g17(t), csvio::fmt_g17(trace.truth[i]))?;
                    for (_, curve) in &trace.filters {
                        write!(
                            tw,
                            ",{},{}",
                            csvio::fmt_g17(curve[i].0),
                            csvio::fmt_g17(curve[i].1)
                        )?;
                    }
                    writeln!(tw)?;
                }
                tw.flush()?;
            }
            if plots {
                let path = dir.join("summary.svg");
                write_summary_plot(&path, &summary)?;
                println!("wrote {}", path.display());
            }
            let last = summary.times.len() - 1;
            for f in &summary.filters {
                println!(
                    "{:>20}: r_mean(T) = {:.4}, r_hat(T) = {:.4}, wall {:.3}s",
                    f.name, f.est[last], f.emp[last], f.wall_secs
                );
            }
            Ok(())
        }
        Command::Sweep { common, param, values, out_dir, plots } => {
            let cfg = load_config(&common)?;
            init_pool(common.jobs);
            let param = match param.as_str() {
                "kappa_u" => SweepParam::KappaU,
                "kappa_z" => SweepParam::KappaZ,
                "dt" => SweepParam::Dt,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown sweep parameter '{other}'; valid: kappa_u, kappa_z, dt"
                    )))
                }
            };
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad sweep value '{v}': {e}")))
                })
                .collect::<Result<_, _>>()?;
            let cells = run_sweep(&cfg, param, &values)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
            fs::create_dir_all(&dir)?;
            let kvs = config::echo_config(&cfg);

            let path = dir.join(format!("sweep_{}.csv", param.name()));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            csvio::write_header(&mut w, &kvs)?;
            writeln!(w, "# sweep_param = {}", param.name())?;
            writeln!(w, "value,filter,r_mean_T,r_hat_T,n_runs")?;
            for cell in &cells {
                let last = cell.summary.times.len() - 1;
                for f in &cell.summary.filters {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        csvio::fmt_g17(cell.value),
                        f.name,
                        csvio::fmt_g17(f.est[last]),
                        csvio::fmt_g17(f.emp[last]),
                        cell.summary.n_runs
                    )?;
                }
            }
            w.flush()?;
            println!("wrote {}", path.display());

            for cell in &cells {
                let path = dir.join(format!("summary_{}_{}.csv", param.name(), cell.value));
                let mut w = BufWriter::new(fs::File::create(&path)?);
                csvio::write_summary(&mut w, &cell.summary, &kvs)?;
                w.flush()?;
            }
            if plots {
                let path = dir.join(format!("sweep_{}.svg", param.name()));
                write_sweep_plot(&path, param, &cells)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Timing { common, out_dir } => {
            let cfg = load_config(&common)?;
            init_pool(common.jobs);
            let report = timing_report(&cfg)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
            fs::create_dir_all(&dir)?;
            let kvs = config::echo_config(&cfg);
            let path = dir.join("timing.csv");
            let mut w = BufWriter::new(fs::File::create(&path)?);
            csvio::write_timing(&mut w, &report, &kvs)?;
            w.flush()?;
            for e in &report.entries {
                println!("{:>20}: median {:.5}s over {} reps", e.name, e.median_secs, e.reps_secs.len());
            }
            if let (Some(ck), Some(pf)) = (
                report.median("circkf"),
                report.entries.iter().find(|e| e.name.starts_with("pf")).map(|e| e.median_secs),
            ) {
                println!("{:>20}: circkf is {:.1}x faster than the particle filter", "ratio", pf / ck);
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Selftest => {
            let outcomes = circkf::selftest::run_all();
            let mut ok = true;
            for o in &outcomes {
                println!(
                    "{:>20}: {} (measured {:.3e}, tolerance {:.3e}) — {}",
                    o.name,
                    if o.passed { "PASS" } else { "FAIL" },
                    o.measured,
                    o.tolerance,
                    o.detail
                );
                ok &= o.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(CliError::Numeric("selftest failures (see above)".into()))
            }
        }
    }
}

fn load_config(common: &CommonOverrides) -> Result<ExperimentConfig, CliError> {
    let raw = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::parse("")?,
    };
    let over = Overrides {
        runs: common.runs,
        t_end: common.t_end,
        seed: common.seed,
        filters: common.filters.clone(),
        init: common.init.clone(),
        alpha_mode: common.alpha_mode.clone(),
        kappa_phi: common.kappa_phi,
        kappa_u: common.kappa_u,
        kappa_z: common.kappa_z,
        dt: common.dt,
        obs_stride: common.obs_stride,
        trace_runs: common.trace_runs,
    };
    Ok(config::resolve_experiment(&raw, &over)?)
}

fn init_pool(jobs: Option<usize>) {
    if let Some(jobs) = jobs {
        // ignore the error if a pool already exists; thread count only
        // affects scheduling, never results
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
}

#[allow(clippy::too_many_arguments)]
fn run_filter_cmd(
    traj: &Path,
    filter: &str,
    init: Option<String>,
    kappa_phi: Option<f64>,
    kappa_u: Option<f64>,
    kappa_z: Option<f64>,
    alpha_mode: Option<String>,
    out: &Path,
) -> Result<(), CliError> {
    use circkf::circular_filters::{
        circkf_step_with_alpha, gauss_adf_step_with_alpha, vm_increment_step, GaussAdfBelief,
        VonMisesBelief,
    };
    use circkf::experiments::{BeliefInit, FilterSpec};
    use circkf::expfam::{gvm_direct_update, gvm_moments, gvm_step, GvmNaturalParams};
    use circkf::linear_filters::{gkbf_step, GaussianBelief};
    use circkf::particle::{pf_estimate, pf_init, pf_step_with_alpha, PfInit};
    use circkf::rng::{stream_rng, StreamPurpose};
    use circkf::special::kappa_from_r;

    let text = fs::read_to_string(traj)?;
    let (rec, header) =
        csvio::read_trajectory(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    let header_get = |key: &str| header.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let header_f64 = |key: &str| -> Result<Option<f64>, CliError> {
        match header_get(key) {
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| CliError::Config(format!("trajectory header {key} = '{v}': {e}"))),
            None => Ok(None),
        }
    };

    let kind = header_get("kind").unwrap_or_else(|| "circular".into());
    let dt = header_f64("dt")?.ok_or_else(|| {
        CliError::Config("trajectory header lacks dt; was this written by `simulate`?".into())
    })?;

    let specs = config::parse_filters(filter)?;
    if specs.len() != 1 {
        return Err(CliError::Config("`filter` takes exactly one filter".into()));
    }
    let spec = specs[0];

    if kind == "linear" {
        if !matches!(spec, FilterSpec::Gkbf) {
            return Err(CliError::Config("linear trajectories support only gkbf".into()));
        }
        let params = LinearModelParams::new(
            header_f64("a")?.unwrap_or(-1.0),
            header_f64("c")?.unwrap_or(1.0),
            header_f64("sigma_x2")?.unwrap_or(1.0),
            header_f64("sigma_u2")?.unwrap_or(1.0),
            dt,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let sigma0_2 = match config::parse_init(&init.unwrap_or_else(|| "calibrated:1.0".into()))? {
            BeliefInit::Calibrated { kappa0 } | BeliefInit::AtTruth { kappa0 } => 1.0 / kappa0,
            BeliefInit::Uniform => {
                return Err(CliError::Config("uniform init is circular-only".into()))
            }
        };
        let mut belief = GaussianBelief::new(0.0, sigma0_2)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut w = BufWriter::new(fs::File::create(out)?);
        csvio::write_header(&mut w, &[("kind", "linear".into()), ("filter", "gkbf".into())])?;
        writeln!(w, "t,mu,sigma2")?;
        writeln!(w, "0,{},{}", csvio::fmt_g17(belief.mu), csvio::fmt_g17(belief.sigma2))?;
        for i in 0..rec.n_steps() {
            belief = gkbf_step(belief, rec.du[i], &params)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            writeln!(
                w,
                "{},{},{}",
                csvio::fmt_g17(rec.times[i + 1]),
                csvio::fmt_g17(belief.mu),
                csvio::fmt_g17(belief.sigma2)
            )?;
        }
        w.flush()?;
        println!("wrote {}", out.display());
        return Ok(());
    }

    // circular
    let kappa_phi = kappa_phi.or(header_f64("kappa_phi")?).unwrap_or(config::defaults::KAPPA_PHI);
    let kappa_u = kappa_u.or(header_f64("kappa_u")?).unwrap_or(config::defaults::KAPPA_U);
    let kappa_z = kappa_z.or(header_f64("kappa_z")?);
    let obs_stride = header_f64("obs_stride")?.map(|v| v as usize).unwrap_or(1);
    let params = CircularModelParams::new(kappa_phi, kappa_u, kappa_z, dt, obs_stride)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mode = config::parse_alpha_mode(
        &alpha_mode.or_else(|| header_get("alpha_mode")).unwrap_or_else(|| "ideal".into()),
    )?;
    let alpha = kappa_z.map(|kz| mode.alpha(kz, params.obs_delta()));

    let (mu0, kappa0) = match config::parse_init(&init.unwrap_or_else(|| "uniform".into()))? {
        BeliefInit::Calibrated { kappa0 } | BeliefInit::AtTruth { kappa0 } => (0.0, kappa0),
        BeliefInit::Uniform => (0.0, 0.0),
    };

    let mut times = vec![rec.times[0]];
    let mut mus = Vec::new();
    let mut kappas = Vec::new();

    enum State {
        Vm(VonMisesBelief, bool), // bool: apply direct updates
        Gauss(GaussAdfBelief, circkf::circular_filters::GaussAdfVariant),
        Gvm(GvmNaturalParams, usize),
        Pf(Box<circkf::particle::ParticleEnsemble>, Box<circkf::rng::ChaCha8Rng>),
    }

    let filter_seed = header_f64("seed")?.map(|s| s as u64).unwrap_or(0) ^ 0x5eed_f11e;
    let mut state = match spec {
        FilterSpec::CircKf => State::Vm(
            VonMisesBelief::from_raw(mu0, kappa0).map_err(|e| CliError::Config(e.to_string()))?,
            true,
        ),
        FilterSpec::VmIncrement => State::Vm(
            VonMisesBelief::from_raw(mu0, kappa0).map_err(|e| CliError::Config(e.to_string()))?,
            false,
        ),
        FilterSpec::GaussAdf(variant) => State::Gauss(
            GaussAdfBelief::from_raw(mu0, kappa0.max(1e-4))
                .map_err(|e| CliError::Config(e.to_string()))?,
            variant,
        ),
        FilterSpec::Gvm { order, quad_points } => State::Gvm(
            GvmNaturalParams::from_von_mises(
                Angle::new(mu0).map_err(|e| CliError::Config(e.to_string()))?,
                kappa0,
                order,
            )
            .map_err(|e| CliError::Config(e.to_string()))?,
            quad_points,
        ),
        FilterSpec::Pf { n } => {
            let mut rng = stream_rng(filter_seed, 0, StreamPurpose::ParticleInit);
            let init = if kappa0 == 0.0 {
                PfInit::Uniform
            } else {
                PfInit::VonMises { mu: Angle::ZERO, kappa: kappa0 }
            };
            State::Pf(
                Box::new(pf_init(n, init, &mut rng).map_err(|e| CliError::Config(e.to_string()))?),
                Box::new(stream_rng(filter_seed, 0, StreamPurpose::ParticleFilter)),
            )
        }
        FilterSpec::Gkbf => {
            return Err(CliError::Config("gkbf needs a linear trajectory".into()))
        }
    };

    let push_estimate = |mus: &mut Vec<f64>, kappas: &mut Vec<f64>, state: &State| -> Result<(), CliError> {
        match state {
            State::Vm(b, _) => {
                mus.push(b.mu().rad());
                kappas.push(b.kappa());
            }
            State::Gauss(b, _) => {
                mus.push(b.mu().rad());
                kappas.push(b.kappa());
            }
            State::Gvm(theta, quad) => {
                let m = gvm_moments(theta, *quad).map_err(|e| CliError::Numeric(e.to_string()))?;
                let (r, mu) = m.first_moment();
                mus.push(mu.rad());
                kappas.push(kappa_from_r(r.min(1.0 - 1e-12)).unwrap_or(f64::NAN));
            }
            State::Pf(ens, _) => {
                let est = pf_estimate(ens).map_err(|e| CliError::Numeric(e.to_string()))?;
                mus.push(est.mu.rad());
                kappas.push(est.kappa);
            }
        }
        Ok(())
    };
    push_estimate(&mut mus, &mut kappas, &state)?;

    for i in 0..rec.n_steps() {
        let (du, z_raw) = rec.step_obs(i);
        let z = match z_raw {
            Some(z) => Some((
                Angle::new(z).map_err(|e| CliError::Numeric(e.to_string()))?,
                alpha.ok_or_else(|| {
                    CliError::Config("trajectory has z but kappa_z is unknown".into())
                })?,
            )),
            None => None,
        };
        state = match state {
            State::Vm(b, direct) => {
                let next = if direct {
                    circkf_step_with_alpha(b, du, z, &params)
                } else {
                    vm_increment_step(b, du, &params)
                }
                .map_err(|e| CliError::Numeric(e.to_string()))?;
                State::Vm(next, direct)
            }
            State::Gauss(b, variant) => State::Gauss(
                gauss_adf_step_with_alpha(b, du, z, &params, variant)
                    .map_err(|e| CliError::Numeric(e.to_string()))?,
                variant,
            ),
            State::Gvm(theta, quad) => {
                let mut next =
                    gvm_step(&theta, du, &params, quad).map_err(|e| CliError::Numeric(e.to_string()))?;
                if let Some((z, alpha)) = z {
                    next = gvm_direct_update(&next, z, alpha);
                }
                State::Gvm(next, quad)
            }
            State::Pf(ens, mut rng) => {
                let next = pf_step_with_alpha(*ens, du, z, &params, rng.as_mut())
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                State::Pf(Box::new(next), rng)
            }
        };
        times.push(rec.times[i + 1]);
        push_estimate(&mut mus, &mut kappas, &state)?;
    }

    let mut w = BufWriter::new(fs::File::create(out)?);
    let kvs: Vec<(&str, String)> = vec![
        ("kind", "circular".into()),
        ("filter", spec.name()),
        ("kappa_phi", kappa_phi.to_string()),
        ("kappa_u", kappa_u.to_string()),
        ("kappa_z", kappa_z.map(|v| v.to_string()).unwrap_or_else(|| "none".into())),
        ("alpha_mode", mode.name().into()),
        ("source", traj.display().to_string()),
    ];
    csvio::write_trace(&mut w, &times, &mus, &kappas, &kvs)?;
    w.flush()?;
    println!("wrote {}", out.display());
    Ok(())
}

fn write_summary_plot(path: &Path, summary: &circkf::experiments::RunSummary) -> Result<(), CliError> {
    let mut series = Vec::new();
    for (i, f) in summary.filters.iter().enumerate() {
        series.push(plot::Series {
            label: format!("{} r_mean", f.name),
            x: &summary.times,
            y: &f.est,
            dashed: false,
            color_idx: i,
        });
        series.push(plot::Series {
            label: format!("{} r_hat", f.name),
            x: &summary.times,
            y: &f.emp,
            dashed: true,
            color_idx: i,
        });
    }
    let p = plot::Plot {
        title: "estimated vs empirical precision".into(),
        x_label: "t".into(),
        y_label: "precision r".into(),
        log_x: false,
        series,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    p.write_svg(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_sweep_plot(
    path: &Path,
    param: SweepParam,
    cells: &[circkf::experiments::SweepCell],
) -> Result<(), CliError> {
    let values: Vec<f64> = cells.iter().map(|c| c.value).collect();
    let log_x = values.iter().all(|&v| v > 0.0)
        && values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            / values.iter().cloned().fold(f64::INFINITY, f64::min)
            > 20.0;
    let names: Vec<String> =
        cells[0].summary.filters.iter().map(|f| f.name.clone()).collect();
    let mut est_curves = vec![Vec::new(); names.len()];
    let mut emp_curves = vec![Vec::new(); names.len()];
    for cell in cells {
        let last = cell.summary.times.len() - 1;
        for (i, f) in cell.summary.filters.iter().enumerate() {
            est_curves[i].push(f.est[last]);
            emp_curves[i].push(f.emp[last]);
        }
    }
    let mut series = Vec::new();
    for (i, name) in names.iter().enumerate() {
        series.push(plot::Series {
            label: format!("{name} r_mean(T)"),
            x: &values,
            y: &est_curves[i],
            dashed: false,
            color_idx: i,
        });
        series.push(plot::Series {
            label: format!("{name} r_hat(T)"),
            x: &values,
            y: &emp_curves[i],
            dashed: true,
            color_idx: i,
        });
    }
    let p = plot::Plot {
        title: format!("endpoint precision vs {}", param.name()),
        x_label: if log_x { format!("log10 {}", param.name()) } else { param.name().into() },
        y_label: "precision r".into(),
        log_x,
        series,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    p.write_svg(&mut w)?;
    w.flush()?;
    Ok(())
}
