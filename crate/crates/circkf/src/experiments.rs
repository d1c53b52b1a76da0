//! Monte Carlo harness: many-run simulation plus filtering, with the
//! estimated-versus-empirical precision statistics, parameter sweeps and
//! wall-clock comparisons.
//!
//! Per run: one trajectory and one observation stream are generated, every
//! configured filter consumes the *identical* stream, and `(mu_t, r_t)` is
//! recorded per filter. Aggregated over runs this yields, per filter and
//! time point,
//!
//! * `est` — the mean self-reported precision `r_t`, and
//! * `emp` — the empirical precision: the resultant length of the error
//!   distribution, `| mean_m exp(i (mu_t - phi_t)) |`, which equals `est`
//!   for a correctly calibrated von Mises posterior.
//!
//! For linear models the analogous pair is (mean predicted variance,
//! empirical MSE).
//!
//! Runs are processed in fixed-size chunks that may execute on a worker
//! pool; partial sums are folded in chunk order, so the statistical content
//! of a summary is reproducible bit-for-bit from the seed regardless of
//! thread count (wall-clock figures are measurements and obviously are
//! not).

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circular_filters::{
    circkf_step_with_alpha, gauss_adf_step_with_alpha, vm_increment_step, FilterError,
    GaussAdfBelief, GaussAdfVariant, VonMisesBelief,
};
use crate::expfam::{gvm_direct_update, gvm_moments, gvm_step, ExpFamError, GvmNaturalParams};
use crate::linear_filters::{gkbf_step, GaussianBelief, LinearFilterError};
use crate::models::{
    simulate_circular_from, simulate_linear, AlphaMode, CircularModelParams, LinearModelParams,
    ModelError, TrajectoryRecord,
};
use crate::particle::{pf_estimate, pf_init, pf_step_with_alpha, ParticleError, PfInit};
use crate::rng::{derive_seed, stream_rng, StreamPurpose};
use crate::special::{vm_sample, Angle, Precision, SpecialError};

const CHUNK: usize = 32;

#[derive(Debug)]
pub enum ExperimentError {
    Model(ModelError),
    Filter(FilterError),
    Linear(LinearFilterError),
    ExpFam(ExpFamError),
    Particle(ParticleError),
    Special(SpecialError),
    Config(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(e) => write!(f, "model: {e}"),
            Self::Filter(e) => write!(f, "filter: {e}"),
            Self::Linear(e) => write!(f, "linear filter: {e}"),
            Self::ExpFam(e) => write!(f, "exponential family: {e}"),
            Self::Particle(e) => write!(f, "particle filter: {e}"),
            Self::Special(e) => write!(f, "special function: {e}"),
            Self::Config(msg) => write!(f, "config: {msg}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}
impl From<FilterError> for ExperimentError {
    fn from(e: FilterError) -> Self {
        Self::Filter(e)
    }
}
impl From<LinearFilterError> for ExperimentError {
    fn from(e: LinearFilterError) -> Self {
        Self::Linear(e)
    }
}
impl From<ExpFamError> for ExperimentError {
    fn from(e: ExpFamError) -> Self {
        Self::ExpFam(e)
    }
}
impl From<ParticleError> for ExperimentError {
    fn from(e: ParticleError) -> Self {
        Self::Particle(e)
    }
}
impl From<SpecialError> for ExperimentError {
    fn from(e: SpecialError) -> Self {
        Self::Special(e)
    }
}

/// Which generative model the experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Circular(CircularModelParams),
    Linear(LinearModelParams),
}

/// Filters the harness can run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// Circular Kalman filter (increments + direct observations).
    CircKf,
    /// Increment-only von Mises projection filter.
    VmIncrement,
    /// Gaussian assumed-density benchmark.
    GaussAdf(GaussAdfVariant),
    /// Generalized Kalman–Bucy filter (linear model only).
    Gkbf,
    /// Generalized von Mises projection engine of the given harmonic order.
    Gvm { order: usize, quad_points: usize },
    /// Particle filter with `n` particles.
    Pf { n: usize },
}

impl FilterSpec {
    pub fn name(&self) -> String {
        match self {
            Self::CircKf => "circkf".into(),
            Self::VmIncrement => "vm_increment".into(),
            Self::GaussAdf(GaussAdfVariant::Derived) => "gauss_adf".into(),
            Self::GaussAdf(GaussAdfVariant::Verbatim) => "gauss_adf_verbatim".into(),
            Self::Gkbf => "gkbf".into(),
            Self::Gvm { order, .. } => format!("gvm{order}"),
            Self::Pf { n } => format!("pf{n}"),
        }
    }
}

/// How beliefs (and the hidden initial state) are set up per run.
///
/// `Calibrated` draws the truth from the initial belief, making the
/// ensemble Bayesianly self-consistent from `t = 0` — the setup under which
/// estimated and empirical precision coincide for an exact filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeliefInit {
    /// Belief `VM(0, kappa0)` (or `N(0, 1/kappa0)` for linear runs); the
    /// true initial state is drawn from it.
    Calibrated { kappa0: f64 },
    /// Belief centered on the true initial state (which is pinned at 0)
    /// with concentration `kappa0`; not calibrated at early times.
    AtTruth { kappa0: f64 },
    /// Uniform belief, uniform truth (circular models only).
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub filters: Vec<FilterSpec>,
    pub runs: usize,
    pub t_end: f64,
    pub seed: u64,
    pub init: BeliefInit,
    pub alpha_mode: AlphaMode,
    /// Pin the hidden state at its initial value (step-size invariance
    /// studies use this with a direct-observation-only model).
    pub frozen_state: bool,
    /// Keep full traces of the first `trace_runs` runs.
    pub trace_runs: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.runs == 0 {
            return Err(ExperimentError::Config("runs must be >= 1".into()));
        }
        if self.filters.is_empty() {
            return Err(ExperimentError::Config("at least one filter".into()));
        }
        match &self.model {
            ModelSpec::Linear(_) => {
                if self.filters.iter().any(|f| !matches!(f, FilterSpec::Gkbf)) {
                    return Err(ExperimentError::Config(
                        "linear model runs support only the gkbf filter".into(),
                    ));
                }
                if matches!(self.init, BeliefInit::Uniform) {
                    return Err(ExperimentError::Config(
                        "uniform initialization has no linear counterpart".into(),
                    ));
                }
            }
            ModelSpec::Circular(_) => {
                if self.filters.iter().any(|f| matches!(f, FilterSpec::Gkbf)) {
                    return Err(ExperimentError::Config(
                        "gkbf runs on the linear model only".into(),
                    ));
                }
                for f in &self.filters {
                    if let FilterSpec::Gvm { order, quad_points } = f {
                        if *order == 0 || *order > 4 {
                            return Err(ExperimentError::Config(
                                "gvm order must be in 1..=4".into(),
                            ));
                        }
                        if *quad_points < 64 || !quad_points.is_power_of_two() {
                            return Err(ExperimentError::Config(
                                "gvm quad_points must be a power of two >= 64".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-filter aggregated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCurve {
    pub name: String,
    /// Mean self-reported precision per time point (`r_t` for circular
    /// filters, predicted variance for the linear filter).
    pub est: Vec<f64>,
    /// Empirical precision per time point (error resultant length for
    /// circular filters, MSE for the linear filter).
    pub emp: Vec<f64>,
    /// Total wall-clock seconds spent stepping this filter.
    pub wall_secs: f64,
}

/// Full trace of one run, kept for the first `trace_runs` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run: usize,
    pub truth: Vec<f64>,
    /// Per filter: `(mu_t, r_t)` curves.
    pub filters: Vec<(String, Vec<(f64, f64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub times: Vec<f64>,
    pub filters: Vec<FilterCurve>,
    pub n_runs: usize,
    pub failed_runs: usize,
    /// Fold of the observation streams' bit patterns across runs; equal
    /// seeds and parameters give equal checksums (same-stream discipline).
    pub obs_checksum: u64,
    pub traces: Vec<RunTrace>,
}

impl RunSummary {
    pub fn filter(&self, name: &str) -> Option<&FilterCurve> {
        self.filters.iter().find(|f| f.name == name)
    }
}

/// Resultant length of the error distribution across runs.
pub fn empirical_precision(
    mu_by_run: &[Angle],
    phi_by_run: &[Angle],
) -> Result<f64, ExperimentError> {
    if mu_by_run.is_empty() || mu_by_run.len() != phi_by_run.len() {
        return Err(ExperimentError::Config("empirical_precision needs equal nonempty inputs".into()));
    }
    let mut c = 0.0;
    let mut s = 0.0;
    for (mu, phi) in mu_by_run.iter().zip(phi_by_run) {
        let d = mu.rad() - phi.rad();
        c += d.cos();
        s += d.sin();
    }
    Ok((c.hypot(s) / mu_by_run.len() as f64).min(1.0))
}

fn checksum_record(rec: &TrajectoryRecord) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut fold = |bits: u64| {
        h ^= bits;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for &d in &rec.du {
        fold(d.to_bits());
    }
    for z in &rec.z {
        match z {
            Some(z) => fold(z.to_bits()),
            None => fold(u64::MAX),
        }
    }
    h
}

/// Filter state threaded through one circular run.
enum CircState {
    Vm(VonMisesBelief),
    CircKf(VonMisesBelief),
    Gauss(GaussAdfBelief, GaussAdfVariant),
    Gvm(GvmNaturalParams, usize),
    Pf(Box<crate::particle::ParticleEnsemble>, Box<rand_chacha::ChaCha8Rng>),
}

impl CircState {
    fn estimate(&self) -> Result<(Angle, f64), ExperimentError> {
        Ok(match self {
            Self::Vm(b) | Self::CircKf(b) => (b.mu(), b.estimated_r()),
            Self::Gauss(b, _) => (b.mu(), b.estimated_r()),
            Self::Gvm(theta, quad) => {
                let m = gvm_moments(theta, *quad)?;
                let (r, mu) = m.first_moment();
                (mu, r)
            }
            Self::Pf(ens, _) => {
                let est = pf_estimate(ens)?;
                (est.mu, est.r)
            }
        })
    }

    fn step(
        &mut self,
        du: f64,
        z: Option<(Angle, f64)>,
        params: &CircularModelParams,
    ) -> Result<(), ExperimentError> {
        match self {
            Self::Vm(b) => {
                *b = vm_increment_step(*b, du, params)?;
            }
            Self::CircKf(b) => {
                *b = circkf_step_with_alpha(*b, du, z, params)?;
            }
            Self::Gauss(b, variant) => {
                *b = gauss_adf_step_with_alpha(*b, du, z, params, *variant)?;
            }
            Self::Gvm(theta, quad) => {
                let mut next = gvm_step(theta, du, params, *quad)?;
                if let Some((z, alpha)) = z {
                    next = gvm_direct_update(&next, z, alpha);
                }
                *theta = next;
            }
            Self::Pf(ens, rng) => {
                let taken = std::mem::replace(
                    ens.as_mut(),
                    crate::particle::ParticleEnsemble::empty_placeholder(),
                );
                **ens = pf_step_with_alpha(taken, du, z, params, rng.as_mut())?;
            }
        }
        Ok(())
    }
}

struct ChunkAccum {
    est_sum: Vec<Vec<f64>>,
    err_cos: Vec<Vec<f64>>,
    err_sin: Vec<Vec<f64>>,
    wall: Vec<f64>,
    used: usize,
    failed: usize,
    checksum: u64,
    traces: Vec<RunTrace>,
}

impl ChunkAccum {
    fn new(n_filters: usize, n_points: usize) -> Self {
        Self {
            est_sum: vec![vec![0.0; n_points]; n_filters],
            err_cos: vec![vec![0.0; n_points]; n_filters],
            err_sin: vec![vec![0.0; n_points]; n_filters],
            wall: vec![0.0; n_filters],
            used: 0,
            failed: 0,
            checksum: 0,
            traces: Vec::new(),
        }
    }

    fn merge(&mut self, other: ChunkAccum) {
        for f in 0..self.est_sum.len() {
            for t in 0..self.est_sum[f].len() {
                self.est_sum[f][t] += other.est_sum[f][t];
                self.err_cos[f][t] += other.err_cos[f][t];
                self.err_sin[f][t] += other.err_sin[f][t];
            }
            self.wall[f] += other.wall[f];
        }
        self.used += other.used;
        self.failed += other.failed;
        self.checksum ^= other.checksum;
        self.traces.extend(other.traces);
    }
}

/// Runs the full Monte Carlo experiment described by `config`.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    match &config.model {
        ModelSpec::Circular(params) => run_circular_mc(config, params),
        ModelSpec::Linear(params) => run_linear_mc(config, params),
    }
}

fn run_circular_mc(
    config: &ExperimentConfig,
    params: &CircularModelParams,
) -> Result<RunSummary, ExperimentError> {
    let n_steps = (config.t_end / params.dt()).round().max(1.0) as usize;
    let n_points = n_steps + 1;
    let n_filters = config.filters.len();
    let alpha = params
        .kappa_z()
        .map(|kz| config.alpha_mode.alpha(kz, params.obs_delta()));

    let n_chunks = config.runs.div_ceil(CHUNK);
    let partials: Vec<Result<ChunkAccum, ExperimentError>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(config.runs);
            let mut acc = ChunkAccum::new(n_filters, n_points);
            for run in lo..hi {
                match run_one_circular(config, params, alpha, run, n_steps) {
                    Ok(outcome) => {
                        acc.used += 1;
                        acc.checksum ^= outcome.checksum;
                        for f in 0..n_filters {
                            for t in 0..n_points {
                                acc.est_sum[f][t] += outcome.est[f][t];
                                let d = outcome.mu[f][t] - outcome.truth[t];
                                acc.err_cos[f][t] += d.cos();
                                acc.err_sin[f][t] += d.sin();
                            }
                            acc.wall[f] += outcome.wall[f];
                        }
                        if run < config.trace_runs {
                            acc.traces.push(RunTrace {
                                run,
                                truth: outcome.truth.clone(),
                                filters: config
                                    .filters
                                    .iter()
                                    .enumerate()
                                    .map(|(f, spec)| {
                                        (
                                            spec.name(),
                                            outcome.mu[f]
                                                .iter()
                                                .zip(&outcome.est[f])
                                                .map(|(&m, &r)| (m, r))
                                                .collect(),
                                        )
                                    })
                                    .collect(),
                            });
                        }
                    }
                    Err(RunFailure::Numeric) => acc.failed += 1,
                    Err(RunFailure::Fatal(e)) => return Err(e),
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkAccum::new(n_filters, n_points);
    for p in partials {
        total.merge(p?);
    }
    if total.used == 0 {
        return Err(ExperimentError::Config("all runs failed".into()));
    }

    let times: Vec<f64> = (0..n_points).map(|i| i as f64 * params.dt()).collect();
    let m = total.used as f64;
    let filters = config
        .filters
        .iter()
        .enumerate()
        .map(|(f, spec)| FilterCurve {
            name: spec.name(),
            est: total.est_sum[f].iter().map(|s| s / m).collect(),
            emp: total.err_cos[f]
                .iter()
                .zip(&total.err_sin[f])
                .map(|(c, s)| (c.hypot(*s) / m).min(1.0))
                .collect(),
            wall_secs: total.wall[f],
        })
        .collect();

    total.traces.sort_by_key(|t| t.run);
    Ok(RunSummary {
        times,
        filters,
        n_runs: total.used,
        failed_runs: total.failed,
        obs_checksum: total.checksum,
        traces: total.traces,
    })
}

enum RunFailure {
    /// A filter's numeric guard tripped; the run is dropped and counted.
    Numeric,
    /// Setup errors that would affect every run identically.
    Fatal(ExperimentError),
}

struct CircularRunOutcome {
    truth: Vec<f64>,
    /// Per filter, per time point.
    mu: Vec<Vec<f64>>,
    est: Vec<Vec<f64>>,
    wall: Vec<f64>,
    checksum: u64,
}

fn run_one_circular(
    config: &ExperimentConfig,
    params: &CircularModelParams,
    alpha: Option<f64>,
    run: usize,
    n_steps: usize,
) -> Result<CircularRunOutcome, RunFailure> {
    let run_seed = derive_seed(config.seed, "run", run as u64);
    let mut init_rng = stream_rng(run_seed, 0, StreamPurpose::BeliefInit);

    let (phi0, belief_mu, belief_kappa) = match config.init {
        BeliefInit::Calibrated { kappa0 } => {
            let k = Precision::new(kappa0)
                .map_err(|e| RunFailure::Fatal(ExperimentError::Special(e)))?;
            (vm_sample(Angle::ZERO, k, &mut init_rng), Angle::ZERO, kappa0)
        }
        BeliefInit::AtTruth { kappa0 } => (Angle::ZERO, Angle::ZERO, kappa0),
        BeliefInit::Uniform => {
            let phi0 = Angle::new(init_rng.random::<f64>() * std::f64::consts::TAU)
                .expect("uniform draw is finite");
            (phi0, Angle::ZERO, 0.0)
        }
    };

    let rec = simulate_circular_from(
        params,
        phi0,
        config.frozen_state,
        config.alpha_mode,
        n_steps as f64 * params.dt(),
        run_seed,
    )
    .map_err(|e| RunFailure::Fatal(ExperimentError::Model(e)))?;
    let checksum = checksum_record(&rec);

    let truth: Vec<f64> = rec.phi.clone();
    let n_filters = config.filters.len();
    let mut mu = vec![Vec::with_capacity(n_steps + 1); n_filters];
    let mut est = vec![Vec::with_capacity(n_steps + 1); n_filters];
    let mut wall = vec![0.0; n_filters];

    for (f, spec) in config.filters.iter().enumerate() {
        let mut state = init_state(spec, belief_mu, belief_kappa, run_seed)
            .map_err(RunFailure::Fatal)?;
        let started = Instant::now();
        let (m0, r0) = state.estimate().map_err(|_| RunFailure::Numeric)?;
        mu[f].push(m0.rad());
        est[f].push(r0);
        for i in 0..n_steps {
            let (du, z) = rec.step_obs(i);
            let z = z.map(|z| {
                (
                    Angle::new(z).expect("simulated observations are finite"),
                    alpha.expect("z implies kappa_z"),
                )
            });
            if state.step(du, z, params).is_err() {
                return Err(RunFailure::Numeric);
            }
            let (m, r) = state.estimate().map_err(|_| RunFailure::Numeric)?;
            mu[f].push(m.rad());
            est[f].push(r);
        }
        wall[f] += started.elapsed().as_secs_f64();
    }
    Ok(CircularRunOutcome { truth, mu, est, wall, checksum })
}

fn init_state(
    spec: &FilterSpec,
    belief_mu: Angle,
    belief_kappa: f64,
    run_seed: u64,
) -> Result<CircState, ExperimentError> {
    Ok(match spec {
        FilterSpec::VmIncrement => {
            CircState::Vm(VonMisesBelief::from_raw(belief_mu.rad(), belief_kappa)?)
        }
        FilterSpec::CircKf => {
            CircState::CircKf(VonMisesBelief::from_raw(belief_mu.rad(), belief_kappa)?)
        }
        // The Gaussian benchmark cannot represent a flat prior; a uniform
        // initialization gives it a near-flat one instead.
        FilterSpec::GaussAdf(variant) => CircState::Gauss(
            GaussAdfBelief::from_raw(belief_mu.rad(), belief_kappa.max(1e-4))?,
            *variant,
        ),
        FilterSpec::Gvm { order, quad_points } => CircState::Gvm(
            GvmNaturalParams::from_von_mises(belief_mu, belief_kappa, *order)?,
            *quad_points,
        ),
        FilterSpec::Pf { n } => {
            let mut rng = stream_rng(run_seed, 0, StreamPurpose::ParticleInit);
            let init = if belief_kappa == 0.0 {
                PfInit::Uniform
            } else {
                PfInit::VonMises { mu: belief_mu, kappa: belief_kappa }
            };
            let ens = pf_init(*n, init, &mut rng)?;
            CircState::Pf(
                Box::new(ens),
                Box::new(stream_rng(run_seed, 0, StreamPurpose::ParticleFilter)),
            )
        }
        FilterSpec::Gkbf => {
            return Err(ExperimentError::Config("gkbf is not a circular filter".into()))
        }
    })
}

fn run_linear_mc(
    config: &ExperimentConfig,
    params: &LinearModelParams,
) -> Result<RunSummary, ExperimentError> {
    let n_steps = (config.t_end / params.dt).round().max(1.0) as usize;
    let n_points = n_steps + 1;
    let sigma0_2 = match config.init {
        BeliefInit::Calibrated { kappa0 } | BeliefInit::AtTruth { kappa0 } => {
            if kappa0 <= 0.0 {
                return Err(ExperimentError::Config(
                    "linear runs need kappa0 > 0 (sigma0^2 = 1/kappa0)".into(),
                ));
            }
            1.0 / kappa0
        }
        BeliefInit::Uniform => unreachable!("rejected by validate"),
    };
    let calibrated = matches!(config.init, BeliefInit::Calibrated { .. });

    let n_chunks = config.runs.div_ceil(CHUNK);
    let partials: Vec<Result<ChunkAccum, ExperimentError>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(config.runs);
            let mut acc = ChunkAccum::new(1, n_points);
            for run in lo..hi {
                let run_seed = derive_seed(config.seed, "run", run as u64);
                let x0 = if calibrated {
                    let mut rng = stream_rng(run_seed, 0, StreamPurpose::BeliefInit);
                    sigma0_2.sqrt() * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let rec = simulate_linear(params, x0, n_steps as f64 * params.dt, run_seed)?;
                acc.checksum ^= checksum_record(&rec);
                let mut belief = GaussianBelief::new(0.0, sigma0_2)?;
                let started = Instant::now();
                acc.est_sum[0][0] += belief.sigma2;
                let e0 = belief.mu - rec.phi[0];
                acc.err_cos[0][0] += e0 * e0;
                let mut failed = false;
                for i in 0..n_steps {
                    match gkbf_step(belief, rec.du[i], params) {
                        Ok(next) => belief = next,
                        Err(_) => {
                            failed = true;
                            break;
                        }
                    }
                    acc.est_sum[0][i + 1] += belief.sigma2;
                    let e = belief.mu - rec.phi[i + 1];
                    acc.err_cos[0][i + 1] += e * e;
                }
                acc.wall[0] += started.elapsed().as_secs_f64();
                if failed {
                    acc.failed += 1;
                } else {
                    acc.used += 1;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkAccum::new(1, n_points);
    for p in partials {
        total.merge(p?);
    }
    if total.used == 0 {
        return Err(ExperimentError::Config("all runs failed".into()));
    }
    let m = total.used as f64;
    Ok(RunSummary {
        times: (0..n_points).map(|i| i as f64 * params.dt).collect(),
        filters: vec![FilterCurve {
            name: "gkbf".into(),
            est: total.est_sum[0].iter().map(|s| s / m).collect(),
            emp: total.err_cos[0].iter().map(|s| s / m).collect(),
            wall_secs: total.wall[0],
        }],
        n_runs: total.used,
        failed_runs: total.failed,
        obs_checksum: total.checksum,
        traces: Vec::new(),
    })
}

/// Sweepable model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KappaU,
    KappaZ,
    Dt,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::KappaU => "kappa_u",
            Self::KappaZ => "kappa_z",
            Self::Dt => "dt",
        }
    }
}

#[derive(Debug)]
pub struct SweepCell {
    pub value: f64,
    pub summary: RunSummary,
}

/// Independent Monte Carlo per value, with per-cell derived seeds.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepCell>, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Config("sweep needs at least one value".into()));
    }
    let base = match &config.model {
        ModelSpec::Circular(p) => p,
        ModelSpec::Linear(_) => {
            return Err(ExperimentError::Config("sweeps run on the circular model".into()))
        }
    };
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let model = match param {
            SweepParam::KappaU => base.with_kappa_u(v)?,
            SweepParam::KappaZ => base.with_kappa_z(Some(v))?,
            SweepParam::Dt => base.with_dt(v)?,
        };
        let cell_config = ExperimentConfig {
            model: ModelSpec::Circular(model),
            seed: derive_seed(config.seed, "sweep", i as u64),
            ..config.clone()
        };
        out.push(SweepCell { value: v, summary: run_monte_carlo(&cell_config)? });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingEntry {
    pub name: String,
    pub median_secs: f64,
    pub reps_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub entries: Vec<TimingEntry>,
}

impl TimingReport {
    pub fn median(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.median_secs)
    }
}

/// Median-of-5 wall clock of a single full run per filter, all on the same
/// observation stream.
pub fn timing_report(config: &ExperimentConfig) -> Result<TimingReport, ExperimentError> {
    config.validate()?;
    let params = match &config.model {
        ModelSpec::Circular(p) => p,
        ModelSpec::Linear(_) => {
            return Err(ExperimentError::Config("timing runs on the circular model".into()))
        }
    };
    let n_steps = (config.t_end / params.dt()).round().max(1.0) as usize;
    let alpha = params
        .kappa_z()
        .map(|kz| config.alpha_mode.alpha(kz, params.obs_delta()));
    let timing_seed = derive_seed(config.seed, "timing", 0);
    let rec = simulate_circular_from(
        params,
        Angle::ZERO,
        config.frozen_state,
        config.alpha_mode,
        n_steps as f64 * params.dt(),
        timing_seed,
    )?;

    let kappa0 = match config.init {
        BeliefInit::Calibrated { kappa0 } | BeliefInit::AtTruth { kappa0 } => kappa0,
        BeliefInit::Uniform => 0.0,
    };

    let mut entries = Vec::new();
    for spec in &config.filters {
        let mut reps = Vec::with_capacity(5);
        for rep in 0..5 {
            let rep_seed = derive_seed(timing_seed, "rep", rep);
            let mut state = init_state(spec, Angle::ZERO, kappa0, rep_seed)?;
            let started = Instant::now();
            for i in 0..n_steps {
                let (du, z) = rec.step_obs(i);
                let z = z.map(|z| {
                    (Angle::new(z).expect("finite"), alpha.expect("z implies kappa_z"))
                });
                state.step(du, z, params)?;
            }
            let _ = state.estimate()?;
            reps.push(started.elapsed().as_secs_f64());
        }
        reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        entries.push(TimingEntry { name: spec.name(), median_secs: reps[2], reps_secs: reps });
    }
    Ok(TimingReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circ_params(kz: Option<f64>) -> CircularModelParams {
        CircularModelParams::new(1.0, 10.0, kz, 0.01, 1).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::Circular(circ_params(Some(5.0))),
            filters: vec![FilterSpec::CircKf, FilterSpec::Pf { n: 64 }],
            runs: 8,
            t_end: 0.5,
            seed: 2024,
            init: BeliefInit::Calibrated { kappa0: 2.0 },
            alpha_mode: AlphaMode::Ideal,
            frozen_state: false,
            trace_runs: 2,
        }
    }

    #[test]
    fn summary_shape_and_determinism() {
        let cfg = small_config();
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.obs_checksum, b.obs_checksum);
        assert_eq!(a.n_runs, 8);
        assert_eq!(a.failed_runs, 0);
        assert_eq!(a.times.len(), 51);
        assert_eq!(a.traces.len(), 2);
        for (fa, fb) in a.filters.iter().zip(&b.filters) {
            assert_eq!(fa.est, fb.est);
            assert_eq!(fa.emp, fb.emp);
        }
        let c = run_monte_carlo(&ExperimentConfig { seed: 2025, ..cfg }).unwrap();
        assert_ne!(a.obs_checksum, c.obs_checksum);
    }

    #[test]
    fn curves_are_probabilities() {
        let s = run_monte_carlo(&small_config()).unwrap();
        for f in &s.filters {
            assert!(f.est.iter().all(|&r| (0.0..=1.0).contains(&r)), "{}", f.name);
            assert!(f.emp.iter().all(|&r| (0.0..=1.0).contains(&r)), "{}", f.name);
        }
    }

    #[test]
    fn empirical_precision_trivia() {
        let zeros = vec![Angle::ZERO; 4];
        assert!((empirical_precision(&zeros, &zeros).unwrap() - 1.0).abs() < 1e-12);
        assert!(empirical_precision(&[], &[]).is_err());
    }

    #[test]
    fn empirical_precision_uniform_errors_cancel() {
        let mut rng = stream_rng(5, 0, StreamPurpose::BeliefInit);
        let n = 100_000;
        let mus: Vec<Angle> = (0..n)
            .map(|_| Angle::new(rng.random::<f64>() * std::f64::consts::TAU).unwrap())
            .collect();
        let phis = vec![Angle::ZERO; n];
        let r = empirical_precision(&mus, &phis).unwrap();
        assert!(r < 0.02, "r = {r}");
    }

    #[test]
    fn empirical_precision_von_mises_errors() {
        let mut rng = stream_rng(6, 0, StreamPurpose::BeliefInit);
        let n = 100_000;
        let kappa = Precision::new(3.0).unwrap();
        let mus: Vec<Angle> = (0..n).map(|_| vm_sample(Angle::ZERO, kappa, &mut rng)).collect();
        let phis = vec![Angle::ZERO; n];
        let r = empirical_precision(&mus, &phis).unwrap();
        let want = crate::special::bessel_ratio(3.0).unwrap();
        assert!((r - want).abs() < 0.01, "r = {r} vs {want}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.runs = 0;
        assert!(run_monte_carlo(&cfg).is_err());
        let mut cfg = small_config();
        cfg.filters = vec![FilterSpec::Gkbf];
        assert!(run_monte_carlo(&cfg).is_err());
        let mut cfg = small_config();
        cfg.model =
            ModelSpec::Linear(LinearModelParams::new(-1.0, 1.0, 1.0, 1.0, 0.01).unwrap());
        cfg.filters = vec![FilterSpec::CircKf];
        assert!(run_monte_carlo(&cfg).is_err());
    }

    #[test]
    fn linear_mc_runs_and_is_deterministic() {
        let cfg = ExperimentConfig {
            model: ModelSpec::Linear(LinearModelParams::new(-1.0, 1.0, 1.0, 1.0, 0.01).unwrap()),
            filters: vec![FilterSpec::Gkbf],
            runs: 16,
            t_end: 1.0,
            seed: 7,
            init: BeliefInit::Calibrated { kappa0: 1.0 },
            alpha_mode: AlphaMode::Ideal,
            frozen_state: false,
            trace_runs: 0,
        };
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a.filters[0].est, b.filters[0].est);
        assert_eq!(a.filters[0].emp, b.filters[0].emp);
        // predicted variance is the same deterministic path in every run
        assert!(a.filters[0].est[0] > 0.0);
    }

    #[test]
    fn sweep_produces_one_summary_per_value() {
        let cfg = ExperimentConfig {
            runs: 4,
            filters: vec![FilterSpec::CircKf],
            ..small_config()
        };
        let cells = sweep(&cfg, SweepParam::KappaZ, &[1.0, 10.0]).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].value, 1.0);
        assert_ne!(cells[0].summary.obs_checksum, cells[1].summary.obs_checksum);
    }

    #[test]
    fn timing_report_covers_all_filters() {
        let cfg = ExperimentConfig { runs: 1, ..small_config() };
        let report = timing_report(&cfg).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert!(report.entries.iter().all(|e| e.median_secs >= 0.0));
        assert!(report.median("circkf").is_some());
        assert!(report.median("pf64").is_some());
    }
}
