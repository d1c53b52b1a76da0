//! Generative simulators, discretized with the Euler–Maruyama scheme.
//!
//! Circular model (time step `dt`, precisions per unit time):
//!
//! ```text
//! phi_t   ~ N(phi_{t-dt}, dt / kappa_phi)          mod 2*pi
//! dU_t    ~ N(phi_t - phi_{t-dt}, dt / kappa_u)
//! Z_t     ~ VM(phi_t, alpha(kappa_z, delta))       every obs_stride steps
//! ```
//!
//! The increment channel observes the *unwrapped* per-step displacement:
//! at the default `dt = 0.01` displacements are far below pi, so wrapping is
//! immaterial, and the unwrapped convention makes the variance law exact.
//!
//! `alpha` sets the concentration of a single direct observation. The ideal
//! choice `alpha = xi_inv(kappa_z * delta)` keeps the Fisher information
//! rate constant in the sampling step; the square-root and linear modes are
//! its small- and large-argument approximations.
//!
//! Linear model:
//!
//! ```text
//! dX_t = a X_t dt + sigma_x dW_t
//! dU_t = c dX_t + sigma_u dV_t
//! ```

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{stream_rng, StreamPurpose};
use crate::special::{vm_sample, xi_inv, Angle, Precision, SpecialError};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Param(SpecialError),
    /// `kappa_phi` must be strictly positive.
    ZeroStatePrecision,
    /// Increment observations with `kappa_u = 0` carry infinite noise.
    ZeroIncrementPrecision,
    /// Time step must be strictly positive and finite.
    BadTimeStep { dt: f64 },
    /// Need at least one step: `T >= dt`.
    HorizonTooShort { t_end: f64, dt: f64 },
    /// `obs_stride` must be at least 1.
    BadStride,
    /// Coupling coefficient `c` must be nonzero.
    ZeroCoupling,
    /// Variance rates must be valid (`sigma_x^2 > 0`, `sigma_u^2 >= 0`).
    BadVariance { what: &'static str, value: f64 },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Param(e) => write!(f, "invalid parameter: {e}"),
            Self::ZeroStatePrecision => write!(f, "kappa_phi must be > 0"),
            Self::ZeroIncrementPrecision => {
                write!(f, "kappa_u = 0: increment observations would have infinite noise")
            }
            Self::BadTimeStep { dt } => write!(f, "dt must be positive and finite, got {dt}"),
            Self::HorizonTooShort { t_end, dt } => {
                write!(f, "T = {t_end} shorter than one step dt = {dt}")
            }
            Self::BadStride => write!(f, "obs_stride must be >= 1"),
            Self::ZeroCoupling => write!(f, "coupling c must be nonzero"),
            Self::BadVariance { what, value } => write!(f, "{what} invalid: {value}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<SpecialError> for ModelError {
    fn from(e: SpecialError) -> Self {
        Self::Param(e)
    }
}

/// How the single-observation concentration `alpha(kappa_z, delta)` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    /// `xi_inv(kappa_z * delta)`: Fisher information exactly linear in the
    /// sampling step.
    Ideal,
    /// `sqrt(2 * kappa_z * delta)`: small-argument limit of the ideal map.
    Sqrt,
    /// `sqrt(kappa_z * delta)`: the same limit without the factor two, kept
    /// selectable because published figure captions are ambiguous about it.
    SqrtUnscaled,
    /// `kappa_z * delta`: Gaussian (large-argument) approximation.
    Linear,
}

impl AlphaMode {
    pub fn alpha(self, kappa_z: f64, delta: f64) -> f64 {
        let y = kappa_z * delta;
        match self {
            AlphaMode::Ideal => xi_inv(y).expect("kappa_z * delta must be finite and nonnegative"),
            AlphaMode::Sqrt => (2.0 * y).sqrt(),
            AlphaMode::SqrtUnscaled => y.sqrt(),
            AlphaMode::Linear => y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlphaMode::Ideal => "ideal",
            AlphaMode::Sqrt => "sqrt",
            AlphaMode::SqrtUnscaled => "sqrt-unscaled",
            AlphaMode::Linear => "linear",
        }
    }
}

/// Precisions of the circular generative model, all per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularModelParams {
    kappa_phi: Precision,
    kappa_u: Precision,
    kappa_z: Option<Precision>,
    dt: f64,
    obs_stride: usize,
}

impl CircularModelParams {
    pub fn new(
        kappa_phi: f64,
        kappa_u: f64,
        kappa_z: Option<f64>,
        dt: f64,
        obs_stride: usize,
    ) -> Result<Self, ModelError> {
        let kappa_phi = Precision::new(kappa_phi)?;
        if kappa_phi.get() == 0.0 {
            return Err(ModelError::ZeroStatePrecision);
        }
        let kappa_u = Precision::new(kappa_u)?;
        let kappa_z = kappa_z.map(Precision::new).transpose()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ModelError::BadTimeStep { dt });
        }
        if obs_stride == 0 {
            return Err(ModelError::BadStride);
        }
        Ok(Self { kappa_phi, kappa_u, kappa_z, dt, obs_stride })
    }

    pub fn kappa_phi(&self) -> f64 {
        self.kappa_phi.get()
    }

    pub fn kappa_u(&self) -> f64 {
        self.kappa_u.get()
    }

    pub fn kappa_z(&self) -> Option<f64> {
        self.kappa_z.map(Precision::get)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn obs_stride(&self) -> usize {
        self.obs_stride
    }

    /// Spacing of direct observations: `obs_stride * dt`.
    pub fn obs_delta(&self) -> f64 {
        self.obs_stride as f64 * self.dt
    }

    /// Increment gain `kappa_u / (kappa_phi + kappa_u)`.
    pub fn gain(&self) -> f64 {
        let ku = self.kappa_u.get();
        ku / (self.kappa_phi.get() + ku)
    }

    /// `1 / (2 (kappa_phi + kappa_u))`, the decay-rate prefactor.
    pub fn decay_coef(&self) -> f64 {
        0.5 / (self.kappa_phi.get() + self.kappa_u.get())
    }

    /// Ideal-mode observation concentration `xi_inv(kappa_z * obs_delta)`.
    pub fn ideal_alpha(&self) -> Option<f64> {
        self.kappa_z().map(|kz| AlphaMode::Ideal.alpha(kz, self.obs_delta()))
    }

    pub fn with_kappa_u(&self, kappa_u: f64) -> Result<Self, ModelError> {
        Self::new(self.kappa_phi(), kappa_u, self.kappa_z(), self.dt, self.obs_stride)
    }

    pub fn with_kappa_z(&self, kappa_z: Option<f64>) -> Result<Self, ModelError> {
        Self::new(self.kappa_phi(), self.kappa_u(), kappa_z, self.dt, self.obs_stride)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self, ModelError> {
        Self::new(self.kappa_phi(), self.kappa_u(), self.kappa_z(), dt, self.obs_stride)
    }
}

/// Drift/coupling/noise rates of the 1-D linear model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModelParams {
    pub a: f64,
    pub c: f64,
    pub sigma_x2: f64,
    pub sigma_u2: f64,
    pub dt: f64,
}

impl LinearModelParams {
    pub fn new(a: f64, c: f64, sigma_x2: f64, sigma_u2: f64, dt: f64) -> Result<Self, ModelError> {
        if !a.is_finite() {
            return Err(ModelError::BadVariance { what: "a", value: a });
        }
        if !c.is_finite() || c == 0.0 {
            return Err(ModelError::ZeroCoupling);
        }
        if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
            return Err(ModelError::BadVariance { what: "sigma_x2", value: sigma_x2 });
        }
        if !(sigma_u2.is_finite() && sigma_u2 >= 0.0) {
            return Err(ModelError::BadVariance { what: "sigma_u2", value: sigma_u2 });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ModelError::BadTimeStep { dt });
        }
        Ok(Self { a, c, sigma_x2, sigma_u2, dt })
    }

    /// Effective observation variance rate `c^2 sigma_x^2 + sigma_u^2`.
    pub fn sigma_u_tilde2(&self) -> f64 {
        self.c * self.c * self.sigma_x2 + self.sigma_u2
    }

    /// The form printed in some derivations, `c sigma_x^2 + sigma_u^2`;
    /// coincides with [`Self::sigma_u_tilde2`] at `c = 1`.
    pub fn sigma_u_tilde2_verbatim(&self) -> f64 {
        self.c * self.sigma_x2 + self.sigma_u2
    }
}

/// One simulated path with its observation streams, on the regular grid
/// `times[i] = i * dt`.
///
/// `phi[i]` is the hidden state at `times[i]` (wrapped to `[0, 2*pi)` for
/// circular models, raw for linear ones). `du[i]` and `z[i]` are the
/// observations generated by the step ending at `times[i + 1]`; `du` is
/// empty when the increment channel is absent and `z[i]` is `None` off the
/// stride grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub du: Vec<f64>,
    pub z: Vec<Option<f64>>,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn has_increments(&self) -> bool {
        !self.du.is_empty()
    }

    /// Observation at step `i` (the one ending at `times[i+1]`).
    pub fn step_obs(&self, i: usize) -> (f64, Option<f64>) {
        let du = if self.du.is_empty() { 0.0 } else { self.du[i] };
        let z = if self.z.is_empty() { None } else { self.z[i] };
        (du, z)
    }
}

fn grid(t_end: f64, dt: f64) -> Result<usize, ModelError> {
    if t_end + 1e-12 < dt {
        return Err(ModelError::HorizonTooShort { t_end, dt });
    }
    Ok((t_end / dt).round().max(1.0) as usize)
}

/// Simulates the circular model from `phi_0 = 0` with the ideal direct
/// observation mode. Identical `(params, seed)` give bit-identical records.
pub fn simulate_circular(
    params: &CircularModelParams,
    t_end: f64,
    seed: u64,
) -> Result<TrajectoryRecord, ModelError> {
    simulate_circular_from(params, Angle::ZERO, false, AlphaMode::Ideal, t_end, seed)
}

/// Full-control circular simulator.
///
/// `frozen_state` pins `phi_t = phi_0` (the constant-heading variant used in
/// step-size invariance studies) and suppresses the increment channel. With
/// a live state, `kappa_u = 0` is a domain error since increment
/// observations are requested with infinite noise.
pub fn simulate_circular_from(
    params: &CircularModelParams,
    phi0: Angle,
    frozen_state: bool,
    alpha_mode: AlphaMode,
    t_end: f64,
    seed: u64,
) -> Result<TrajectoryRecord, ModelError> {
    let n = grid(t_end, params.dt)?;
    let emit_increments = !frozen_state;
    if emit_increments && params.kappa_u.get() == 0.0 {
        return Err(ModelError::ZeroIncrementPrecision);
    }

    let dt = params.dt;
    let state_sd = (dt / params.kappa_phi.get()).sqrt();
    let incr_sd = if emit_increments { (dt / params.kappa_u.get()).sqrt() } else { 0.0 };
    let alpha = params
        .kappa_z()
        .map(|kz| Precision::new(alpha_mode.alpha(kz, params.obs_delta())))
        .transpose()?;

    let mut state_rng = stream_rng(seed, 0, StreamPurpose::StatePath);
    let mut incr_rng = stream_rng(seed, 0, StreamPurpose::IncrementNoise);
    let mut obs_rng = stream_rng(seed, 0, StreamPurpose::DirectObs);

    let mut times = Vec::with_capacity(n + 1);
    let mut phi = Vec::with_capacity(n + 1);
    let mut du = Vec::with_capacity(if emit_increments { n } else { 0 });
    let mut z = Vec::with_capacity(if alpha.is_some() { n } else { 0 });

    let mut cur = phi0;
    times.push(0.0);
    phi.push(cur.rad());
    for i in 1..=n {
        let dphi = if frozen_state {
            0.0
        } else {
            state_sd * state_rng.sample::<f64, _>(StandardNormal)
        };
        cur = cur + dphi;
        times.push(i as f64 * dt);
        phi.push(cur.rad());
        if emit_increments {
            du.push(dphi + incr_sd * incr_rng.sample::<f64, _>(StandardNormal));
        }
        if let Some(alpha) = alpha {
            if i % params.obs_stride == 0 {
                z.push(Some(vm_sample(cur, alpha, &mut obs_rng).rad()));
            } else {
                z.push(None);
            }
        }
    }
    Ok(TrajectoryRecord { times, phi, du, z })
}

/// Euler–Maruyama path of the linear model with increment observations.
pub fn simulate_linear(
    params: &LinearModelParams,
    x0: f64,
    t_end: f64,
    seed: u64,
) -> Result<TrajectoryRecord, ModelError> {
    let n = grid(t_end, params.dt)?;
    let dt = params.dt;
    let state_sd = (params.sigma_x2 * dt).sqrt();
    let obs_sd = (params.sigma_u2 * dt).sqrt();

    let mut state_rng = stream_rng(seed, 0, StreamPurpose::StatePath);
    let mut incr_rng = stream_rng(seed, 0, StreamPurpose::IncrementNoise);

    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut du = Vec::with_capacity(n);

    let mut x = x0;
    times.push(0.0);
    xs.push(x);
    for i in 1..=n {
        let dx = params.a * x * dt + state_sd * state_rng.sample::<f64, _>(StandardNormal);
        x += dx;
        times.push(i as f64 * dt);
        xs.push(x);
        du.push(params.c * dx + obs_sd * incr_rng.sample::<f64, _>(StandardNormal));
    }
    Ok(TrajectoryRecord { times, phi: xs, du, z: Vec::new() })
}

/// Draws one direct angular observation around `phi` with the concentration
/// implied by `(kappa_z, delta)` under the chosen mode.
pub fn sample_direct_obs<R: Rng + ?Sized>(
    phi: Angle,
    kappa_z: Precision,
    delta: f64,
    mode: AlphaMode,
    rng: &mut R,
) -> Angle {
    debug_assert!(delta > 0.0);
    let alpha = mode.alpha(kappa_z.get(), delta);
    vm_sample(phi, Precision::new(alpha).expect("alpha is finite and nonnegative"), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{bessel_ratio, unwrap_path, xi};

    fn base_params() -> CircularModelParams {
        CircularModelParams::new(1.0, 10.0, None, 0.01, 1).unwrap()
    }

    #[test]
    fn determinism_bit_identical() {
        let p = CircularModelParams::new(1.0, 10.0, Some(5.0), 0.01, 2).unwrap();
        let a = simulate_circular(&p, 3.0, 99).unwrap();
        let b = simulate_circular(&p, 3.0, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_circular(&p, 3.0, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn frozen_diffusion_limit() {
        // kappa_phi -> infinity limit, implemented as 1e12: path is constant
        // within 1e-4 over T=1.
        let p = CircularModelParams::new(1e12, 10.0, None, 0.01, 1).unwrap();
        let rec = simulate_circular(&p, 1.0, 5).unwrap();
        assert_eq!(rec.times.len(), 101);
        for &x in &rec.phi {
            let d = Angle::new(x).unwrap().signed_delta(Angle::ZERO).abs();
            assert!(d < 1e-4);
        }
    }

    #[test]
    fn noiseless_increment_channel() {
        let p = CircularModelParams::new(1.0, 1e12, None, 0.01, 1).unwrap();
        let rec = simulate_circular(&p, 1.0, 6).unwrap();
        let path = unwrap_path(
            &rec.phi.iter().map(|&x| Angle::new(x).unwrap()).collect::<Vec<_>>(),
        );
        for i in 0..rec.n_steps() {
            let truth = path[i + 1] - path[i];
            assert!((rec.du[i] - truth).abs() < 1e-4, "step {i}");
        }
    }

    #[test]
    fn diffusion_variance_law() {
        // Var(phi_T - phi_0) = T / kappa_phi over many runs.
        let p = base_params();
        let runs = 10_000;
        let mut sq = 0.0;
        for run in 0..runs {
            let rec = simulate_circular(&p, 1.0, 70_000 + run).unwrap();
            let path = unwrap_path(
                &rec.phi.iter().map(|&x| Angle::new(x).unwrap()).collect::<Vec<_>>(),
            );
            let d = path[path.len() - 1] - path[0];
            sq += d * d;
        }
        let var = sq / runs as f64;
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn increment_noise_consistency() {
        // sum(dU) - total displacement ~ N(0, T/kappa_u) across runs.
        let p = base_params();
        let runs = 4000;
        let mut sq = 0.0;
        let mut mean = 0.0;
        for run in 0..runs {
            let rec = simulate_circular(&p, 1.0, 300_000 + run).unwrap();
            let path = unwrap_path(
                &rec.phi.iter().map(|&x| Angle::new(x).unwrap()).collect::<Vec<_>>(),
            );
            let resid: f64 =
                rec.du.iter().sum::<f64>() - (path[path.len() - 1] - path[0]);
            mean += resid;
            sq += resid * resid;
        }
        mean /= runs as f64;
        let var = sq / runs as f64;
        let want = 1.0 / 10.0; // T / kappa_u
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((var - want).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn zero_kappa_u_is_domain_error() {
        let p = CircularModelParams::new(1.0, 0.0, None, 0.01, 1).unwrap();
        assert_eq!(simulate_circular(&p, 1.0, 1), Err(ModelError::ZeroIncrementPrecision));
        // but the frozen-state (direct-only) variant is fine
        let p = CircularModelParams::new(1.0, 0.0, Some(10.0), 0.01, 1).unwrap();
        let rec =
            simulate_circular_from(&p, Angle::ZERO, true, AlphaMode::Ideal, 1.0, 1).unwrap();
        assert!(rec.du.is_empty());
        assert!(rec.z.iter().all(|z| z.is_some()));
    }

    #[test]
    fn direct_obs_every_stride() {
        let p = CircularModelParams::new(1.0, 10.0, Some(3.0), 0.01, 4).unwrap();
        let rec = simulate_circular(&p, 1.0, 8).unwrap();
        for (i, z) in rec.z.iter().enumerate() {
            assert_eq!(z.is_some(), (i + 1) % 4 == 0, "step {i}");
        }
    }

    #[test]
    fn direct_obs_uniform_when_uninformative() {
        // kappa_z * delta = 0 is not reachable through params (kappa_z = 0 is),
        // and alpha = xi_inv(0) = 0 must give uniform draws.
        let mut rng = stream_rng(3, 0, StreamPurpose::DirectObs);
        let kz = Precision::ZERO;
        let mut c = 0.0;
        let mut s = 0.0;
        let n = 50_000;
        for _ in 0..n {
            let (sin, cos) =
                sample_direct_obs(Angle::ZERO, kz, 0.01, AlphaMode::Ideal, &mut rng).sin_cos();
            c += cos;
            s += sin;
        }
        let r = c.hypot(s) / n as f64;
        assert!(r < 0.02, "r = {r}");
    }

    #[test]
    fn direct_obs_fisher_information_scaling() {
        // Empirical Fisher information at kappa_z * delta = 1 equals
        // xi(xi_inv(1)) = 1 within 3%, using the score alpha * sin(Z - phi).
        let alpha = AlphaMode::Ideal.alpha(100.0, 0.01);
        assert!((xi(alpha).unwrap() - 1.0).abs() < 1e-10);
        let mut rng = stream_rng(4, 0, StreamPurpose::DirectObs);
        let kz = Precision::new(100.0).unwrap();
        let phi = Angle::new(2.0).unwrap();
        let n = 1_000_000;
        let mut info = 0.0;
        for _ in 0..n {
            let z = sample_direct_obs(phi, kz, 0.01, AlphaMode::Ideal, &mut rng);
            let sc = alpha * z.signed_delta(phi).sin();
            info += sc * sc;
        }
        info /= n as f64;
        assert!((info - 1.0).abs() < 0.03, "info = {info}");
    }

    #[test]
    fn ideal_and_linear_agree_for_large_argument() {
        let ideal = AlphaMode::Ideal.alpha(100.0, 1.0);
        let linear = AlphaMode::Linear.alpha(100.0, 1.0);
        assert!(((ideal - linear) / linear).abs() < 0.01);
    }

    #[test]
    fn information_rate_invariance_in_delta() {
        // alpha F(alpha) / delta constant across delta in ideal mode.
        let kz = 7.0;
        let base = {
            let a = AlphaMode::Ideal.alpha(kz, 1e-4);
            a * bessel_ratio(a).unwrap() / 1e-4
        };
        for &delta in &[1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let a = AlphaMode::Ideal.alpha(kz, delta);
            let rate = a * bessel_ratio(a).unwrap() / delta;
            assert!((rate - base).abs() <= 1e-10 * base.max(1.0), "delta={delta}");
        }
    }

    #[test]
    fn linear_brownian_variance() {
        let p = LinearModelParams::new(0.0, 1.0, 1.0, 1.0, 0.01).unwrap();
        let runs = 10_000;
        let mut sq = 0.0;
        for run in 0..runs {
            let rec = simulate_linear(&p, 0.0, 1.0, 40_000 + run).unwrap();
            let x = rec.phi[rec.phi.len() - 1];
            sq += x * x;
        }
        let var = sq / runs as f64;
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn linear_ou_stationary_variance() {
        // a = -1, sigma_x^2 = 2: stationary variance sigma_x^2 / (2|a|) = 1.
        let p = LinearModelParams::new(-1.0, 1.0, 2.0, 1.0, 0.01).unwrap();
        let rec = simulate_linear(&p, 0.0, 4000.0, 17).unwrap();
        let skip = 1000;
        let xs = &rec.phi[skip..];
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "var = {var}");
    }

    #[test]
    fn linear_noiseless_coupling() {
        let p = LinearModelParams::new(-0.5, 1.0, 1.0, 0.0, 0.01).unwrap();
        let rec = simulate_linear(&p, 0.3, 2.0, 21).unwrap();
        let sum: f64 = rec.du.iter().sum();
        let displacement = rec.phi[rec.phi.len() - 1] - rec.phi[0];
        assert!((sum - displacement).abs() < 1e-12);
    }

    #[test]
    fn param_validation() {
        assert!(CircularModelParams::new(0.0, 1.0, None, 0.01, 1).is_err());
        assert!(CircularModelParams::new(1.0, -1.0, None, 0.01, 1).is_err());
        assert!(CircularModelParams::new(1.0, 1.0, None, 0.0, 1).is_err());
        assert!(CircularModelParams::new(1.0, 1.0, None, 0.01, 0).is_err());
        assert!(LinearModelParams::new(1.0, 0.0, 1.0, 1.0, 0.01).is_err());
        assert!(LinearModelParams::new(1.0, 1.0, 0.0, 1.0, 0.01).is_err());
        let p = base_params();
        assert!(simulate_circular(&p, 0.001, 1).is_err());
    }
}
