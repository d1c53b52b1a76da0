//! Sequential importance sampling/resampling particle filter for the
//! circular model — the asymptotically exact benchmark.
//!
//! Particles move through the proposal that already conditions on the
//! increment observation,
//!
//! ```text
//! phi_j <- N(phi_j + kappa_u/(kappa_phi + kappa_u) * dU,
//!            dt / (kappa_phi + kappa_u))            mod 2 pi
//! ```
//!
//! so the increment channel contributes no weight term; only direct
//! observations reweight, by the von Mises likelihood with concentration
//! `alpha = xi_inv(kappa_z * delta)`. Weights live in log space and are
//! renormalized with log-sum-exp every step; systematic resampling fires
//! whenever the effective sample size drops below `N/2`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::models::CircularModelParams;
use crate::special::{kappa_from_r, Angle, SpecialError};

#[derive(Debug, Clone, PartialEq)]
pub enum ParticleError {
    /// Need at least one particle.
    EmptyEnsemble,
    /// All weights collapsed (non-finite normalization).
    Degenerate { log_norm: f64 },
    /// A direct observation was supplied but the model has no `kappa_z`.
    MissingObservationPrecision,
    /// Invalid input.
    Param(SpecialError),
}

impl fmt::Display for ParticleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyEnsemble => write!(f, "particle ensemble must be nonempty"),
            Self::Degenerate { log_norm } => {
                write!(f, "weight degeneracy: log normalizer {log_norm}")
            }
            Self::MissingObservationPrecision => {
                write!(f, "direct observation given but kappa_z is not set")
            }
            Self::Param(e) => write!(f, "invalid parameter: {e}"),
        }
    }
}

impl std::error::Error for ParticleError {}

impl From<SpecialError> for ParticleError {
    fn from(e: SpecialError) -> Self {
        Self::Param(e)
    }
}

/// Weighted angular ensemble. Log-weights are kept normalized
/// (`logsumexp = 0`); the effective sample size `1 / sum w^2` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    angles: Vec<f64>,
    log_weights: Vec<f64>,
    ess: f64,
}

/// Ensemble initializers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PfInit {
    Uniform,
    VonMises { mu: Angle, kappa: f64 },
    Point { phi: Angle },
}

impl ParticleEnsemble {
    /// Zero-capacity stand-in used when moving an ensemble out of a slot.
    pub(crate) fn empty_placeholder() -> Self {
        Self { angles: Vec::new(), log_weights: Vec::new(), ess: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Materialized linear weights (normalized to sum one).
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }
}

fn ess_of(log_weights: &[f64]) -> f64 {
    let sum_sq: f64 = log_weights.iter().map(|lw| (2.0 * lw).exp()).sum();
    1.0 / sum_sq
}

/// Creates an ensemble of `n` equally weighted particles.
pub fn pf_init<R: Rng + ?Sized>(
    n: usize,
    init: PfInit,
    rng: &mut R,
) -> Result<ParticleEnsemble, ParticleError> {
    if n == 0 {
        return Err(ParticleError::EmptyEnsemble);
    }
    let angles: Vec<f64> = match init {
        PfInit::Uniform => (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect(),
        PfInit::VonMises { mu, kappa } => {
            let kappa = crate::special::Precision::new(kappa)?;
            (0..n).map(|_| crate::special::vm_sample(mu, kappa, rng).rad()).collect()
        }
        PfInit::Point { phi } => vec![phi.rad(); n],
    };
    let lw = -(n as f64).ln();
    Ok(ParticleEnsemble { angles, log_weights: vec![lw; n], ess: n as f64 })
}

/// One filter step with the ideal observation concentration from `params`.
pub fn pf_step<R: Rng + ?Sized>(
    ens: ParticleEnsemble,
    du: f64,
    z: Option<Angle>,
    params: &CircularModelParams,
    rng: &mut R,
) -> Result<ParticleEnsemble, ParticleError> {
    let alpha = match (z, params.ideal_alpha()) {
        (Some(_), Some(a)) => Some(a),
        (Some(_), None) => return Err(ParticleError::MissingObservationPrecision),
        (None, _) => None,
    };
    pf_step_with_alpha(ens, du, z.zip(alpha), params, rng)
}

/// One filter step with an explicit observation concentration.
pub fn pf_step_with_alpha<R: Rng + ?Sized>(
    mut ens: ParticleEnsemble,
    du: f64,
    z: Option<(Angle, f64)>,
    params: &CircularModelParams,
    rng: &mut R,
) -> Result<ParticleEnsemble, ParticleError> {
    if ens.is_empty() {
        return Err(ParticleError::EmptyEnsemble);
    }
    let n = ens.len();
    let shift = params.gain() * du;
    let spread = (params.dt() / (params.kappa_phi() + params.kappa_u())).sqrt();

    for phi in &mut ens.angles {
        let noise: f64 = rng.sample(StandardNormal);
        *phi = wrap_fast(*phi + shift + spread * noise);
    }

    if let Some((z, alpha)) = z {
        let zr = z.rad();
        // Only the state-dependent part of the log-likelihood matters; the
        // normalizer cancels in the renormalization below.
        for (lw, phi) in ens.log_weights.iter_mut().zip(&ens.angles) {
            *lw += alpha * (zr - *phi).cos();
        }
        let m = ens.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = m + ens.log_weights.iter().map(|lw| (lw - m).exp()).sum::<f64>().ln();
        if !log_norm.is_finite() {
            return Err(ParticleError::Degenerate { log_norm });
        }
        for lw in &mut ens.log_weights {
            *lw -= log_norm;
        }
        ens.ess = ess_of(&ens.log_weights);
        if ens.ess < n as f64 / 2.0 {
            systematic_resample(&mut ens, rng);
        }
    }
    // Without a direct observation the proposal absorbs the increment
    // exactly: weights, and therefore the ESS, are untouched.
    Ok(ens)
}

#[inline]
fn wrap_fast(mut x: f64) -> f64 {
    // Displacements per step are tiny; one conditional pass nearly always
    // suffices and beats rem_euclid in the hot loop.
    while x >= std::f64::consts::TAU {
        x -= std::f64::consts::TAU;
    }
    while x < 0.0 {
        x += std::f64::consts::TAU;
    }
    x
}

fn systematic_resample<R: Rng + ?Sized>(ens: &mut ParticleEnsemble, rng: &mut R) {
    let n = ens.len();
    let offset: f64 = rng.random();
    let mut resampled = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut idx = 0usize;
    for i in 0..n {
        let target = (i as f64 + offset) / n as f64;
        while cumulative + ens.log_weights[idx].exp() < target && idx < n - 1 {
            cumulative += ens.log_weights[idx].exp();
            idx += 1;
        }
        resampled.push(ens.angles[idx]);
    }
    ens.angles = resampled;
    let lw = -(n as f64).ln();
    for w in &mut ens.log_weights {
        *w = lw;
    }
    ens.ess = n as f64;
}

/// Point estimate from the weighted first circular moment; `kappa` is the
/// von Mises concentration matching the resultant length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfEstimate {
    pub mu: Angle,
    pub r: f64,
    pub kappa: f64,
    /// Set when `r` was within `1e-12` of one and `kappa` had to be capped.
    pub kappa_capped: bool,
}

pub fn pf_estimate(ens: &ParticleEnsemble) -> Result<PfEstimate, ParticleError> {
    if ens.is_empty() {
        return Err(ParticleError::EmptyEnsemble);
    }
    // The weighted moment of circular_moment, computed in place; this runs
    // once per filter step, so no intermediate weight/angle buffers.
    let mut c = 0.0;
    let mut s = 0.0;
    for (&phi, &lw) in ens.angles.iter().zip(&ens.log_weights) {
        let w = lw.exp();
        let (si, co) = phi.sin_cos();
        c += w * co;
        s += w * si;
    }
    let r = c.hypot(s).min(1.0);
    let mu = if r <= 1e-14 {
        Angle::ZERO
    } else {
        Angle::new(s.atan2(c)).expect("atan2 is finite")
    };
    let cap = 1.0 - 1e-12;
    let (kappa, capped) = if r >= cap {
        (kappa_from_r(cap)?, true)
    } else {
        (kappa_from_r(r)?, false)
    };
    Ok(PfEstimate { mu, r, kappa, kappa_capped: capped })
}
