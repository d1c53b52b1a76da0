//! Closed-form circular filters.
//!
//! Prediction with increment observations (per step of length `dt`):
//!
//! ```text
//! d mu    = kappa_u / (kappa_phi + kappa_u) * dU
//! d kappa = -script_f(kappa) / (2 (kappa_phi + kappa_u)) * dt
//! ```
//!
//! Direct angular observations enter through the conjugate update on the
//! natural parameters `theta = kappa (cos mu, sin mu)`:
//!
//! ```text
//! theta <- theta + alpha (cos Z, sin Z)
//! ```
//!
//! which is plain vector addition in the plane: an observation aligned with
//! the current estimate lengthens the vector (certainty grows by exactly
//! `alpha`), a conflicting one shortens it. The circular Kalman filter
//! composes prediction and update each step; the composition is exact in the
//! update and reduces to the continuum SDE as `dt -> 0`.
//!
//! The Gaussian assumed-density benchmark shares the mean dynamics but
//! evolves `kappa ~ 1/sigma^2` by the Kalman–Bucy variance law mapped onto
//! the circle. Two variants of its kappa ODE are provided: `Derived`
//! applies `d(1/sigma^2) = -sigma^-4 d sigma^2` to the variance equation
//! (`d kappa = -kappa^2/(kappa_phi+kappa_u) dt`), while `Verbatim`
//! reproduces a published form with the reciprocal dependence
//! (`d kappa = -1/((kappa_phi+kappa_u) kappa^2) dt`). They coincide only at
//! `kappa = 1`; `Derived` is the default and is the variant whose
//! miscalibration matches the documented benchmark behaviour.

use std::fmt;

use crate::models::CircularModelParams;
use crate::special::{bessel_ratio_raw, ratio_deriv_raw, Angle, Precision, SpecialError};

/// Lower clamp for filter concentrations. The composed natural-parameter
/// update is regular at the origin, but the continuum mean-update gain
/// `1/kappa` and the Gaussian variance map both divide by kappa, so the
/// reported belief never sinks below this.
pub const KAPPA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    Param(SpecialError),
    /// Observation inputs must be finite.
    NonFiniteIncrement { du: f64 },
    /// A direct observation was supplied but the model has no `kappa_z`.
    MissingObservationPrecision,
    /// Gaussian variance became non-positive (cannot occur for valid
    /// parameters at small `dt`).
    VarianceCollapse { sigma2: f64 },
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Param(e) => write!(f, "invalid parameter: {e}"),
            Self::NonFiniteIncrement { du } => write!(f, "non-finite increment observation {du}"),
            Self::MissingObservationPrecision => {
                write!(f, "direct observation given but kappa_z is not set")
            }
            Self::VarianceCollapse { sigma2 } => {
                write!(f, "variance became non-positive: {sigma2}")
            }
        }
    }
}

impl std::error::Error for FilterError {}

impl From<SpecialError> for FilterError {
    fn from(e: SpecialError) -> Self {
        Self::Param(e)
    }
}

/// Von Mises posterior `(mu, kappa)` — the circKF filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesBelief {
    mu: Angle,
    kappa: f64,
}

impl VonMisesBelief {
    pub fn new(mu: Angle, kappa: Precision) -> Self {
        Self { mu, kappa: kappa.get() }
    }

    /// Convenience constructor from raw radians / concentration.
    pub fn from_raw(mu: f64, kappa: f64) -> Result<Self, FilterError> {
        Ok(Self::new(Angle::new(mu)?, Precision::new(kappa)?))
    }

    /// Uniform belief: zero concentration, conventional mean 0.
    pub fn uniform() -> Self {
        Self { mu: Angle::ZERO, kappa: 0.0 }
    }

    pub fn mu(&self) -> Angle {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Natural parameters `kappa (cos mu, sin mu)`.
    pub fn natural(&self) -> (f64, f64) {
        let (s, c) = self.mu.sin_cos();
        (self.kappa * c, self.kappa * s)
    }

    pub fn from_natural(theta1: f64, theta2: f64) -> Self {
        let kappa = theta1.hypot(theta2);
        let mu = if kappa <= 1e-300 {
            Angle::ZERO
        } else {
            Angle::new(theta2.atan2(theta1)).expect("atan2 is finite")
        };
        Self { mu, kappa }
    }

    /// Self-reported precision `r = F(kappa)`, the belief's mean resultant
    /// length.
    pub fn estimated_r(&self) -> f64 {
        bessel_ratio_raw(self.kappa)
    }
}

/// One prediction step of the von Mises increment filter.
pub fn vm_increment_step(
    belief: VonMisesBelief,
    du: f64,
    params: &CircularModelParams,
) -> Result<VonMisesBelief, FilterError> {
    if !du.is_finite() {
        return Err(FilterError::NonFiniteIncrement { du });
    }
    let mu = belief.mu + params.gain() * du;
    let kappa = decay_kappa(belief.kappa, params);
    Ok(VonMisesBelief { mu, kappa })
}

#[inline]
fn decay_kappa(kappa: f64, params: &CircularModelParams) -> f64 {
    if kappa <= KAPPA_FLOOR {
        // script_f(kappa) ~ kappa here; the decrement is below the floor's
        // resolution, and a uniform belief must stay uniform.
        return kappa;
    }
    let decay = bessel_ratio_raw(kappa) / ratio_deriv_raw(kappa) * params.decay_coef() * params.dt();
    (kappa - decay).max(KAPPA_FLOOR)
}

/// Exact Bayesian conjugate update for a direct angular observation of
/// concentration `alpha`: vector addition of the natural parameters.
pub fn vm_direct_update(belief: VonMisesBelief, z: Angle, alpha: f64) -> VonMisesBelief {
    debug_assert!(alpha >= 0.0 && alpha.is_finite());
    let (t1, t2) = belief.natural();
    let (zs, zc) = z.sin_cos();
    VonMisesBelief::from_natural(t1 + alpha * zc, t2 + alpha * zs)
}

/// One step of the circular Kalman filter: increment prediction followed,
/// when a direct observation is present, by the conjugate update with the
/// ideal concentration `xi_inv(kappa_z * obs_delta)`.
pub fn circkf_step(
    belief: VonMisesBelief,
    du: f64,
    z: Option<Angle>,
    params: &CircularModelParams,
) -> Result<VonMisesBelief, FilterError> {
    let alpha = match (z, params.ideal_alpha()) {
        (Some(_), Some(a)) => Some(a),
        (Some(_), None) => return Err(FilterError::MissingObservationPrecision),
        (None, _) => None,
    };
    circkf_step_with_alpha(belief, du, z.zip(alpha), params)
}

/// circKF step with an explicitly chosen observation concentration, for
/// callers that pick `alpha` by a non-ideal scaling mode.
pub fn circkf_step_with_alpha(
    belief: VonMisesBelief,
    du: f64,
    z: Option<(Angle, f64)>,
    params: &CircularModelParams,
) -> Result<VonMisesBelief, FilterError> {
    let predicted = vm_increment_step(belief, du, params)?;
    Ok(match z {
        Some((z, alpha)) => vm_direct_update(predicted, z, alpha),
        None => predicted,
    })
}

/// Which kappa ODE the Gaussian assumed-density benchmark integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussAdfVariant {
    /// `d kappa = -kappa^2 / (kappa_phi + kappa_u) dt`, obtained from the
    /// Kalman–Bucy variance law through `kappa = 1/sigma^2`.
    #[default]
    Derived,
    /// `d kappa = -1 / ((kappa_phi + kappa_u) kappa^2) dt`, as printed.
    Verbatim,
}

impl GaussAdfVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Derived => "derived",
            Self::Verbatim => "verbatim",
        }
    }
}

/// Gaussian assumed-density belief on the circle, `kappa ~ 1/sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussAdfBelief {
    mu: Angle,
    kappa: f64,
    floored: bool,
}

impl GaussAdfBelief {
    pub fn from_raw(mu: f64, kappa: f64) -> Result<Self, FilterError> {
        let kappa = Precision::new(kappa)?.get();
        if kappa <= 0.0 {
            return Err(FilterError::VarianceCollapse { sigma2: f64::INFINITY });
        }
        Ok(Self { mu: Angle::new(mu)?, kappa, floored: false })
    }

    pub fn mu(&self) -> Angle {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// True if any step so far clamped kappa at [`KAPPA_FLOOR`].
    pub fn floored(&self) -> bool {
        self.floored
    }

    pub fn estimated_r(&self) -> f64 {
        bessel_ratio_raw(self.kappa)
    }
}

/// One step of the Gaussian ADF benchmark with the ideal observation
/// concentration.
pub fn gauss_adf_step(
    belief: GaussAdfBelief,
    du: f64,
    z: Option<Angle>,
    params: &CircularModelParams,
    variant: GaussAdfVariant,
) -> Result<GaussAdfBelief, FilterError> {
    let alpha = match (z, params.ideal_alpha()) {
        (Some(_), Some(a)) => Some(a),
        (Some(_), None) => return Err(FilterError::MissingObservationPrecision),
        (None, _) => None,
    };
    gauss_adf_step_with_alpha(belief, du, z.zip(alpha), params, variant)
}

/// Gaussian ADF step with an explicit observation concentration. The mean
/// channel is identical to the circKF; direct observations are combined the
/// same way (conjugate vector addition on `(mu, kappa)`).
pub fn gauss_adf_step_with_alpha(
    belief: GaussAdfBelief,
    du: f64,
    z: Option<(Angle, f64)>,
    params: &CircularModelParams,
    variant: GaussAdfVariant,
) -> Result<GaussAdfBelief, FilterError> {
    if !du.is_finite() {
        return Err(FilterError::NonFiniteIncrement { du });
    }
    let mu = belief.mu + params.gain() * du;
    let rate = 2.0 * params.decay_coef(); // 1 / (kappa_phi + kappa_u)
    let k = belief.kappa;
    let dk = match variant {
        GaussAdfVariant::Derived => rate * k * k,
        GaussAdfVariant::Verbatim => rate / (k * k),
    };
    let mut kappa = k - dk * params.dt();
    let mut floored = belief.floored;
    if kappa <= KAPPA_FLOOR {
        kappa = KAPPA_FLOOR;
        floored = true;
    }
    let out = GaussAdfBelief { mu, kappa, floored };
    Ok(match z {
        Some((z, alpha)) => {
            let vm = vm_direct_update(
                VonMisesBelief { mu: out.mu, kappa: out.kappa },
                z,
                alpha,
            );
            GaussAdfBelief {
                mu: vm.mu,
                kappa: vm.kappa.max(KAPPA_FLOOR),
                floored,
            }
        }
        None => out,
    })
}
