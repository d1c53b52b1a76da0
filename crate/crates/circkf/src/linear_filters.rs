//! Euclidean projection filters for linear models with increment
//! observations.
//!
//! The scalar generalized Kalman–Bucy filter integrates
//!
//! ```text
//! d mu      = a mu dt + c (a sigma^2 + sigma_x^2) / sigma_u_tilde^2 * (dU - a c mu dt)
//! d sigma^2 = [2 a sigma^2 + sigma_x^2
//!              - c^2 (a sigma^2 + sigma_x^2)^2 / sigma_u_tilde^2] dt
//! ```
//!
//! with `sigma_u_tilde^2 = c^2 sigma_x^2 + sigma_u^2`. Since both model
//! equations are linear the posterior is exactly Gaussian and the filter is
//! exact. A `Verbatim` denominator convention (`c sigma_x^2 + sigma_u^2`,
//! as printed in one derivation; identical at `c = 1`) is selectable.
//!
//! The multivariate variant projects on Gaussians with diagonal covariance:
//! only the `2N` parameters `(mu_i, sigma_ii^2)` evolve, and the variance
//! equation reduces coordinate-wise to the scalar filter whenever the system
//! matrices are diagonal.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::models::LinearModelParams;

#[derive(Debug, Clone, PartialEq)]
pub enum LinearFilterError {
    /// Variance must stay strictly positive.
    VarianceCollapse { index: usize, sigma2: f64 },
    /// Matrix dimensions are inconsistent.
    DimensionMismatch { what: &'static str },
    /// `C Sigma_x C^T + Sigma_u` must be symmetric positive definite.
    SingularObservationCovariance,
    /// Non-finite input.
    NonFinite { what: &'static str },
}

impl fmt::Display for LinearFilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VarianceCollapse { index, sigma2 } => {
                write!(f, "variance {index} became non-positive: {sigma2}")
            }
            Self::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
            Self::SingularObservationCovariance => {
                write!(f, "C Sigma_x C^T + Sigma_u is not positive definite")
            }
            Self::NonFinite { what } => write!(f, "non-finite input: {what}"),
        }
    }
}

impl std::error::Error for LinearFilterError {}

/// Gaussian posterior `(mu, sigma^2)` of the scalar filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianBelief {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, LinearFilterError> {
        if !(mu.is_finite() && sigma2.is_finite()) {
            return Err(LinearFilterError::NonFinite { what: "belief" });
        }
        if sigma2 <= 0.0 {
            return Err(LinearFilterError::VarianceCollapse { index: 0, sigma2 });
        }
        Ok(Self { mu, sigma2 })
    }
}

/// Which effective observation variance the scalar filter divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GkbfDenominator {
    /// `c^2 sigma_x^2 + sigma_u^2`, consistent with the general matrix form.
    #[default]
    SigmaTilde,
    /// `c sigma_x^2 + sigma_u^2` as printed in the scalar derivation.
    Verbatim,
}

/// One Euler step of the generalized Kalman–Bucy filter.
pub fn gkbf_step(
    belief: GaussianBelief,
    du: f64,
    params: &LinearModelParams,
) -> Result<GaussianBelief, LinearFilterError> {
    gkbf_step_with(belief, du, params, GkbfDenominator::SigmaTilde)
}

/// [`gkbf_step`] with an explicit denominator convention.
pub fn gkbf_step_with(
    belief: GaussianBelief,
    du: f64,
    params: &LinearModelParams,
    denom: GkbfDenominator,
) -> Result<GaussianBelief, LinearFilterError> {
    if !du.is_finite() {
        return Err(LinearFilterError::NonFinite { what: "du" });
    }
    let dt = params.dt;
    let s2 = belief.sigma2;
    let tilde = match denom {
        GkbfDenominator::SigmaTilde => params.sigma_u_tilde2(),
        GkbfDenominator::Verbatim => params.sigma_u_tilde2_verbatim(),
    };
    let drive = params.a * s2 + params.sigma_x2;
    let gain = params.c * drive / tilde;
    let mu = belief.mu
        + params.a * belief.mu * dt
        + gain * (du - params.a * params.c * belief.mu * dt);
    let sigma2 = s2
        + (2.0 * params.a * s2 + params.sigma_x2 - params.c * params.c * drive * drive / tilde)
            * dt;
    if sigma2 <= 0.0 {
        return Err(LinearFilterError::VarianceCollapse { index: 0, sigma2 });
    }
    Ok(GaussianBelief { mu, sigma2 })
}

/// Residual of the stationary variance equation; zero at the filter's fixed
/// point.
pub fn gkbf_variance_residual(sigma2: f64, params: &LinearModelParams) -> f64 {
    let drive = params.a * sigma2 + params.sigma_x2;
    2.0 * params.a * sigma2 + params.sigma_x2
        - params.c * params.c * drive * drive / params.sigma_u_tilde2()
}

/// Parameters of the multivariate linear model with increment observations.
///
/// Solve-based throughout: `Sigma_u_tilde = C Sigma_x C^T + Sigma_u` is
/// factorized once and never inverted explicitly. The variance-equation
/// coefficients are state-independent and precomputed.
#[derive(Debug, Clone)]
pub struct MultiLinearParams {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    sigma_x: DMatrix<f64>,
    dt: f64,
    /// `C^T Sigma_u_tilde^{-1}` (N x M), the static part of the gain.
    ct_tilde_inv: DMatrix<f64>,
    /// Diagonal of `A - Sigma_x P A` where `P = C^T Sigma_u_tilde^{-1} C`.
    lin_coef: DVector<f64>,
    /// Diagonal of `A^T P A`.
    quad_coef: DVector<f64>,
    /// Diagonal of `Sigma_x - Sigma_x P Sigma_x`.
    const_coef: DVector<f64>,
}

impl MultiLinearParams {
    pub fn new(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        sigma_x: DMatrix<f64>,
        sigma_u: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self, LinearFilterError> {
        let n = a.nrows();
        let m = c.nrows();
        if a.ncols() != n {
            return Err(LinearFilterError::DimensionMismatch { what: "A must be square" });
        }
        if c.ncols() != n {
            return Err(LinearFilterError::DimensionMismatch { what: "C must be M x N" });
        }
        if sigma_x.nrows() != n || sigma_x.ncols() != n {
            return Err(LinearFilterError::DimensionMismatch { what: "Sigma_x must be N x N" });
        }
        if sigma_u.nrows() != m || sigma_u.ncols() != m {
            return Err(LinearFilterError::DimensionMismatch { what: "Sigma_u must be M x M" });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(LinearFilterError::NonFinite { what: "dt" });
        }
        let tilde = &c * &sigma_x * c.transpose() + &sigma_u;
        let chol: Cholesky<f64, Dyn> =
            Cholesky::new(tilde).ok_or(LinearFilterError::SingularObservationCovariance)?;
        // Sigma_u_tilde^{-1} C by solve; its transpose is the static gain
        // factor C^T Sigma_u_tilde^{-1} (the factorized matrix is symmetric).
        let tilde_inv_c = chol.solve(&c); // (M x N)
        // P = C^T Sigma_u_tilde^{-1} C
        let p = c.transpose() * &tilde_inv_c;
        let lin = &a - &sigma_x * &p * &a;
        let quad = a.transpose() * &p * &a;
        let konst = &sigma_x - &sigma_x * &p * &sigma_x;
        Ok(Self {
            ct_tilde_inv: tilde_inv_c.transpose(),
            lin_coef: lin.diagonal(),
            quad_coef: quad.diagonal(),
            const_coef: konst.diagonal(),
            a,
            c,
            sigma_x,
            dt,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Gaussian posterior with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussianBelief {
    pub mu: DVector<f64>,
    pub sigma2: DVector<f64>,
}

impl DiagGaussianBelief {
    pub fn new(mu: DVector<f64>, sigma2: DVector<f64>) -> Result<Self, LinearFilterError> {
        if mu.len() != sigma2.len() {
            return Err(LinearFilterError::DimensionMismatch { what: "mu vs sigma2" });
        }
        for (i, &s) in sigma2.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(LinearFilterError::VarianceCollapse { index: i, sigma2: s });
            }
        }
        Ok(Self { mu, sigma2 })
    }
}

/// One Euler step of the diagonal-covariance multivariate projection filter.
///
/// Mean: `d mu = A mu dt + (Sigma_x + diag(sigma^2) A) C^T Sigma_u_tilde^{-1}
/// (dU - C A mu dt)`. Variances evolve by the diagonal of the matrix
/// Riccati terms; the quartic term carries coefficient one so the `N = 1`
/// case coincides with [`gkbf_step`] identically.
pub fn diag_gauss_step(
    belief: &DiagGaussianBelief,
    du: &DVector<f64>,
    params: &MultiLinearParams,
) -> Result<DiagGaussianBelief, LinearFilterError> {
    let n = params.state_dim();
    if belief.mu.len() != n {
        return Err(LinearFilterError::DimensionMismatch { what: "belief dimension" });
    }
    if du.len() != params.obs_dim() {
        return Err(LinearFilterError::DimensionMismatch { what: "observation dimension" });
    }
    let dt = params.dt;

    let a_mu = &params.a * &belief.mu;
    let innovation = du - &params.c * &a_mu * dt;
    // (Sigma_x + diag(sigma^2) A) C^T Sigma_u_tilde^{-1}
    let mut front = params.a.clone();
    for i in 0..n {
        let s = belief.sigma2[i];
        for j in 0..n {
            front[(i, j)] *= s;
        }
    }
    front += &params.sigma_x;
    let gain = front * &params.ct_tilde_inv;
    let mu = &belief.mu + a_mu * dt + gain * innovation;

    let mut sigma2 = belief.sigma2.clone();
    for i in 0..n {
        let s = belief.sigma2[i];
        let ds = 2.0 * s * params.lin_coef[i] - s * s * params.quad_coef[i] + params.const_coef[i];
        sigma2[i] = s + ds * dt;
        if sigma2[i] <= 0.0 {
            return Err(LinearFilterError::VarianceCollapse { index: i, sigma2: sigma2[i] });
        }
    }
    Ok(DiagGaussianBelief { mu, sigma2 })
}
