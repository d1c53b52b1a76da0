//! Generic 1-D exponential-family projection engine on the circle.
//!
//! Works with generalized von Mises densities
//!
//! ```text
//! p(phi) = exp( sum_{k=1..K} a_k cos(k phi) + b_k sin(k phi) ) / Z(a, b)
//! ```
//!
//! whose normalizer has no closed form, so expectations, the log normalizer
//! and the Fisher matrix are evaluated by periodic trapezoid quadrature
//! (spectrally accurate for these smooth periodic integrands). `K = 1`
//! recovers the von Mises family in natural coordinates, which gives the
//! strongest cross-check: trajectories of this engine must match the
//! closed-form filter in `circular_filters`.
//!
//! The natural-parameter SDE projected from the increment-observation
//! filtering problem reads, per sufficient statistic `T` with harmonic `k`,
//!
//! ```text
//! d theta = G^{-1} [ -k^2 eta / (2 (kappa_phi + kappa_u)) dt
//!                    + kappa_u / (kappa_phi + kappa_u) * <T'> o dU ]
//! ```
//!
//! in Stratonovich form, integrated with a Heun predictor–corrector (an
//! Euler–Maruyama step would integrate the Ito equation instead, since the
//! diffusion coefficient is state-dependent). The inverse-metric action is
//! a symmetric solve; the matrix is never inverted explicitly.
//!
//! Parameter ordering throughout: `(a_1..a_K, b_1..b_K)`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::models::CircularModelParams;
use crate::special::Angle;

/// Condition-number guard for the Fisher matrix solve.
pub const MAX_CONDITION: f64 = 1e10;

/// Default quadrature resolution.
pub const DEFAULT_QUAD_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum ExpFamError {
    /// Quadrature grids must have at least 64 points and a power-of-two size.
    BadQuadPoints { quad_points: usize },
    /// Natural parameters must be finite, with equal-length `a` and `b`.
    BadParams,
    /// The unnormalized density overflowed even after stabilization.
    Overflow,
    /// Fisher matrix condition number beyond [`MAX_CONDITION`], or loss of
    /// positive definiteness.
    IllConditioned { cond: f64 },
}

impl fmt::Display for ExpFamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadQuadPoints { quad_points } => {
                write!(f, "quad_points must be a power of two >= 64, got {quad_points}")
            }
            Self::BadParams => write!(f, "natural parameters must be finite with K >= 1"),
            Self::Overflow => write!(f, "density overflow"),
            Self::IllConditioned { cond } => {
                write!(f, "Fisher matrix ill-conditioned (cond ~ {cond:.3e})")
            }
        }
    }
}

impl std::error::Error for ExpFamError {}

/// Natural parameters `(a, b)` of a generalized von Mises density.
#[derive(Debug, Clone, PartialEq)]
pub struct GvmNaturalParams {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl GvmNaturalParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, ExpFamError> {
        if a.is_empty() || a.len() != b.len() {
            return Err(ExpFamError::BadParams);
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(ExpFamError::BadParams);
        }
        Ok(Self { a, b })
    }

    /// Embeds a von Mises `(mu, kappa)` belief as the `k = 1` harmonic of a
    /// `K`-order family (higher harmonics zero).
    pub fn from_von_mises(mu: Angle, kappa: f64, order: usize) -> Result<Self, ExpFamError> {
        if order == 0 || !kappa.is_finite() || kappa < 0.0 {
            return Err(ExpFamError::BadParams);
        }
        let (s, c) = mu.sin_cos();
        let mut a = vec![0.0; order];
        let mut b = vec![0.0; order];
        a[0] = kappa * c;
        b[0] = kappa * s;
        Ok(Self { a, b })
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `(mu, kappa)` of the `k = 1` harmonic; the exact von Mises
    /// parameters when the higher harmonics vanish.
    pub fn von_mises_coords(&self) -> (Angle, f64) {
        let kappa = self.a[0].hypot(self.b[0]);
        let mu = if kappa <= 1e-300 {
            Angle::ZERO
        } else {
            Angle::new(self.b[0].atan2(self.a[0])).expect("atan2 is finite")
        };
        (mu, kappa)
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().chain(self.b.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Expectation parameters and log normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct GvmMoments {
    pub eta_cos: Vec<f64>,
    pub eta_sin: Vec<f64>,
    pub log_z: f64,
}

impl GvmMoments {
    /// Resultant length of the first harmonic, the density's estimated
    /// precision `r`.
    pub fn first_moment(&self) -> (f64, Angle) {
        let r = self.eta_cos[0].hypot(self.eta_sin[0]).min(1.0);
        let mu = if r <= 1e-300 {
            Angle::ZERO
        } else {
            Angle::new(self.eta_sin[0].atan2(self.eta_cos[0])).expect("atan2 is finite")
        };
        (r, mu)
    }
}

fn check_quad(quad_points: usize) -> Result<(), ExpFamError> {
    if quad_points < 64 || !quad_points.is_power_of_two() {
        return Err(ExpFamError::BadQuadPoints { quad_points });
    }
    Ok(())
}

/// Normalized density weights on the uniform grid, with the common scale
/// removed before exponentiation.
struct GridDensity {
    /// `w[j] ~ p(phi_j)`, normalized so `sum w = 1`.
    w: Vec<f64>,
    /// `log Z` including the `2 pi / n` quadrature weight.
    log_z: f64,
    /// Per-harmonic tables `cos(k phi_j)`, `sin(k phi_j)`.
    cos_t: Vec<Vec<f64>>,
    sin_t: Vec<Vec<f64>>,
}

fn grid_density(theta: &GvmNaturalParams, n: usize) -> Result<GridDensity, ExpFamError> {
    let order = theta.order();
    let step = std::f64::consts::TAU / n as f64;
    let mut cos_t = vec![vec![0.0; n]; order];
    let mut sin_t = vec![vec![0.0; n]; order];
    for k in 0..order {
        let kf = (k + 1) as f64;
        for j in 0..n {
            let (s, c) = (kf * j as f64 * step).sin_cos();
            cos_t[k][j] = c;
            sin_t[k][j] = s;
        }
    }
    let mut s = vec![0.0; n];
    for k in 0..order {
        let (ak, bk) = (theta.a[k], theta.b[k]);
        for j in 0..n {
            s[j] += ak * cos_t[k][j] + bk * sin_t[k][j];
        }
    }
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(ExpFamError::Overflow);
    }
    let mut w: Vec<f64> = s.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(ExpFamError::Overflow);
    }
    let log_z = m + (total * step).ln();
    if !log_z.is_finite() {
        return Err(ExpFamError::Overflow);
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(GridDensity { w, log_z, cos_t, sin_t })
}

/// Log normalizer and expectation parameters by periodic trapezoid
/// quadrature with log-sum-exp stabilization.
pub fn gvm_moments(theta: &GvmNaturalParams, quad_points: usize) -> Result<GvmMoments, ExpFamError> {
    check_quad(quad_points)?;
    let g = grid_density(theta, quad_points)?;
    let order = theta.order();
    let mut eta_cos = vec![0.0; order];
    let mut eta_sin = vec![0.0; order];
    for k in 0..order {
        let mut ec = 0.0;
        let mut es = 0.0;
        for j in 0..quad_points {
            ec += g.w[j] * g.cos_t[k][j];
            es += g.w[j] * g.sin_t[k][j];
        }
        eta_cos[k] = ec;
        eta_sin[k] = es;
    }
    Ok(GvmMoments { eta_cos, eta_sin, log_z: g.log_z })
}

/// Fisher information matrix `G = E[T T^T] - eta eta^T` in the
/// `(a_1..a_K, b_1..b_K)` ordering: the covariance of the sufficient
/// statistics, equal to the Hessian of `log Z`.
pub fn gvm_fisher(theta: &GvmNaturalParams, quad_points: usize) -> Result<DMatrix<f64>, ExpFamError> {
    check_quad(quad_points)?;
    let g = grid_density(theta, quad_points)?;
    Ok(fisher_from_grid(theta.order(), quad_points, &g).0)
}

fn fisher_from_grid(order: usize, n: usize, g: &GridDensity) -> (DMatrix<f64>, DVector<f64>) {
    let dim = 2 * order;
    let mut eta: DVector<f64> = DVector::zeros(dim);
    let mut second: DMatrix<f64> = DMatrix::zeros(dim, dim);
    let mut stats = vec![0.0; dim];
    for j in 0..n {
        for k in 0..order {
            stats[k] = g.cos_t[k][j];
            stats[order + k] = g.sin_t[k][j];
        }
        let w = g.w[j];
        for p in 0..dim {
            eta[p] += w * stats[p];
            for q in p..dim {
                second[(p, q)] += w * stats[p] * stats[q];
            }
        }
    }
    let mut fisher = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        for q in p..dim {
            let v = second[(p, q)] - eta[p] * eta[q];
            fisher[(p, q)] = v;
            fisher[(q, p)] = v;
        }
    }
    (fisher, eta)
}

struct Flow {
    /// Drift of theta (time part), after the metric solve.
    drift: DVector<f64>,
    /// Diffusion of theta (the dU coefficient), after the metric solve.
    diffusion: DVector<f64>,
}

fn flow_at(
    theta: &GvmNaturalParams,
    params: &CircularModelParams,
    quad_points: usize,
) -> Result<Flow, ExpFamError> {
    let order = theta.order();
    let dim = 2 * order;
    let g = grid_density(theta, quad_points)?;
    let (fisher, eta) = fisher_from_grid(order, quad_points, &g);

    let chol: Option<Cholesky<f64, Dyn>> = Cholesky::new(fisher.clone());
    let chol = match chol {
        Some(c) => c,
        None => return Err(ExpFamError::IllConditioned { cond: condition_number(&fisher) }),
    };
    let cond = condition_number(&fisher);
    if cond > MAX_CONDITION {
        return Err(ExpFamError::IllConditioned { cond });
    }

    let decay = params.decay_coef(); // 1 / (2 (kappa_phi + kappa_u))
    let gain = params.gain(); // kappa_u / (kappa_phi + kappa_u)
    let mut drift = DVector::zeros(dim);
    let mut diffusion = DVector::zeros(dim);
    for k in 0..order {
        let kf = (k + 1) as f64;
        let k2 = kf * kf;
        // <L~[T]> = -k^2 eta / (2 (kappa_phi + kappa_u)) for both harmonics
        drift[k] = -k2 * eta[k] * decay;
        drift[order + k] = -k2 * eta[order + k] * decay;
        // <T'> : d/dphi cos(k phi) = -k sin(k phi), d/dphi sin = +k cos
        diffusion[k] = -gain * kf * eta[order + k];
        diffusion[order + k] = gain * kf * eta[k];
    }
    Ok(Flow { drift: chol.solve(&drift), diffusion: chol.solve(&diffusion) })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// One Stratonovich–Heun step of the natural-parameter projection filter.
pub fn gvm_step(
    theta: &GvmNaturalParams,
    du: f64,
    params: &CircularModelParams,
    quad_points: usize,
) -> Result<GvmNaturalParams, ExpFamError> {
    check_quad(quad_points)?;
    if !du.is_finite() {
        return Err(ExpFamError::BadParams);
    }
    let dt = params.dt();
    let dim = 2 * theta.order();
    let stage1 = flow_at(theta, params, quad_points)?;

    let mut predictor = Vec::with_capacity(dim);
    for i in 0..dim {
        let base = if i < theta.order() { theta.a[i] } else { theta.b[i - theta.order()] };
        predictor.push(base + stage1.drift[i] * dt + stage1.diffusion[i] * du);
    }
    let pred = GvmNaturalParams::new(
        predictor[..theta.order()].to_vec(),
        predictor[theta.order()..].to_vec(),
    )?;
    let stage2 = flow_at(&pred, params, quad_points)?;

    let mut a = theta.a.clone();
    let mut b = theta.b.clone();
    for i in 0..theta.order() {
        a[i] += 0.5 * (stage1.drift[i] + stage2.drift[i]) * dt
            + 0.5 * (stage1.diffusion[i] + stage2.diffusion[i]) * du;
        b[i] += 0.5 * (stage1.drift[theta.order() + i] + stage2.drift[theta.order() + i]) * dt
            + 0.5
                * (stage1.diffusion[theta.order() + i] + stage2.diffusion[theta.order() + i])
                * du;
    }
    GvmNaturalParams::new(a, b)
}

/// Conjugate direct-observation update: the von Mises likelihood lives in
/// the `k = 1` sufficient statistics, so only that harmonic moves.
pub fn gvm_direct_update(theta: &GvmNaturalParams, z: Angle, alpha: f64) -> GvmNaturalParams {
    debug_assert!(alpha >= 0.0 && alpha.is_finite());
    let mut a = theta.a.clone();
    let mut b = theta.b.clone();
    let (s, c) = z.sin_cos();
    a[0] += alpha * c;
    b[0] += alpha * s;
    GvmNaturalParams { a, b }
}

/// Density samples on a uniform grid, for export and plotting.
pub fn gvm_density_grid(
    theta: &GvmNaturalParams,
    n: usize,
) -> Result<Vec<(f64, f64)>, ExpFamError> {
    check_quad(n)?;
    let g = grid_density(theta, n)?;
    let step = std::f64::consts::TAU / n as f64;
    Ok((0..n).map(|j| (j as f64 * step, g.w[j] / step)).collect())
}
