//! Oracle suites: independent brute-force checks of the core identities,
//! runnable from the test suite or the CLI.
//!
//! Each check pairs an implementation path with an independent oracle
//! (grid quadrature, bisection, a second filter formulation) and reports a
//! measured error against a fixed tolerance.

use crate::circular_filters::{vm_direct_update, vm_increment_step, VonMisesBelief};
use crate::expfam::{gvm_step, GvmNaturalParams};
use crate::linear_filters::{gkbf_step, gkbf_variance_residual, GaussianBelief};
use crate::models::{CircularModelParams, LinearModelParams};
use crate::rng::{stream_rng, StreamPurpose};
use crate::special::{log_i0, xi, xi_inv, Angle};
use rand::Rng;

/// Result of one oracle suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SelfTestOutcome {
    fn report(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self { name, passed: measured <= tolerance, measured, tolerance, detail }
    }
}

/// Randomized conjugacy check: the parametric direct-observation update
/// against the renormalized pointwise product of prior and likelihood on a
/// `2^14`-point grid.
pub fn conjugacy_grid(cases: usize, seed: u64) -> SelfTestOutcome {
    let n = 1usize << 14;
    let tau = std::f64::consts::TAU;
    let step = tau / n as f64;
    let mut rng = stream_rng(seed, 0, StreamPurpose::BeliefInit);
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for _ in 0..cases {
        let mu0 = rng.random::<f64>() * tau;
        let k0 = rng.random::<f64>() * 15.0;
        let z = rng.random::<f64>() * tau;
        let alpha = rng.random::<f64>() * 10.0;

        let pdf = |phi: f64, mu: f64, k: f64| {
            (k * (phi - mu).cos() - log_i0(k).unwrap()).exp() / tau
        };
        let post = vm_direct_update(
            VonMisesBelief::from_raw(mu0, k0).expect("valid case"),
            Angle::new(z).expect("finite"),
            alpha,
        );
        let mut grid: Vec<f64> =
            (0..n).map(|j| pdf(j as f64 * step, mu0, k0) * pdf(j as f64 * step, z, alpha)).collect();
        let mass: f64 = grid.iter().sum::<f64>() * step;
        for g in &mut grid {
            *g /= mass;
        }
        let err = grid
            .iter()
            .enumerate()
            .map(|(j, &g)| (g - pdf(j as f64 * step, post.mu().rad(), post.kappa())).abs())
            .fold(0.0, f64::max);
        if err > worst {
            worst = err;
            worst_case = format!("mu0={mu0:.4} k0={k0:.4} z={z:.4} alpha={alpha:.4}");
        }
    }
    SelfTestOutcome::report(
        "conjugacy-grid",
        worst,
        1e-8,
        format!("{cases} cases, worst at {worst_case}"),
    )
}

/// `xi` round trip and limiting laws on a log grid.
pub fn xi_round_trip() -> SelfTestOutcome {
    let mut worst = 0.0f64;
    let mut y = 1e-8;
    while y <= 1e6 {
        let back = xi(xi_inv(y).expect("in domain")).expect("in domain");
        worst = worst.max((back - y).abs() / y.max(1.0));
        y *= 1.9;
    }
    // limit-law anchors
    let small = xi_inv(1e-6).unwrap() / (2e-6f64).sqrt();
    let large = xi_inv(1e4).unwrap() / (1e4 + 0.5);
    let law_err = (small - 1.0).abs().max((large - 1.0).abs());
    let detail = format!("round-trip {worst:.3e}, limit laws off by {law_err:.3e}");
    let mut out = SelfTestOutcome::report("xi-round-trip", worst, 1e-12, detail);
    if law_err > 1e-3 {
        out.passed = false;
    }
    out
}

/// The generalized von Mises engine at `K = 1` against the closed-form von
/// Mises filter on a shared increment path.
pub fn k1_reduction() -> SelfTestOutcome {
    let params = CircularModelParams::new(1.0, 10.0, None, 1e-3, 1).expect("valid");
    let mut rng = stream_rng(271828, 0, StreamPurpose::IncrementNoise);
    let mut vm = VonMisesBelief::from_raw(0.3, 2.0).expect("valid");
    let mut theta = GvmNaturalParams::from_von_mises(vm.mu(), vm.kappa(), 1).expect("valid");
    let mut worst_mu = 0.0f64;
    let mut worst_kappa = 0.0f64;
    for _ in 0..1000 {
        let du = (rng.random::<f64>() - 0.5) * 0.07;
        vm = vm_increment_step(vm, du, &params).expect("finite du");
        theta = match gvm_step(&theta, du, &params, 512) {
            Ok(t) => t,
            Err(e) => {
                return SelfTestOutcome {
                    name: "k1-reduction",
                    passed: false,
                    measured: f64::INFINITY,
                    tolerance: 1e-3,
                    detail: format!("gvm_step failed: {e}"),
                }
            }
        };
        let (mu, kappa) = theta.von_mises_coords();
        worst_mu = worst_mu.max(mu.signed_delta(vm.mu()).abs());
        worst_kappa = worst_kappa.max((kappa - vm.kappa()).abs() / vm.kappa());
    }
    SelfTestOutcome::report(
        "k1-reduction",
        worst_mu.max(worst_kappa),
        1e-3,
        format!("T=1 dt=1e-3: |dmu| {worst_mu:.3e}, |dkappa|/kappa {worst_kappa:.3e}"),
    )
}

/// Kalman–Bucy variance fixed point against an independent bisection root.
pub fn gkbf_steady_state() -> SelfTestOutcome {
    let params = LinearModelParams::new(-1.0, 1.0, 1.0, 1.0, 0.01).expect("valid");
    // Independent root: bisection on the stationary residual.
    let mut lo = 1e-9;
    let mut hi = 10.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gkbf_variance_residual(mid, &params) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);

    let mut belief = GaussianBelief::new(0.0, 1.0).expect("valid");
    for _ in 0..2000 {
        belief = gkbf_step(belief, 0.0, &params).expect("no collapse");
    }
    let gap = (belief.sigma2 - root).abs();
    let residual = gkbf_variance_residual(belief.sigma2, &params).abs();
    SelfTestOutcome::report(
        "gkbf-steady-state",
        gap.max(residual),
        1e-6,
        format!("bisection root {root:.12}, integrated {:.12}", belief.sigma2),
    )
}

/// Runs every oracle suite.
pub fn run_all() -> Vec<SelfTestOutcome> {
    vec![
        conjugacy_grid(100, 314159),
        xi_round_trip(),
        k1_reduction(),
        gkbf_steady_state(),
    ]
}
