//! Closed-form constants of the asymptotic theory.
//!
//! Notation: `delta(x) = exp(-theta |x|) / (2 theta)` is the stationary OU
//! covariance, `c1, c2` are the rotation coefficients that split the cross
//! functional into two independent second-chaos components, and
//! `sigma^2 = (1 + r^2) / (4 theta^3)` is the limiting variance of the
//! centered numerator `Y12 / sqrt(T) - r sqrt(T) / (2 theta)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::quadrature::integrate;

fn check_theta(theta: f64) -> Result<()> {
    ensure(theta.is_finite() && theta > 0.0, || {
        format!("theta must be > 0, got {theta}")
    })
}

fn check_r(r: f64) -> Result<()> {
    ensure(r.is_finite() && r.abs() <= 1.0, || {
        format!("|r| must be <= 1, got {r}")
    })
}

fn check_horizon(horizon_t: f64) -> Result<()> {
    ensure(horizon_t.is_finite() && horizon_t > 0.0, || {
        format!("T must be > 0, got {horizon_t}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosConstants {
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    pub theta: f64,
    pub r: f64,
}

/// Rotation coefficients `(c1, c2)`; `c2` vanishes at `r = 1/sqrt(3)`.
pub fn rotation_coefficients(r: f64) -> Result<(f64, f64)> {
    check_r(r)?;
    let a = r * SQRT_2 / 2.0;
    let b = (1.0 - r * r).sqrt() / 2.0;
    Ok((a + b, a - b))
}

/// Limiting standard deviation of the centered numerator.
pub fn sigma(theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok((0.5 * (0.5 + 0.5 * r * r) / theta.powi(3)).sqrt())
}

pub fn chaos_constants(theta: f64, r: f64) -> Result<ChaosConstants> {
    let (c1, c2) = rotation_coefficients(r)?;
    Ok(ChaosConstants {
        c1,
        c2,
        sigma: sigma(theta, r)?,
        theta,
        r,
    })
}

/// Asymptotic variance of `sqrt(T) (rho - r)` as stated by the CLT for
/// `rho`: `(1 + r^2) / theta`. Exact at `r = 0`; see
/// [`delta_method_variance_rho`] for general `r`.
pub fn clt_variance_rho(theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok((1.0 + r * r) / theta)
}

/// Asymptotic variance of `sqrt(T) (rho - r)` from the delta method applied
/// to `(Y11, Y22, Y12) / T`: `(1 - r^2)^2 / theta`.
pub fn delta_method_variance_rho(theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok((1.0 - r * r).powi(2) / theta)
}

/// Asymptotic variance `2 theta` of `sqrt(T) (theta_hat - theta)`.
pub fn theta_hat_clt_variance(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(2.0 * theta)
}

/// Constants `max(16/(9 theta^5) |c_i|^3, 81/(8 theta^7) c_i^4)`, i = 1, 2,
/// controlling the third and fourth cumulants of the numerator.
pub fn cumulant_bound_constants(theta: f64, r: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    let (c1, c2) = rotation_coefficients(r)?;
    let k = |c: f64| {
        (16.0 / (9.0 * theta.powi(5)) * c.abs().powi(3))
            .max(81.0 / (8.0 * theta.powi(7)) * c.powi(4))
    };
    Ok((k(c1), k(c2)))
}

/// `<delta^{*(p-1)}, delta>`, the value at zero of the p-fold
/// self-convolution of `delta`.
///
/// Since the Fourier transform of `delta` is `1 / (theta^2 + w^2)`, the
/// quantity equals `(1/pi) ∫_0^∞ (theta^2 + w^2)^{-p} dw`. The substitution
/// `w = theta tan(phi)` maps it to the finite integral
/// `theta^{1-2p} / pi ∫_0^{pi/2} cos(phi)^{2p-2} dphi`, evaluated by adaptive
/// Gauss-Kronrod.
pub fn delta_convolution_inner(p: u32, theta: f64) -> Result<f64> {
    ensure(p >= 2, || format!("p must be >= 2, got {p}"))?;
    check_theta(theta)?;
    let power = 2 * p as i32 - 2;
    let integral = integrate(
        |phi: f64| phi.cos().powi(power),
        0.0,
        FRAC_PI_2,
        1e-15,
        1e-14,
    )?;
    Ok(theta.powi(1 - 2 * p as i32) * integral / PI)
}

/// Leading-order cumulant `k_p` of the standardized numerator component
/// `F_T` (variance normalized to one):
///
/// `<delta^{*(p-1)}, delta> 2^{2p-1} (p-1)! (c1^p + c2^p) theta^{3p/2}
///  / (T^{p/2-1} (1 + r^2)^{p/2})`.
pub fn asymptotic_cumulant(p: u32, theta: f64, r: f64, horizon_t: f64) -> Result<f64> {
    ensure(p >= 3, || format!("p must be >= 3, got {p}"))?;
    check_horizon(horizon_t)?;
    let inner = delta_convolution_inner(p, theta)?;
    let (c1, c2) = rotation_coefficients(r)?;
    let pf = p as f64;
    let factorial: f64 = (1..p).map(f64::from).product();
    Ok(inner
        * 2f64.powi(2 * p as i32 - 1)
        * factorial
        * (c1.powi(p as i32) + c2.powi(p as i32))
        * theta.powf(1.5 * pf)
        / (horizon_t.powf(0.5 * pf - 1.0) * (1.0 + r * r).powf(0.5 * pf)))
}

/// `V(theta, T) = (2/T) ∫_0^T ∫_0^T Cov(X(t), X(s))^2 dt ds` for the
/// zero-started OU process.
pub fn ar_moment_kernel(theta: f64, horizon_t: f64) -> Result<f64> {
    check_theta(theta)?;
    check_horizon(horizon_t)?;
    let x = theta * horizon_t;
    let one_minus_e2 = -(-2.0 * x).exp_m1();
    let one_minus_e4 = -(-4.0 * x).exp_m1();
    let t3 = theta.powi(3);
    let t4 = theta * t3;
    Ok(1.0 / (2.0 * t3)
        - one_minus_e4 / (8.0 * t4 * horizon_t)
        - one_minus_e2 / (2.0 * t4 * horizon_t)
        + (-2.0 * x).exp() / t3)
}

/// Exact `E[A_r(T)^2] = (c1^2 + c2^2) V(theta, T)`, the finite-horizon second
/// moment of the centered numerator's chaos part. Tends to `sigma^2` at rate
/// `1/T`.
pub fn exact_second_moment_ar(theta: f64, r: f64, horizon_t: f64) -> Result<f64> {
    let (c1, c2) = rotation_coefficients(r)?;
    Ok((c1 * c1 + c2 * c2) * ar_moment_kernel(theta, horizon_t)?)
}

/// Parameters of the two-sided kernels `h_T` and `g_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub theta: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl KernelSpec {
    pub fn new(theta: f64, r: f64, horizon_t: f64) -> Result<Self> {
        check_theta(theta)?;
        check_r(r)?;
        check_horizon(horizon_t)?;
        Ok(Self {
            theta,
            r,
            horizon_t,
        })
    }
}

/// `L^2` norm of `h_T(t,s) = [c1 1_{[0,T]^2} + c2 1_{[-T,0]^2}]
/// exp(-theta|t-s|) / (2 theta sqrt(T))`.
pub fn kernel_h_norm(spec: &KernelSpec) -> Result<f64> {
    let KernelSpec {
        theta,
        r,
        horizon_t,
    } = KernelSpec::new(spec.theta, spec.r, spec.horizon_t)?;
    let (c1, c2) = rotation_coefficients(r)?;
    let one_minus_e2 = -(-2.0 * theta * horizon_t).exp_m1();
    let bracket = 1.0 / theta - one_minus_e2 / (2.0 * theta * theta * horizon_t);
    Ok(((c1 * c1 + c2 * c2) / (4.0 * theta * theta) * bracket).sqrt())
}

/// Limit of [`kernel_h_norm`] as `T -> ∞`, equal to `sigma / sqrt(2)`.
pub fn kernel_h_norm_limit(theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok((1.0 + r * r).sqrt() / (2.0 * SQRT_2 * theta.powf(1.5)))
}

/// `L^2` norm of `g_T(t,s) = [c1 1_{[0,T]^2} + c2 1_{[-T,0]^2}]
/// exp(-2 theta T) exp(theta (|t| + |s|)) / (2 theta sqrt(T))`.
pub fn kernel_g_norm(spec: &KernelSpec) -> Result<f64> {
    let KernelSpec {
        theta,
        r,
        horizon_t,
    } = KernelSpec::new(spec.theta, spec.r, spec.horizon_t)?;
    let one_minus_e2 = -(-2.0 * theta * horizon_t).exp_m1();
    Ok((1.0 + r * r).sqrt() * one_minus_e2 / (4.0 * SQRT_2 * theta * theta * horizon_t.sqrt()))
}

/// Coefficient of the leading `1/sqrt(T)` correction to the CDF of the
/// standardized numerator.
pub fn eta_constant(theta: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    let inner = delta_convolution_inner(3, theta)?;
    Ok(inner / PI.sqrt() * 4.0 * theta.powf(4.5) * r * (3.0 - r * r) / (1.0 + r * r).powf(1.5))
}

/// Leading-order correction `eta (1 - z^2) exp(-z^2/2) / sqrt(T)` to
/// `P(F_T <= z) - Phi(z)`.
pub fn edgeworth_tail(z: f64, theta: f64, r: f64, horizon_t: f64) -> Result<f64> {
    check_horizon(horizon_t)?;
    let eta = eta_constant(theta, r)?;
    Ok(eta * (1.0 - z * z) * (-0.5 * z * z).exp() / horizon_t.sqrt())
}

/// Supremum over `z` of `|edgeworth_tail|`. The profile `(1 - z^2) e^{-z^2/2}`
/// peaks at `z = 0` with value 1, so this is `|eta| / sqrt(T)`.
pub fn edgeworth_kolmogorov_bound(theta: f64, r: f64, horizon_t: f64) -> Result<f64> {
    check_horizon(horizon_t)?;
    Ok(eta_constant(theta, r)?.abs() / horizon_t.sqrt())
}

/// Tail bound for a chaos variable of order `n` with kernel norm `‖f‖`:
/// `C exp(-1/2 (x / (sqrt(n!) ‖f‖))^{2/n})`.
pub fn major_tail_bound(n: u32, kernel_norm: f64, x: f64, prefactor_c: f64) -> Result<f64> {
    ensure(n >= 1, || "chaos order must be >= 1".into())?;
    ensure(kernel_norm > 0.0, || "kernel norm must be > 0".into())?;
    ensure(x > 0.0, || "x must be > 0".into())?;
    let factorial: f64 = (1..=n).map(f64::from).product();
    let scaled = x / (factorial.sqrt() * kernel_norm);
    Ok(prefactor_c * (-0.5 * scaled.powf(2.0 / n as f64)).exp())
}

/// Wasserstein distance bound `sqrt(2/pi) |1 - sigma^2|` between `sigma N`
/// and `N`.
pub fn wasserstein_scale_bound(sigma: f64) -> Result<f64> {
    ensure(sigma > 0.0 && sigma.is_finite(), || {
        "sigma must be > 0".into()
    })?;
    Ok((2.0 / PI).sqrt() * (1.0 - sigma * sigma).abs())
}

/// Constant `c(p, theta)` in `‖2 theta sqrt(Y11 Y22)/T - 1‖_p <= c / sqrt(T)`.
pub fn denominator_lp_bound(p: f64, theta: f64) -> Result<f64> {
    ensure(p >= 1.0, || format!("p must be >= 1, got {p}"))?;
    check_theta(theta)?;
    let a = 2.0 * (2.0 * p - 1.0) / theta;
    let b = (p - 1.0) * SQRT_2 / theta.sqrt() * (3.0 + 7.0 / (4.0 * theta)).sqrt();
    let c = 1.0 / (2.0 * theta);
    Ok(3.0 * a.max(b).max(c))
}
