//! Independence tests for `H0: r = 0`, confidence intervals for `r`, the
//! multi-mode test for the stochastic heat equation, and type-II error
//! bounds.
//!
//! Every test is two-sided with a normal critical value `q = q_{alpha/2}`:
//!
//! | variant                 | statistic              | threshold                  |
//! |-------------------------|------------------------|----------------------------|
//! | `rho_known_theta`       | `sqrt(T) rho`          | `q / sqrt(theta)`          |
//! | `rho_estimated_theta`   | `sqrt(T theta_hat) rho`| `q`                        |
//! | `numerator_known_theta` | `Y12 / sqrt(T)`        | `q / (2 theta^{3/2})`      |
//!
//! A test rejects when `|statistic| > threshold`; ties are kept.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure, Result, YuleError};
use crate::estimators::YuleStatistics;
use crate::normal;
use crate::theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariant {
    RhoKnownTheta,
    RhoEstimatedTheta,
    NumeratorKnownTheta,
}

impl TestVariant {
    pub const ALL: [TestVariant; 3] = [
        TestVariant::RhoKnownTheta,
        TestVariant::RhoEstimatedTheta,
        TestVariant::NumeratorKnownTheta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestVariant::RhoKnownTheta => "rho_known_theta",
            TestVariant::RhoEstimatedTheta => "rho_estimated_theta",
            TestVariant::NumeratorKnownTheta => "numerator_known_theta",
        }
    }

    pub fn needs_theta(self) -> bool {
        !matches!(self, TestVariant::RhoEstimatedTheta)
    }
}

impl std::fmt::Display for TestVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub variant: TestVariant,
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl TestOutcome {
    fn new(variant: TestVariant, statistic: f64, threshold: f64, alpha: f64) -> Self {
        Self {
            variant,
            statistic,
            threshold,
            alpha,
            reject: statistic.abs() > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    Known,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub theta_mode: ThetaMode,
}

impl ConfidenceInterval {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, r: f64) -> bool {
        self.lower <= r && r <= self.upper
    }
}

/// Per-mode level adjustment for the multi-mode test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyCorrection {
    /// Every mode at level `alpha`.
    #[default]
    None,
    /// Every mode at `1 - (1 - alpha)^{1/N}`, so the family level is `alpha`
    /// for independent modes.
    Sidak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiModeOutcome {
    pub per_mode: Vec<TestOutcome>,
    pub reject_any: bool,
    pub n_modes: usize,
    pub correction: FamilyCorrection,
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure(alpha > 0.0 && alpha < 1.0, || {
        format!("alpha must lie in (0, 1), got {alpha}")
    })
}

fn check_theta(theta: f64) -> Result<()> {
    ensure(theta.is_finite() && theta > 0.0, || {
        format!("theta must be > 0, got {theta}")
    })
}

/// Two-sided critical value `q_{alpha/2}`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal::upper_quantile(0.5 * alpha))
}

/// Rejects when `sqrt(T) |rho| > q_{alpha/2} / sqrt(theta)`.
pub fn rho_test(stats: &YuleStatistics, theta: f64, alpha: f64) -> Result<TestOutcome> {
    check_theta(theta)?;
    let q = critical_value(alpha)?;
    Ok(TestOutcome::new(
        TestVariant::RhoKnownTheta,
        stats.horizon_t.sqrt() * stats.rho,
        q / theta.sqrt(),
        alpha,
    ))
}

/// Rejects when `sqrt(T theta_hat) |rho| > q_{alpha/2}`.
pub fn rho_test_estimated_theta(stats: &YuleStatistics, alpha: f64) -> Result<TestOutcome> {
    let q = critical_value(alpha)?;
    if !(stats.theta_hat.is_finite() && stats.theta_hat > 0.0) {
        return Err(YuleError::Degenerate(format!(
            "theta_hat = {} is not a positive rate",
            stats.theta_hat
        )));
    }
    Ok(TestOutcome::new(
        TestVariant::RhoEstimatedTheta,
        (stats.horizon_t * stats.theta_hat).sqrt() * stats.rho,
        q,
        alpha,
    ))
}

/// Rejects when `|Y12 / sqrt(T)| > q_{alpha/2} / (2 theta^{3/2})`.
pub fn numerator_test(num_stat: f64, theta: f64, alpha: f64) -> Result<TestOutcome> {
    check_theta(theta)?;
    let q = critical_value(alpha)?;
    Ok(TestOutcome::new(
        TestVariant::NumeratorKnownTheta,
        num_stat,
        q / (2.0 * theta.powf(1.5)),
        alpha,
    ))
}

/// Dispatches to the test selected by `variant`.
pub fn run_test(
    variant: TestVariant,
    stats: &YuleStatistics,
    theta: Option<f64>,
    alpha: f64,
) -> Result<TestOutcome> {
    let need = |t: Option<f64>| t.ok_or_else(|| domain(format!("{variant} requires theta")));
    match variant {
        TestVariant::RhoKnownTheta => rho_test(stats, need(theta)?, alpha),
        TestVariant::RhoEstimatedTheta => rho_test_estimated_theta(stats, alpha),
        TestVariant::NumeratorKnownTheta => numerator_test(stats.numerator(), need(theta)?, alpha),
    }
}

/// Interval `rho ± q_{alpha/2} sqrt(1 + rho^2) / sqrt(theta T)`, with
/// `theta_hat` in place of `theta` in estimated mode.
pub fn confidence_interval_r(
    stats: &YuleStatistics,
    alpha: f64,
    theta_mode: ThetaMode,
    theta: Option<f64>,
) -> Result<ConfidenceInterval> {
    let q = critical_value(alpha)?;
    let th = match theta_mode {
        ThetaMode::Known => {
            let t = theta.ok_or_else(|| domain("known-theta interval requires theta"))?;
            check_theta(t)?;
            t
        }
        ThetaMode::Estimated => {
            if !(stats.theta_hat.is_finite() && stats.theta_hat > 0.0) {
                return Err(YuleError::Degenerate("theta_hat is not positive".into()));
            }
            stats.theta_hat
        }
    };
    let half = q * (1.0 + stats.rho * stats.rho).sqrt() / (th * stats.horizon_t).sqrt();
    Ok(ConfidenceInterval {
        lower: stats.rho - half,
        upper: stats.rho + half,
        alpha,
        theta_mode,
    })
}

/// Per-mode level `1 - (1 - alpha)^{1/n}`.
pub fn sidak_level(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    ensure(n >= 1, || "need at least one mode".into())?;
    // 1 - exp(ln(1 - alpha) / n), without cancellation
    Ok(-((-alpha).ln_1p() / n as f64).exp_m1())
}

/// Tests every mode `k = 1..N` (with `theta = k^2`) and rejects the family
/// when any mode rejects.
pub fn spde_multimode_test(
    ensemble_stats: &[YuleStatistics],
    alpha: f64,
    variant: TestVariant,
    correction: FamilyCorrection,
) -> Result<MultiModeOutcome> {
    ensure(!ensemble_stats.is_empty(), || "empty mode ensemble".into())?;
    let n = ensemble_stats.len();
    let level = match correction {
        FamilyCorrection::None => {
            check_alpha(alpha)?;
            alpha
        }
        FamilyCorrection::Sidak => sidak_level(alpha, n)?,
    };
    let per_mode = ensemble_stats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = (i + 1) as f64;
            run_test(variant, s, Some(k * k), level)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiModeOutcome {
        reject_any: per_mode.iter().any(|o| o.reject),
        per_mode,
        n_modes: n,
        correction,
    })
}

fn check_alternative(r: f64) -> Result<()> {
    ensure(r.is_finite() && r != 0.0 && r.abs() <= 1.0, || {
        format!("type-II bounds need 0 < |r| <= 1, got {r}")
    })
}

/// Gaussian part of the type-II bound for the `rho` test:
/// `2 c / (sigma sqrt(2 pi)) exp(-((c - |r| sqrt(T)) / sigma)^2 / 2)` with
/// `c = q_{alpha/2} / sqrt(theta)`.
pub fn gaussian_tail_rho(theta: f64, r: f64, alpha: f64, horizon_t: f64) -> Result<f64> {
    check_alternative(r)?;
    check_theta(theta)?;
    ensure(horizon_t > 0.0, || "T must be > 0".into())?;
    let c = critical_value(alpha)? / theta.sqrt();
    let s = theory::sigma(theta, r)?;
    let z = (c - r.abs() * horizon_t.sqrt()) / s;
    Ok(2.0 * c / (s * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp())
}

/// Rate `T^{-1/4}` multiplying the Berry-Esseen constant in the `rho` bound.
pub fn rho_bound_rate(horizon_t: f64) -> f64 {
    horizon_t.powf(-0.25)
}

/// Type-II error bound for the `rho` test:
/// [`gaussian_tail_rho`] + `berry_constant * T^{-1/4}`.
pub fn type2_bound_rho(
    theta: f64,
    r: f64,
    alpha: f64,
    horizon_t: f64,
    berry_constant: f64,
) -> Result<f64> {
    ensure(berry_constant >= 0.0, || {
        "berry_constant must be >= 0".into()
    })?;
    Ok(gaussian_tail_rho(theta, r, alpha, horizon_t)? + berry_constant * rho_bound_rate(horizon_t))
}

/// Critical value of the numerator test, `q_{alpha/2} / (2 theta^{3/2})`.
fn numerator_critical(theta: f64, alpha: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(critical_value(alpha)? / (2.0 * theta.powf(1.5)))
}

/// Gaussian part of the type-II bound for the numerator test:
/// `sqrt(2/pi) (c / sigma) exp(-((c - |r| sqrt(T) / (2 theta)) / sigma)^2 / 2)`
/// with `c = q_{alpha/2} / (2 theta^{3/2})`.
pub fn gaussian_tail_numerator(theta: f64, r: f64, alpha: f64, horizon_t: f64) -> Result<f64> {
    check_alternative(r)?;
    ensure(horizon_t > 0.0, || "T must be > 0".into())?;
    let c = numerator_critical(theta, alpha)?;
    let s = theory::sigma(theta, r)?;
    let z = (c - r.abs() * horizon_t.sqrt() / (2.0 * theta)) / s;
    Ok((2.0 / std::f64::consts::PI).sqrt() * (c / s) * (-0.5 * z * z).exp())
}

/// Rate `ln(T) / sqrt(T)` multiplying the constant in the numerator bound.
pub fn numerator_bound_rate(horizon_t: f64) -> f64 {
    horizon_t.ln() / horizon_t.sqrt()
}

/// Horizon `4 theta^2 c^2 / r^2` beyond which the numerator bound applies.
pub fn numerator_bound_min_horizon(theta: f64, r: f64, alpha: f64) -> Result<f64> {
    check_alternative(r)?;
    let c = numerator_critical(theta, alpha)?;
    Ok(4.0 * theta * theta * c * c / (r * r))
}

/// Type-II error bound for the numerator test:
/// [`gaussian_tail_numerator`] + `berry_constant * ln(T) / sqrt(T)`.
pub fn type2_bound_numerator(
    theta: f64,
    r: f64,
    alpha: f64,
    horizon_t: f64,
    berry_constant: f64,
) -> Result<f64> {
    ensure(horizon_t > std::f64::consts::E, || {
        format!("T must exceed e, got {horizon_t}")
    })?;
    ensure(berry_constant >= 0.0, || {
        "berry_constant must be >= 0".into()
    })?;
    Ok(gaussian_tail_numerator(theta, r, alpha, horizon_t)?
        + berry_constant * numerator_bound_rate(horizon_t))
}

/// Smallest nonnegative constant `C` for which
/// `tail + C * rate >= beta_hat + 2 se`, i.e. the bound dominates the upper
/// end of an empirical type-II error estimate.
pub fn calibrate_berry_constant(beta_hat: f64, std_err: f64, tail: f64, rate: f64) -> Result<f64> {
    ensure(rate > 0.0, || "rate must be > 0".into())?;
    ensure((0.0..=1.0).contains(&beta_hat), || {
        "beta_hat must lie in [0, 1]".into()
    })?;
    Ok(((beta_hat + 2.0 * std_err - tail) / rate).max(0.0))
}

/// Product of per-mode type-II bounds, each clamped to `[0, 1]`.
pub fn spde_type2_bound(per_mode_bounds: &[f64]) -> Result<f64> {
    ensure(!per_mode_bounds.is_empty(), || "no mode bounds".into())?;
    ensure(per_mode_bounds.iter().all(|b| !b.is_nan()), || {
        "NaN bound".into()
    })?;
    Ok(per_mode_bounds.iter().map(|b| b.clamp(0.0, 1.0)).product())
}
