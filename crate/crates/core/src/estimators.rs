//! Path functionals: centered integrals `Y_ij(T)`, the correlation
//! `rho(T) = Y12 / sqrt(Y11 Y22)` and the drift estimator.
//!
//! All time integrals use the trapezoidal rule on the path grid. Because the
//! rule integrates constants exactly, `∫ X_i X_j - T Xbar_i Xbar_j` equals
//! the trapezoid of the centered product, which is what is evaluated here to
//! avoid cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, YuleError};
use crate::sde::{OuPair, SamplePath};

/// Which path(s) feed the drift estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaHatSource {
    /// Estimate from `x1` only.
    #[default]
    First,
    /// Average of the estimates from `x1` and `x2`.
    Pooled,
}

/// Functionals of one pair of paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YuleStatistics {
    pub y11: f64,
    pub y22: f64,
    pub y12: f64,
    pub rho: f64,
    pub theta_hat: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl YuleStatistics {
    /// `Y12 / sqrt(T)`.
    pub fn numerator(&self) -> f64 {
        self.y12 / self.horizon_t.sqrt()
    }
}

fn trapezoid(values: impl Iterator<Item = f64> + Clone, dt: f64) -> (f64, usize) {
    let mut sum = 0.0;
    let mut first = 0.0;
    let mut last = 0.0;
    let mut n = 0;
    for (k, v) in values.enumerate() {
        if k == 0 {
            first = v;
        }
        last = v;
        sum += v;
        n += 1;
    }
    (dt * (sum - 0.5 * (first + last)), n)
}

fn require_nodes(path: &SamplePath) -> Result<()> {
    if path.len() < 2 {
        return Err(YuleError::InsufficientData(
            "path needs at least two nodes".into(),
        ));
    }
    Ok(())
}

fn require_same_grid(a: &SamplePath, b: &SamplePath) -> Result<()> {
    if !a.same_grid(b) {
        return Err(YuleError::IncompatibleGrids(format!(
            "grids differ: ({} nodes, dt {}) vs ({} nodes, dt {})",
            a.len(),
            a.dt(),
            b.len(),
            b.dt()
        )));
    }
    Ok(())
}

/// Trapezoidal approximation of `(1/T) ∫_0^T X(u) du`.
pub fn path_time_average(path: &SamplePath) -> Result<f64> {
    require_nodes(path)?;
    let (integral, _) = trapezoid(path.values().iter().copied(), path.dt());
    Ok(integral / path.horizon())
}

/// `∫ X_a X_b du - T Xbar_a Xbar_b` by the trapezoidal rule.
pub fn empirical_cov_functional(a: &SamplePath, b: &SamplePath) -> Result<f64> {
    require_nodes(a)?;
    require_same_grid(a, b)?;
    let ma = path_time_average(a)?;
    let mb = path_time_average(b)?;
    let centered = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - ma) * (y - mb));
    Ok(trapezoid(centered, a.dt()).0)
}

/// Relative size below which a variance functional counts as zero.
const DEGENERATE_REL: f64 = 1e-13;

fn variance_functional(path: &SamplePath) -> Result<f64> {
    let y = empirical_cov_functional(path, path)?;
    let (raw, _) = trapezoid(path.values().iter().map(|v| v * v), path.dt());
    if y.is_nan() || y <= DEGENERATE_REL * raw || y <= 0.0 {
        return Err(YuleError::Degenerate(
            "path is constant, Y_ii vanishes".into(),
        ));
    }
    Ok(y)
}

fn theta_from_yii(yii: f64, horizon_t: f64) -> f64 {
    0.5 / (yii / horizon_t)
}

/// Drift estimate `(1/2) (Y_ii(T) / T)^{-1}`.
pub fn theta_estimator(path: &SamplePath) -> Result<f64> {
    require_nodes(path)?;
    let y = variance_functional(path)?;
    Ok(theta_from_yii(y, path.horizon()))
}

/// All functionals of a pair, with the drift estimated from `x1`.
pub fn yule_rho(x1: &SamplePath, x2: &SamplePath) -> Result<YuleStatistics> {
    yule_rho_with(x1, x2, ThetaHatSource::First)
}

pub fn yule_rho_with(
    x1: &SamplePath,
    x2: &SamplePath,
    source: ThetaHatSource,
) -> Result<YuleStatistics> {
    require_nodes(x1)?;
    require_same_grid(x1, x2)?;
    let y11 = variance_functional(x1)?;
    let y22 = variance_functional(x2)?;
    let y12 = empirical_cov_functional(x1, x2)?;
    let horizon_t = x1.horizon();
    // Cauchy-Schwarz holds for the trapezoid inner product; the clamp only
    // absorbs rounding at |rho| = 1.
    let rho = (y12 / (y11 * y22).sqrt()).clamp(-1.0, 1.0);
    let theta_hat = match source {
        ThetaHatSource::First => theta_from_yii(y11, horizon_t),
        ThetaHatSource::Pooled => {
            0.5 * (theta_from_yii(y11, horizon_t) + theta_from_yii(y22, horizon_t))
        }
    };
    Ok(YuleStatistics {
        y11,
        y22,
        y12,
        rho,
        theta_hat,
        horizon_t,
    })
}

/// [`yule_rho`] applied to a simulated pair.
pub fn pair_statistics(pair: &OuPair) -> Result<YuleStatistics> {
    yule_rho(&pair.x1, &pair.x2)
}

/// `Y12(T) / sqrt(T)`.
pub fn numerator_statistic(x1: &SamplePath, x2: &SamplePath) -> Result<f64> {
    let y12 = empirical_cov_functional(x1, x2)?;
    Ok(y12 / x1.horizon().sqrt())
}
