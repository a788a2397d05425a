//! Monte Carlo harness: parallel replication over an experiment grid,
//! cumulant and distance estimation, and error-rate summaries.
//!
//! Each grid cell gets its own seed `cell_seed(base_seed, cell_index)` and
//! replication `i` of the cell consumes streams `(seed, i, *)` only, so the
//! output does not depend on how work is scheduled. Per-replication values
//! are collected in index order before any reduction.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result, YuleError};
use crate::estimators::{pair_statistics, yule_rho, YuleStatistics};
use crate::hypothesis::{run_test, TestOutcome, TestVariant};
use crate::normal;
use crate::rng::cell_seed;
use crate::sde::{
    simulate_correlated_pair, simulate_spde_ensemble, CorrelatedPairConfig, DtPolicy,
    DEFAULT_STEP_CAP,
};
use crate::theory;

/// Standardized statistic tracked by [`run_grid`]. Each is asymptotically
/// standard normal under the model it is centered for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `sqrt(T) (rho - r) / sqrt((1 + r^2) / theta)`
    RhoCentered,
    /// `(Y12 / sqrt(T) - r sqrt(T) / (2 theta)) / sigma`
    NumeratorCentered,
    /// `sqrt(T) (theta_hat - theta) / sqrt(2 theta)`
    ThetaHatCentered,
    /// `sqrt(T) (2 theta Y11 / T - 1) / sqrt(2 / theta)`
    YbarCentered,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 4] = [
        StatisticKind::RhoCentered,
        StatisticKind::NumeratorCentered,
        StatisticKind::ThetaHatCentered,
        StatisticKind::YbarCentered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::RhoCentered => "rho_centered",
            StatisticKind::NumeratorCentered => "numerator_centered",
            StatisticKind::ThetaHatCentered => "theta_hat_centered",
            StatisticKind::YbarCentered => "ybar_centered",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Evaluates the statistic at the true parameters `(theta, r)`.
    pub fn evaluate(self, s: &YuleStatistics, theta: f64, r: f64) -> Result<f64> {
        let t = s.horizon_t;
        Ok(match self {
            StatisticKind::RhoCentered => {
                t.sqrt() * (s.rho - r) / theory::clt_variance_rho(theta, r)?.sqrt()
            }
            StatisticKind::NumeratorCentered => {
                (s.numerator() - r * t.sqrt() / (2.0 * theta)) / theory::sigma(theta, r)?
            }
            StatisticKind::ThetaHatCentered => {
                t.sqrt() * (s.theta_hat - theta) / theory::theta_hat_clt_variance(theta)?.sqrt()
            }
            StatisticKind::YbarCentered => {
                t.sqrt() * (2.0 * theta * s.y11 / t - 1.0) / (2.0 / theta).sqrt()
            }
        })
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub thetas: Vec<f64>,
    pub rs: Vec<f64>,
    pub horizons: Vec<f64>,
    pub dt_policy: DtPolicy,
    pub replications: usize,
    pub base_seed: u64,
    pub statistic: StatisticKind,
    /// Test whose rejection rate is reported, run at the true `theta`.
    pub test: TestVariant,
    pub alpha: f64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        ensure(self.replications >= 1, || {
            "replications must be >= 1".into()
        })?;
        ensure(
            !self.thetas.is_empty() && !self.rs.is_empty() && !self.horizons.is_empty(),
            || "grid axes must be nonempty".into(),
        )?;
        ensure(
            self.thetas.iter().all(|&t| t.is_finite() && t > 0.0),
            || "every theta must be > 0".into(),
        )?;
        ensure(
            self.rs.iter().all(|&r| r.is_finite() && r.abs() <= 1.0),
            || "every r must lie in [-1, 1]".into(),
        )?;
        ensure(
            self.horizons.iter().all(|&t| t.is_finite() && t > 0.0),
            || "every T must be > 0".into(),
        )?;
        ensure(self.alpha > 0.0 && self.alpha < 1.0, || {
            format!("alpha must lie in (0, 1), got {}", self.alpha)
        })
    }

    /// Cells in row-major order over (theta, r, T).
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.thetas.len() * self.rs.len() * self.horizons.len());
        for &theta in &self.thetas {
            for &r in &self.rs {
                for &t in &self.horizons {
                    out.push((theta, r, t));
                }
            }
        }
        out
    }
}

/// Aggregates of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub theta: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
    pub n: usize,
    pub mean: f64,
    /// `None` when `n < 2`.
    #[serde(rename = "var")]
    pub variance: Option<f64>,
    /// `None` when `n < 4`.
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub d_kol: f64,
    pub reject_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl McReport {
    pub const CSV_HEADER: &'static str = "theta,r,T,n,mean,var,k3,k4,d_kol,reject_rate,ci_lo,ci_hi";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.theta,
            self.r,
            self.horizon_t,
            self.n,
            self.mean,
            opt(self.variance),
            opt(self.k3),
            opt(self.k4),
            self.d_kol,
            self.reject_rate,
            self.ci_lo,
            self.ci_hi
        )
    }

    /// Aggregates standardized samples and test outcomes of one cell.
    pub fn from_samples(
        cell: (f64, f64, f64),
        samples: &[f64],
        outcomes: &[TestOutcome],
    ) -> Result<Self> {
        ensure(!samples.is_empty(), || "no samples".into())?;
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = (n >= 2)
            .then(|| samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64);
        let (k3, k4) = match k_statistics(samples) {
            Ok(k) => (Some(k.k3), Some(k.k4)),
            Err(_) => (None, None),
        };
        let rates = error_rates(outcomes, Truth::H0)?;
        Ok(Self {
            theta: cell.0,
            r: cell.1,
            horizon_t: cell.2,
            n,
            mean,
            variance,
            k3,
            k4,
            d_kol: kolmogorov_distance(samples)?,
            reject_rate: rates.rate,
            ci_lo: rates.ci_lower,
            ci_hi: rates.ci_upper,
        })
    }
}

/// Diagnostic for a cell that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub theta: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
    pub error: String,
}

pub type CellOutcome = std::result::Result<McReport, CellFailure>;

/// Builds a worker pool with `jobs` threads (0 picks the rayon default).
pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| YuleError::ResourceLimit(format!("cannot start worker pool: {e}")))
}

/// Simulates `reps` replications of one pair configuration on the current
/// rayon pool, returned in replication order.
pub fn replicate_pairs(config: &CorrelatedPairConfig, reps: usize) -> Result<Vec<YuleStatistics>> {
    config.validate(DEFAULT_STEP_CAP)?;
    (0..reps as u64)
        .into_par_iter()
        .map(|i| pair_statistics(&simulate_correlated_pair(config, i)?))
        .collect()
}

/// Simulates `reps` replications of the `n_modes`-mode ensemble; entry `i`
/// holds the per-mode statistics of replication `i`.
pub fn replicate_spde(
    n_modes: usize,
    r: f64,
    horizon_t: f64,
    dt_policy: DtPolicy,
    seed: u64,
    reps: usize,
) -> Result<Vec<Vec<YuleStatistics>>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let ens = simulate_spde_ensemble(n_modes, r, horizon_t, dt_policy, seed, i)?;
            ens.modes
                .iter()
                .map(|m| yule_rho(&m.x1, &m.x2))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn run_cell(grid: &ExperimentGrid, index: usize, cell: (f64, f64, f64)) -> Result<McReport> {
    let (theta, r, t) = cell;
    grid.dt_policy.validate(theta)?;
    let config = CorrelatedPairConfig {
        theta,
        r,
        horizon_t: t,
        dt: grid.dt_policy.dt_for(theta),
        seed: cell_seed(grid.base_seed, index as u64),
    };
    let stats = replicate_pairs(&config, grid.replications)?;
    let samples = stats
        .iter()
        .map(|s| grid.statistic.evaluate(s, theta, r))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = stats
        .iter()
        .map(|s| run_test(grid.test, s, Some(theta), grid.alpha))
        .collect::<Result<Vec<_>>>()?;
    McReport::from_samples(cell, &samples, &outcomes)
}

/// Runs every cell of the grid on a pool of `jobs` workers and reports
/// each finished cell to `progress`. A failing cell yields a
/// [`CellFailure`] without affecting the others.
pub fn run_grid_with_progress<F>(
    grid: &ExperimentGrid,
    jobs: usize,
    mut progress: F,
) -> Result<Vec<CellOutcome>>
where
    F: FnMut(usize, usize, &CellOutcome),
{
    grid.validate()?;
    let pool = thread_pool(jobs)?;
    let cells = grid.cells();
    let total = cells.len();
    let mut out = Vec::with_capacity(total);
    for (index, cell) in cells.into_iter().enumerate() {
        let outcome = pool
            .install(|| run_cell(grid, index, cell))
            .map_err(|e| CellFailure {
                theta: cell.0,
                r: cell.1,
                horizon_t: cell.2,
                error: e.to_string(),
            });
        progress(index + 1, total, &outcome);
        out.push(outcome);
    }
    Ok(out)
}

pub fn run_grid(grid: &ExperimentGrid, jobs: usize) -> Result<Vec<CellOutcome>> {
    run_grid_with_progress(grid, jobs, |_, _, _| {})
}

/// Writes reports as CSV. `comment` lines are emitted first, each prefixed
/// with `# `.
pub fn write_reports_csv<W: Write>(
    reports: &[McReport],
    comment: Option<&str>,
    mut out: W,
) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "{}", McReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Writes one JSON object per report.
pub fn write_reports_jsonl<W: Write>(reports: &[McReport], mut out: W) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Unbiased k-statistics of orders 2 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStatistics {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

pub fn k_statistics(samples: &[f64]) -> Result<KStatistics> {
    let n = samples.len();
    if n < 4 {
        return Err(YuleError::InsufficientData(format!(
            "k-statistics need at least 4 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let k2 = nf * m2 / (nf - 1.0);
    let k3 = nf * nf * m3 / ((nf - 1.0) * (nf - 2.0));
    let k4 = nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2)
        / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    Ok(KStatistics { k2, k3, k4 })
}

/// Kolmogorov distance between the empirical CDF of `samples` and the
/// standard normal CDF.
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(YuleError::InsufficientData("no samples".into()));
    }
    ensure(samples.iter().all(|x| !x.is_nan()), || "NaN sample".into())?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal::cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.abs().max(below.abs())
        })
        .fold(0.0, f64::max))
}

/// Which hypothesis generated the data; only changes how the rate reads
/// (type-I rate under `H0`, power under `Ha`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truth {
    H0,
    Ha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub truth: Truth,
    pub rate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
}

impl RateEstimate {
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn std_err(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.n as f64).sqrt()
    }
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> Result<(f64, f64)> {
    ensure(n > 0 && successes <= n, || {
        "need 0 <= successes <= n, n > 0".into()
    })?;
    let z = normal::upper_quantile(0.025);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2n = z * z / nf;
    let center = (p + 0.5 * z2n) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((lo, hi))
}

/// Rejection frequency with its Wilson interval.
pub fn error_rates(outcomes: &[TestOutcome], truth: Truth) -> Result<RateEstimate> {
    if outcomes.is_empty() {
        return Err(YuleError::InsufficientData("no test outcomes".into()));
    }
    let k = outcomes.iter().filter(|o| o.reject).count();
    let n = outcomes.len();
    let (lo, hi) = wilson_interval(k, n)?;
    Ok(RateEstimate {
        truth,
        rate: k as f64 / n as f64,
        ci_lower: lo,
        ci_upper: hi,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
}

/// Least-squares fit of `ln(value) = intercept + exponent * ln(T)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(YuleError::InsufficientData(
            "rate fit needs at least 3 points".into(),
        ));
    }
    ensure(points.iter().all(|&(t, v)| t > 0.0 && v > 0.0), || {
        "rate fit needs positive T and values".into()
    })?;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    ensure(sxx > 0.0, || "rate fit needs distinct T values".into())?;
    let exponent = sxy / sxx;
    Ok(RateFit {
        exponent,
        intercept: my - exponent * mx,
    })
}
