//! Exact simulation of Ornstein-Uhlenbeck paths.
//!
//! Paths start at zero and are sampled on the uniform grid `k * dt` through
//! the exact Gaussian transition
//!
//! ```text
//! X(t + dt) = exp(-theta dt) X(t) + xi,   xi ~ N(0, (1 - exp(-2 theta dt)) / (2 theta))
//! ```
//!
//! so the marginal law on the grid carries no discretization bias. A
//! correlated pair shares the first driving noise: the second path is driven
//! by `r W1 + sqrt(1 - r^2) W0` with `W0` independent of `W1`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure, Result, YuleError};
use crate::rng::StreamKey;

/// Largest admissible `theta * dt`.
pub const DEFAULT_STEP_CAP: f64 = 0.05;

/// Upper bound on grid nodes per path.
pub const MAX_NODES: usize = 50_000_000;

/// One discretized path on the grid `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        ensure(t0.is_finite() && t0 >= 0.0, || {
            format!("t0 must be >= 0, got {t0}")
        })?;
        ensure(dt.is_finite() && dt > 0.0, || {
            format!("dt must be > 0, got {dt}")
        })?;
        ensure(!values.is_empty(), || {
            "path needs at least one value".into()
        })?;
        ensure(values.iter().all(|v| v.is_finite()), || {
            "path values must be finite".into()
        })?;
        Ok(Self { t0, dt, values })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length of the observation window, `(len - 1) * dt`.
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Applies `x -> a x + b` node-wise.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|&v| a * v + b).collect(),
        }
    }

    pub fn same_grid(&self, other: &SamplePath) -> bool {
        self.values.len() == other.values.len() && self.dt == other.dt && self.t0 == other.t0
    }
}

/// Full specification of one simulated correlated pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPairConfig {
    pub theta: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
    pub dt: f64,
    pub seed: u64,
}

impl CorrelatedPairConfig {
    /// Builds a configuration checked against [`DEFAULT_STEP_CAP`].
    pub fn new(theta: f64, r: f64, horizon_t: f64, dt: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            theta,
            r,
            horizon_t,
            dt,
            seed,
        };
        cfg.validate(DEFAULT_STEP_CAP)?;
        Ok(cfg)
    }

    pub fn validate(&self, step_cap: f64) -> Result<()> {
        check_theta(self.theta)?;
        check_r(self.r)?;
        check_grid(self.horizon_t, self.dt)?;
        ensure(self.dt <= step_cap / self.theta * (1.0 + 1e-12), || {
            format!(
                "dt = {} exceeds the step cap {step_cap}/theta = {}",
                self.dt,
                step_cap / self.theta
            )
        })
    }

    /// Number of steps on the simulated grid.
    pub fn steps(&self) -> usize {
        grid_steps(self.horizon_t, self.dt)
    }
}

/// A simulated pair on a common grid, both started at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPair {
    pub x1: SamplePath,
    pub x2: SamplePath,
    pub config: CorrelatedPairConfig,
}

impl OuPair {
    /// Writes the pair as CSV with header `t,x1,x2`, one row per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x1,x2")?;
        for (k, (a, b)) in self.x1.values().iter().zip(self.x2.values()).enumerate() {
            writeln!(out, "{},{},{}", self.x1.time(k), a, b)?;
        }
        Ok(())
    }
}

/// Reads two paths from CSV with header `t,x1,x2`. Lines starting with `#`
/// are skipped. The time column must be a uniform grid.
pub fn read_pair_csv<R: BufRead>(input: R) -> Result<(SamplePath, SamplePath)> {
    let parse_err = |line: usize, msg: &str| YuleError::Domain(format!("line {line}: {msg}"));
    let mut header_seen = false;
    let (mut ts, mut x1, mut x2) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| domain(format!("read error: {e}")))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["t", "x1", "x2"] {
                return Err(parse_err(i + 1, "expected header t,x1,x2"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(i + 1, "expected 3 fields"));
        }
        let mut parsed = [0.0; 3];
        for (slot, f) in parsed.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(i + 1, &format!("invalid number {f:?}")))?;
        }
        ts.push(parsed[0]);
        x1.push(parsed[1]);
        x2.push(parsed[2]);
    }
    if !header_seen {
        return Err(domain("missing header t,x1,x2"));
    }
    if ts.len() < 2 {
        return Err(YuleError::InsufficientData("need at least two rows".into()));
    }
    let t0 = ts[0];
    let dt = (ts[ts.len() - 1] - t0) / (ts.len() - 1) as f64;
    for (k, &t) in ts.iter().enumerate() {
        let expected = t0 + k as f64 * dt;
        if (t - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(YuleError::IncompatibleGrids(format!(
                "time column is not uniform at row {}",
                k + 1
            )));
        }
    }
    Ok((SamplePath::new(t0, dt, x1)?, SamplePath::new(t0, dt, x2)?))
}

/// Rule for choosing the time step of a process with rate `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtPolicy {
    /// The same step for every process; must respect the cap.
    Fixed(f64),
    /// `dt = step_cap / theta`.
    Cap(f64),
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Cap(DEFAULT_STEP_CAP)
    }
}

impl DtPolicy {
    pub fn dt_for(&self, theta: f64) -> f64 {
        match *self {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Cap(cap) => cap / theta,
        }
    }

    fn cap(&self) -> f64 {
        match *self {
            DtPolicy::Fixed(_) => DEFAULT_STEP_CAP,
            DtPolicy::Cap(cap) => cap,
        }
    }

    pub fn validate(&self, theta: f64) -> Result<()> {
        let dt = self.dt_for(theta);
        ensure(dt.is_finite() && dt > 0.0, || {
            format!("dt must be > 0, got {dt}")
        })?;
        ensure(dt <= self.cap() / theta * (1.0 + 1e-12), || {
            format!("dt = {dt} exceeds the step cap for theta = {theta}")
        })
    }
}

/// Fourier modes `k = 1..N` of the stochastic heat equation on the circle;
/// mode `k` is a correlated OU pair with `theta = k^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeModeEnsemble {
    pub modes: Vec<OuPair>,
    pub n_modes: usize,
}

/// Autoregressive factor and innovation standard deviation of the exact
/// one-step transition.
pub fn ou_transition(theta: f64, dt: f64) -> (f64, f64) {
    let factor = (-theta * dt).exp();
    // 1 - exp(-2 theta dt), without cancellation for small steps
    let one_minus = -(-2.0 * theta * dt).exp_m1();
    (factor, (one_minus / (2.0 * theta)).sqrt())
}

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

fn check_grid(horizon_t: f64, dt: f64) -> Result<()> {
    ensure(dt.is_finite() && dt > 0.0, || {
        format!("dt must be > 0, got {dt}")
    })?;
    ensure(horizon_t.is_finite() && horizon_t >= dt, || {
        format!("T must be >= dt, got T = {horizon_t}, dt = {dt}")
    })?;
    let steps = grid_steps(horizon_t, dt);
    if steps + 1 > MAX_NODES {
        return Err(YuleError::ResourceLimit(format!(
            "{} grid nodes exceed the limit of {MAX_NODES}",
            steps + 1
        )));
    }
    Ok(())
}

/// Steps needed to cover `[0, T]` with steps no longer than `dt`.
fn grid_steps(horizon_t: f64, dt: f64) -> usize {
    ((horizon_t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Simulates one zero-started OU path on `[0, T]`.
///
/// The grid has `ceil(T / dt)` steps of length `T / steps`, so it ends at
/// `T` exactly and the effective step never exceeds `dt`.
pub fn simulate_ou<R: Rng + ?Sized>(
    theta: f64,
    horizon_t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    check_theta(theta)?;
    check_grid(horizon_t, dt)?;
    let steps = grid_steps(horizon_t, dt);
    let h = horizon_t / steps as f64;
    let (a, s) = ou_transition(theta, h);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        x = a * x + s * z;
        values.push(x);
    }
    SamplePath::new(0.0, h, values)
}

fn simulate_pair_streams<R: Rng>(
    theta: f64,
    r: f64,
    horizon_t: f64,
    dt: f64,
    rng1: &mut R,
    rng0: &mut R,
) -> Result<(SamplePath, SamplePath)> {
    check_theta(theta)?;
    check_r(r)?;
    check_grid(horizon_t, dt)?;
    let steps = grid_steps(horizon_t, dt);
    let h = horizon_t / steps as f64;
    let (a, s) = ou_transition(theta, h);
    let q = (1.0 - r * r).sqrt();
    let mut v1 = Vec::with_capacity(steps + 1);
    let mut v2 = Vec::with_capacity(steps + 1);
    let (mut x1, mut x2) = (0.0, 0.0);
    v1.push(x1);
    v2.push(x2);
    for _ in 0..steps {
        let z1: f64 = rng1.sample(StandardNormal);
        let z0: f64 = rng0.sample(StandardNormal);
        x1 = a * x1 + s * z1;
        x2 = a * x2 + s * (r * z1 + q * z0);
        v1.push(x1);
        v2.push(x2);
    }
    Ok((SamplePath::new(0.0, h, v1)?, SamplePath::new(0.0, h, v2)?))
}

/// Simulates a correlated pair. Replication `rep` of the experiment draws
/// `W1` from stream `(seed, rep, 0)` and `W0` from `(seed, rep, 1)`.
pub fn simulate_correlated_pair(config: &CorrelatedPairConfig, rep: u64) -> Result<OuPair> {
    config.validate(DEFAULT_STEP_CAP)?;
    simulate_pair_unchecked_cap(config, StreamKey::new(config.seed, rep, 0))
}

/// Like [`simulate_correlated_pair`] but with an explicit base stream; the
/// pair consumes processes `base.process` and `base.process + 1`. The step
/// cap is not enforced here.
pub fn simulate_pair_unchecked_cap(
    config: &CorrelatedPairConfig,
    base: StreamKey,
) -> Result<OuPair> {
    let mut rng1 = base.rng();
    let mut rng0 = base.with_process(base.process + 1).rng();
    let (x1, x2) = simulate_pair_streams(
        config.theta,
        config.r,
        config.horizon_t,
        config.dt,
        &mut rng1,
        &mut rng0,
    )?;
    Ok(OuPair {
        x1,
        x2,
        config: *config,
    })
}

/// Simulates mode `k` (1-based) of the heat-equation ensemble. Mode `k`
/// uses processes `2(k-1)` and `2(k-1)+1` of replication `rep`, so modes can
/// be produced in any order.
pub fn simulate_spde_mode(
    k: usize,
    r: f64,
    horizon_t: f64,
    dt_policy: DtPolicy,
    seed: u64,
    rep: u64,
) -> Result<OuPair> {
    ensure(k >= 1, || "mode index starts at 1".into())?;
    ensure(2 * k < u16::MAX as usize, || {
        format!("mode index {k} too large")
    })?;
    let theta = (k * k) as f64;
    dt_policy.validate(theta)?;
    let config = CorrelatedPairConfig {
        theta,
        r,
        horizon_t,
        dt: dt_policy.dt_for(theta),
        seed,
    };
    simulate_pair_unchecked_cap(&config, StreamKey::new(seed, rep, (2 * (k - 1)) as u16))
}

/// Simulates modes `1..=n_modes` with a common noise correlation `r`.
pub fn simulate_spde_ensemble(
    n_modes: usize,
    r: f64,
    horizon_t: f64,
    dt_policy: DtPolicy,
    seed: u64,
    rep: u64,
) -> Result<SpdeModeEnsemble> {
    ensure(n_modes >= 1, || "need at least one mode".into())?;
    let modes = (1..=n_modes)
        .map(|k| simulate_spde_mode(k, r, horizon_t, dt_policy, seed, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpdeModeEnsemble { modes, n_modes })
}

/// Covariance `E[X(s) X(t)]` of the zero-started OU process.
pub fn ou_covariance(theta: f64, s: f64, t: f64) -> Result<f64> {
    check_theta(theta)?;
    ensure(s >= 0.0 && t >= 0.0, || "times must be >= 0".into())?;
    let lo = s.min(t);
    // exp(-theta|t-s|) (1 - exp(-2 theta min(s,t))) / (2 theta)
    Ok((-theta * (t - s).abs()).exp() * -(-2.0 * theta * lo).exp_m1() / (2.0 * theta))
}

/// Variance of the time average `(1/T) ∫_0^T X(u) du`.
pub fn mean_functional_variance(theta: f64, horizon_t: f64) -> Result<f64> {
    check_theta(theta)?;
    ensure(horizon_t > 0.0, || "T must be > 0".into())?;
    let x = theta * horizon_t;
    let one_minus_e1 = -(-x).exp_m1();
    let one_minus_e2 = -(-2.0 * x).exp_m1();
    let inner = horizon_t - 2.0 * one_minus_e1 / theta + one_minus_e2 / (2.0 * theta);
    Ok(inner / (theta * theta * horizon_t * horizon_t))
}
