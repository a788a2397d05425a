//! Shared machinery of the acceptance suite: check records, sample
//! summaries and brute-force oracles that do not reuse library formulas.

use std::fmt;

use yule_core::quadrature::integrate_2d;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl Check {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records one sub-condition; the check passes only if all do.
    pub fn require(&mut self, ok: bool, detail: impl Into<String>) -> &mut Self {
        let tag = if ok { "ok  " } else { "FAIL" };
        self.details.push(format!("{tag} {}", detail.into()));
        self.pass &= ok;
        self
    }

    /// Records an informational line that does not affect the verdict.
    pub fn note(&mut self, detail: impl Into<String>) -> &mut Self {
        self.details.push(format!("     {}", detail.into()));
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.id, self.title)?;
        for d in &self.details {
            write!(f, "\n    {d}")?;
        }
        Ok(())
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Standard error of a sample variance under approximate normality.
pub fn variance_se(var: f64, n: usize) -> f64 {
    var * (2.0 / (n as f64 - 1.0)).sqrt()
}

/// Binomial standard error of a proportion.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Covariance of the zero-started OU process, written out independently of
/// the library.
pub fn ou_cov_direct(theta: f64, s: f64, t: f64) -> f64 {
    ((-theta * (t - s).abs()).exp() - (-theta * (t + s)).exp()) / (2.0 * theta)
}

/// `(2/T) ∫∫_{[0,T]^2} Cov(X(s), X(t))^2` by adaptive 2-D quadrature over the
/// triangle `s < t`, where the integrand is smooth.
pub fn ar_kernel_quadrature(theta: f64, horizon_t: f64) -> f64 {
    let f = |t: f64, s: f64| ou_cov_direct(theta, s, t).powi(2);
    let tri = integrate_2d(f, 0.0, horizon_t, |_| 0.0, |t| t, 1e-16, 1e-12).expect("quadrature");
    4.0 * tri / horizon_t
}

/// `<delta^{*(p-1)}, delta>` with `delta(x) = exp(-theta|x|)/(2 theta)` by
/// repeated trapezoidal convolution on `[-40/theta, 40/theta]` with step `h`.
pub fn grid_convolution_inner(p: u32, theta: f64, h: f64) -> f64 {
    let l = 40.0 / theta;
    let m = (l / h).round() as i64;
    let n = (2 * m + 1) as usize;
    let delta: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as i64 - m) as f64 * h;
            (-theta * x.abs()).exp() / (2.0 * theta)
        })
        .collect();
    let w = |j: usize| if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
    let mut conv = delta.clone();
    for _ in 0..p.saturating_sub(2) {
        conv = (0..n)
            .map(|i| {
                let lo = (i as i64 - m).max(0) as usize;
                let hi = ((i as i64 + m) as usize).min(n - 1);
                (lo..=hi)
                    .map(|j| w(j) * conv[j] * delta[(i as i64 - j as i64 + m) as usize])
                    .sum::<f64>()
                    * h
            })
            .collect();
    }
    (0..n).map(|j| w(j) * conv[j] * delta[j]).sum::<f64>() * h
}

/// Grid oracle at steps 0.04, 0.02, 0.01 with two Richardson passes.
pub fn grid_convolution_extrapolated(p: u32, theta: f64) -> f64 {
    let base = 0.04 / theta;
    let v: Vec<f64> = [base, base / 2.0, base / 4.0]
        .iter()
        .map(|&h| grid_convolution_inner(p, theta, h))
        .collect();
    let r1 = [(4.0 * v[1] - v[0]) / 3.0, (4.0 * v[2] - v[1]) / 3.0];
    (16.0 * r1[1] - r1[0]) / 15.0
}
