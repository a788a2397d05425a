use std::sync::OnceLock;

use rayon::prelude::*;

use yule_core::hypothesis::{
    confidence_interval_r, run_test, spde_multimode_test, FamilyCorrection,
};
use yule_core::mc::{
    k_statistics, kolmogorov_distance, rate_fit, replicate_pairs, replicate_spde, run_grid,
    thread_pool, write_reports_csv, ExperimentGrid, StatisticKind,
};
use yule_core::rng::StreamKey;
use yule_core::sde::{ou_covariance, ou_transition, simulate_ou};
use yule_core::{theory, CorrelatedPairConfig, DtPolicy, TestVariant, ThetaMode, YuleStatistics};
use yule_validation::{
    ar_kernel_quadrature, binomial_se, grid_convolution_extrapolated, mean_var, ou_cov_direct,
    variance_se, Check,
};

type Criterion = (&'static str, fn() -> Check);

pub const ALL: &[Criterion] = &[
    ("criterion 1", exact_transition),
    ("criterion 2", covariance_oracle),
    ("criterion 3", lln_rho),
    ("criterion 4", clt_variances),
    ("criterion 5", exact_second_moment),
    ("criterion 6", convolution_constants),
    ("criterion 7", cumulant_decay),
    ("criterion 8", kolmogorov_rate),
    ("criterion 9", type_one_calibration),
    ("criterion 10", power_curves),
    ("criterion 11", spde_improvement),
    ("criterion 12", theta_hat_calibration),
    ("criterion 13", determinism),
    ("supplement A", ci_coverage),
];

const ALPHA: f64 = 0.05;

fn pairs(theta: f64, r: f64, t: f64, dt: f64, n: usize, seed: u64) -> Vec<YuleStatistics> {
    let cfg = CorrelatedPairConfig::new(theta, r, t, dt, seed).expect("valid config");
    replicate_pairs(&cfg, n).expect("simulation")
}

/// theta = 1, T = 500, n = 10^4 at r = 0 and r = 0.5.
fn clt_data(r_index: usize) -> &'static [YuleStatistics] {
    static DATA: [OnceLock<Vec<YuleStatistics>>; 2] = [OnceLock::new(), OnceLock::new()];
    let r = [0.0, 0.5][r_index];
    DATA[r_index].get_or_init(|| pairs(1.0, r, 500.0, 0.05, 10_000, 4000 + r_index as u64))
}

const CUMULANT_HORIZONS: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];

/// Standardized numerator samples at theta = 1, r = 0.5, n = 2 * 10^4.
fn numerator_samples() -> &'static [(f64, Vec<f64>)] {
    static DATA: OnceLock<Vec<(f64, Vec<f64>)>> = OnceLock::new();
    DATA.get_or_init(|| {
        CUMULANT_HORIZONS
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let z = pairs(1.0, 0.5, t, 0.05, 20_000, 7000 + i as u64)
                    .iter()
                    .map(|s| {
                        StatisticKind::NumeratorCentered
                            .evaluate(s, 1.0, 0.5)
                            .unwrap()
                    })
                    .collect();
                (t, z)
            })
            .collect()
    })
}

fn exact_transition() -> Check {
    let mut c = Check::new("criterion 1", "exact-transition variance composition");
    let mut worst: f64 = 0.0;
    for theta in [0.01, 0.1, 0.5, 1.0, 4.0, 25.0, 100.0] {
        for dt in [1e-4, 1e-3, 0.01, 0.05, 0.1, 0.5] {
            let (f1, s1) = ou_transition(theta, dt);
            let (f2, s2) = ou_transition(theta, 2.0 * dt);
            let two_step = s1 * s1 * (1.0 + f1 * f1);
            worst = worst.max(((two_step - s2 * s2) / (s2 * s2)).abs());
            worst = worst.max(((f1 * f1 - f2) / f2).abs());
            let direct = -(-2.0 * theta * dt).exp_m1() / (2.0 * theta);
            worst = worst.max(((s1 * s1 - direct) / direct).abs());
        }
    }
    c.require(
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} <= 1e-12"),
    );
    c
}

fn covariance_oracle() -> Check {
    let mut c = Check::new(
        "criterion 2",
        "sample covariance vs closed form, 1e5 replications",
    );
    let n = 100_000u64;
    for (cell, (theta, s, t)) in [(1.0, 1.0, 1.0), (1.0, 1.0, 2.0), (2.0, 0.5, 3.0)]
        .into_iter()
        .enumerate()
    {
        let dt = 0.025 / theta;
        let xy: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = StreamKey::new(2000 + cell as u64, i, 0).rng();
                let p = simulate_ou(theta, t, dt, &mut rng).unwrap();
                let k = (s / p.dt()).round() as usize;
                (p.values()[k], p.values()[p.len() - 1])
            })
            .collect();
        let nf = n as f64;
        let (mx, my) = xy
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0 / nf, a.1 + p.1 / nf));
        let prods: Vec<f64> = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).collect();
        let (cov, v) = mean_var(&prods);
        let se = (v / nf).sqrt();
        let target = ou_covariance(theta, s, t).unwrap();
        let oracle = ou_cov_direct(theta, s, t);
        c.require(
            (target - oracle).abs() <= 1e-15,
            format!("ou_covariance({theta},{s},{t}) = {target:.6} matches direct formula"),
        );
        c.require(
            (cov - target).abs() <= 4.0 * se,
            format!(
                "({theta},{s},{t}): sample {cov:.5} vs {target:.5}, |z| = {:.2} <= 4",
                (cov - target).abs() / se
            ),
        );
    }
    c
}

fn lln_rho() -> Check {
    let mut c = Check::new("criterion 3", "law of large numbers for rho");
    let rho: Vec<f64> = pairs(1.0, 0.5, 500.0, 0.01, 1000, 3000)
        .iter()
        .map(|s| s.rho)
        .collect();
    let (m, v) = mean_var(&rho);
    c.require(
        (m - 0.5).abs() <= 0.01,
        format!("mean rho {m:.5} within 0.01 of 0.5"),
    );
    c.note(format!("sd of rho {:.4}", v.sqrt()));
    c
}

fn clt_variances() -> Check {
    let mut c = Check::new(
        "criterion 4",
        "CLT variances of rho and of the numerator, T = 500, n = 1e4",
    );
    let (theta, t) = (1.0, 500.0f64);
    for (i, r) in [0.0, 0.5].into_iter().enumerate() {
        let data = clt_data(i);
        let n = data.len();
        let z: Vec<f64> = data.iter().map(|s| t.sqrt() * (s.rho - r)).collect();
        let (_, v) = mean_var(&z);
        let target = theory::clt_variance_rho(theta, r).unwrap();
        c.require(
            (v / target - 1.0).abs() <= 0.10,
            format!(
                "r={r}: Var[sqrt(T)(rho-r)] = {v:.4} (se {:.4}) vs {target:.4} within 10%",
                variance_se(v, n)
            ),
        );
        c.note(format!(
            "r={r}: delta-method variance (1-r^2)^2/theta = {:.4}",
            theory::delta_method_variance_rho(theta, r).unwrap()
        ));
        let num: Vec<f64> = data
            .iter()
            .map(|s| s.numerator() - r * t.sqrt() / (2.0 * theta))
            .collect();
        let (_, v) = mean_var(&num);
        let target = theory::sigma(theta, r).unwrap().powi(2);
        c.require(
            (v / target - 1.0).abs() <= 0.10,
            format!("r={r}: Var[Y12/sqrt(T) - r sqrt(T)/(2 theta)] = {v:.4} (se {:.4}) vs {target:.4} within 10%", variance_se(v, n)),
        );
    }
    c
}

fn exact_second_moment() -> Check {
    let mut c = Check::new("criterion 5", "exact finite-T second moment");
    let r = 0.5;
    let rot = (1.0 + r * r) / 2.0;
    let mut worst: f64 = 0.0;
    for theta in [0.5, 1.0, 2.0] {
        for t in [5.0, 20.0, 80.0] {
            let v = theory::exact_second_moment_ar(theta, r, t).unwrap();
            let q = rot * ar_kernel_quadrature(theta, t);
            worst = worst.max(((v - q) / q).abs());
        }
    }
    c.require(
        worst <= 1e-8,
        format!("max relative deviation from 2-D quadrature {worst:.2e} <= 1e-8"),
    );
    let s2 = theory::sigma(1.0, r).unwrap().powi(2);
    let scaled: Vec<f64> = (0..6)
        .map(|k| {
            let t = 10.0 * 2f64.powi(k);
            (theory::exact_second_moment_ar(1.0, r, t).unwrap() - s2).abs() * t
        })
        .collect();
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
    c.require(
        hi.is_finite() && hi <= 1.5 * lo,
        format!("|value - sigma^2| T over T = 10..320: {scaled:.4?} stays bounded"),
    );
    c
}

fn convolution_constants() -> Check {
    let mut c = Check::new("criterion 6", "convolution constants");
    for p in [2u32, 3, 4, 7] {
        let v = theory::delta_convolution_inner(p, 1.0).unwrap();
        let o = grid_convolution_extrapolated(p, 1.0);
        let rel = ((v - o) / o).abs();
        c.require(
            rel <= 1e-8,
            format!("p={p}: {v:.12} vs grid oracle {o:.12} (rel {rel:.1e})"),
        );
    }
    let mut worst: f64 = 0.0;
    for p in 2u32..=7 {
        let base = theory::delta_convolution_inner(p, 1.0).unwrap();
        for theta in [0.5, 2.0] {
            let v = theory::delta_convolution_inner(p, theta).unwrap();
            let s = theta.powi(1 - 2 * p as i32) * base;
            worst = worst.max(((v - s) / s).abs());
        }
    }
    c.require(
        worst <= 1e-8,
        format!("scaling law theta^(1-2p): max rel {worst:.1e}"),
    );
    for theta in [0.5, 1.0, 2.0] {
        let v3 = theory::delta_convolution_inner(3, theta).unwrap();
        let v4 = theory::delta_convolution_inner(4, theta).unwrap();
        let b3 = 2.0 / (9.0 * theta.powi(5));
        let b4 = 27.0 / (128.0 * theta.powi(7));
        c.require(
            v3 <= b3 && v4 <= b4,
            format!("theta={theta}: p=3 {v3:.4e} <= {b3:.4e}, p=4 {v4:.4e} <= {b4:.4e}"),
        );
    }
    c
}

fn cumulant_decay() -> Check {
    let mut c = Check::new(
        "criterion 7",
        "cumulant decay of the standardized numerator, n = 2e4",
    );
    let (theta, r) = (1.0, 0.5);
    let a3 = theory::asymptotic_cumulant(3, theta, r, 1.0).unwrap().abs();
    let a4 = theory::asymptotic_cumulant(4, theta, r, 1.0).unwrap().abs();
    c.note(format!(
        "T-free constants: k3 sqrt(T) -> {a3:.4}, k4 T -> {a4:.4}"
    ));
    let mut last = None;
    for (t, z) in numerator_samples().iter().filter(|(t, _)| *t >= 50.0) {
        let n = z.len() as f64;
        let k = k_statistics(z).unwrap();
        let s3 = k.k3.abs() * t.sqrt();
        let s4 = k.k4 * t;
        let se3 = (6.0 / n).sqrt() * t.sqrt();
        let se4 = (24.0 / n).sqrt() * t;
        c.require(
            s3 <= 2.0 * a3 + 3.0 * se3,
            format!("T={t}: |k3| sqrt(T) = {s3:.3} <= 2*{a3:.3} + 3*{se3:.3}"),
        );
        c.require(
            s4.abs() <= 2.0 * a4 + 3.0 * se4,
            format!("T={t}: k4 T = {s4:.3} within 2*{a4:.3} + 3*{se4:.3}"),
        );
        last = Some((*t, k.k3));
    }
    let (t, k3) = last.unwrap();
    let formula = theory::asymptotic_cumulant(3, theta, r, t).unwrap();
    let ratio = k3 / formula;
    c.require(
        (1.0 / 1.5..=1.5).contains(&ratio),
        format!("T={t}: k3 / asymptotic_cumulant(3) = {ratio:.3} within factor 1.5"),
    );
    c
}

fn kolmogorov_rate() -> Check {
    let mut c = Check::new(
        "criterion 8",
        "Kolmogorov distance rate of the standardized numerator",
    );
    let points: Vec<(f64, f64)> = numerator_samples()
        .iter()
        .map(|(t, z)| (*t, kolmogorov_distance(z).unwrap()))
        .collect();
    let fit = rate_fit(&points).unwrap();
    c.note(format!("d_kol by T: {points:.4?}"));
    c.require(
        fit.exponent <= -0.3,
        format!("fitted exponent {:.3} <= -0.3", fit.exponent),
    );
    c
}

fn type_one_calibration() -> Check {
    let mut c = Check::new(
        "criterion 9",
        "type-I calibration at alpha = 0.05, T = 200, n = 1e4",
    );
    let data = pairs(1.0, 0.0, 200.0, 0.05, 10_000, 9000);
    for variant in TestVariant::ALL {
        let k = data
            .iter()
            .filter(|s| run_test(variant, s, Some(1.0), ALPHA).unwrap().reject)
            .count();
        let rate = k as f64 / data.len() as f64;
        c.require(
            (0.04..=0.06).contains(&rate),
            format!("{variant}: rejection rate {rate:.4} in [0.04, 0.06]"),
        );
    }
    c
}

fn power_curves() -> Check {
    let mut c = Check::new(
        "criterion 10",
        "power at r = 0.3 over T = 50..400, n = 4000",
    );
    let (theta, r, n) = (1.0, 0.3, 4000);
    let horizons = [50.0, 100.0, 200.0, 400.0];
    let mut power = vec![Vec::new(); TestVariant::ALL.len()];
    for (i, &t) in horizons.iter().enumerate() {
        let data = pairs(theta, r, t, 0.05, n, 10_000 + i as u64);
        for (j, variant) in TestVariant::ALL.into_iter().enumerate() {
            let k = data
                .iter()
                .filter(|s| run_test(variant, s, Some(theta), ALPHA).unwrap().reject)
                .count();
            power[j].push(k as f64 / n as f64);
        }
    }
    for (j, variant) in TestVariant::ALL.into_iter().enumerate() {
        let p = &power[j];
        c.note(format!("{variant}: power {p:.4?}"));
        for w in 0..horizons.len() - 1 {
            let se = binomial_se(p[w], n).hypot(binomial_se(p[w + 1], n));
            c.require(
                p[w + 1] >= p[w] - 2.0 * se,
                format!(
                    "{variant}: T {} -> {}: {:.4} >= {:.4} - 2 SE",
                    horizons[w],
                    horizons[w + 1],
                    p[w + 1],
                    p[w]
                ),
            );
        }
        c.require(
            p[3] > 0.9,
            format!("{variant}: power {:.4} > 0.9 at T = 400", p[3]),
        );
    }
    let rho = &power[0];
    let num = &power[2];
    for (w, &t) in horizons.iter().enumerate() {
        let se = binomial_se(rho[w], n).hypot(binomial_se(num[w], n));
        c.require(
            num[w] >= rho[w] - 2.0 * se,
            format!(
                "T={t}: numerator power {:.4} >= rho power {:.4} - 2 SE ({se:.4})",
                num[w], rho[w]
            ),
        );
    }
    c
}

fn spde_improvement() -> Check {
    let mut c = Check::new(
        "criterion 11",
        "multi-mode improvement at r = 0.3, T = 50, n = 5000",
    );
    let (t, n) = (50.0, 5000);
    let alt = replicate_spde(3, 0.3, t, DtPolicy::default(), 11_000, n).unwrap();
    let beta = |modes: usize| {
        let miss = alt
            .iter()
            .filter(|reps| {
                !spde_multimode_test(
                    &reps[..modes],
                    ALPHA,
                    TestVariant::RhoKnownTheta,
                    FamilyCorrection::None,
                )
                .unwrap()
                .reject_any
            })
            .count();
        miss as f64 / n as f64
    };
    let (b1, b3) = (beta(1), beta(3));
    let se = binomial_se(b1, n).hypot(binomial_se(b3, n));
    c.require(
        b1 - b3 > 2.0 * se,
        format!("type-II error N=1 {b1:.4} vs N=3 {b3:.4}, gap > 2 SE ({se:.4})"),
    );
    let null = replicate_spde(3, 0.0, t, DtPolicy::default(), 11_001, n).unwrap();
    let rejects = null
        .iter()
        .filter(|reps| {
            spde_multimode_test(
                reps,
                ALPHA,
                TestVariant::RhoKnownTheta,
                FamilyCorrection::None,
            )
            .unwrap()
            .reject_any
        })
        .count();
    let rate = rejects as f64 / n as f64;
    let expected = 1.0 - (1.0 - ALPHA).powi(3);
    c.require(
        (rate - expected).abs() <= 0.02,
        format!("null family rate {rate:.4} vs {expected:.6} within 0.02"),
    );
    c
}

fn theta_hat_calibration() -> Check {
    let mut c = Check::new(
        "criterion 12",
        "theta_hat calibration at theta = 1, T = 500, n = 1e4",
    );
    let (theta, t) = (1.0, 500.0f64);
    let data = clt_data(0);
    let z: Vec<f64> = data
        .iter()
        .map(|s| t.sqrt() * (s.theta_hat - theta))
        .collect();
    let (m, v) = mean_var(&z);
    let target = theory::theta_hat_clt_variance(theta).unwrap();
    c.require(
        (v / target - 1.0).abs() <= 0.15,
        format!(
            "Var[sqrt(T)(theta_hat - theta)] = {v:.4} (se {:.4}) vs {target} within 15%",
            variance_se(v, data.len())
        ),
    );
    c.note(format!("mean of sqrt(T)(theta_hat - theta) = {m:.4}"));
    c
}

fn grid_csv(jobs: usize) -> Vec<u8> {
    let grid = ExperimentGrid {
        thetas: vec![1.0, 4.0],
        rs: vec![0.0, 0.5],
        horizons: vec![20.0, 40.0],
        dt_policy: DtPolicy::default(),
        replications: 300,
        base_seed: 13_000,
        statistic: StatisticKind::NumeratorCentered,
        test: TestVariant::RhoEstimatedTheta,
        alpha: ALPHA,
    };
    let reports: Vec<_> = run_grid(&grid, jobs)
        .unwrap()
        .into_iter()
        .map(|o| o.expect("cell"))
        .collect();
    let mut out = Vec::new();
    write_reports_csv(&reports, None, &mut out).unwrap();
    out
}

fn determinism() -> Check {
    let mut c = Check::new(
        "criterion 13",
        "bitwise determinism across runs and worker counts",
    );
    let a = grid_csv(1);
    let b = grid_csv(4);
    let again = grid_csv(4);
    c.require(
        a == b,
        "Monte Carlo grid CSV identical with 1 and 4 workers",
    );
    c.require(b == again, "Monte Carlo grid CSV identical on repetition");
    let cfg = CorrelatedPairConfig::new(1.0, 0.5, 100.0, 0.05, 13_001).unwrap();
    let bits = |jobs: usize| -> Vec<u64> {
        thread_pool(jobs)
            .unwrap()
            .install(|| replicate_pairs(&cfg, 400).unwrap())
            .iter()
            .flat_map(|s| [s.y11, s.y22, s.y12, s.rho, s.theta_hat])
            .map(f64::to_bits)
            .collect()
    };
    c.require(
        bits(1) == bits(4),
        "replicated pair statistics identical with 1 and 4 workers",
    );
    let spde = |jobs: usize| -> Vec<u64> {
        thread_pool(jobs)
            .unwrap()
            .install(|| replicate_spde(3, 0.3, 20.0, DtPolicy::default(), 13_002, 200).unwrap())
            .iter()
            .flatten()
            .map(|s| s.rho.to_bits())
            .collect()
    };
    c.require(
        spde(1) == spde(4),
        "multi-mode ensembles identical with 1 and 4 workers",
    );
    c
}

fn ci_coverage() -> Check {
    let mut c = Check::new(
        "supplement A",
        "known-theta confidence interval coverage at r = 0.5, T = 500, n = 1e3",
    );
    let r = 0.5;
    let data = &clt_data(1)[..1000];
    let covered = data
        .iter()
        .filter(|s| {
            confidence_interval_r(s, ALPHA, ThetaMode::Known, Some(1.0))
                .unwrap()
                .contains(r)
        })
        .count();
    let cov = covered as f64 / data.len() as f64;
    c.require(
        (cov - 0.95).abs() <= 0.02,
        format!("coverage {cov:.4} within 0.95 +- 0.02"),
    );
    c
}
