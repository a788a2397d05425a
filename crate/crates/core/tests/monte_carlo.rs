//! Monte Carlo checks of simulation, estimators, tests and harness against
//! closed-form values.

use rayon::prelude::*;

use yule_core::estimators::{pair_statistics, path_time_average};
use yule_core::hypothesis::{
    calibrate_berry_constant, gaussian_tail_rho, rho_bound_rate, run_test, type2_bound_rho,
};
use yule_core::mc::{
    error_rates, kolmogorov_distance, replicate_pairs, run_grid, ExperimentGrid, StatisticKind,
    Truth,
};
use yule_core::rng::StreamKey;
use yule_core::sde::{
    mean_functional_variance, ou_covariance, simulate_correlated_pair, simulate_ou,
};
use yule_core::{theory, CorrelatedPairConfig, DtPolicy, TestVariant, YuleStatistics};

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn pairs(theta: f64, r: f64, t: f64, reps: usize, seed: u64) -> Vec<YuleStatistics> {
    let cfg = CorrelatedPairConfig::new(theta, r, t, 0.05 / theta, seed).unwrap();
    replicate_pairs(&cfg, reps).unwrap()
}

#[test]
fn marginal_variance_at_one() {
    let n = 100_000;
    let x: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamKey::new(101, i, 0).rng();
            let p = simulate_ou(1.0, 1.0, 0.05, &mut rng).unwrap();
            *p.values().last().unwrap()
        })
        .collect();
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let (m2, v2) = mean_var(&sq);
    let target = -(-2f64).exp_m1() / 2.0;
    assert!((target - 0.432_332).abs() < 1e-6);
    let se = (v2 / n as f64).sqrt();
    assert!((m2 - target).abs() < 3.0 * se, "{m2} vs {target} (se {se})");
}

#[test]
fn equal_time_cross_correlation_is_r() {
    let n = 100_000;
    let cfg = CorrelatedPairConfig::new(1.0, 0.5, 5.0, 0.05, 102).unwrap();
    let xy: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_correlated_pair(&cfg, i).unwrap();
            (
                *p.x1.values().last().unwrap(),
                *p.x2.values().last().unwrap(),
            )
        })
        .collect();
    let nf = n as f64;
    let (mx, my) = xy
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / nf, a.1 + p.1 / nf));
    let (sxx, syy, sxy) = xy.iter().fold((0.0, 0.0, 0.0), |a, p| {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        (a.0 + dx * dx, a.1 + dy * dy, a.2 + dx * dy)
    });
    let corr = sxy / (sxx * syy).sqrt();
    // SE of a sample correlation of a bivariate normal
    let se = (1.0 - 0.25) / nf.sqrt();
    assert!((corr - 0.5).abs() < 3.0 * se, "{corr}");
}

#[test]
fn time_average_variance() {
    let n = 10_000;
    let sq: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamKey::new(103, i, 0).rng();
            let p = simulate_ou(1.0, 100.0, 0.05, &mut rng).unwrap();
            path_time_average(&p).unwrap().powi(2)
        })
        .collect();
    let (m, v) = mean_var(&sq);
    let target = mean_functional_variance(1.0, 100.0).unwrap();
    let se = (v / n as f64).sqrt();
    assert!((m - target).abs() < 4.0 * se, "{m} vs {target} (se {se})");
}

#[test]
fn sample_covariance_matches_closed_form() {
    let n = 100_000u64;
    for (theta, s, t) in [(1.0, 1.0, 2.0), (2.0, 0.5, 3.0)] {
        let dt = 0.025 / theta;
        let prods: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = StreamKey::new(104, i, 0).rng();
                let p = simulate_ou(theta, t, dt, &mut rng).unwrap();
                let k = (s / p.dt()).round() as usize;
                p.values()[k] * p.values()[p.len() - 1]
            })
            .collect();
        let (m, v) = mean_var(&prods);
        let target = ou_covariance(theta, s, t).unwrap();
        let se = (v / n as f64).sqrt();
        assert!(
            (m - target).abs() < 4.0 * se,
            "({theta},{s},{t}): {m} vs {target}"
        );
    }
}

#[test]
fn lln_for_rho() {
    let cfg = CorrelatedPairConfig::new(1.0, 0.5, 500.0, 0.01, 105).unwrap();
    let rho: Vec<f64> = replicate_pairs(&cfg, 1000)
        .unwrap()
        .iter()
        .map(|s| s.rho)
        .collect();
    let (m, _) = mean_var(&rho);
    assert!((m - 0.5).abs() < 0.01, "{m}");
}

#[test]
fn theta_estimator_is_consistent() {
    let th: Vec<f64> = pairs(2.0, 0.0, 200.0, 1000, 106)
        .iter()
        .map(|s| s.theta_hat)
        .collect();
    let (m, _) = mean_var(&th);
    assert!((m - 2.0).abs() < 0.1, "{m}");
}

#[test]
fn null_numerator_variance() {
    let num: Vec<f64> = pairs(1.0, 0.0, 200.0, 10_000, 107)
        .iter()
        .map(|s| s.numerator())
        .collect();
    let (_, v) = mean_var(&num);
    assert!((v / 0.25 - 1.0).abs() < 0.1, "{v}");
}

#[test]
fn type_one_rates() {
    let stats = pairs(1.0, 0.0, 200.0, 10_000, 108);
    for (variant, tol) in [
        (TestVariant::RhoKnownTheta, 0.01),
        (TestVariant::RhoEstimatedTheta, 0.012),
        (TestVariant::NumeratorKnownTheta, 0.01),
    ] {
        let outcomes: Vec<_> = stats
            .iter()
            .map(|s| run_test(variant, s, Some(1.0), 0.05).unwrap())
            .collect();
        let rate = error_rates(&outcomes, Truth::H0).unwrap().rate;
        assert!((rate - 0.05).abs() <= tol, "{variant}: {rate}");
    }
}

#[test]
fn type_two_bound_dominates_after_calibration() {
    let (theta, r, alpha) = (1.0, 0.5, 0.05);
    let beta = |t: f64, seed: u64| {
        let outcomes: Vec<_> = pairs(theta, r, t, 2000, seed)
            .iter()
            .map(|s| run_test(TestVariant::RhoKnownTheta, s, Some(theta), alpha).unwrap())
            .collect();
        let power = error_rates(&outcomes, Truth::Ha).unwrap();
        (1.0 - power.rate, power.std_err())
    };
    let (b50, se50) = beta(50.0, 109);
    let c = calibrate_berry_constant(
        b50,
        se50,
        gaussian_tail_rho(theta, r, alpha, 50.0).unwrap(),
        rho_bound_rate(50.0),
    )
    .unwrap();
    for (t, seed) in [(50.0, 110), (100.0, 111), (200.0, 112)] {
        let (b, _) = beta(t, seed);
        let bound = type2_bound_rho(theta, r, alpha, t, c).unwrap();
        assert!(b <= bound, "T={t}: beta {b} > bound {bound}");
    }
}

#[test]
fn third_cumulant_of_numerator() {
    let (theta, r, t) = (1.0, 0.5, 100.0);
    let z: Vec<f64> = pairs(theta, r, t, 20_000, 113)
        .iter()
        .map(|s| {
            StatisticKind::NumeratorCentered
                .evaluate(s, theta, r)
                .unwrap()
        })
        .collect();
    let k3 = yule_core::mc::k_statistics(&z).unwrap().k3;
    let formula = theory::asymptotic_cumulant(3, theta, r, t).unwrap();
    let ratio = k3 / formula;
    assert!((1.0 / 1.5..=1.5).contains(&ratio), "k3 {k3} vs {formula}");
}

#[test]
fn denominator_concentration() {
    let theta = 1.0;
    for (t, seed) in [(100.0, 114), (400.0, 115)] {
        let dev: Vec<f64> = pairs(theta, 0.3, t, 2000, seed)
            .iter()
            .map(|s| (2.0 * theta * (s.y11 * s.y22).sqrt() / t - 1.0).abs())
            .collect();
        let (m, _) = mean_var(&dev);
        let bound = theory::denominator_lp_bound(1.0, theta).unwrap() / t.sqrt();
        assert!(m <= bound, "T={t}: {m} > {bound}");
    }
}

fn grid(statistic: StatisticKind, horizons: Vec<f64>, reps: usize, seed: u64) -> ExperimentGrid {
    ExperimentGrid {
        thetas: vec![1.0],
        rs: vec![0.0],
        horizons,
        dt_policy: DtPolicy::default(),
        replications: reps,
        base_seed: seed,
        statistic,
        test: TestVariant::RhoKnownTheta,
        alpha: 0.05,
    }
}

#[test]
fn harness_rho_centered_is_standard_under_null() {
    let out = run_grid(
        &grid(StatisticKind::RhoCentered, vec![200.0], 10_000, 116),
        0,
    )
    .unwrap();
    let rep = out[0].as_ref().unwrap();
    assert!(rep.mean.abs() < 0.03, "{}", rep.mean);
    assert!(
        (rep.variance.unwrap() - 1.0).abs() < 0.1,
        "{:?}",
        rep.variance
    );
    assert!(rep.ci_lo <= 0.05 && 0.05 <= rep.ci_hi + 0.01);
}

#[test]
fn harness_ybar_centered_is_standard() {
    let out = run_grid(
        &grid(StatisticKind::YbarCentered, vec![400.0], 10_000, 117),
        0,
    )
    .unwrap();
    let rep = out[0].as_ref().unwrap();
    assert!(
        (rep.variance.unwrap() - 1.0).abs() < 0.1,
        "{:?}",
        rep.variance
    );
}

#[test]
fn harness_matches_direct_replication() {
    let g = grid(StatisticKind::NumeratorCentered, vec![30.0], 200, 118);
    let rep = run_grid(&g, 2).unwrap().remove(0).unwrap();
    let cfg =
        CorrelatedPairConfig::new(1.0, 0.0, 30.0, 0.05, yule_core::rng::cell_seed(118, 0)).unwrap();
    let z: Vec<f64> = (0..200)
        .map(|i| {
            let s = pair_statistics(&simulate_correlated_pair(&cfg, i).unwrap()).unwrap();
            StatisticKind::NumeratorCentered
                .evaluate(&s, 1.0, 0.0)
                .unwrap()
        })
        .collect();
    let (m, v) = mean_var(&z);
    assert_eq!(rep.mean, z.iter().sum::<f64>() / 200.0);
    assert!((rep.mean - m).abs() < 1e-15);
    assert!((rep.variance.unwrap() - v).abs() < 1e-12);
    assert_eq!(rep.d_kol, kolmogorov_distance(&z).unwrap());
}
