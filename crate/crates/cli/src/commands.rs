use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use yule_core::hypothesis::{self, FamilyCorrection};
use yule_core::mc::{self, ExperimentGrid, McReport};
use yule_core::sde::{self, DtPolicy, DEFAULT_STEP_CAP};
use yule_core::{estimators, theory, CorrelatedPairConfig, TestVariant, ThetaMode};

use crate::config::{config_err, invalid, load_config_file, merge, require, CliError, CliResult};
use crate::{
    FormatArg, McArgs, SimulateArgs, SpdeArgs, StatArgs, StatisticArg, TestArgs, TheoryArgs,
    ThetaSourceArg, VariantArg,
};

fn load<T>(flags: T, config: Option<&Path>) -> CliResult<T>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let file = config.map(load_config_file).transpose()?;
    merge(&flags, file)
}

fn echo<T: Serialize>(command: &str, args: &T) -> Value {
    let mut v = serde_json::to_value(args).expect("serializable");
    if let Value::Object(m) = &mut v {
        m.remove("output");
        m.remove("jsonl");
        m.insert("command".into(), Value::String(command.into()));
    }
    v
}

/// Writes a fully rendered artifact in one piece.
fn emit(output: Option<&Path>, body: &[u8]) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn read_pair(path: &Path) -> CliResult<(sde::SamplePath, sde::SamplePath)> {
    let f = File::open(path)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    sde::read_pair_csv(BufReader::new(f))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(config_err(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

pub fn simulate(flags: SimulateArgs, config: Option<&Path>) -> CliResult<()> {
    let mut a = load(flags, config)?;
    let theta = require(a.theta, "theta")?;
    let r = require(a.r, "r")?;
    let t = require(a.horizon, "T")?;
    if !(theta.is_finite() && theta > 0.0) {
        return Err(config_err(format!("--theta must be > 0, got {theta}")));
    }
    let dt = *a.dt.get_or_insert(DEFAULT_STEP_CAP / theta);
    let seed = *a.seed.get_or_insert(0);
    let rep = *a.rep.get_or_insert(0);
    let cfg = invalid(CorrelatedPairConfig::new(theta, r, t, dt, seed))?;
    if cfg.steps() + 1 > sde::MAX_NODES {
        return Err(config_err(format!(
            "{} nodes exceed the limit of {}",
            cfg.steps() + 1,
            sde::MAX_NODES
        )));
    }
    let pair = sde::simulate_correlated_pair(&cfg, rep)?;
    let mut buf = Vec::new();
    writeln!(buf, "# {}", echo("simulate", &a))?;
    pair.write_csv(&mut buf)?;
    emit(a.output.as_deref(), &buf)
}

pub fn stat(flags: StatArgs, config: Option<&Path>) -> CliResult<()> {
    let mut a = load(flags, config)?;
    let input = require(a.input.clone(), "input")?;
    let source = *a.theta_source.get_or_insert(ThetaSourceArg::First);
    let (x1, x2) = read_pair(&input)?;
    let stats = estimators::yule_rho_with(&x1, &x2, source.into())?;
    let v = json!({ "config": echo("stat", &a), "statistics": stats });
    emit(a.output.as_deref(), &json_bytes(&v))
}

pub fn test(flags: TestArgs, config: Option<&Path>) -> CliResult<()> {
    let mut a = load(flags, config)?;
    let variant: TestVariant = require(a.variant, "variant")?.into();
    let alpha = *a.alpha.get_or_insert(0.05);
    check_alpha(alpha)?;
    let theta = if variant.needs_theta() {
        let th = require(a.theta, "theta")?;
        if !(th.is_finite() && th > 0.0) {
            return Err(config_err(format!("--theta must be > 0, got {th}")));
        }
        Some(th)
    } else {
        a.theta
    };
    let input = require(a.input.clone(), "input")?;
    let format = *a.format.get_or_insert(FormatArg::Json);
    let (x1, x2) = read_pair(&input)?;
    let stats = estimators::yule_rho(&x1, &x2)?;
    let outcome = hypothesis::run_test(variant, &stats, theta, alpha)?;
    let ci = if a.ci {
        let mode = if theta.is_some() {
            ThetaMode::Known
        } else {
            ThetaMode::Estimated
        };
        Some(hypothesis::confidence_interval_r(
            &stats, alpha, mode, theta,
        )?)
    } else {
        None
    };
    let body = match format {
        FormatArg::Json => {
            let mut v =
                json!({ "config": echo("test", &a), "outcome": outcome, "statistics": stats });
            if let Some(ci) = ci {
                v["confidence_interval"] = serde_json::to_value(ci).expect("serializable");
            }
            json_bytes(&v)
        }
        FormatArg::Csv => {
            let mut buf = Vec::new();
            writeln!(buf, "# {}", echo("test", &a))?;
            write!(
                buf,
                "variant,statistic,threshold,alpha,reject,rho,theta_hat,T"
            )?;
            if ci.is_some() {
                write!(buf, ",ci_lo,ci_hi")?;
            }
            writeln!(buf)?;
            write!(
                buf,
                "{},{},{},{},{},{},{},{}",
                outcome.variant,
                outcome.statistic,
                outcome.threshold,
                outcome.alpha,
                outcome.reject,
                stats.rho,
                stats.theta_hat,
                stats.horizon_t
            )?;
            if let Some(ci) = ci {
                write!(buf, ",{},{}", ci.lower, ci.upper)?;
            }
            writeln!(buf)?;
            buf
        }
    };
    emit(a.output.as_deref(), &body)
}

pub fn mc(flags: McArgs, config: Option<&Path>, jobs: usize) -> CliResult<()> {
    let mut a = load(flags, config)?;
    let thetas = require(a.theta.clone(), "theta")?;
    let rs = require(a.r.clone(), "r")?;
    let horizons = require(a.horizon.clone(), "T")?;
    let replications = require(a.reps, "reps")?;
    let statistic = *a.statistic.get_or_insert(StatisticArg::RhoCentered);
    let variant = *a.variant.get_or_insert(VariantArg::Rho);
    let alpha = *a.alpha.get_or_insert(0.05);
    let base_seed = *a.seed.get_or_insert(0);
    let format = *a.format.get_or_insert(FormatArg::Csv);
    let dt_policy = match a.dt {
        Some(dt) => DtPolicy::Fixed(dt),
        None => DtPolicy::Cap(*a.step_cap.get_or_insert(DEFAULT_STEP_CAP)),
    };
    let grid = ExperimentGrid {
        thetas,
        rs,
        horizons,
        dt_policy,
        replications,
        base_seed,
        statistic: statistic.into(),
        test: variant.into(),
        alpha,
    };
    invalid(grid.validate())?;
    for &theta in &grid.thetas {
        invalid(dt_policy.validate(theta))?;
    }
    let outcomes = mc::run_grid_with_progress(&grid, jobs, |done, total, o| match o {
        Ok(rep) => eprintln!(
            "[{done}/{total}] theta={} r={} T={} reject_rate={:.4}",
            rep.theta, rep.r, rep.horizon_t, rep.reject_rate
        ),
        Err(f) => eprintln!(
            "[{done}/{total}] theta={} r={} T={} failed: {}",
            f.theta, f.r, f.horizon_t, f.error
        ),
    })?;
    let (reports, failures): (Vec<_>, Vec<_>) = outcomes.into_iter().partition(|o| o.is_ok());
    let reports: Vec<McReport> = reports.into_iter().map(|o| o.expect("ok")).collect();
    let echoed = echo("mc", &a).to_string();
    let mut buf = Vec::new();
    match format {
        FormatArg::Csv => mc::write_reports_csv(&reports, Some(&echoed), &mut buf)?,
        FormatArg::Json => {
            writeln!(buf, "{}", json!({ "config": echo("mc", &a) }))?;
            mc::write_reports_jsonl(&reports, &mut buf)?;
        }
    }
    emit(a.output.as_deref(), &buf)?;
    if let Some(path) = &a.jsonl {
        let mut side = Vec::new();
        writeln!(side, "{}", json!({ "config": echo("mc", &a) }))?;
        mc::write_reports_jsonl(&reports, &mut side)?;
        emit(Some(path), &side)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} cell(s) failed",
            failures.len()
        )))
    }
}

#[derive(Serialize)]
struct ModeRate {
    mode: usize,
    theta: f64,
    level: f64,
    reject_rate: f64,
    ci_lo: f64,
    ci_hi: f64,
}

pub fn spde(flags: SpdeArgs, config: Option<&Path>, jobs: usize) -> CliResult<()> {
    let mut a = load(flags, config)?;
    let n_modes = require(a.modes, "N")?;
    let r = require(a.r, "r")?;
    let t = require(a.horizon, "T")?;
    let alpha = *a.alpha.get_or_insert(0.05);
    let reps = *a.reps.get_or_insert(1);
    let seed = *a.seed.get_or_insert(0);
    let variant: TestVariant = (*a.variant.get_or_insert(VariantArg::Rho)).into();
    let cap = *a.step_cap.get_or_insert(DEFAULT_STEP_CAP);
    check_alpha(alpha)?;
    if n_modes == 0 || n_modes > u16::MAX as usize / 2 {
        return Err(config_err(format!(
            "--N must lie in 1..={}, got {n_modes}",
            u16::MAX / 2
        )));
    }
    if reps == 0 {
        return Err(config_err("--reps must be >= 1"));
    }
    if !(r.is_finite() && r.abs() <= 1.0) {
        return Err(config_err(format!("--r must lie in [-1, 1], got {r}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(config_err(format!("--T must be > 0, got {t}")));
    }
    if !(cap.is_finite() && cap > 0.0 && cap <= DEFAULT_STEP_CAP) {
        return Err(config_err(format!(
            "--step-cap must lie in (0, {DEFAULT_STEP_CAP}], got {cap}"
        )));
    }
    let (correction, level) = if a.sidak {
        (
            FamilyCorrection::Sidak,
            invalid(hypothesis::sidak_level(alpha, n_modes))?,
        )
    } else {
        (FamilyCorrection::None, alpha)
    };
    let pool = mc::thread_pool(jobs)?;
    let per_rep =
        pool.install(|| mc::replicate_spde(n_modes, r, t, DtPolicy::Cap(cap), seed, reps))?;
    let outcomes = per_rep
        .iter()
        .map(|stats| hypothesis::spde_multimode_test(stats, alpha, variant, correction))
        .collect::<yule_core::Result<Vec<_>>>()?;
    let family = outcomes.iter().filter(|o| o.reject_any).count();
    let (lo, hi) = mc::wilson_interval(family, reps)?;
    let mut modes = Vec::with_capacity(n_modes);
    for k in 0..n_modes {
        let hits = outcomes.iter().filter(|o| o.per_mode[k].reject).count();
        let (ci_lo, ci_hi) = mc::wilson_interval(hits, reps)?;
        let kk = (k + 1) as f64;
        modes.push(ModeRate {
            mode: k + 1,
            theta: kk * kk,
            level,
            reject_rate: hits as f64 / reps as f64,
            ci_lo,
            ci_hi,
        });
    }
    let expected = -(n_modes as f64 * (-level).ln_1p()).exp_m1();
    let v = json!({
        "config": echo("spde", &a),
        "n_modes": n_modes,
        "replications": reps,
        "per_mode_level": level,
        "family_reject_rate": family as f64 / reps as f64,
        "family_ci_lo": lo,
        "family_ci_hi": hi,
        "independent_modes_rate": expected,
        "modes": modes,
        "first_replication": outcomes[0],
    });
    emit(a.output.as_deref(), &json_bytes(&v))
}

const QUANTITIES: &[&str] = &[
    "sigma",
    "chaos_constants",
    "clt_variance_rho",
    "delta_method_variance_rho",
    "theta_hat_clt_variance",
    "cumulant_bound_constants",
    "delta_convolution_inner",
    "asymptotic_cumulant",
    "ar_moment_kernel",
    "exact_second_moment_ar",
    "kernel_h_norm",
    "kernel_h_norm_limit",
    "kernel_g_norm",
    "eta_constant",
    "edgeworth_tail",
    "edgeworth_kolmogorov_bound",
    "major_tail_bound",
    "wasserstein_scale_bound",
    "denominator_lp_bound",
    "ou_covariance",
    "mean_functional_variance",
    "critical_value",
    "sidak_level",
    "gaussian_tail_rho",
    "type2_bound_rho",
    "gaussian_tail_numerator",
    "type2_bound_numerator",
    "numerator_bound_min_horizon",
];

fn order(p: f64) -> CliResult<u32> {
    if p.fract() == 0.0 && p >= 0.0 && p <= u32::MAX as f64 {
        Ok(p as u32)
    } else {
        Err(config_err(format!(
            "--p must be a nonnegative integer here, got {p}"
        )))
    }
}

fn to_value<T: Serialize>(x: T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn evaluate(q: &str, a: &TheoryArgs) -> CliResult<Value> {
    let theta = || require(a.theta, "theta");
    let r = || require(a.r, "r");
    let t = || require(a.horizon, "T");
    let p = || require(a.p, "p");
    let alpha = a.alpha.unwrap_or(0.05);
    let berry = a.berry.unwrap_or(0.0);
    let kernel = || -> CliResult<theory::KernelSpec> {
        invalid(theory::KernelSpec::new(theta()?, r()?, t()?))
    };
    let v = match q {
        "sigma" => to_value(invalid(theory::sigma(theta()?, r()?))?),
        "chaos_constants" => to_value(invalid(theory::chaos_constants(theta()?, r()?))?),
        "clt_variance_rho" => to_value(invalid(theory::clt_variance_rho(theta()?, r()?))?),
        "delta_method_variance_rho" => {
            to_value(invalid(theory::delta_method_variance_rho(theta()?, r()?))?)
        }
        "theta_hat_clt_variance" => to_value(invalid(theory::theta_hat_clt_variance(theta()?))?),
        "cumulant_bound_constants" => {
            to_value(invalid(theory::cumulant_bound_constants(theta()?, r()?))?)
        }
        "delta_convolution_inner" => to_value(invalid(theory::delta_convolution_inner(
            order(p()?)?,
            theta()?,
        ))?),
        "asymptotic_cumulant" => to_value(invalid(theory::asymptotic_cumulant(
            order(p()?)?,
            theta()?,
            r()?,
            t()?,
        ))?),
        "ar_moment_kernel" => to_value(invalid(theory::ar_moment_kernel(theta()?, t()?))?),
        "exact_second_moment_ar" => to_value(invalid(theory::exact_second_moment_ar(
            theta()?,
            r()?,
            t()?,
        ))?),
        "kernel_h_norm" => to_value(invalid(theory::kernel_h_norm(&kernel()?))?),
        "kernel_h_norm_limit" => to_value(invalid(theory::kernel_h_norm_limit(theta()?, r()?))?),
        "kernel_g_norm" => to_value(invalid(theory::kernel_g_norm(&kernel()?))?),
        "eta_constant" => to_value(invalid(theory::eta_constant(theta()?, r()?))?),
        "edgeworth_tail" => to_value(invalid(theory::edgeworth_tail(
            require(a.z, "z")?,
            theta()?,
            r()?,
            t()?,
        ))?),
        "edgeworth_kolmogorov_bound" => to_value(invalid(theory::edgeworth_kolmogorov_bound(
            theta()?,
            r()?,
            t()?,
        ))?),
        "major_tail_bound" => to_value(invalid(theory::major_tail_bound(
            require(a.n, "n")?,
            require(a.norm, "norm")?,
            require(a.x, "x")?,
            a.prefactor.unwrap_or(1.0),
        ))?),
        "wasserstein_scale_bound" => to_value(invalid(theory::wasserstein_scale_bound(require(
            a.sigma, "sigma",
        )?))?),
        "denominator_lp_bound" => to_value(invalid(theory::denominator_lp_bound(p()?, theta()?))?),
        "ou_covariance" => to_value(invalid(sde::ou_covariance(
            theta()?,
            require(a.s, "s")?,
            require(a.t, "t")?,
        ))?),
        "mean_functional_variance" => {
            to_value(invalid(sde::mean_functional_variance(theta()?, t()?))?)
        }
        "critical_value" => to_value(invalid(hypothesis::critical_value(alpha))?),
        "sidak_level" => to_value(invalid(hypothesis::sidak_level(
            alpha,
            order(p()?)? as usize,
        ))?),
        "gaussian_tail_rho" => to_value(invalid(hypothesis::gaussian_tail_rho(
            theta()?,
            r()?,
            alpha,
            t()?,
        ))?),
        "type2_bound_rho" => to_value(invalid(hypothesis::type2_bound_rho(
            theta()?,
            r()?,
            alpha,
            t()?,
            berry,
        ))?),
        "gaussian_tail_numerator" => to_value(invalid(hypothesis::gaussian_tail_numerator(
            theta()?,
            r()?,
            alpha,
            t()?,
        ))?),
        "type2_bound_numerator" => to_value(invalid(hypothesis::type2_bound_numerator(
            theta()?,
            r()?,
            alpha,
            t()?,
            berry,
        ))?),
        "numerator_bound_min_horizon" => to_value(invalid(
            hypothesis::numerator_bound_min_horizon(theta()?, r()?, alpha),
        )?),
        other => {
            return Err(config_err(format!(
                "unknown quantity {other:?}; use --quantity list"
            )))
        }
    };
    Ok(v)
}

pub fn theory(flags: TheoryArgs, config: Option<&Path>) -> CliResult<()> {
    let a = load(flags, config)?;
    let quantity = require(a.quantity.clone(), "quantity")?;
    if quantity == "list" {
        let v = json!({ "quantities": QUANTITIES });
        return emit(None, &json_bytes(&v));
    }
    let value = evaluate(&quantity, &a)?;
    let mut params: Map<String, Value> = match to_value(&a) {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    params.remove("quantity");
    let v = json!({ "quantity": quantity, "params": params, "value": value });
    emit(None, &json_bytes(&v))
}
