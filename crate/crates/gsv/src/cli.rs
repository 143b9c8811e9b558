//! Experiment runner: executes one task from a config and writes a JSON
//! report (and CSV tables for sweep tasks). Reports are byte-identical for
//! identical config and seed, except for the `timing` block.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OutputFormat, Task};
use crate::error::{Error, Result};
use crate::explosion::{
    convex_minorant, exp_variance_moment_mc, explosion_certificate, growth_class,
    truncated_moment_mc, ConvexMinorant,
};
use crate::grid::PathGrid;
use crate::math::{eps_pow, norm_ccdf};
use crate::model::{ModelSpec, Regime};
use crate::pricing::{
    call_asymptote, call_exceptional, call_limit_cl, implied_vol, iv_asymptote, AsymptoticTerm,
};
use crate::rates::{
    cl_tail, exit_rate, ldp_rate_terminal, mdp_rate_terminal, RateResult, SolverOptions,
};
use crate::simulate::{estimate_call, estimate_tail, mdp_tail_tilt, simulate_log_price};

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub wall_ms: u128,
}

/// The JSON report payload. Everything except `timing` is deterministic in
/// (config, seed).
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub task: String,
    pub config: BTreeMap<String, Value>,
    pub results: Value,
    pub timing: Timing,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub csv: Option<String>,
    /// false only when a verify run found failing checks
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    eps: f64,
    estimate: Option<f64>,
    stderr: Option<f64>,
    scaled_log: Option<f64>,
    limit: Option<f64>,
    gap: Option<f64>,
    annotation: String,
}

fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("eps,estimate,stderr,scaled_log,limit,gap,annotation\n");
    for r in rows {
        let cell = |v: Option<f64>| v.map(fmt_sci).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_sci(r.eps),
            cell(r.estimate),
            cell(r.stderr),
            cell(r.scaled_log),
            cell(r.limit),
            cell(r.gap),
            r.annotation
        ));
    }
    out
}

fn rate_result_json(r: &RateResult) -> Value {
    json!({
        "value": r.value,
        "status": r.status,
        "restarts_used": r.restarts_used,
        "grid_levels": r.grid_levels,
        "minimizer_energy": r.minimizer.energy(),
    })
}

fn term_json(t: &AsymptoticTerm) -> Value {
    json!({
        "coefficient": t.coefficient,
        "eps_exponent": t.eps_exponent,
        "log_correction": t.log_correction,
        "regime": t.regime,
    })
}

/// Executes the configured task and assembles the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let model = cfg.model()?;
    let (results, csv, ok) = match cfg.task {
        Task::Simulate => {
            let (rows, extra) = tail_sweep(cfg, &model)?;
            let csv = rows_to_csv(&rows);
            (json!({"sweep": rows, "theory": extra}), Some(csv), true)
        }
        Task::CallPrice => {
            let (rows, extra) = call_sweep(cfg, &model)?;
            let csv = rows_to_csv(&rows);
            (json!({"sweep": rows, "theory": extra}), Some(csv), true)
        }
        Task::ImpliedVol => {
            let (rows, extra) = iv_sweep(cfg, &model)?;
            let csv = rows_to_csv(&rows);
            (json!({"sweep": rows, "theory": extra}), Some(csv), true)
        }
        Task::Rate => {
            let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
            let x = cfg.x.expect("validated");
            let r = ldp_rate_terminal(&model, x, &grid, &SolverOptions::default())?;
            let reference = mdp_rate_terminal(model.sigma.at_zero(), cfg.horizon, x);
            (
                json!({
                    "x": x,
                    "ldp_rate": rate_result_json(&r),
                    "mdp_reference": reference,
                }),
                None,
                true,
            )
        }
        Task::ExitRate => {
            let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
            let interval = cfg.interval.expect("validated");
            let t = cfg.t.expect("validated");
            let r = exit_rate(&model, interval, t, &grid, &SolverOptions::default())?;
            (
                json!({
                    "interval": {"a": interval.0, "b": interval.1},
                    "t": t,
                    "exit_rate": rate_result_json(&r),
                }),
                None,
                true,
            )
        }
        Task::Explode => (explode_task(cfg, &model)?, None, true),
        Task::Verify => {
            let checks = verify_task(cfg, &model)?;
            let all = checks.iter().all(|c| c.pass);
            (json!({"all_pass": all, "checks": checks}), None, all)
        }
    };

    let report = Report {
        schema_version: 1,
        tool: ToolInfo {
            name: "gsv",
            version: env!("CARGO_PKG_VERSION"),
        },
        task: cfg.task.name().to_string(),
        config: cfg.echo.clone(),
        results,
        timing: Timing {
            wall_ms: start.elapsed().as_millis(),
        },
    };
    Ok(RunOutput { report, csv, ok })
}

/// Tail-probability sweep with the regime's theoretical limit per row.
fn tail_sweep(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<(Vec<SweepRow>, Value)> {
    let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
    let x = cfg.x.expect("validated");
    let sigma0 = model.sigma.at_zero();
    let regime = cfg.scaling_at(cfg.eps[0])?.regime();

    // the limit is computed once; only LDP needs the variational solver
    let (limit_kind, limit_value, rate_info) = match regime {
        Regime::Ldp => {
            let rate_grid = PathGrid::new(cfg.rate_grid_n, cfg.horizon)?;
            let r = ldp_rate_terminal(model, x, &rate_grid, &SolverOptions::default())?;
            ("scaled_log", -r.value, Some(rate_result_json(&r)))
        }
        Regime::Mdp => (
            "scaled_log",
            -mdp_rate_terminal(sigma0, cfg.horizon, x),
            None,
        ),
        Regime::Cl => ("mean", cl_tail(sigma0, cfg.horizon, x), None),
        Regime::Exceptional => ("mean", norm_ccdf(x / (cfg.horizon.sqrt() * sigma0)), None),
    };

    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let scaling = cfg.scaling_at(eps)?;
        let tilt = if cfg.use_tilt && matches!(regime, Regime::Ldp | Regime::Mdp) {
            Some(mdp_tail_tilt(model, &scaling, x, &grid))
        } else {
            None
        };
        let est = estimate_tail(
            model,
            &scaling,
            x,
            &grid,
            cfg.mc_count,
            cfg.mc_seed,
            tilt.as_deref(),
        );
        match est {
            Ok(e) => {
                let (limit, gap) = match limit_kind {
                    "scaled_log" => (
                        Some(limit_value),
                        e.scaled_log.map(|s| (s - limit_value).abs()),
                    ),
                    _ => (Some(limit_value), Some((e.mean - limit_value).abs())),
                };
                rows.push(SweepRow {
                    eps,
                    estimate: Some(e.mean),
                    stderr: Some(e.stderr),
                    scaled_log: e.scaled_log,
                    limit,
                    gap,
                    annotation: String::new(),
                });
            }
            Err(Error::DegenerateEstimate(_)) => rows.push(SweepRow {
                eps,
                estimate: None,
                stderr: None,
                scaled_log: None,
                limit: Some(limit_value),
                gap: None,
                annotation: "DEGENERATE_ESTIMATE".into(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((
        rows,
        json!({
            "regime": regime,
            "limit_kind": limit_kind,
            "limit": limit_value,
            "ldp_rate": rate_info,
        }),
    ))
}

/// Call-price sweep; the asymptotic limit column is annotated
/// GROWTH_VIOLATION when the volatility family breaks linear growth.
fn call_sweep(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<(Vec<SweepRow>, Value)> {
    let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
    let x = cfg.x.expect("validated");
    let sigma0 = model.sigma.at_zero();
    let regime = cfg.scaling_at(cfg.eps[0])?.regime();
    let linear = model.sigma.is_linear_growth();

    // regime theory is computed once; only the exceptional regime's limit
    // depends on eps through the term itself
    enum Limit {
        ScaledLog(f64),
        Mean(f64),
        ExceptionalTerm(AsymptoticTerm),
        None,
    }
    let scale0 = cfg.scaling_at(cfg.eps[0])?;
    let (theory, limit) = if !linear {
        (json!(null), Limit::None)
    } else {
        match regime {
            Regime::Ldp => {
                let rate_grid = PathGrid::new(cfg.rate_grid_n, cfg.horizon)?;
                let r = ldp_rate_terminal(model, x, &rate_grid, &SolverOptions::default())?;
                let term = call_asymptote(&model.sigma, r.value, &scale0, x)?;
                (
                    json!({"term": term_json(&term), "ldp_rate": rate_result_json(&r)}),
                    Limit::ScaledLog(-term.coefficient),
                )
            }
            Regime::Mdp => {
                let rate = mdp_rate_terminal(sigma0, cfg.horizon, x);
                let term = call_asymptote(&model.sigma, rate, &scale0, x)?;
                (
                    json!({"term": term_json(&term)}),
                    Limit::ScaledLog(-term.coefficient),
                )
            }
            Regime::Cl => {
                let v = call_limit_cl(sigma0, cfg.horizon, x)?;
                (json!({"cl_limit": v}), Limit::Mean(v))
            }
            Regime::Exceptional => {
                let term = call_exceptional(sigma0, cfg.horizon, x, scale0.alpha)?;
                (
                    json!({"term": term_json(&term)}),
                    Limit::ExceptionalTerm(term),
                )
            }
        }
    };

    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let scaling = cfg.scaling_at(eps)?;
        let est = estimate_call(model, &scaling, x, &grid, cfg.mc_count, cfg.mc_seed)?;
        let (limit_v, gap, annotation) = match &limit {
            Limit::ScaledLog(l) => (
                Some(*l),
                est.scaled_log.map(|s| (s - l).abs()),
                String::new(),
            ),
            Limit::Mean(l) => (Some(*l), Some((est.mean - l).abs()), String::new()),
            Limit::ExceptionalTerm(term) => {
                let l = term.evaluate(eps);
                (Some(l), Some((est.mean - l).abs()), String::new())
            }
            Limit::None => (None, None, "GROWTH_VIOLATION".into()),
        };
        rows.push(SweepRow {
            eps,
            estimate: Some(est.mean),
            stderr: Some(est.stderr),
            scaled_log: est.scaled_log,
            limit: limit_v,
            gap,
            annotation,
        });
    }
    Ok((
        rows,
        json!({"regime": regime, "theory": theory, "linear_growth": linear}),
    ))
}

/// Implied-volatility sweep: inverts the Monte Carlo price and compares the
/// rescaled implied volatility to the regime's leading term.
fn iv_sweep(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<(Vec<SweepRow>, Value)> {
    let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
    let x = cfg.x.expect("validated");
    let sigma0 = model.sigma.at_zero();
    let scale0 = cfg.scaling_at(cfg.eps[0])?;
    let regime = scale0.regime();
    let linear = model.sigma.is_linear_growth();

    let rate_value = if regime == Regime::Ldp {
        let rate_grid = PathGrid::new(cfg.rate_grid_n, cfg.horizon)?;
        Some(ldp_rate_terminal(model, x, &rate_grid, &SolverOptions::default())?.value)
    } else {
        None
    };
    let term = iv_asymptote(&scale0, x, rate_value, Some(sigma0), cfg.horizon)?;

    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let scaling = cfg.scaling_at(eps)?;
        let est = estimate_call(model, &scaling, x, &grid, cfg.mc_count, cfg.mc_seed)?;
        let k = x * eps_pow(eps, scaling.alpha);
        let annotation = if linear {
            String::new()
        } else {
            "GROWTH_VIOLATION".into()
        };
        match implied_vol(k, est.mean) {
            Ok(nu) => {
                let sigma_hat = nu / eps.sqrt();
                let predicted = term.evaluate(eps);
                rows.push(SweepRow {
                    eps,
                    estimate: Some(sigma_hat),
                    stderr: Some(est.stderr),
                    scaled_log: None,
                    limit: if linear { Some(predicted) } else { None },
                    gap: if linear {
                        Some((sigma_hat - predicted).abs())
                    } else {
                        None
                    },
                    annotation,
                });
            }
            Err(Error::PriceOutOfRange { .. }) => rows.push(SweepRow {
                eps,
                estimate: None,
                stderr: Some(est.stderr),
                scaled_log: None,
                limit: None,
                gap: None,
                annotation: "PRICE_OUT_OF_RANGE".into(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((
        rows,
        json!({"regime": regime, "term": term_json(&term), "linear_growth": linear}),
    ))
}

fn explode_task(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Value> {
    let grid = PathGrid::new(cfg.grid_n, cfg.horizon)?;
    let gamma = cfg.gamma.expect("validated");
    let t = cfg.t.expect("validated");
    let witness = growth_class(&model.sigma)?;
    let envelope = ConvexMinorant::lower_envelope(&model.sigma)?;
    let poly_minorant = convex_minorant(&model.sigma).ok();

    let mut certificates = Vec::new();
    for &level in &cfg.cert_levels {
        let cert = explosion_certificate(model, &envelope, gamma, t, level, &grid)?;
        certificates.push(json!({
            "gamma": cert.gamma,
            "t": cert.t,
            "u_star": cert.u_star,
            "log_lower_bound": cert.log_lower_bound,
            "variance_v": cert.variance_v,
            "status": cert.status,
            "M": cert.level,
        }));
    }

    let mut variance_rows = Vec::new();
    for &cap in &cfg.trunc_levels {
        let est = exp_variance_moment_mc(model, gamma, t, cap, &grid, cfg.mc_count, cfg.mc_seed)?;
        variance_rows.push(json!({"cap": cap, "estimate": est.mean, "stderr": est.stderr}));
    }
    let mut moment_rows = Vec::new();
    if let Some(mg) = cfg.moment_gamma {
        for &cap in &cfg.trunc_levels {
            let est = truncated_moment_mc(model, mg, t, cap, &grid, cfg.mc_count, cfg.mc_seed)?;
            moment_rows.push(json!({"cap": cap, "estimate": est.mean, "stderr": est.stderr}));
        }
    }

    Ok(json!({
        "growth_class": witness,
        "convex_minorant": poly_minorant,
        "certificates": certificates,
        "exp_variance_mc": variance_rows,
        "moment_mc": moment_rows,
        "note": "truncated Monte Carlo rows are divergence evidence, not proof; certificates are authoritative",
    }))
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    details: String,
}

/// Quick self-check battery over the configured model.
fn verify_task(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let n = cfg.grid_n.min(64);
    let grid = PathGrid::new(n, cfg.horizon)?;

    // Volterra condition on node pairs with s >= t
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        for j in i..=n {
            let v = model.kernel.kernel_eval(grid.node(i), grid.node(j))?;
            worst = worst.max(v.abs());
        }
    }
    checks.push(Check {
        name: "volterra_zero",
        pass: worst == 0.0,
        details: format!("max |K(t,s)| over s >= t: {worst:.3e}"),
    });

    // covariance symmetry
    let mut worst: f64 = 0.0;
    for i in 1..=n.min(12) {
        for j in 1..=n.min(12) {
            let a = model.kernel.covariance(grid.node(i), grid.node(j))?;
            let b = model.kernel.covariance(grid.node(j), grid.node(i))?;
            worst = worst.max((a - b).abs());
        }
    }
    checks.push(Check {
        name: "covariance_symmetry",
        pass: worst < 1e-12,
        details: format!("max |C(t,s) - C(s,t)|: {worst:.3e}"),
    });

    // positive semidefinite up to the jitter budget
    let psd = model.kernel.covariance_cholesky(&grid);
    checks.push(match psd {
        Ok((_, jitter)) => Check {
            name: "covariance_psd",
            pass: true,
            details: format!("factorized with jitter {jitter:.3e}"),
        },
        Err(e) => Check {
            name: "covariance_psd",
            pass: false,
            details: e.to_string(),
        },
    });

    // nondegeneracy on (0, T]
    let mut ok = true;
    for i in 1..=n {
        if model.kernel.covariance(grid.node(i), grid.node(i))? <= 0.0 {
            ok = false;
        }
    }
    checks.push(Check {
        name: "nondegenerate_variance",
        pass: ok,
        details: "v(t) > 0 at all positive grid nodes".into(),
    });

    // sampling law: empirical covariance within 5 standard errors
    let count = cfg.mc_count.min(20_000).max(2_000);
    let samples = crate::kernels::sample_gaussian_paths(
        &model.kernel,
        &grid,
        count,
        cfg.mc_seed,
        crate::kernels::GaussianBackend::Auto,
    )?;
    let mut fails = Vec::new();
    for &(i, j) in &[(n / 2, n), (n / 4, n / 2), (n, n), (n / 4, n)] {
        let (i, j) = (i.max(1), j.max(1));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in &samples {
            let p = s.vol_path[i] * s.vol_path[j];
            sum += p;
            sum_sq += p * p;
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        let se = (var / count as f64).sqrt();
        let target = model.kernel.covariance(grid.node(i), grid.node(j))?;
        if (mean - target).abs() > 5.0 * se {
            fails.push(format!("({i},{j}): {mean:.4} vs {target:.4} se {se:.1e}"));
        }
    }
    checks.push(Check {
        name: "sampling_law",
        pass: fails.is_empty(),
        details: if fails.is_empty() {
            format!("empirical covariance within 5 se at {count} samples")
        } else {
            fails.join("; ")
        },
    });

    // local modulus of continuity of sigma
    let mut ok = true;
    for &delta in &[1.0, 2.0, 5.0] {
        let l = model.sigma.lipschitz(delta);
        for i in 0..40 {
            for j in 0..40 {
                let xx = -delta + 2.0 * delta * i as f64 / 39.0;
                let yy = -delta + 2.0 * delta * j as f64 / 39.0;
                if (model.sigma.eval(xx) - model.sigma.eval(yy)).abs() > l * (xx - yy).abs() + 1e-12
                {
                    ok = false;
                }
            }
        }
    }
    checks.push(Check {
        name: "sigma_modulus",
        pass: ok,
        details: "|sigma(x)-sigma(y)| <= L(delta)|x-y| on [-delta,delta], delta in {1,2,5}".into(),
    });

    // martingale property under linear growth
    if model.sigma.is_linear_growth() {
        let eps = cfg.eps.first().copied().unwrap_or(1.0);
        let scaling = cfg.scaling_at(eps)?;
        let count = cfg.mc_count.min(30_000).max(2_000);
        let out = simulate_log_price(model, &scaling, &grid, count, cfg.mc_seed)?;
        let vals: Vec<f64> = out.terminals.iter().map(|x| x.exp()).collect();
        let mean = vals.iter().sum::<f64>() / count as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count as f64 - 1.0);
        let se = (var / count as f64).sqrt();
        checks.push(Check {
            name: "martingale_mean",
            pass: (mean - 1.0).abs() <= 5.0 * se,
            details: format!("E[S_T] = {mean:.5} (se {se:.1e})"),
        });
    }

    // determinism
    let scaling = cfg.scaling_at(cfg.eps.first().copied().unwrap_or(1.0))?;
    let a = simulate_log_price(model, &scaling, &grid, 256, cfg.mc_seed)?;
    let b = simulate_log_price(model, &scaling, &grid, 256, cfg.mc_seed)?;
    checks.push(Check {
        name: "determinism",
        pass: a.paths == b.paths,
        details: "two runs with the same seed are bit-identical".into(),
    });

    Ok(checks)
}

/// Serializes the report (pretty JSON, trailing newline).
pub fn report_to_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes report.json / table.csv per the format flags; returns the paths
/// written.
pub fn write_outputs(out: &RunOutput, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.wants_json() {
        let path = dir.join("report.json");
        write_atomic(&path, &report_to_json(&out.report)?)?;
        written.push(path);
    }
    if format.wants_csv() {
        match &out.csv {
            Some(csv) => {
                let path = dir.join("table.csv");
                write_atomic(&path, csv)?;
                written.push(path);
            }
            None => {
                return Err(Error::ConfigInvalid {
                    field: "format".into(),
                    reason: format!("task `{}` produces no CSV table", out.report.task),
                })
            }
        }
    }
    Ok(written)
}

/// Sweep entry point kept separate per the module contract: runs a sweep
/// task and returns its CSV table.
pub fn sweep(cfg: &ExperimentConfig) -> Result<String> {
    if !matches!(
        cfg.task,
        Task::Simulate | Task::CallPrice | Task::ImpliedVol
    ) {
        return Err(Error::ConfigInvalid {
            field: "task".into(),
            reason: "sweep requires a simulate, callprice, or impliedvol task".into(),
        });
    }
    let out = run_experiment(cfg)?;
    out.csv
        .ok_or_else(|| Error::InvalidInput("sweep produced no table".into()))
}
