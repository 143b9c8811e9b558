//! Monte Carlo engine for the scaled log-price process.
//!
//! Sampling is streamed: per-sample state never outlives the sample, so path
//! counts in the millions are fine. Sample i always draws from ChaCha stream
//! i and partial sums are combined over fixed-size chunks in index order, so
//! every estimate is independent of thread count.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::kernels::{apply_weights, rng_for_sample, KernelFamily};
use crate::math::eps_pow;
use crate::model::{ModelSpec, ScalingParams};

const CHUNK: usize = 1024;

/// Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    pub seed: u64,
    /// eps^{2H - 2 alpha - 2 beta} * ln(mean), when the mean is positive.
    pub scaled_log: Option<f64>,
}

/// Simulated log-price paths at the grid nodes (X(0) = 0, spot handled by
/// the caller).
#[derive(Debug, Clone)]
pub struct SimulatedPaths {
    pub nodes: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub terminals: Vec<f64>,
}

enum Generator {
    /// joint (B, B_hat) via kernel weights
    Kernel { weights: Vec<f64> },
    /// exact marginal B_hat via Cholesky; no driving increments
    Covariance { factor: Vec<f64> },
}

/// Per-sample path machinery shared by all estimators.
struct PathEngine<'a> {
    model: &'a ModelSpec,
    grid: PathGrid,
    generator: Generator,
    eps_h: f64,
    drift_coef: f64,
    mart_coef: f64,
    strike_scale: f64, // eps^alpha
}

impl<'a> PathEngine<'a> {
    fn new(model: &'a ModelSpec, scaling: &ScalingParams, grid: &PathGrid) -> Result<Self> {
        model.validate()?;
        scaling.validate()?;
        if (grid.horizon - model.horizon).abs() > 1e-12 * model.horizon {
            return Err(Error::InvalidInput(
                "grid horizon must match the model".into(),
            ));
        }
        let need_joint = model.rho != 0.0;
        let kernel_backend = need_joint || !matches!(model.kernel.family, KernelFamily::Fbm { .. });
        let generator = if kernel_backend {
            Generator::Kernel {
                weights: model.kernel.weight_matrix(grid)?,
            }
        } else {
            let (factor, _) = model.kernel.covariance_cholesky(grid)?;
            Generator::Covariance { factor }
        };
        if need_joint && matches!(generator, Generator::Covariance { .. }) {
            return Err(Error::UnsupportedKernel(
                "joint sampling of (B, B_hat) is required when rho != 0".into(),
            ));
        }
        let eps = scaling.eps;
        Ok(Self {
            model,
            grid: *grid,
            generator,
            eps_h: eps_pow(eps, scaling.h),
            drift_coef: -0.5 * eps_pow(eps, 2.0 * scaling.h - 2.0 * scaling.beta),
            mart_coef: eps_pow(eps, scaling.h - scaling.beta),
            strike_scale: eps_pow(eps, scaling.alpha),
        })
    }

    /// Simulates sample `idx` into `path` (length n + 1) by left-point Ito
    /// sums; returns the Girsanov weight (1 without tilt).
    fn sample_path(&self, idx: usize, seed: u64, tilt: Option<&[f64]>, path: &mut [f64]) -> f64 {
        let n = self.grid.n;
        let dt = self.grid.dt();
        let sqrt_dt = dt.sqrt();
        let mut rng = rng_for_sample(seed, idx as u64);

        // volatility-process path plus driving increments
        let (b, vol) = match &self.generator {
            Generator::Kernel { weights } => {
                let b: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * sqrt_dt
                    })
                    .collect();
                let fdot: Vec<f64> = b.iter().map(|db| db / dt).collect();
                let vol = apply_weights(weights, n, &fdot);
                (b, vol)
            }
            Generator::Covariance { factor } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut vol = vec![0.0; n + 1];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += factor[i * n + j] * z[j];
                    }
                    vol[i + 1] = acc;
                }
                (Vec::new(), vol)
            }
        };

        // independent increments, optionally tilted
        let mut weight = 1.0f64;
        let w: Vec<f64> = match tilt {
            None => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * sqrt_dt
                })
                .collect(),
            Some(ldot) => {
                let mut log_w = 0.0;
                let w = (0..n)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let dw_tilde = z * sqrt_dt;
                        log_w -= ldot[j] * dw_tilde + 0.5 * ldot[j] * ldot[j] * dt;
                        dw_tilde + ldot[j] * dt
                    })
                    .collect();
                weight = log_w.exp();
                w
            }
        };

        let rho = self.model.rho;
        let rho_bar = self.model.rho_bar();
        path[0] = 0.0;
        for j in 0..n {
            let s = self.model.sigma.eval(self.eps_h * vol[j]);
            let dz = if b.is_empty() {
                w[j] // rho = 0 in covariance mode
            } else {
                rho_bar * w[j] + rho * b[j]
            };
            path[j + 1] = path[j] + self.drift_coef * s * s * dt + self.mart_coef * s * dz;
        }
        weight
    }
}

/// Deterministic chunked mean/stderr of a per-sample statistic.
fn mc_reduce<F>(count: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(count);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for idx in lo..hi {
                let v = f(idx);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (s, s2) in partials {
        sum += s;
        sum_sq += s2;
    }
    (sum, sum_sq)
}

fn finish(sum: f64, sum_sq: f64, count: usize, seed: u64, scaling: &ScalingParams) -> MCEstimate {
    let n = count as f64;
    let mean = sum / n;
    let var = if count > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let stderr = (var / n).sqrt();
    let scaled_log = if mean > 0.0 {
        Some(eps_pow(scaling.eps, scaling.speed_exponent()) * mean.ln())
    } else {
        None
    };
    MCEstimate {
        mean,
        stderr,
        count,
        seed,
        scaled_log,
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be >= 1".into()));
    }
    Ok(())
}

/// Full paths of the scaled log-price X^{eps,beta,H} at the grid nodes.
pub fn simulate_log_price(
    model: &ModelSpec,
    scaling: &ScalingParams,
    grid: &PathGrid,
    count: usize,
    seed: u64,
) -> Result<SimulatedPaths> {
    check_count(count)?;
    let engine = PathEngine::new(model, scaling, grid)?;
    let n = grid.n;
    let paths: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut path = vec![0.0; n + 1];
            engine.sample_path(idx, seed, None, &mut path);
            path
        })
        .collect();
    let terminals = paths.iter().map(|p| p[n]).collect();
    Ok(SimulatedPaths {
        nodes: grid.nodes(),
        paths,
        terminals,
    })
}

/// P(X_T^{eps,beta,H} >= x eps^alpha), optionally importance-sampled by
/// shifting W with the supplied step control (the estimator stays unbiased
/// through the Girsanov weight).
pub fn estimate_tail(
    model: &ModelSpec,
    scaling: &ScalingParams,
    x: f64,
    grid: &PathGrid,
    count: usize,
    seed: u64,
    tilt: Option<&[f64]>,
) -> Result<MCEstimate> {
    check_count(count)?;
    if x <= 0.0 {
        return Err(Error::InvalidInput("tail level x must be > 0".into()));
    }
    if let Some(l) = tilt {
        if l.len() != grid.n {
            return Err(Error::InvalidInput(
                "tilt control must have one value per interval".into(),
            ));
        }
    }
    let engine = PathEngine::new(model, scaling, grid)?;
    let level = x * engine.strike_scale;
    let n = grid.n;
    let (sum, sum_sq) = mc_reduce(count, |idx| {
        let mut path = vec![0.0; n + 1];
        let w = engine.sample_path(idx, seed, tilt, &mut path);
        if path[n] >= level {
            w
        } else {
            0.0
        }
    });
    if sum == 0.0 && tilt.is_none() {
        return Err(Error::DegenerateEstimate(format!(
            "no path reached {level:.6e}; supply a tilt control"
        )));
    }
    Ok(finish(sum, sum_sq, count, seed, scaling))
}

/// E[(S_T^{eps,beta,H} - e^{x eps^alpha})^+] at unit spot.
pub fn estimate_call(
    model: &ModelSpec,
    scaling: &ScalingParams,
    x: f64,
    grid: &PathGrid,
    count: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_count(count)?;
    if x <= 0.0 {
        return Err(Error::InvalidInput(
            "log-strike coefficient x must be > 0".into(),
        ));
    }
    let engine = PathEngine::new(model, scaling, grid)?;
    let strike = (x * engine.strike_scale).exp();
    let n = grid.n;
    let (sum, sum_sq) = mc_reduce(count, |idx| {
        let mut path = vec![0.0; n + 1];
        engine.sample_path(idx, seed, None, &mut path);
        (path[n].exp() - strike).max(0.0)
    });
    Ok(finish(sum, sum_sq, count, seed, scaling))
}

/// Exit probability v_eps(t): the fraction of paths leaving (a, b) at some
/// grid node in (0, t]. Detection is at nodes only; the bias vanishes under
/// grid refinement.
pub fn estimate_exit_prob(
    model: &ModelSpec,
    scaling: &ScalingParams,
    interval: (f64, f64),
    t: f64,
    grid: &PathGrid,
    count: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_count(count)?;
    let (a, b) = interval;
    if !(a < 0.0 && 0.0 < b) {
        return Err(Error::InvalidInput(
            "interval must satisfy a < 0 < b".into(),
        ));
    }
    if !(t > 0.0 && t <= model.horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput("t must lie in (0, T]".into()));
    }
    let engine = PathEngine::new(model, scaling, grid)?;
    let k_max = grid
        .last_node_at_or_before(t)
        .ok_or_else(|| Error::InvalidInput("no grid node lies in (0, t]".into()))?;
    let n = grid.n;
    let (sum, sum_sq) = mc_reduce(count, |idx| {
        let mut path = vec![0.0; n + 1];
        engine.sample_path(idx, seed, None, &mut path);
        let exited = path[1..=k_max].iter().any(|&v| v >= b || v <= a);
        if exited {
            1.0
        } else {
            0.0
        }
    });
    Ok(finish(sum, sum_sq, count, seed, scaling))
}

/// E[min(S_t^gamma, cap)] in the unscaled model (eps = 1, beta = H), by
/// truncated Monte Carlo.
pub fn truncated_moment_mc(
    model: &ModelSpec,
    gamma: f64,
    t: f64,
    cap: f64,
    grid: &PathGrid,
    count: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_count(count)?;
    if cap <= 0.0 {
        return Err(Error::InvalidInput("truncation level must be > 0".into()));
    }
    let scaling = unscaled(model)?;
    let engine = PathEngine::new(model, &scaling, grid)?;
    let k = grid
        .last_node_at_or_before(t)
        .ok_or_else(|| Error::InvalidInput("no grid node lies in (0, t]".into()))?;
    let n = grid.n;
    let (sum, sum_sq) = mc_reduce(count, |idx| {
        let mut path = vec![0.0; n + 1];
        engine.sample_path(idx, seed, None, &mut path);
        (gamma * path[k]).exp().min(cap)
    });
    Ok(finish(sum, sum_sq, count, seed, &scaling))
}

/// E[min(exp(gamma int_0^t sigma(B_hat)^2 ds), cap)] by truncated Monte
/// Carlo with the left-point quadrature of the integrated variance.
pub fn exp_variance_moment_mc(
    model: &ModelSpec,
    gamma: f64,
    t: f64,
    cap: f64,
    grid: &PathGrid,
    count: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_count(count)?;
    if gamma <= 0.0 || cap <= 0.0 {
        return Err(Error::InvalidInput(
            "gamma and the truncation level must be > 0".into(),
        ));
    }
    let scaling = unscaled(model)?;
    let engine = PathEngine::new(model, &scaling, grid)?;
    let k = grid
        .last_node_at_or_before(t)
        .ok_or_else(|| Error::InvalidInput("no grid node lies in (0, t]".into()))?;
    let dt = grid.dt();
    let (sum, sum_sq) = mc_reduce(count, |idx| {
        engine.sample_vol_stat(idx, seed, |vol| {
            let mut iv = 0.0;
            for j in 0..k {
                let s = model.sigma.eval(vol[j]);
                iv += s * s * dt;
            }
            (gamma * iv).exp().min(cap)
        })
    });
    Ok(finish(sum, sum_sq, count, seed, &scaling))
}

fn unscaled(_model: &ModelSpec) -> Result<ScalingParams> {
    // eps = 1 makes (H, beta) immaterial; the CL tag keeps scaled_log trivial
    ScalingParams::new(1.0, 0.5, 0.5, 0.0)
}

impl<'a> PathEngine<'a> {
    /// Draws only the volatility path and applies a statistic to it.
    fn sample_vol_stat<F: Fn(&[f64]) -> f64>(&self, idx: usize, seed: u64, stat: F) -> f64 {
        let n = self.grid.n;
        let dt = self.grid.dt();
        let sqrt_dt = dt.sqrt();
        let mut rng = rng_for_sample(seed, idx as u64);
        let vol = match &self.generator {
            Generator::Kernel { weights } => {
                let b: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * sqrt_dt
                    })
                    .collect();
                let fdot: Vec<f64> = b.iter().map(|db| db / dt).collect();
                apply_weights(weights, n, &fdot)
            }
            Generator::Covariance { factor } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut vol = vec![0.0; n + 1];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += factor[i * n + j] * z[j];
                    }
                    vol[i + 1] = acc;
                }
                vol
            }
        };
        stat(&vol)
    }
}

/// Constant tilt matching the moderate-deviation optimal shift for the tail
/// event {X_T >= x eps^alpha} at correlation 0: the straight-line control
/// scaled to the current noise level.
pub fn mdp_tail_tilt(
    model: &ModelSpec,
    scaling: &ScalingParams,
    x: f64,
    grid: &PathGrid,
) -> Vec<f64> {
    let sigma0 = model.sigma.at_zero();
    let level = x * eps_pow(scaling.eps, scaling.alpha);
    let shift = level
        / (eps_pow(scaling.eps, scaling.h - scaling.beta)
            * sigma0
            * model.horizon
            * model.rho_bar());
    vec![shift; grid.n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::rates::cl_tail;
    use crate::vol::VolFunction;

    fn brownian_model(sigma: VolFunction, rho: f64) -> ModelSpec {
        let kernel = KernelSpec::new(KernelFamily::RiemannLiouville { hurst: 0.5 }, 1.0).unwrap();
        ModelSpec::new(kernel, sigma, rho, 1.0).unwrap()
    }

    #[test]
    fn constant_sigma_terminal_law() {
        // sigma = sigma0, rho = 0, eps = 1, beta = H: X_T ~ N(-s0^2 T/2, s0^2 T)
        let s0 = 0.4;
        let m = brownian_model(VolFunction::Constant { sigma0: s0 }, 0.0);
        let scaling = ScalingParams::new(1.0, 0.5, 0.5, 0.0).unwrap();
        let grid = PathGrid::new(32, 1.0).unwrap();
        let count = 40_000;
        let out = simulate_log_price(&m, &scaling, &grid, count, 21).unwrap();
        let n = count as f64;
        let mean = out.terminals.iter().sum::<f64>() / n;
        let var = out
            .terminals
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        let want_mean = -0.5 * s0 * s0;
        let want_var = s0 * s0;
        let se_mean = (want_var / n).sqrt();
        let se_var = want_var * (2.0 / n).sqrt();
        assert!(
            (mean - want_mean).abs() < 4.0 * se_mean,
            "{mean} vs {want_mean}"
        );
        assert!((var - want_var).abs() < 4.0 * se_var, "{var} vs {want_var}");
    }

    #[test]
    fn bounded_sigma_is_martingale() {
        let m = brownian_model(VolFunction::BoundedSmooth { c0: 0.3, c1: 0.4 }, 0.0);
        let scaling = ScalingParams::new(0.7, 0.5, 0.25, 0.0).unwrap();
        let grid = PathGrid::new(64, 1.0).unwrap();
        let count = 50_000;
        let out = simulate_log_price(&m, &scaling, &grid, count, 5).unwrap();
        let n = count as f64;
        let vals: Vec<f64> = out.terminals.iter().map(|x| x.exp()).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = brownian_model(VolFunction::Affine { c0: 0.2, c1: 0.1 }, -0.3);
        let scaling = ScalingParams::new(0.5, 0.6, 0.3, 0.1).unwrap();
        let grid = PathGrid::new(16, 1.0).unwrap();
        let a = simulate_log_price(&m, &scaling, &grid, 64, 9).unwrap();
        let b = simulate_log_price(&m, &scaling, &grid, 64, 9).unwrap();
        assert_eq!(a.paths, b.paths);
        let c = simulate_log_price(&m, &scaling, &grid, 64, 10).unwrap();
        assert_ne!(a.paths, c.paths);
    }

    #[test]
    fn cl_tail_constant_sigma_exact_law() {
        // sigma = 1 constant makes X exactly Brownian with drift at any eps
        let m = brownian_model(VolFunction::Constant { sigma0: 1.0 }, 0.0);
        let scaling = ScalingParams::new(0.37, 0.5, 0.5, 0.0).unwrap();
        let grid = PathGrid::new(32, 1.0).unwrap();
        let count = 60_000;
        let x = 0.4;
        let est = estimate_tail(&m, &scaling, x, &grid, count, 13, None).unwrap();
        let want = cl_tail(1.0, 1.0, x);
        assert!(
            (est.mean - want).abs() < 4.0 * est.stderr,
            "{} vs {want} (se {})",
            est.mean,
            est.stderr
        );
        // CL regime: speed exponent 0, so scaled_log = ln(mean)
        assert!((est.scaled_log.unwrap() - est.mean.ln()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_tail_without_tilt() {
        let m = brownian_model(VolFunction::Constant { sigma0: 0.2 }, 0.0);
        let scaling = ScalingParams::new(1.0, 0.5, 0.5, 0.0).unwrap();
        let grid = PathGrid::new(16, 1.0).unwrap();
        let e = estimate_tail(&m, &scaling, 50.0, &grid, 2_000, 3, None);
        assert!(matches!(e, Err(Error::DegenerateEstimate(_))));
    }

    #[test]
    fn girsanov_tilt_is_unbiased() {
        let m = brownian_model(VolFunction::BoundedSmooth { c0: 0.5, c1: 0.3 }, 0.0);
        let scaling = ScalingParams::new(1.0, 0.5, 0.5, 0.0).unwrap();
        let grid = PathGrid::new(32, 1.0).unwrap();
        let x = 0.5;
        let plain = estimate_tail(&m, &scaling, x, &grid, 60_000, 17, None).unwrap();
        let tilt = mdp_tail_tilt(&m, &scaling, x, &grid);
        let tilted = estimate_tail(&m, &scaling, x, &grid, 60_000, 18, Some(&tilt)).unwrap();
        let se = (plain.stderr.powi(2) + tilted.stderr.powi(2)).sqrt();
        assert!(
            (plain.mean - tilted.mean).abs() < 4.0 * se,
            "plain {} tilted {} se {}",
            plain.mean,
            tilted.mean,
            se
        );
    }

    #[test]
    fn call_estimates_constant_sigma_and_monotone() {
        let s0 = 0.3;
        let m = brownian_model(VolFunction::Constant { sigma0: s0 }, 0.0);
        let scaling = ScalingParams::new(0.6, 0.5, 0.25, 0.0).unwrap();
        let grid = PathGrid::new(32, 1.0).unwrap();
        let count = 60_000;
        let x = 0.1;
        let est = estimate_call(&m, &scaling, x, &grid, count, 8).unwrap();
        // exactly lognormal: normalized Black-Scholes with total vol
        // eps^{H-beta} sigma0 sqrt(T)
        let nu = eps_pow(0.6, 0.25) * s0;
        let k = x * eps_pow(0.6, 0.0);
        let want = crate::pricing::bs_dimensionless_call(k, nu).unwrap();
        assert!(
            (est.mean - want).abs() < 4.0 * est.stderr,
            "{} vs {want} (se {})",
            est.mean,
            est.stderr
        );
        // bounded by the spot
        assert!(est.mean <= 1.0 + 4.0 * est.stderr);
        // common random numbers: non-increasing in x
        let mut prev = f64::INFINITY;
        for &xx in &[0.05, 0.1, 0.2, 0.4] {
            let e = estimate_call(&m, &scaling, xx, &grid, 4_000, 77).unwrap();
            assert!(e.mean <= prev + 1e-15);
            prev = e.mean;
        }
    }

    #[test]
    fn exit_prob_limits() {
        let m = brownian_model(VolFunction::Constant { sigma0: 0.3 }, 0.0);
        let scaling = ScalingParams::new(1.0, 0.5, 0.5, 0.0).unwrap();
        let grid = PathGrid::new(32, 1.0).unwrap();
        let huge = estimate_exit_prob(&m, &scaling, (-50.0, 50.0), 1.0, &grid, 2_000, 4).unwrap();
        assert_eq!(huge.mean, 0.0);
        let tiny = estimate_exit_prob(&m, &scaling, (-1e-9, 1e-9), 1.0, &grid, 2_000, 4).unwrap();
        assert_eq!(tiny.mean, 1.0);
    }

    #[test]
    fn tail_monotone_in_x_with_common_numbers() {
        let m = brownian_model(VolFunction::BoundedSmooth { c0: 0.4, c1: 0.2 }, 0.0);
        let scaling = ScalingParams::new(0.8, 0.5, 0.25, 0.0).unwrap();
        let grid = PathGrid::new(16, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for &x in &[0.05, 0.1, 0.2] {
            let e = estimate_tail(&m, &scaling, x, &grid, 4_000, 91, None).unwrap();
            assert!(e.mean <= prev);
            prev = e.mean;
        }
    }

    #[test]
    fn speed_exponent_matches_regimes() {
        let m = brownian_model(VolFunction::Constant { sigma0: 1.0 }, 0.0);
        let grid = PathGrid::new(16, 1.0).unwrap();
        // LDP: exponent 2H
        let ldp = ScalingParams::new(0.5, 0.7, 0.0, 0.0).unwrap();
        let e = estimate_tail(&m, &ldp, 0.2, &grid, 4_000, 1, None).unwrap();
        let expect = 0.5f64.powf(1.4) * e.mean.ln();
        assert!((e.scaled_log.unwrap() - expect).abs() < 1e-14);
        // MDP: exponent 2H - 2 alpha - 2 beta
        let mdp = ScalingParams::new(0.5, 0.7, 0.2, 0.1).unwrap();
        let e = estimate_tail(&m, &mdp, 0.2, &grid, 4_000, 1, None).unwrap();
        let expect = 0.5f64.powf(1.4 - 0.6) * e.mean.ln();
        assert!((e.scaled_log.unwrap() - expect).abs() < 1e-14);
    }
}
