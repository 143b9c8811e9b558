//! Cross-module invariants: sampling laws per kernel family, barrier-law
//! consistency of the exit estimator, deviation-scale trends, terminal-law
//! normality, and the explosion module's Monte Carlo cross-checks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use gsv::explosion::{
    convex_minorant, exp_variance_moment_mc, jensen_lower_bound, moment_reduction,
    truncated_moment_mc,
};
use gsv::kernels::{sample_gaussian_paths, GaussianBackend};
use gsv::pricing::bs_dimensionless_call;
use gsv::rates::{cl_running_max, ldp_rate_path, path_value_of_control, SolverOptions};
use gsv::simulate::{estimate_exit_prob, estimate_tail, mdp_tail_tilt, simulate_log_price};
use gsv::{KernelFamily, KernelSpec, ModelSpec, PathGrid, ScalingParams, VolFunction};

fn model_for(kernel: KernelFamily, sigma: VolFunction, rho: f64) -> ModelSpec {
    let kernel = KernelSpec::new(kernel, 1.0).unwrap();
    ModelSpec::new(kernel, sigma, rho, 1.0).unwrap()
}

fn empirical_covariance_check(
    spec: &KernelSpec,
    n: usize,
    count: usize,
    seed: u64,
    pairs: &[(usize, usize)],
) {
    let grid = PathGrid::new(n, 1.0).unwrap();
    let samples = sample_gaussian_paths(spec, &grid, count, seed, GaussianBackend::Kernel).unwrap();
    for &(i, j) in pairs {
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
        let target = spec.covariance(grid.node(i), grid.node(j)).unwrap();
        assert!(
            (mean - target).abs() <= 4.0 * se,
            "{} ({i},{j}): {mean:.5} vs {target:.5} (se {se:.2e})",
            spec.family_name()
        );
    }
}

#[test]
fn sampling_law_riemann_liouville() {
    let spec = KernelSpec::new(KernelFamily::RiemannLiouville { hurst: 0.75 }, 1.0).unwrap();
    empirical_covariance_check(
        &spec,
        64,
        100_000,
        33,
        &[
            (16, 32),
            (32, 64),
            (48, 48),
            (8, 56),
            (64, 64),
            (24, 40),
            (16, 64),
            (40, 56),
            (32, 32),
            (56, 64),
        ],
    );
}

#[test]
fn sampling_law_fractional_ou() {
    // Brownian base: the kernel is exactly e^{-a(t-s)}
    let spec = KernelSpec::new(
        KernelFamily::FractionalOu {
            hurst: 0.5,
            rate: 1.3,
        },
        1.0,
    )
    .unwrap();
    empirical_covariance_check(
        &spec,
        64,
        100_000,
        33,
        &[(16, 32), (32, 64), (48, 48), (64, 64)],
    );
    // fractional base goes through the nested quadrature
    let spec = KernelSpec::new(
        KernelFamily::FractionalOu {
            hurst: 0.65,
            rate: 1.0,
        },
        1.0,
    )
    .unwrap();
    empirical_covariance_check(
        &spec,
        32,
        40_000,
        33,
        &[(8, 16), (16, 32), (24, 24), (32, 32)],
    );
}

#[test]
fn sampling_law_custom_kernel() {
    // discrete kernels have no quadrature bias: the sampled law matches the
    // discrete covariance sums directly
    let n = 8usize;
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate().take(i + 1) {
            *v = 1.0 / (1.0 + (i - j) as f64);
        }
    }
    let spec = KernelSpec::new(KernelFamily::Custom { matrix }, 1.0).unwrap();
    empirical_covariance_check(&spec, n, 40_000, 12, &[(2, 4), (4, 8), (8, 8), (6, 6)]);
}

#[test]
fn exit_probability_matches_barrier_law() {
    // constant sigma in the CL regime is exactly Brownian motion with drift,
    // so the one-sided exit probability follows the corrected barrier law
    let sigma0 = 0.3;
    let b = 0.6;
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.5 },
        VolFunction::Constant { sigma0 },
        0.0,
    );
    let scaling = ScalingParams::new(0.4, 0.5, 0.5, 0.0).unwrap();
    let grid = PathGrid::new(512, 1.0).unwrap();
    let est = estimate_exit_prob(&model, &scaling, (-1e6, b), 1.0, &grid, 20_000, 2718).unwrap();
    let want = cl_running_max(sigma0, 1.0, b);
    assert!(
        (est.mean - want).abs() <= 4.0 * est.stderr,
        "{} vs {want} (se {})",
        est.mean,
        est.stderr
    );
}

#[test]
fn ldp_tail_scaled_log_trend() {
    // constant sigma, LDP regime: scaled_log approaches -x^2/(2 T sigma0^2)
    let sigma0 = 0.3;
    let x = 0.5;
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.5 },
        VolFunction::Constant { sigma0 },
        0.0,
    );
    let grid = PathGrid::new(64, 1.0).unwrap();
    let limit = -x * x / (2.0 * sigma0 * sigma0);
    let mut gaps = Vec::new();
    for &eps in &[0.8, 0.4, 0.2, 0.1] {
        let scaling = ScalingParams::new(eps, 0.5, 0.0, 0.0).unwrap();
        let tilt = mdp_tail_tilt(&model, &scaling, x, &grid);
        let est = estimate_tail(&model, &scaling, x, &grid, 60_000, 57, Some(&tilt)).unwrap();
        gaps.push((est.scaled_log.unwrap() - limit).abs());
    }
    assert!(
        gaps.last().unwrap() < gaps.first().unwrap(),
        "scaled_log gaps not shrinking: {gaps:?}"
    );
}

#[test]
fn terminal_law_normality_under_refinement() {
    // constant sigma: the terminal law is exactly Gaussian at every grid, so
    // moments match at all n and the n = 128 law passes a moment test
    let sigma0 = 0.4;
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.5 },
        VolFunction::Constant { sigma0 },
        0.0,
    );
    let scaling = ScalingParams::new(1.0, 0.5, 0.5, 0.0).unwrap();
    let count = 30_000;
    let want_mean = -0.5 * sigma0 * sigma0;
    let want_var = sigma0 * sigma0;
    for &n in &[32usize, 64, 128] {
        let grid = PathGrid::new(n, 1.0).unwrap();
        let out = simulate_log_price(&model, &scaling, &grid, count, 515).unwrap();
        let nn = count as f64;
        let mean = out.terminals.iter().sum::<f64>() / nn;
        let var = out
            .terminals
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (nn - 1.0);
        assert!(
            (mean - want_mean).abs() <= 4.0 * (want_var / nn).sqrt(),
            "n={n}"
        );
        assert!(
            (var - want_var).abs() <= 4.0 * want_var * (2.0 / nn).sqrt(),
            "n={n}: {var} vs {want_var}"
        );
        if n == 128 {
            let sd = var.sqrt();
            let skew = out
                .terminals
                .iter()
                .map(|v| ((v - mean) / sd).powi(3))
                .sum::<f64>()
                / nn;
            let kurt = out
                .terminals
                .iter()
                .map(|v| ((v - mean) / sd).powi(4))
                .sum::<f64>()
                / nn
                - 3.0;
            assert!(skew.abs() <= 4.0 * (6.0 / nn).sqrt(), "skew {skew}");
            assert!(kurt.abs() <= 4.0 * (24.0 / nn).sqrt(), "kurtosis {kurt}");
        }
    }
}

#[test]
fn path_rate_upper_bound_on_random_controls() {
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.75 },
        VolFunction::BoundedSmooth { c0: 0.3, c1: 0.3 },
        0.25,
    );
    let grid = PathGrid::new(16, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut g = vec![0.0; 17];
    for i in 1..=16 {
        let z: f64 = StandardNormal.sample(&mut rng);
        g[i] = g[i - 1] + 0.06 * z;
    }
    let r = ldp_rate_path(&model, &g, &grid, &SolverOptions::default()).unwrap();
    for _ in 0..100 {
        let fdot: Vec<f64> = (0..16)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * 1.5
            })
            .collect();
        let v = path_value_of_control(&model, &g, &grid, &fdot, None).unwrap();
        assert!(
            r.value <= v + 1e-10,
            "solver {} beaten by random control {v}",
            r.value
        );
    }
}

#[test]
fn exp_variance_constant_sigma_is_deterministic() {
    let sigma0 = 0.25;
    let gamma = 0.7;
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.5 },
        VolFunction::Constant { sigma0 },
        0.0,
    );
    let grid = PathGrid::new(32, 1.0).unwrap();
    let est = exp_variance_moment_mc(&model, gamma, 1.0, 1e6, &grid, 500, 3).unwrap();
    let want = (gamma * sigma0 * sigma0).exp();
    assert!((est.mean - want).abs() < 1e-12, "{} vs {want}", est.mean);
    assert_eq!(est.stderr, 0.0);
}

#[test]
fn exp_variance_affine_stabilizes_in_truncation() {
    // linear growth and small gamma: the truncated moment converges; the
    // last decade of the cap changes the estimate by under 1%
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.75 },
        VolFunction::Affine { c0: 0.2, c1: 0.1 },
        0.0,
    );
    let grid = PathGrid::new(64, 1.0).unwrap();
    let mut values = Vec::new();
    for &cap in &[1e1, 1e2, 1e3] {
        let est = exp_variance_moment_mc(&model, 0.5, 1.0, cap, &grid, 20_000, 77).unwrap();
        values.push(est.mean);
    }
    assert!(values[1] >= values[0]);
    assert!(values[2] >= values[1]);
    let rel_change = (values[2] - values[1]) / values[1];
    assert!(rel_change < 0.01, "no stabilization: {values:?}");
}

#[test]
fn truncated_moment_diverges_for_quadratic_sigma() {
    // sigma = 1 + x^2, gamma = 2: estimates keep climbing with the cap and
    // the last step still has positive slope against log(cap)
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.75 },
        VolFunction::PolyPlus { c: 1.0, k: 2 },
        0.0,
    );
    let grid = PathGrid::new(64, 1.0).unwrap();
    let mut values = Vec::new();
    for &cap in &[1e2, 1e4, 1e6] {
        let est = truncated_moment_mc(&model, 2.0, 1.0, cap, &grid, 30_000, 99).unwrap();
        values.push(est.mean);
    }
    assert!(values[1] > values[0], "{values:?}");
    assert!(values[2] > values[1], "{values:?}");
    let slope = (values[2] - values[1]) / (1e6f64.ln() - 1e4f64.ln());
    assert!(slope > 0.0, "plateau detected: {values:?}");
    // monotone in the cap at a fixed seed
    let lo = truncated_moment_mc(&model, 2.0, 1.0, 50.0, &grid, 5_000, 4).unwrap();
    let hi = truncated_moment_mc(&model, 2.0, 1.0, 500.0, &grid, 5_000, 4).unwrap();
    assert!(hi.mean >= lo.mean);
}

#[test]
fn jensen_bound_is_below_truncated_mc() {
    // at a moderate evaluation point the certified lower bound must sit
    // under the (truncated) Monte Carlo estimate of the sigma^2 moment
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.75 },
        VolFunction::PolyPlus { c: 1.0, k: 2 },
        0.0,
    );
    let grid = PathGrid::new(64, 1.0).unwrap();
    let minorant = convex_minorant(&model.sigma).unwrap();
    let bound = jensen_lower_bound(&model, &minorant, 0.1, 1.0, 2.0, &grid).unwrap();
    let est = exp_variance_moment_mc(&model, 0.1, 1.0, 1e9, &grid, 20_000, 12).unwrap();
    let mc_log = (est.mean + 4.0 * est.stderr).ln();
    assert!(
        mc_log >= bound,
        "bound {bound:.4} exceeds the Monte Carlo log-moment {mc_log:.4}"
    );
}

#[test]
fn estimates_independent_of_thread_count() {
    let model = model_for(
        KernelFamily::RiemannLiouville { hurst: 0.75 },
        VolFunction::BoundedSmooth { c0: 0.3, c1: 0.2 },
        -0.4,
    );
    let scaling = ScalingParams::new(0.5, 0.75, 0.375, 0.0).unwrap();
    let grid = PathGrid::new(32, 1.0).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let tail = estimate_tail(&model, &scaling, 0.15, &grid, 20_000, 7, None).unwrap();
            let paths = simulate_log_price(&model, &scaling, &grid, 512, 7).unwrap();
            (tail.mean, tail.stderr, paths.terminals)
        })
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1.to_bits(), b.1.to_bits());
    assert_eq!(a.2, b.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volterra_kernels_vanish_above_diagonal(
        t in 0.0f64..1.0,
        lag in 0.0f64..0.5,
        pick in 0usize..4,
    ) {
        let s = (t + lag).min(1.0);
        let family = match pick {
            0 => KernelFamily::RiemannLiouville { hurst: 0.3 },
            1 => KernelFamily::RiemannLiouville { hurst: 0.75 },
            2 => KernelFamily::Fbm { hurst: 0.7 },
            _ => KernelFamily::FractionalOu { hurst: 0.5, rate: 1.0 },
        };
        let spec = KernelSpec::new(family, 1.0).unwrap();
        prop_assert_eq!(spec.kernel_eval(t, s).unwrap(), 0.0);
    }

    #[test]
    fn dimensionless_call_bounds_and_monotonicity(
        k in 0.0f64..1.0,
        nu in 0.01f64..2.0,
        dv in 0.01f64..0.5,
        dk in 0.01f64..0.5,
    ) {
        let v = bs_dimensionless_call(k, nu).unwrap();
        prop_assert!((0.0..1.0).contains(&v));
        // strict monotonicity holds wherever the price has not underflowed
        prop_assume!(v > 1e-300);
        prop_assert!(bs_dimensionless_call(k, nu + dv).unwrap() > v);
        prop_assert!(bs_dimensionless_call(k + dk, nu).unwrap() < v);
    }

    #[test]
    fn moment_reduction_reduces_to_lognormal_exponent(
        gamma in -3.0f64..3.0,
        rho in -0.99f64..0.99,
    ) {
        // for constant sigma the reduced representation integrates to
        // exp((gamma^2 - gamma) sigma0^2 t / 2); algebraically
        // c_quad + c_lin^2 / 2 = (gamma^2 - gamma) / 2
        let (cq, cl) = moment_reduction(gamma, rho).unwrap();
        let lhs = cq + 0.5 * cl * cl;
        let rhs = 0.5 * (gamma * gamma - gamma);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
