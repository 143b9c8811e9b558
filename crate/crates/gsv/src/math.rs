//! Shared numeric helpers: normal distribution functions, quadrature,
//! Cholesky factorization.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF via erfc, accurate in both tails.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal complementary CDF; computed directly (not as 1 - CDF)
/// so the upper tail keeps full relative accuracy.
pub fn norm_ccdf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// eps^a evaluated in log space; identical in value to powf but makes the
/// intent explicit for very small eps.
pub fn eps_pow(eps: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    (a * eps.ln()).exp()
}

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Lower-triangular Cholesky factor of a symmetric matrix stored row-major.
/// Returns None when the matrix is not (numerically) positive definite.
pub fn cholesky_lower(matrix: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(matrix.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with diagonal jitter escalation: lambda * I is added with lambda
/// doubling from `rel_start * trace` until `rel_limit * trace`. Returns the
/// factor and the jitter that was required (0 when none).
pub fn cholesky_with_jitter(
    matrix: &[f64],
    n: usize,
    rel_start: f64,
    rel_limit: f64,
) -> Result<(Vec<f64>, f64)> {
    if let Some(l) = cholesky_lower(matrix, n) {
        return Ok((l, 0.0));
    }
    let trace: f64 = (0..n).map(|i| matrix[i * n + i]).sum();
    let mut lambda = rel_start * trace;
    let limit = rel_limit * trace;
    while lambda <= limit {
        let mut jittered = matrix.to_vec();
        for i in 0..n {
            jittered[i * n + i] += lambda;
        }
        if let Some(l) = cholesky_lower(&jittered, n) {
            return Ok((l, lambda));
        }
        lambda *= 2.0;
    }
    Err(Error::NotPsd {
        jitter_limit: limit,
    })
}
