//! Joint sampling of the driving Brownian increments and the volatility
//! Gaussian process on a grid.
//!
//! Reproducibility contract: sample i is drawn from ChaCha stream i of the
//! given seed, so results are independent of thread count and identical
//! across runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::kernels::{apply_weights, KernelFamily, KernelSpec};

/// How the volatility path is generated jointly with the driving noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianBackend {
    /// Kernel discretization for families with a pointwise kernel; fBM picks
    /// the exact covariance factorization (marginal law only).
    Auto,
    /// Left-point kernel discretization; supplies the joint (B, B_hat) law.
    Kernel,
    /// Cholesky factorization of the node covariance; exact marginal law of
    /// B_hat, but no driving increments are exposed.
    Covariance,
}

/// One joint draw of (driving increments, volatility path, independent
/// increments) on the grid.
#[derive(Debug, Clone)]
pub struct GaussianSample {
    /// Increments of the Brownian motion driving the volatility process;
    /// empty under the covariance backend.
    pub b_increments: Vec<f64>,
    /// B_hat at the n + 1 grid nodes, vol_path[0] = 0.
    pub vol_path: Vec<f64>,
    /// Increments of the independent Brownian motion W.
    pub w_increments: Vec<f64>,
}

impl GaussianSample {
    pub fn has_joint_law(&self) -> bool {
        !self.b_increments.is_empty()
    }
}

fn resolve(spec: &KernelSpec, backend: GaussianBackend) -> GaussianBackend {
    match backend {
        GaussianBackend::Auto => match spec.family {
            KernelFamily::Fbm { .. } => GaussianBackend::Covariance,
            _ => GaussianBackend::Kernel,
        },
        other => other,
    }
}

pub(crate) fn rng_for_sample(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// Draws `count` joint samples; deterministic in (spec, grid, count, seed,
/// backend) regardless of thread count.
pub fn sample_gaussian_paths(
    spec: &KernelSpec,
    grid: &PathGrid,
    count: usize,
    seed: u64,
    backend: GaussianBackend,
) -> Result<Vec<GaussianSample>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be >= 1".into()));
    }
    let backend = resolve(spec, backend);
    let n = grid.n;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();

    match backend {
        GaussianBackend::Kernel => {
            let w = spec.weight_matrix(grid)?;
            let samples = (0..count)
                .into_par_iter()
                .map(|idx| {
                    let mut rng = rng_for_sample(seed, idx as u64);
                    let b = draw_normals(&mut rng, n, sqrt_dt);
                    let wi = draw_normals(&mut rng, n, sqrt_dt);
                    let fdot: Vec<f64> = b.iter().map(|db| db / dt).collect();
                    let vol = apply_weights(&w, n, &fdot);
                    GaussianSample {
                        b_increments: b,
                        vol_path: vol,
                        w_increments: wi,
                    }
                })
                .collect();
            Ok(samples)
        }
        GaussianBackend::Covariance => {
            let (l, _jitter) = spec.covariance_cholesky(grid)?;
            let samples = (0..count)
                .into_par_iter()
                .map(|idx| {
                    let mut rng = rng_for_sample(seed, idx as u64);
                    let z = draw_normals(&mut rng, n, 1.0);
                    let wi = draw_normals(&mut rng, n, sqrt_dt);
                    let mut vol = vec![0.0; n + 1];
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += l[i * n + j] * z[j];
                        }
                        vol[i + 1] = acc;
                    }
                    GaussianSample {
                        b_increments: Vec::new(),
                        vol_path: vol,
                        w_increments: wi,
                    }
                })
                .collect();
            Ok(samples)
        }
        GaussianBackend::Auto => unreachable!(),
    }
}
