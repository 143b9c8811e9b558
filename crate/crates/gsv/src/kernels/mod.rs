//! Volterra kernels: pointwise evaluation, covariance functions, kernel
//! regularity, and the deterministic map from step controls to volatility
//! paths.
//!
//! All kernel integrals follow one quadrature policy: power-law endpoint
//! factors are integrated in closed form on the touching subinterval with
//! the smooth cofactor frozen at the midpoint; interior subintervals use the
//! midpoint rule. The same interval weights drive `hatf` and joint path
//! sampling, so the two agree exactly.

mod mg;
mod sampling;

pub(crate) use sampling::rng_for_sample;
pub use sampling::{sample_gaussian_paths, GaussianBackend, GaussianSample};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::math::cholesky_with_jitter;
use mg::MolchanGolosov;

/// Relative jitter schedule for near-singular covariance factorizations.
pub const JITTER_START: f64 = 1e-14;
pub const JITTER_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KernelFamily {
    /// Fractional Brownian motion. Covariance is the closed form C_H; the
    /// pointwise kernel is the Molchan-Golosov representation.
    Fbm { hurst: f64 },
    /// Riemann-Liouville fractional Brownian motion with kernel
    /// (t-s)^{H-1/2} / Gamma(H+1/2).
    RiemannLiouville { hurst: f64 },
    /// Integral of the fBM kernel against e^{-rate (t-s)}.
    FractionalOu { hurst: f64, rate: f64 },
    /// Kernel given as a lower-triangular matrix K[i][j] on the uniform grid
    /// implied by the matrix dimension.
    Custom { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub horizon: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, horizon: f64) -> Result<Self> {
        let spec = Self { family, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidInput("kernel horizon must be > 0".into()));
        }
        match &self.family {
            KernelFamily::Fbm { hurst } | KernelFamily::RiemannLiouville { hurst } => {
                check_hurst(*hurst)?;
            }
            KernelFamily::FractionalOu { hurst, rate } => {
                check_hurst(*hurst)?;
                if !rate.is_finite() || *rate <= 0.0 {
                    return Err(Error::InvalidInput(
                        "fractional OU mean-reversion rate must be > 0".into(),
                    ));
                }
            }
            KernelFamily::Custom { matrix } => {
                let n = matrix.len();
                if n == 0 {
                    return Err(Error::InvalidInput("custom kernel matrix is empty".into()));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::InvalidInput(
                            "custom kernel matrix must be square".into(),
                        ));
                    }
                    for (j, v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            return Err(Error::InvalidInput(
                                "custom kernel entries must be finite".into(),
                            ));
                        }
                        if j > i && *v != 0.0 {
                            return Err(Error::InvalidInput(
                                "custom kernel matrix must be lower-triangular (row i weights grid cells j <= i)".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            KernelFamily::Fbm { .. } => "FBM",
            KernelFamily::RiemannLiouville { .. } => "RIEMANN_LIOUVILLE",
            KernelFamily::FractionalOu { .. } => "FRACTIONAL_OU",
            KernelFamily::Custom { .. } => "CUSTOM",
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Fbm { hurst }
            | KernelFamily::RiemannLiouville { hurst }
            | KernelFamily::FractionalOu { hurst, .. } => Some(hurst),
            KernelFamily::Custom { .. } => None,
        }
    }

    pub fn is_self_similar(&self) -> bool {
        matches!(
            self.family,
            KernelFamily::Fbm { .. } | KernelFamily::RiemannLiouville { .. }
        )
    }

    /// K(t, s). Exactly zero for s >= t; the diagonal returns 0 by convention
    /// for singular kernels.
    pub fn kernel_eval(&self, t: f64, s: f64) -> Result<f64> {
        self.check_times(&[t, s])?;
        if s >= t {
            return Ok(0.0);
        }
        Ok(self.point_eval(t, s))
    }

    fn check_times(&self, ts: &[f64]) -> Result<()> {
        for &x in ts {
            if !x.is_finite() || x < 0.0 || x > self.horizon * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "time {x} outside [0, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Pointwise kernel without domain checks; caller guarantees 0 <= s < t.
    fn point_eval(&self, t: f64, s: f64) -> f64 {
        match &self.family {
            KernelFamily::RiemannLiouville { hurst } => {
                (t - s).powf(hurst - 0.5) / gamma(hurst + 0.5)
            }
            KernelFamily::Fbm { hurst } => MolchanGolosov::new(*hurst).eval(t, s),
            KernelFamily::FractionalOu { hurst, rate } => {
                if (*hurst - 0.5).abs() < 1e-12 {
                    // base kernel is identically 1, so the integral collapses
                    return (-rate * (t - s)).exp();
                }
                let base = MolchanGolosov::new(*hurst);
                // K(t,s) - rate * int_s^t e^{-rate (t-r)} K(r,s) dr, with the
                // (r-s)^{H-1/2} factor of the base kernel integrated exactly
                let m = 32usize;
                let h = *hurst;
                let mut acc = 0.0;
                let mut prev = 0.0f64;
                let len = t - s;
                for k in 0..m {
                    let x1 = ((k + 1) as f64 / m as f64).powf(2.0);
                    let a_off = prev;
                    let b_off = len * x1;
                    let closed = (b_off.powf(h + 0.5) - a_off.powf(h + 0.5)) / (h + 0.5);
                    let rm = s + 0.5 * (a_off + b_off);
                    let ratio = base.eval(rm, s) * (rm - s).powf(0.5 - h);
                    acc += closed * (-rate * (t - rm)).exp() * ratio;
                    prev = b_off;
                }
                base.eval(t, s) - rate * acc
            }
            KernelFamily::Custom { matrix } => {
                let n = matrix.len();
                let dt = self.horizon / n as f64;
                // row r weights grid cells j <= r for target node t_{r+1}
                let r = custom_row(t, dt, n);
                let j = (((s / dt) + 1e-9).floor() as usize).min(n - 1);
                if j > r {
                    0.0
                } else {
                    matrix[r][j]
                }
            }
        }
    }

    /// Power-law exponent of K(t, u) as u -> 0 (zero when the kernel stays
    /// bounded there).
    fn left_exponent(&self) -> f64 {
        match self.family {
            KernelFamily::Fbm { hurst } | KernelFamily::FractionalOu { hurst, .. } => {
                -(hurst - 0.5).abs()
            }
            _ => 0.0,
        }
    }

    /// Power-law exponent of K(t, u) as u -> t.
    fn diag_exponent(&self) -> f64 {
        match self.family {
            KernelFamily::RiemannLiouville { hurst }
            | KernelFamily::Fbm { hurst }
            | KernelFamily::FractionalOu { hurst, .. } => hurst - 0.5,
            KernelFamily::Custom { .. } => 0.0,
        }
    }

    /// int_a^{min(b,t)} K(t, u) du.
    pub(crate) fn interval_weight(&self, t: f64, a: f64, b: f64) -> f64 {
        let b = b.min(t);
        if a >= b || t <= 0.0 {
            return 0.0;
        }
        match &self.family {
            KernelFamily::RiemannLiouville { hurst } => {
                let p = hurst + 0.5;
                ((t - a).powf(p) - (t - b).powf(p)) / (p * gamma(p))
            }
            KernelFamily::Custom { matrix } => {
                let n = matrix.len();
                let dt = self.horizon / n as f64;
                let r = custom_row(t, dt, n);
                // piecewise-constant in u over the matrix's own cells
                let mut acc = 0.0;
                let j0 = ((a / dt) + 1e-9).floor() as usize;
                let j1 = (((b - 1e-15) / dt) + 1e-9).floor() as usize;
                for j in j0..=j1.min(n - 1) {
                    if j > r {
                        break;
                    }
                    let lo = a.max(j as f64 * dt);
                    let hi = b.min((j + 1) as f64 * dt);
                    if hi > lo {
                        acc += matrix[r][j] * (hi - lo);
                    }
                }
                acc
            }
            _ => {
                // fBM / fractional OU: midpoint subintervals with closed-form
                // power factors where the interval touches u = 0 or u = t
                let m_sub = 8usize;
                let len = b - a;
                let d = self.diag_exponent();
                let e = self.left_exponent();
                let mut acc = 0.0;
                for k in 0..m_sub {
                    let lo = a + len * k as f64 / m_sub as f64;
                    let hi = a + len * (k + 1) as f64 / m_sub as f64;
                    let mid = 0.5 * (lo + hi);
                    if k == m_sub - 1 && (t - hi).abs() < 1e-14 * self.horizon {
                        let closed =
                            ((t - lo).powf(d + 1.0) - (t - hi).max(0.0).powf(d + 1.0)) / (d + 1.0);
                        acc += closed * self.point_eval(t, mid) * (t - mid).powf(-d);
                    } else if k == 0 && lo == 0.0 && e < 0.0 {
                        let closed = (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0);
                        acc += closed * self.point_eval(t, mid) * mid.powf(-e);
                    } else {
                        acc += self.point_eval(t, mid) * (hi - lo);
                    }
                }
                acc
            }
        }
    }

    /// Weights W[i-1][j] = int over grid cell j of K(t_i, u) du for target
    /// nodes t_1..t_n; lower-triangular, stored flat row-major n x n.
    pub fn weight_matrix(&self, grid: &PathGrid) -> Result<Vec<f64>> {
        self.check_grid_compat(grid)?;
        let n = grid.n;
        let mut w = vec![0.0; n * n];
        for i in 1..=n {
            let t = grid.node(i);
            for j in 0..i {
                w[(i - 1) * n + j] = self.interval_weight(t, grid.node(j), grid.node(j + 1));
            }
        }
        Ok(w)
    }

    /// Weights against arbitrary targets and cell edges (for quadrature-grade
    /// functional evaluation in the rate solvers).
    pub fn weights_for_targets(&self, targets: &[f64], edges: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_times(targets)?;
        let mut out = Vec::with_capacity(targets.len());
        for &t in targets {
            let mut row = vec![0.0; edges.len() - 1];
            for j in 0..edges.len() - 1 {
                if edges[j] >= t {
                    break;
                }
                row[j] = self.interval_weight(t, edges[j], edges[j + 1]);
            }
            out.push(row);
        }
        Ok(out)
    }

    fn check_grid_compat(&self, grid: &PathGrid) -> Result<()> {
        if (grid.horizon - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::InvalidInput(
                "grid horizon does not match kernel horizon".into(),
            ));
        }
        if let KernelFamily::Custom { matrix } = &self.family {
            if matrix.len() != grid.n {
                return Err(Error::UnsupportedKernel(format!(
                    "custom kernel matrix is {}x{} but the grid has {} steps",
                    matrix.len(),
                    matrix.len(),
                    grid.n
                )));
            }
        }
        Ok(())
    }

    /// Cov(B_hat_t, B_hat_s).
    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        self.check_times(&[t, s])?;
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        if lo <= 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            KernelFamily::Fbm { hurst } => {
                let h2 = 2.0 * hurst;
                Ok(0.5 * (hi.powf(h2) + lo.powf(h2) - (hi - lo).powf(h2)))
            }
            KernelFamily::RiemannLiouville { .. } => Ok(self.product_quadrature(hi, lo, 1024)),
            KernelFamily::FractionalOu { hurst, rate } => {
                if (hurst - 0.5).abs() < 1e-12 {
                    // exact Ornstein-Uhlenbeck covariance
                    let a = *rate;
                    Ok((-a * (hi + lo)).exp() * ((2.0 * a * lo).exp() - 1.0) / (2.0 * a))
                } else {
                    Ok(self.product_quadrature(hi, lo, 160))
                }
            }
            KernelFamily::Custom { matrix } => {
                let n = matrix.len();
                let dt = self.horizon / n as f64;
                let r_hi = custom_row(hi, dt, n);
                let r_lo = custom_row(lo, dt, n);
                let mut acc = 0.0;
                for j in 0..=r_hi.min(r_lo) {
                    let overlap = (lo - j as f64 * dt).clamp(0.0, dt);
                    acc += matrix[r_hi][j] * matrix[r_lo][j] * overlap;
                }
                Ok(acc)
            }
        }
    }

    /// int_0^{lo} K(hi, u) K(lo, u) du on a grid graded toward both endpoints.
    fn product_quadrature(&self, hi: f64, lo: f64, q: usize) -> f64 {
        let smoothstep = |x: f64| x * x * (3.0 - 2.0 * x);
        let e_left = 2.0 * self.left_exponent();
        let diag = self.diag_exponent();
        let e_diag = if (hi - lo).abs() < 1e-15 * self.horizon {
            2.0 * diag
        } else {
            diag
        };
        let mut acc = 0.0;
        let mut prev = 0.0f64;
        for k in 0..q {
            let a = prev;
            let b = lo * smoothstep((k + 1) as f64 / q as f64);
            prev = b;
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let prod = |u: f64| self.point_eval(hi, u) * self.point_eval(lo, u);
            if k == 0 && e_left < 0.0 {
                let closed = (b.powf(e_left + 1.0) - a.powf(e_left + 1.0)) / (e_left + 1.0);
                acc += closed * prod(mid) * mid.powf(-e_left);
            } else {
                // the (lo - u)^{e_diag} factor is integrated exactly on every
                // interval; the remaining cofactor is smooth up to u = lo
                let closed = ((lo - a).powf(e_diag + 1.0) - (lo - b).max(0.0).powf(e_diag + 1.0))
                    / (e_diag + 1.0);
                acc += closed * prod(mid) * (lo - mid).powf(-e_diag);
            }
        }
        acc
    }

    /// C[i][j] = covariance(t_i, t_j), i, j = 1..n (node 0 excluded), flat
    /// row-major.
    pub fn covariance_matrix(&self, grid: &PathGrid) -> Result<Vec<f64>> {
        self.check_grid_compat(grid)?;
        let n = grid.n;
        let mut c = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=i {
                let v = self.covariance(grid.node(i), grid.node(j))?;
                c[(i - 1) * n + (j - 1)] = v;
                c[(j - 1) * n + (i - 1)] = v;
            }
        }
        Ok(c)
    }

    /// Grid approximation of the kernel modulus M(h): the largest
    /// E[(B_hat_{t1} - B_hat_{t2})^2] over node pairs with |t1 - t2| <= h.
    pub fn holder_modulus(&self, grid: &PathGrid, h: f64) -> Result<f64> {
        self.check_grid_compat(grid)?;
        if !h.is_finite() || h < 0.0 || h > self.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidInput("h must lie in [0, T]".into()));
        }
        if h == 0.0 {
            return Ok(0.0);
        }
        let n = grid.n;
        let tol = 1e-12 * self.horizon;
        let mut var = vec![0.0; n + 1];
        for i in 1..=n {
            var[i] = self.covariance(grid.node(i), grid.node(i))?;
        }
        let mut m = 0.0f64;
        for i in 0..=n {
            for j in (i + 1)..=n {
                if grid.node(j) - grid.node(i) > h + tol {
                    break;
                }
                let cross = if i == 0 {
                    0.0
                } else {
                    self.covariance(grid.node(i), grid.node(j))?
                };
                m = m.max(var[i] + var[j] - 2.0 * cross);
            }
        }
        Ok(m)
    }

    /// f_hat(t_i) = int_0^{t_i} K(t_i, u) fdot(u) du for a step control fdot
    /// on the grid. Node 0 is always 0.
    pub fn hatf(&self, grid: &PathGrid, fdot: &[f64]) -> Result<Vec<f64>> {
        if fdot.len() != grid.n {
            return Err(Error::InvalidInput(format!(
                "control has {} values, grid has {} intervals",
                fdot.len(),
                grid.n
            )));
        }
        let w = self.weight_matrix(grid)?;
        Ok(apply_weights(&w, grid.n, fdot))
    }

    /// Cholesky factor of the node covariance with the documented jitter
    /// escalation.
    pub fn covariance_cholesky(&self, grid: &PathGrid) -> Result<(Vec<f64>, f64)> {
        let c = self.covariance_matrix(grid)?;
        cholesky_with_jitter(&c, grid.n, JITTER_START, JITTER_LIMIT)
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if !h.is_finite() || h <= 0.0 || h >= 1.0 {
        return Err(Error::InvalidInput(
            "Hurst parameter must lie in (0, 1)".into(),
        ));
    }
    Ok(())
}

/// Row index of a custom kernel matrix for target time t: row r carries the
/// weights of node t_{r+1}.
fn custom_row(t: f64, dt: f64, n: usize) -> usize {
    let r = (t / dt - 1e-9).ceil() as isize - 1;
    r.clamp(0, n as isize - 1) as usize
}

/// Shared accumulation used by both `hatf` and joint path sampling, so the
/// two produce bit-identical results for identical inputs.
pub(crate) fn apply_weights(w: &[f64], n: usize, fdot: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        let row = &w[(i - 1) * n..(i - 1) * n + i];
        let mut acc = 0.0;
        for (j, wij) in row.iter().enumerate() {
            acc += wij * fdot[j];
        }
        out[i] = acc;
    }
    out
}
