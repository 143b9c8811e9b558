//! Variational rate functions for the large-deviation regime, closed-form
//! moderate-deviation and central-limit laws, and exit rates.
//!
//! The solvers restrict the control to step functions on the grid, minimize
//! the discretized functional by multi-start L-BFGS with analytic gradients,
//! and report the value of the best control under one fixed high-resolution
//! quadrature. Values are therefore upper bounds on the continuum infimum
//! (up to quadrature tolerance), and refining the grid can only lower them:
//! every level's candidates stay in the pool.

mod opt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::kernels::KernelSpec;
use crate::math::{eps_pow, norm_ccdf, norm_pdf};
use crate::model::{ModelSpec, ScalingParams};
use crate::vol::VolFunction;
use opt::{minimize, LbfgsOptions};

/// A step control on a grid; `ldot` is the eliminated inner control where
/// the problem defines one (it is the optimal shift of the independent
/// Brownian motion, reusable as an importance-sampling tilt).
#[derive(Debug, Clone)]
pub struct ControlPath {
    pub grid: PathGrid,
    pub fdot: Vec<f64>,
    pub ldot: Option<Vec<f64>>,
}

impl ControlPath {
    /// (1/2) int fdot^2
    pub fn energy(&self) -> f64 {
        0.5 * self.fdot.iter().map(|v| v * v).sum::<f64>() * self.grid.dt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolverStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct RateResult {
    /// Upper bound on the continuum infimum: the functional value of the
    /// best control found, under the solver's reference quadrature.
    pub value: f64,
    pub minimizer: ControlPath,
    pub restarts_used: usize,
    /// (grid size, best value using levels up to that size); non-increasing.
    pub grid_levels: Vec<(usize, f64)>,
    pub status: SolverStatus,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// L-BFGS starts per level: zero, +/- ramp, then Gaussian draws.
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Reference quadrature resolution; rounded up to a multiple of the grid
    /// size. Defaults per kernel family when None.
    pub eval_points: Option<usize>,
    /// Solve coarse-to-fine with warm starts (grids halved down to 16).
    pub multilevel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iter: 400,
            grad_tol: 1e-9,
            seed: 0x5eed,
            eval_points: None,
            multilevel: true,
        }
    }
}

// ---------------------------------------------------------------------------
// discretized problems
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum Objective {
    /// terminal-value rate: (x - rho A)^2 / (2 rho_bar^2 D) + E/2
    Terminal { x: f64 },
    /// sample-path rate against a fixed gdot (step function on `cells` cells
    /// of the same horizon)
    Path { gdot: Vec<f64> },
}

struct DiscreteProblem<'a> {
    sigma: &'a VolFunction,
    rho: f64,
    rho_bar: f64,
    dt: f64,
    m: usize,
    /// w[i-1][j]: d fhat(t_i) / d fdot_j for sigma nodes t_1..t_{m-1}
    w: Vec<Vec<f64>>,
    objective: Objective,
}

impl<'a> DiscreteProblem<'a> {
    fn build(
        kernel: &KernelSpec,
        sigma: &'a VolFunction,
        rho: f64,
        horizon: f64,
        m: usize,
        objective: Objective,
    ) -> Result<Self> {
        let dt = horizon / m as f64;
        let edges: Vec<f64> = (0..=m).map(|i| i as f64 * dt).collect();
        let targets: Vec<f64> = edges[1..m].to_vec();
        let w = kernel.weights_for_targets(&targets, &edges)?;
        Ok(Self {
            sigma,
            rho,
            rho_bar: (1.0 - rho * rho).sqrt(),
            dt,
            m,
            w,
            objective,
        })
    }

    fn fhat_and_sigma(&self, fdot: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.m;
        let mut sig = vec![0.0; m];
        let mut sigp = vec![0.0; m];
        let mut fhat = vec![0.0; m];
        sig[0] = self.sigma.eval(0.0);
        sigp[0] = self.sigma.deriv(0.0);
        for i in 1..m {
            let row = &self.w[i - 1];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * fdot[j];
            }
            fhat[i] = acc;
            sig[i] = self.sigma.eval(acc);
            sigp[i] = self.sigma.deriv(acc);
        }
        (fhat, sig, sigp)
    }

    /// Objective value and gradient of the discretized functional.
    fn eval(&self, fdot: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.m;
        let dt = self.dt;
        let (_fhat, sig, sigp) = self.fhat_and_sigma(fdot);
        match &self.objective {
            Objective::Terminal { x } => {
                let mut a = 0.0;
                let mut d = 0.0;
                let mut e = 0.0;
                for i in 0..m {
                    a += sig[i] * fdot[i] * dt;
                    d += sig[i] * sig[i] * dt;
                    e += fdot[i] * fdot[i] * dt;
                }
                let resid = x - self.rho * a;
                let rb2 = self.rho_bar * self.rho_bar;
                let value = resid * resid / (2.0 * rb2 * d) + 0.5 * e;

                let ca = -self.rho * resid / (rb2 * d);
                let cd = -resid * resid / (2.0 * rb2 * d * d);
                // direct terms
                for k in 0..m {
                    grad[k] = ca * sig[k] * dt + fdot[k] * dt;
                }
                // chain through sigma(fhat(t_i)), i >= 1
                for i in 1..m {
                    let ti = (ca * fdot[i] + cd * 2.0 * sig[i]) * sigp[i] * dt;
                    if ti != 0.0 {
                        let row = &self.w[i - 1];
                        for k in 0..i {
                            grad[k] += ti * row[k];
                        }
                    }
                }
                value
            }
            Objective::Path { gdot } => {
                let rb = self.rho_bar;
                let mut value = 0.0;
                let mut r = vec![0.0; m];
                for i in 0..m {
                    r[i] = (gdot[i] - self.rho * sig[i] * fdot[i]) / (rb * sig[i]);
                    value += 0.5 * r[i] * r[i] * dt + 0.5 * fdot[i] * fdot[i] * dt;
                }
                for k in 0..m {
                    grad[k] = dt * (-(self.rho / rb) * r[k] + fdot[k]);
                }
                for i in 1..m {
                    let ti = -r[i] * gdot[i] * sigp[i] / (rb * sig[i] * sig[i]) * dt;
                    if ti != 0.0 {
                        let row = &self.w[i - 1];
                        for k in 0..i {
                            grad[k] += ti * row[k];
                        }
                    }
                }
                value
            }
        }
    }
}

// ---------------------------------------------------------------------------
// reference quadrature used for all reported values
// ---------------------------------------------------------------------------

struct Evaluator<'a> {
    sigma: &'a VolFunction,
    rho: f64,
    rho_bar: f64,
    cells: usize,
    dt: f64,
    /// w[i][j]: d fhat(mid_i) / d (eval-cell control j)
    w: Vec<Vec<f64>>,
    objective: Objective, // gdot here lives on the eval cells
}

impl<'a> Evaluator<'a> {
    fn build(
        kernel: &KernelSpec,
        sigma: &'a VolFunction,
        rho: f64,
        horizon: f64,
        cells: usize,
        objective: Objective,
    ) -> Result<Self> {
        let dt = horizon / cells as f64;
        let edges: Vec<f64> = (0..=cells).map(|i| i as f64 * dt).collect();
        let mids: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * dt).collect();
        let w = kernel.weights_for_targets(&mids, &edges)?;
        Ok(Self {
            sigma,
            rho,
            rho_bar: (1.0 - rho * rho).sqrt(),
            cells,
            dt,
            w,
            objective,
        })
    }

    /// Value of the functional at a control given on `m` cells (m divides
    /// the evaluator resolution).
    fn value(&self, fdot: &[f64]) -> f64 {
        let rep = self.cells / fdot.len();
        debug_assert_eq!(rep * fdot.len(), self.cells);
        let fe: Vec<f64> = (0..self.cells).map(|i| fdot[i / rep]).collect();
        let mut sig = vec![0.0; self.cells];
        for i in 0..self.cells {
            let row = &self.w[i];
            let mut acc = 0.0;
            for j in 0..=i.min(row.len() - 1) {
                acc += row[j] * fe[j];
            }
            sig[i] = self.sigma.eval(acc);
        }
        let e: f64 = fe.iter().map(|v| v * v).sum::<f64>() * self.dt;
        match &self.objective {
            Objective::Terminal { x } => {
                let mut a = 0.0;
                let mut d = 0.0;
                for i in 0..self.cells {
                    a += sig[i] * fe[i] * self.dt;
                    d += sig[i] * sig[i] * self.dt;
                }
                let resid = x - self.rho * a;
                resid * resid / (2.0 * self.rho_bar * self.rho_bar * d) + 0.5 * e
            }
            Objective::Path { gdot } => {
                let grep = self.cells / gdot.len();
                let mut acc = 0.0;
                for i in 0..self.cells {
                    let gd = gdot[i / grep];
                    let r = (gd - self.rho * sig[i] * fe[i]) / (self.rho_bar * sig[i]);
                    acc += 0.5 * r * r * self.dt;
                }
                acc + 0.5 * e
            }
        }
    }
}

// ---------------------------------------------------------------------------
// multilevel driver
// ---------------------------------------------------------------------------

fn make_levels(n: usize, multilevel: bool) -> Vec<usize> {
    if !multilevel {
        return vec![n];
    }
    let mut v = vec![n];
    let mut m = n;
    while m % 2 == 0 && m / 2 >= 16 {
        m /= 2;
        v.push(m);
    }
    v.reverse();
    v
}

fn default_eval_base(kernel: &KernelSpec) -> usize {
    use crate::kernels::KernelFamily::*;
    match kernel.family {
        RiemannLiouville { .. } | Custom { .. } => 1024,
        Fbm { .. } => 256,
        FractionalOu { .. } => 128,
    }
}

fn eval_resolution(n: usize, base: usize) -> usize {
    if base % n == 0 {
        base
    } else {
        n * base.div_ceil(n)
    }
}

/// Inject a control from a coarse dyadic level onto `fine` cells.
fn inject(fdot: &[f64], fine: usize) -> Vec<f64> {
    let rep = fine / fdot.len();
    (0..fine).map(|i| fdot[i / rep]).collect()
}

/// Restrict a control that is piecewise constant on a coarse sublattice.
fn restrict(fdot: &[f64], coarse: usize) -> Vec<f64> {
    let rep = fdot.len() / coarse;
    (0..coarse)
        .map(|i| fdot[i * rep..(i + 1) * rep].iter().sum::<f64>() / rep as f64)
        .collect()
}

struct SolveOutcome {
    value: f64,
    fdot: Vec<f64>, // on the call grid
    restarts_used: usize,
    grid_levels: Vec<(usize, f64)>,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn solve_multilevel(
    kernel: &KernelSpec,
    sigma: &VolFunction,
    rho: f64,
    horizon: f64,
    n: usize,
    objective_for_level: &dyn Fn(usize) -> Objective,
    eval_objective: Objective,
    opts: &SolverOptions,
    control_scale: f64,
) -> Result<SolveOutcome> {
    let base = opts
        .eval_points
        .unwrap_or_else(|| default_eval_base(kernel));
    let res = eval_resolution(n, base);
    let evaluator = Evaluator::build(kernel, sigma, rho, horizon, res, eval_objective)?;

    let levels = make_levels(n, opts.multilevel);
    let mut best: Option<(f64, Vec<f64>, bool, f64)> = None; // value, fdot(n), converged, energy
    let mut grid_levels = Vec::new();
    let mut restarts_used = 0usize;

    for (li, &m) in levels.iter().enumerate() {
        let problem =
            DiscreteProblem::build(kernel, sigma, rho, horizon, m, objective_for_level(m))?;

        // starting points: zero, +/- ramps, Gaussian draws, warm start
        let mut starts: Vec<Vec<f64>> = vec![vec![0.0; m]];
        starts.push(vec![control_scale; m]);
        starts.push(vec![-control_scale; m]);
        let n_gauss = opts.restarts.saturating_sub(3);
        let mut rng =
            ChaCha8Rng::seed_from_u64(opts.seed ^ (li as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..n_gauss {
            let draw: Vec<f64> = (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * control_scale
                })
                .collect();
            starts.push(draw);
        }
        if let Some((_, ref fbest, _, _)) = best {
            starts.push(restrict(fbest, m));
        }

        let lbfgs = LbfgsOptions {
            max_iter: opts.max_iter,
            grad_tol: opts.grad_tol,
            memory: 10,
        };
        restarts_used += starts.len();

        let outcomes: Vec<(f64, Vec<f64>, bool)> = starts
            .par_iter()
            .map(|x0| {
                let out = minimize(|x, g| problem.eval(x, g), x0, &lbfgs);
                debug_assert!(out.value.is_finite());
                let fdot_n = inject(&out.x, n);
                let v = evaluator.value(&fdot_n);
                (v, fdot_n, out.converged)
            })
            .collect();

        for (v, fdot_n, conv) in outcomes {
            let energy = fdot_n.iter().map(|a| a * a).sum::<f64>();
            let better = match &best {
                None => true,
                Some((bv, _, _, be)) => v < bv - 1e-10 || ((v - bv).abs() <= 1e-10 && energy < *be),
            };
            if better {
                best = Some((v, fdot_n, conv, energy));
            }
        }
        let (bv, _, _, _) = best.as_ref().unwrap();
        grid_levels.push((m, *bv));
    }

    let (value, fdot, converged, _) = best.unwrap();
    Ok(SolveOutcome {
        value,
        fdot,
        restarts_used,
        grid_levels,
        converged,
    })
}

fn check_solver_model(model: &ModelSpec) -> Result<()> {
    model.validate()?;
    if model.rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// public solvers
// ---------------------------------------------------------------------------

/// Terminal-value large-deviation rate I_T(x): the infimum over Cameron-
/// Martin controls of
/// (x - rho int sigma(fhat) fdot)^2 / (2(1-rho^2) int sigma(fhat)^2)
/// + (1/2) int fdot^2.
pub fn ldp_rate_terminal(
    model: &ModelSpec,
    x: f64,
    grid: &PathGrid,
    opts: &SolverOptions,
) -> Result<RateResult> {
    check_solver_model(model)?;
    if !x.is_finite() {
        return Err(Error::InvalidInput("x must be finite".into()));
    }
    let sigma0 = model.sigma.at_zero();
    let scale = x.abs() / (sigma0 * model.horizon);
    let out = solve_multilevel(
        &model.kernel,
        &model.sigma,
        model.rho,
        model.horizon,
        grid.n,
        &|_m| Objective::Terminal { x },
        Objective::Terminal { x },
        opts,
        scale,
    )?;
    let ldot = terminal_ldot(model, grid, &out.fdot, x)?;
    Ok(RateResult {
        value: out.value,
        minimizer: ControlPath {
            grid: *grid,
            fdot: out.fdot,
            ldot: Some(ldot),
        },
        restarts_used: out.restarts_used,
        grid_levels: out.grid_levels,
        status: if out.converged {
            SolverStatus::Converged
        } else {
            SolverStatus::MaxIter
        },
    })
}

/// The eliminated optimal control of the independent Brownian motion for the
/// terminal problem, at the grid's left nodes.
fn terminal_ldot(model: &ModelSpec, grid: &PathGrid, fdot: &[f64], x: f64) -> Result<Vec<f64>> {
    let dt = grid.dt();
    let fhat = model.kernel.hatf(grid, fdot)?;
    let rb2 = 1.0 - model.rho * model.rho;
    let mut a = 0.0;
    let mut d = 0.0;
    let mut sig = vec![0.0; grid.n];
    for i in 0..grid.n {
        sig[i] = model.sigma.eval(fhat[i]);
        a += sig[i] * fdot[i] * dt;
        d += sig[i] * sig[i] * dt;
    }
    let lambda = (x - model.rho * a) / (rb2 * d);
    Ok(sig.iter().map(|s| lambda * rb2.sqrt() * s).collect())
}

/// Sample-path rate Q_T(g) for a path given by its grid node values
/// (g[0] = 0); g is read as its piecewise-linear interpolant, so gdot is the
/// per-interval difference quotient.
pub fn ldp_rate_path(
    model: &ModelSpec,
    g: &[f64],
    grid: &PathGrid,
    opts: &SolverOptions,
) -> Result<RateResult> {
    check_solver_model(model)?;
    if g.len() != grid.n + 1 {
        return Err(Error::InvalidInput(format!(
            "path needs {} node values, got {}",
            grid.n + 1,
            g.len()
        )));
    }
    if g[0] != 0.0 {
        return Err(Error::InvalidInput("path must start at g(0) = 0".into()));
    }
    let dt = grid.dt();
    let gdot: Vec<f64> = (0..grid.n).map(|i| (g[i + 1] - g[i]) / dt).collect();
    let g_energy = gdot.iter().map(|v| v * v).sum::<f64>() * dt;
    let sigma0 = model.sigma.at_zero();
    let scale = (g_energy / model.horizon).sqrt() / sigma0;

    let gdot_for = |m: usize| restrict(&gdot, m);
    let out = solve_multilevel(
        &model.kernel,
        &model.sigma,
        model.rho,
        model.horizon,
        grid.n,
        &|m| Objective::Path { gdot: gdot_for(m) },
        Objective::Path { gdot: gdot.clone() },
        opts,
        scale,
    )?;

    // eliminated inner control on the call grid
    let fhat = model.kernel.hatf(grid, &out.fdot)?;
    let rb = model.rho_bar();
    let ldot: Vec<f64> = (0..grid.n)
        .map(|i| {
            let s = model.sigma.eval(fhat[i]);
            (gdot[i] - model.rho * s * out.fdot[i]) / (rb * s)
        })
        .collect();

    Ok(RateResult {
        value: out.value,
        minimizer: ControlPath {
            grid: *grid,
            fdot: out.fdot,
            ldot: Some(ldot),
        },
        restarts_used: out.restarts_used,
        grid_levels: out.grid_levels,
        status: if out.converged {
            SolverStatus::Converged
        } else {
            SolverStatus::MaxIter
        },
    })
}

/// Exit rate: the infimum of Q_T over paths leaving (a, b) by time t,
/// searched over boundary and hitting node, with the zero-cost constant
/// continuation after the hit.
pub fn exit_rate(
    model: &ModelSpec,
    interval: (f64, f64),
    t: f64,
    grid: &PathGrid,
    opts: &SolverOptions,
) -> Result<RateResult> {
    check_solver_model(model)?;
    let (a, b) = interval;
    if !(a < 0.0 && 0.0 < b) {
        return Err(Error::InvalidInput(
            "interval must satisfy a < 0 < b".into(),
        ));
    }
    if !(t > 0.0 && t <= model.horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput("t must lie in (0, T]".into()));
    }

    let n = grid.n;
    let levels = make_levels(n, opts.multilevel);
    let base = opts
        .eval_points
        .unwrap_or_else(|| default_eval_base(&model.kernel))
        .min(512);
    let sigma0 = model.sigma.at_zero();

    // best control per (finest hitting index, boundary), carried across levels
    let mut warm: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut best: Option<(f64, usize, usize, Vec<f64>, bool)> = None;
    let mut grid_levels = Vec::new();
    let mut restarts_used = 0usize;

    for (li, &m) in levels.iter().enumerate() {
        let sub = PathGrid::new(m, model.horizon)?;
        let k_max = match sub.last_node_at_or_before(t) {
            Some(k) => k,
            None => {
                grid_levels.push((m, best.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY)));
                continue;
            }
        };
        let stride = n / m;

        let tasks: Vec<(usize, usize, f64)> = (1..=k_max)
            .flat_map(|k| [(k, 0usize, a), (k, 1usize, b)])
            .collect();

        let outcomes: Vec<(usize, usize, f64, Vec<f64>, usize, bool)> = tasks
            .par_iter()
            .map(|&(k, ci, c)| {
                let key = (k * stride, ci);
                let tau = k as f64 * sub.dt();
                let scale = c.abs() / (sigma0 * tau);
                let fine_k = k * stride;
                let res = eval_resolution(fine_k, base);
                let evaluator = Evaluator::build(
                    &model.kernel,
                    &model.sigma,
                    model.rho,
                    tau,
                    res,
                    Objective::Terminal { x: c },
                )
                .expect("evaluator construction");
                let problem = DiscreteProblem::build(
                    &model.kernel,
                    &model.sigma,
                    model.rho,
                    tau,
                    k,
                    Objective::Terminal { x: c },
                )
                .expect("problem construction");

                let mut starts: Vec<Vec<f64>> = vec![vec![0.0; k]];
                starts.push(vec![scale; k]);
                starts.push(vec![-scale; k]);
                let mut rng = ChaCha8Rng::seed_from_u64(
                    opts.seed
                        ^ (li as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                        ^ (key.0 as u64).wrapping_mul(0x100_0000_01b3)
                        ^ ci as u64,
                );
                for _ in 0..opts.restarts.saturating_sub(3) {
                    starts.push(
                        (0..k)
                            .map(|_| {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                z * scale
                            })
                            .collect(),
                    );
                }
                if let Some(prev) = warm.get(&key) {
                    starts.push(restrict(prev, k));
                }

                let lbfgs = LbfgsOptions {
                    max_iter: opts.max_iter,
                    grad_tol: opts.grad_tol,
                    memory: 10,
                };
                let mut local: Option<(f64, Vec<f64>, bool)> = None;
                let used = starts.len();
                for x0 in &starts {
                    let out = minimize(|x, g| problem.eval(x, g), x0, &lbfgs);
                    let fine = inject(&out.x, fine_k);
                    let v = evaluator.value(&fine);
                    if local.as_ref().map(|(lv, _, _)| v < *lv).unwrap_or(true) {
                        local = Some((v, fine, out.converged));
                    }
                }
                let (v, fine, conv) = local.unwrap();
                (k, ci, v, fine, used, conv)
            })
            .collect();

        for (k, ci, v, fine, used, conv) in outcomes {
            restarts_used += used;
            warm.insert((k * stride, ci), fine.clone());
            let better = match &best {
                None => true,
                Some((bv, _, _, _, _)) => v < *bv,
            };
            if better {
                best = Some((v, k * stride, ci, fine, conv));
            }
        }
        grid_levels.push((m, best.as_ref().unwrap().0));
    }

    let (value, fine_k, _ci, fine, converged) = best.ok_or_else(|| {
        Error::InvalidInput("no grid node lies in (0, t]; refine the grid".into())
    })?;
    // embed the [0, tau] control into the full grid, zero afterward
    let mut fdot = vec![0.0; n];
    let rep = fine.len() / fine_k;
    for i in 0..fine_k {
        let cell = &fine[i * rep..(i + 1) * rep];
        fdot[i] = cell.iter().sum::<f64>() / rep as f64;
    }
    Ok(RateResult {
        value,
        minimizer: ControlPath {
            grid: *grid,
            fdot,
            ldot: None,
        },
        restarts_used,
        grid_levels,
        status: if converged {
            SolverStatus::Converged
        } else {
            SolverStatus::MaxIter
        },
    })
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

/// Moderate-deviation terminal rate x^2 / (2 T sigma(0)^2).
pub fn mdp_rate_terminal(sigma0: f64, horizon: f64, x: f64) -> f64 {
    x * x / (2.0 * horizon * sigma0 * sigma0)
}

/// Moderate-deviation path rate (1/(2 sigma(0)^2)) int gdot^2.
pub fn mdp_rate_path(sigma0: f64, grid: &PathGrid, g: &[f64]) -> Result<f64> {
    if g.len() != grid.n + 1 {
        return Err(Error::InvalidInput("path length must be n + 1".into()));
    }
    if g[0] != 0.0 {
        return Err(Error::InvalidInput("path must start at 0".into()));
    }
    let dt = grid.dt();
    let mut acc = 0.0;
    for i in 0..grid.n {
        let gd = (g[i + 1] - g[i]) / dt;
        acc += gd * gd * dt;
    }
    Ok(acc / (2.0 * sigma0 * sigma0))
}

/// Central-limit-regime terminal tail:
/// P(X_T >= x) -> Nbar(x / (sqrt(T) sigma0) + sqrt(T) sigma0 / 2).
pub fn cl_tail(sigma0: f64, horizon: f64, x: f64) -> f64 {
    let st = horizon.sqrt() * sigma0;
    norm_ccdf(x / st + 0.5 * st)
}

/// P(sup_{t <= T} (mu t + Z_t) > y) for y > 0, via the reflection-based
/// barrier law Nbar((y - mu T)/sqrt(T)) + e^{2 mu y} Nbar((y + mu T)/sqrt(T)).
pub fn bm_drift_max_cdf(mu: f64, horizon: f64, y: f64) -> f64 {
    debug_assert!(y > 0.0 && horizon > 0.0);
    let st = horizon.sqrt();
    let first = norm_ccdf((y - mu * horizon) / st);
    let z2 = (y + mu * horizon) / st;
    let log_term = 2.0 * mu * y;
    let second = if log_term > 600.0 {
        // avoid overflow: ln Nbar(z) ~ -z^2/2 - ln(z sqrt(2 pi)) for large z
        (log_term - 0.5 * z2 * z2 - (z2 * crate::math::SQRT_2PI).ln()).exp()
    } else {
        log_term.exp() * norm_ccdf(z2)
    };
    (first + second).min(1.0)
}

/// Central-limit-regime running-maximum law: the limit of
/// P(sup_t X_t^{eps,H,H} > x), i.e. the drifted-Brownian barrier law at
/// drift -sigma0/2 and level x/sigma0.
pub fn cl_running_max(sigma0: f64, horizon: f64, x: f64) -> f64 {
    bm_drift_max_cdf(-0.5 * sigma0, horizon, x / sigma0)
}

/// Small-time reparametrization for self-similar kernels.
#[derive(Debug, Clone, Serialize)]
pub struct RescaledScaling {
    pub scaling: ScalingParams,
    pub note: String,
}

/// Maps a small-time parameter t in (0, 1] to the equivalent small-noise
/// parametrization (eps = t) for self-similar volatility processes.
pub fn small_time_rescale(
    kernel: &KernelSpec,
    scaling: &ScalingParams,
    t: f64,
) -> Result<RescaledScaling> {
    if !kernel.is_self_similar() {
        return Err(Error::NotSelfSimilar(kernel.family_name()));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidInput(
            "small-time parameter must lie in (0, 1]".into(),
        ));
    }
    let scaling = scaling.with_eps(t)?;
    Ok(RescaledScaling {
        scaling,
        note: "time horizon tT at noise level 1 matches noise level eps = t at horizon T, \
               with the drift term replaced by -(1/2) t^{H-beta+1/2} int sigma(t^H Bhat)^2 ds"
            .to_string(),
    })
}

/// Evaluates the terminal functional at an arbitrary step control under the
/// solver's reference quadrature (used by upper-bound spot checks).
pub fn terminal_value_of_control(
    model: &ModelSpec,
    x: f64,
    grid: &PathGrid,
    fdot: &[f64],
    eval_points: Option<usize>,
) -> Result<f64> {
    check_solver_model(model)?;
    let base = eval_points.unwrap_or_else(|| default_eval_base(&model.kernel));
    let res = eval_resolution(grid.n, base);
    let ev = Evaluator::build(
        &model.kernel,
        &model.sigma,
        model.rho,
        model.horizon,
        res,
        Objective::Terminal { x },
    )?;
    Ok(ev.value(&inject(fdot, res)))
}

/// Same for the path functional.
pub fn path_value_of_control(
    model: &ModelSpec,
    g: &[f64],
    grid: &PathGrid,
    fdot: &[f64],
    eval_points: Option<usize>,
) -> Result<f64> {
    check_solver_model(model)?;
    let dt = grid.dt();
    let gdot: Vec<f64> = (0..grid.n).map(|i| (g[i + 1] - g[i]) / dt).collect();
    let base = eval_points.unwrap_or_else(|| default_eval_base(&model.kernel));
    let res = eval_resolution(grid.n, base);
    let ev = Evaluator::build(
        &model.kernel,
        &model.sigma,
        model.rho,
        model.horizon,
        res,
        Objective::Path { gdot },
    )?;
    Ok(ev.value(&inject(fdot, res)))
}

/// eps^{2H - 2 alpha - 2 beta} log p: the deviation-scale logarithm used in
/// sweep tables.
pub fn scaled_log(scaling: &ScalingParams, p: f64) -> f64 {
    eps_pow(scaling.eps, scaling.speed_exponent()) * p.ln()
}

/// Density helper for barrier sanity checks.
pub fn norm_pdf_pub(z: f64) -> f64 {
    norm_pdf(z)
}
