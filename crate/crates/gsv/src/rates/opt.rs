//! Limited-memory BFGS with Armijo backtracking, used by the rate-function
//! solvers. Deterministic given the starting point.

use std::collections::VecDeque;

pub(crate) struct LbfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            grad_tol: 1e-9,
            memory: 10,
        }
    }
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes `f`; the closure returns the value and writes the gradient.
pub(crate) fn minimize<F>(f: F, x0: &[f64], opts: &LbfgsOptions) -> Outcome
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_hist: VecDeque<f64> = VecDeque::new();

    let mut converged = inf_norm(&g) < opts.grad_tol;

    for _ in 0..opts.max_iter {
        if converged {
            break;
        }

        // two-loop recursion for d = -H g
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= a * yj;
            }
        }
        if k > 0 {
            let sy = dot(&s_hist[k - 1], &y_hist[k - 1]);
            let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
            if yy > 0.0 {
                let gamma = sy / yy;
                for qj in q.iter_mut() {
                    *qj *= gamma;
                }
            }
        }
        for i in 0..k {
            let b = rho_hist[i] * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - b) * sj;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();

        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            // not a descent direction, fall back to steepest descent
            d = g.iter().map(|v| -v).collect();
            gd = dot(&g, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Armijo backtracking
        let mut step = 1.0;
        let mut g_new = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..50 {
            let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * gd {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-14 * inf_norm(&s) * inf_norm(&y) + f64::MIN_POSITIVE {
                    s_hist.push_back(s);
                    y_hist.push_back(y);
                    rho_hist.push_back(1.0 / sy);
                    if s_hist.len() > opts.memory {
                        s_hist.pop_front();
                        y_hist.pop_front();
                        rho_hist.pop_front();
                    }
                }
                x = x_new;
                fx = f_new;
                std::mem::swap(&mut g, &mut g_new);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        converged = inf_norm(&g) < opts.grad_tol;
    }

    Outcome {
        x,
        value: fx,
        converged,
    }
}
