//! Limited-memory quasi-Newton minimization with a feasibility-aware
//! backtracking line search.

use std::collections::VecDeque;

/// Stopping rule and memory of the optimizer.
#[derive(Debug, Clone, Copy)]
pub struct LbfgsConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { tol: 1e-9, max_iter: 500, memory: 12 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Stopping measure of the final gradient.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. `f` returns `None` at infeasible points, which
/// the line search treats as rejections. `precond` applies the initial
/// inverse Hessian; `measure` is the gradient norm compared with `tol`.
pub fn minimize<F, P, M>(x0: Vec<f64>, mut f: F, precond: P, measure: M, cfg: LbfgsConfig) -> Option<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    P: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> f64,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let done = |x: Vec<f64>, value, g: &[f64], iterations, converged| {
        Some(LbfgsOutcome { x, value, grad_norm: measure(g), iterations, converged })
    };
    while iterations < cfg.max_iter {
        if measure(&g) < cfg.tol {
            return done(x, fx, &g, iterations, true);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let mut r = precond(&q);
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - b) * si);
        }
        let mut p: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            mem.clear();
            p = precond(&g).iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        // roundoff allowance on the sufficient-decrease test
        let slack = 8.0 * f64::EPSILON * fx.abs().max(1e-300);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_ <= fx + 1e-4 * t * slope + slack {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((xn, fn_, gn)) = accepted else {
            if mem.is_empty() {
                return done(x, fx, &g, iterations, false);
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let c = measure(&g) < cfg.tol;
    done(x, fx, &g, iterations, c)
}
