//! Bound-constrained limited-memory quasi-Newton minimization.
//!
//! Iterates stay inside the box `[lower, upper]`. At each step, variables
//! held at a bound by a gradient pointing outward are frozen. The search
//! direction comes from the L-BFGS two-loop recursion restricted to the
//! remaining free variables. It is followed by a backtracking line search
//! along the projected path `P(x + t d)` under an Armijo condition.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Stop when the projected gradient's ∞-norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|Δf| / max(|f|, 1)` stays below this for
    /// `value_patience` consecutive iterations.
    pub value_tol: f64,
    pub value_patience: usize,
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iterations: 500,
            grad_tol: 1e-6,
            value_tol: 1e-9,
            value_patience: 5,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    GradientTolerance,
    ValueTolerance,
    MaxIterations,
    LineSearchFailed,
}

impl OptimStatus {
    pub fn converged(self) -> bool {
        matches!(self, OptimStatus::GradientTolerance | OptimStatus::ValueTolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: OptimStatus,
}

pub fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Components of the gradient that can still decrease the objective without
/// leaving the box.
pub fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f` over the box. `f(x, grad)` returns the value and writes the
/// gradient into `grad`.
pub fn minimize_bounded<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &OptimOptions,
) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bound dimensions");
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let initial_value = fx;
    let mut evaluations = 1;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut small_changes = 0;
    let mut status = OptimStatus::MaxIterations;
    let mut iterations = 0;

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < options.max_iterations {
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) < options.grad_tol {
            status = OptimStatus::GradientTolerance;
            break;
        }
        let free: Vec<bool> = pg.iter().map(|&v| v != 0.0).collect();

        let mut accepted = false;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.is_empty();
            let d = if use_memory {
                two_loop(&g, &free, &memory)
            } else {
                pg.iter().map(|v| -v).collect()
            };
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                memory.clear();
                continue;
            }
            // Without curvature information, cap the first trial step.
            let mut step = if use_memory {
                1.0
            } else {
                (1.0 / inf_norm(&d)).min(1.0)
            };
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = (x[i] + step * d[i]).clamp(lower[i], upper[i]);
                }
                let f_new = f(&x_new, &mut g_new);
                evaluations += 1;
                let moved: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &moved);
                if f_new.is_finite() && f_new <= fx + 1e-4 * decrease && decrease < 0.0 {
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&moved, &y);
                    if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
                        if memory.len() == options.memory {
                            memory.pop_front();
                        }
                        memory.push_back((moved, y, 1.0 / sy));
                    }
                    let change = (fx - f_new).abs() / fx.abs().max(1.0);
                    small_changes = if change < options.value_tol {
                        small_changes + 1
                    } else {
                        0
                    };
                    x.copy_from_slice(&x_new);
                    g.copy_from_slice(&g_new);
                    fx = f_new;
                    accepted = true;
                    break;
                }
                if decrease >= 0.0 && step < 1e-20 {
                    break;
                }
                step *= 0.5;
            }
            if accepted {
                break;
            }
            memory.clear();
        }
        iterations += 1;
        if !accepted {
            status = OptimStatus::LineSearchFailed;
            break;
        }
        if small_changes >= options.value_patience {
            status = OptimStatus::ValueTolerance;
            break;
        }
    }

    let pg = projected_gradient(&x, &g, lower, upper);
    OptimResult {
        projected_grad_norm: inf_norm(&pg),
        x,
        value: fx,
        initial_value,
        iterations,
        evaluations,
        status,
    }
}

/// `-H g` on the free variables, with `H` the L-BFGS inverse-Hessian
/// approximation; frozen variables get a zero component.
fn two_loop(g: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mask = |v: &mut Vec<f64>| {
        for (vi, &fr) in v.iter_mut().zip(free) {
            if !fr {
                *vi = 0.0;
            }
        }
    };
    let mut q = g.to_vec();
    mask(&mut q);
    let mut alphas = vec![0.0; memory.len()];
    for (k, (s, y, rho)) in memory.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[k] = a;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
    }
    if let Some((s, y, _)) = memory.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= scale;
        }
    }
    for (k, (s, y, rho)) in memory.iter().enumerate() {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alphas[k] - b) * si;
        }
    }
    mask(&mut q);
    q.iter().map(|v| -v).collect()
}
