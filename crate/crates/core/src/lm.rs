//! Small dense Levenberg-Marquardt solver shared by the calibration and
//! registration fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `‖Jᵀr‖∞` drops below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative step length drops below this.
    pub step_tolerance: f64,
    /// Stop when the cost drops below this.
    pub cost_tolerance: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-14,
            step_tolerance: 1e-15,
            cost_tolerance: 1e-30,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Cost,
    /// Damping saturated without finding a descent step.
    Stalled,
    /// Iteration cap reached.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// `½‖r‖²` at the returned parameters.
    pub cost: f64,
    /// Cost after every accepted iteration, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        !matches!(self.termination, Termination::MaxIterations)
    }
}

/// A least-squares problem: residuals and their Jacobian at `x`.
pub trait Problem {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Minimizes `½‖r(x)‖²` from `x0`. Only cost-decreasing steps are accepted,
/// so `cost_history` is non-increasing.
pub fn minimize<P: Problem>(problem: &P, x0: DVector<f64>, opts: &LmOptions) -> LmReport {
    let mut x = x0;
    let mut r = problem.residuals(&x);
    let mut cost = 0.5 * r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.initial_lambda;
    let mut grad_norm = f64::INFINITY;
    let n = x.len();

    for iter in 0..opts.max_iterations {
        if cost <= opts.cost_tolerance {
            return report(x, cost, history, grad_norm, iter, Termination::Cost);
        }
        let j = problem.jacobian(&x);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        grad_norm = g.amax();
        if grad_norm <= opts.gradient_tolerance {
            return report(x, cost, history, grad_norm, iter, Termination::Gradient);
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = &x + &step;
            let r_new = problem.residuals(&candidate);
            let cost_new = 0.5 * r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let small_step = step.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance);
                x = candidate;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if small_step {
                    return report(x, cost, history, grad_norm, iter + 1, Termination::Step);
                }
                break;
            }
            if step.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance) {
                // no representable improvement left
                return report(x, cost, history, grad_norm, iter + 1, Termination::Step);
            }
            lambda *= 10.0;
        }
        if !accepted {
            return report(x, cost, history, grad_norm, iter + 1, Termination::Stalled);
        }
    }
    let g = problem.jacobian(&x).transpose() * &r;
    let grad_norm = g.amax();
    let termination = if cost <= opts.cost_tolerance {
        Termination::Cost
    } else if grad_norm <= opts.gradient_tolerance {
        Termination::Gradient
    } else {
        Termination::MaxIterations
    };
    report(x, cost, history, grad_norm, opts.max_iterations, termination)
}

fn report(
    params: DVector<f64>,
    cost: f64,
    cost_history: Vec<f64>,
    gradient_norm: f64,
    iterations: usize,
    termination: Termination,
) -> LmReport {
    LmReport {
        params,
        cost,
        cost_history,
        gradient_norm,
        iterations,
        termination,
    }
}
