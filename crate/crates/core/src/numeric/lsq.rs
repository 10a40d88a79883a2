//! Box-constrained Levenberg–Marquardt with finite-difference Jacobians.
//!
//! The damping follows Nielsen's gain-ratio update on a diagonally scaled
//! normal-equation system. A step is accepted only when it strictly lowers
//! the sum of squares, so the cost sequence over accepted iterations is
//! monotone non-increasing.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative reduction of the cost below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative step size below which the iteration is considered converged.
    pub xtol: f64,
    /// Infinity norm of the scaled gradient below which the iteration stops.
    pub gtol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-10,
            gtol: 1e-12,
            fd_step: 1e-7,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostTolerance,
    StepTolerance,
    GradientTolerance,
    IterationBudget,
    /// Damping grew without bound; no descent direction could be found.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    /// Gauss–Newton curvature JᵀJ at the returned point.
    pub curvature: DMatrix<f64>,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        !matches!(
            self.termination,
            Termination::IterationBudget | Termination::Stalled
        )
    }
}

/// Box bounds; `None` entries are unbounded.
#[derive(Debug, Clone, Default)]
pub struct Bounds {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl Bounds {
    pub fn new(lower: Vec<Option<f64>>, upper: Vec<Option<f64>>) -> Self {
        Bounds { lower, upper }
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            if let Some(Some(lo)) = self.lower.get(i) {
                *v = v.max(*lo);
            }
            if let Some(Some(hi)) = self.upper.get(i) {
                *v = v.min(*hi);
            }
        }
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    let s: f64 = r.iter().map(|v| v * v).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

fn evaluate<F>(residuals: &mut F, x: &[f64], out: &mut [f64], evaluations: &mut usize) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    *evaluations += 1;
    if residuals(x, out) {
        sum_sq(out)
    } else {
        f64::INFINITY
    }
}

#[allow(clippy::too_many_arguments)]
fn fd_jacobian<F>(
    residuals: &mut F,
    x: &[f64],
    r: &[f64],
    bounds: &Bounds,
    fd_step: f64,
    jac: &mut DMatrix<f64>,
    scratch: &mut [f64],
    evaluations: &mut usize,
) where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = fd_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        bounds.project(&mut xp);
        if xp[j] == x[j] {
            xp[j] = x[j] - h;
            bounds.project(&mut xp);
        }
        let h = xp[j] - x[j];
        let ok = evaluate(residuals, &xp, scratch, evaluations).is_finite();
        for i in 0..r.len() {
            jac[(i, j)] = if ok && h != 0.0 {
                (scratch[i] - r[i]) / h
            } else {
                0.0
            };
        }
        xp[j] = x[j];
    }
}

/// Minimizes Σ rᵢ(x)² starting from `x0`.
///
/// `residuals(x, out)` fills `out` (length `m`) and returns `false` if the
/// point is not evaluable; such points are treated as infinitely bad.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    m: usize,
    x0: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> LmReport
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut r = vec![0.0; m];
    let mut cost = evaluate(&mut residuals, &x, &mut r, &mut evaluations);
    let mut cost_history = vec![cost];
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut scratch = vec![0.0; m];
    let mut trial = vec![0.0; m];

    if !cost.is_finite() {
        return LmReport {
            params: x,
            cost,
            iterations: 0,
            evaluations,
            termination: Termination::Stalled,
            cost_history,
            curvature: DMatrix::zeros(n, n),
        };
    }

    fd_jacobian(&mut residuals, &x, &r, bounds, opts.fd_step, &mut jac, &mut scratch, &mut evaluations);
    let mut lambda = opts.initial_damping;
    let mut nu = 2.0;
    let mut termination = Termination::IterationBudget;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-30)).collect();
        let scaled_grad = (0..n)
            .map(|i| grad[i].abs() / diag[i].sqrt())
            .fold(0.0, f64::max);
        if scaled_grad <= opts.gtol * cost.sqrt().max(1e-300) {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut a = jtj.clone();
        for i in 0..n {
            a[(i, i)] += lambda * diag[i];
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e20 {
                    termination = Termination::Stalled;
                    break;
                }
                continue;
            }
        };

        let mut candidate: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        bounds.project(&mut candidate);
        let actual_step: Vec<f64> = candidate.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_norm = actual_step.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

        let new_cost = evaluate(&mut residuals, &candidate, &mut trial, &mut evaluations);
        let dx = DVector::from_column_slice(&actual_step);
        let predicted = -(2.0 * grad.dot(&dx) + (&jac * &dx).norm_squared());

        if new_cost < cost {
            let rho = if predicted > 0.0 {
                (cost - new_cost) / predicted
            } else {
                1.0
            };
            let rel_drop = (cost - new_cost) / cost.max(1e-300);
            x = candidate;
            std::mem::swap(&mut r, &mut trial);
            cost = new_cost;
            cost_history.push(cost);
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if rel_drop <= opts.ftol {
                termination = Termination::CostTolerance;
                break;
            }
            if step_norm <= opts.xtol * (x_norm + opts.xtol) {
                termination = Termination::StepTolerance;
                break;
            }
            fd_jacobian(&mut residuals, &x, &r, bounds, opts.fd_step, &mut jac, &mut scratch, &mut evaluations);
        } else {
            if step_norm <= opts.xtol * (x_norm + opts.xtol) {
                termination = Termination::StepTolerance;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    let curvature = jac.transpose() * &jac;
    LmReport {
        params: x,
        cost,
        iterations,
        evaluations,
        termination,
        cost_history,
        curvature,
    }
}
