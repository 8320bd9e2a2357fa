//! Levenberg–Marquardt least squares with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged once an accepted step changes the parameters by less than
    /// this, relative to their magnitude.
    pub x_tol: f64,
    /// Converged once the sum of squares drops below this.
    pub cost_floor: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, x_tol: 1e-8, cost_floor: 1e-28, fd_step: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `Σ r_i(x)²`. `residuals` fills its output slice (length `m`) and
/// returns `false` when `x` is outside the model's valid region.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], m: usize, opts: LmOptions) -> LmReport
where
    F: Fn(&[f64], &mut [f64]) -> bool,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    if !residuals(&x, &mut r) || r.iter().any(|v| !v.is_finite()) {
        return LmReport { x, cost: f64::INFINITY, iterations: 0, converged: false };
    }
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut r_plus = vec![0.0; m];
    let mut r_minus = vec![0.0; m];

    for iter in 1..=opts.max_iter {
        if cost <= opts.cost_floor {
            return LmReport { x, cost, iterations: iter - 1, converged: true };
        }
        // Central-difference Jacobian.
        for j in 0..n {
            let h = opts.fd_step * x[j].abs().max(1e-3);
            trial.copy_from_slice(&x);
            trial[j] = x[j] + h;
            let ok_p = residuals(&trial, &mut r_plus);
            trial[j] = x[j] - h;
            let ok_m = residuals(&trial, &mut r_minus);
            for i in 0..m {
                jac[(i, j)] = match (ok_p, ok_m) {
                    (true, true) => (r_plus[i] - r_minus[i]) / (2.0 * h),
                    (true, false) => (r_plus[i] - r[i]) / h,
                    (false, true) => (r[i] - r_minus[i]) / h,
                    (false, false) => 0.0,
                };
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let diag_max = (0..n).map(|k| jtj[(k, k)]).fold(0.0f64, f64::max).max(1e-300);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-9 * diag_max);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => match a.lu().solve(&(-&jtr)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            for k in 0..n {
                trial[k] = x[k] + step[k];
            }
            if residuals(&trial, &mut r_trial) && r_trial.iter().all(|v| v.is_finite()) {
                let c = sum_sq(&r_trial);
                if c < cost {
                    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let small_step = step.norm() <= opts.x_tol * (x_norm + opts.x_tol);
                    x.copy_from_slice(&trial);
                    r.copy_from_slice(&r_trial);
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if small_step {
                        return LmReport { x, cost, iterations: iter, converged: true };
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision: a stationary point.
            return LmReport { x, cost, iterations: iter, converged: true };
        }
    }
    LmReport { x, cost, iterations: opts.max_iter, converged: false }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}
