//! Levenberg–Marquardt polish with a central-difference Jacobian. Only
//! steps that lower the sum of squares are accepted.

use nalgebra::{DMatrix, DVector};

pub(crate) struct RefineOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

const MAX_ITERATIONS: usize = 200;
const RELATIVE_STOP: f64 = 1e-14;
const FD_STEP: f64 = 1e-6;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `residuals` returns `None` for infeasible points.
pub(crate) fn refine<F>(mut residuals: F, start: &[f64]) -> Option<RefineOutcome>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = start.len();
    let mut x = start.to_vec();
    let mut r = residuals(&x)?;
    let mut value = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && value > 0.0 {
        iterations += 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let h = FD_STEP * x[k].abs().max(1.0);
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            let (rp, rm, width) = match (residuals(&plus), residuals(&minus)) {
                (Some(a), Some(b)) => (a, b, 2.0 * h),
                // one-sided at the edge of the feasible region
                (Some(a), None) => (a, r.clone(), h),
                (None, Some(b)) => (r.clone(), b, h),
                (None, None) => return finish(x, value, iterations, history),
            };
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / width;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_vec(r.clone());

        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match residuals(&trial) {
                Some(rt) if sum_sq(&rt) < value => {
                    let new_value = sum_sq(&rt);
                    let gain = (value - new_value) / value;
                    x = trial;
                    r = rt;
                    value = new_value;
                    history.push(value);
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if gain < RELATIVE_STOP {
                        return finish(x, value, iterations, history);
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    finish(x, value, iterations, history)
}

fn finish(
    best: Vec<f64>,
    value: f64,
    iterations: usize,
    history: Vec<f64>,
) -> Option<RefineOutcome> {
    Some(RefineOutcome {
        best,
        value,
        iterations,
        history,
    })
}
