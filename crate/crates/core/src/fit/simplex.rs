//! Nelder–Mead downhill simplex on an unconstrained objective. Infeasible
//! points are expected to evaluate to +∞.

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after every iteration.
    pub history: Vec<f64>,
}

pub(crate) struct SimplexSettings {
    pub max_iterations: usize,
    /// Relative spread of vertex values at which the simplex is collapsed.
    pub value_tolerance: f64,
    /// Relative vertex spread in parameter space at which it is collapsed.
    pub size_tolerance: f64,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub(crate) fn minimize<F>(
    mut objective: F,
    start: &[f64],
    steps: &[f64],
    settings: &SimplexSettings,
) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        // stable sort keeps ties in insertion order, so runs are reproducible
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        vertices = order.iter().map(|i| vertices[*i].clone()).collect();
        values = order.iter().map(|i| values[*i]).collect();

        let best = values[0];
        let worst = values[n];
        if collapsed(&vertices, &values, settings) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| vertices[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(REFLECT);
        let f_r = eval(&reflected, &mut evaluations);
        if f_r < best {
            let expanded = along(EXPAND);
            let f_e = eval(&expanded, &mut evaluations);
            if f_e < f_r {
                vertices[n] = expanded;
                values[n] = f_e;
            } else {
                vertices[n] = reflected;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_r;
        } else {
            let (point, f_c) = if f_r < worst {
                let p = along(CONTRACT);
                let f = eval(&p, &mut evaluations);
                (p, f)
            } else {
                let p = along(-CONTRACT);
                let f = eval(&p, &mut evaluations);
                (p, f)
            };
            if f_c < worst.min(f_r) {
                vertices[n] = point;
                values[n] = f_c;
            } else {
                let anchor = vertices[0].clone();
                for i in 1..=n {
                    for k in 0..n {
                        vertices[i][k] = anchor[k] + SHRINK * (vertices[i][k] - anchor[k]);
                    }
                    values[i] = eval(&vertices[i], &mut evaluations);
                }
            }
        }
        let current = values.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(current);
    }

    let (idx, value) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex has vertices");
    SimplexOutcome {
        best: vertices[idx].clone(),
        value,
        iterations,
        evaluations,
        converged,
        history,
    }
}

fn collapsed(vertices: &[Vec<f64>], values: &[f64], settings: &SimplexSettings) -> bool {
    let best = values[0];
    let worst = values[values.len() - 1];
    if !best.is_finite() {
        return false;
    }
    if worst.is_finite() && (worst - best).abs() <= settings.value_tolerance * best.abs() {
        return true;
    }
    let anchor = &vertices[0];
    vertices[1..].iter().all(|v| {
        v.iter()
            .zip(anchor)
            .all(|(x, a)| (x - a).abs() <= settings.size_tolerance * (1.0 + a.abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SimplexSettings {
        SimplexSettings {
            max_iterations: 5000,
            value_tolerance: 1e-14,
            size_tolerance: 1e-12,
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(rosen, &[-1.2, 1.0], &[0.1, 0.1], &settings());
        assert!(out.converged);
        assert!((out.best[0] - 1.0).abs() < 1e-5 && (out.best[1] - 1.0).abs() < 1e-5);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_infeasible_region() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 0.2).powi(2)
            }
        };
        let out = minimize(f, &[2.0], &[0.3], &settings());
        assert!(out.best[0] >= 0.5);
        assert!((out.best[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn reports_iteration_cap() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let capped = SimplexSettings {
            max_iterations: 3,
            ..settings()
        };
        let out = minimize(f, &[1.0, 1.0, 1.0], &[0.5, 0.5, 0.5], &capped);
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }
}
