//! Sequential minimal optimization with second-order working-set selection
//! and a separate upper bound per example.
//!
//! Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a_i <= c_i`, where
//! `Q_ij = y_i y_j K_ij`.

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset: decision values are `sum_i a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Solve the dual for a row-major `n x n` kernel matrix.
pub fn solve(kernel: &[f64], y: &[f64], c: &[f64], eps: f64, max_iterations: usize) -> DualSolution {
    let n = y.len();
    debug_assert_eq!(kernel.len(), n * n);
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let is_upper = |a: f64, i: usize| a >= c[i];
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    while iterations < max_iterations {
        // i: maximal violator among I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t], t) } else { !is_lower(alpha[t]) };
            if in_up && (-y[t] * grad[t] > gmax || sel_i == usize::MAX) {
                gmax = -y[t] * grad[t];
                sel_i = t;
            }
        }
        if sel_i == usize::MAX {
            break;
        }
        let i = sel_i;

        // j: second-order choice among I_low
        let mut gmin = f64::INFINITY;
        let mut sel_j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t], t) };
            if !in_low {
                continue;
            }
            let yg = -y[t] * grad[t];
            gmin = gmin.min(yg);
            let b = gmax - yg;
            if b > 0.0 {
                let mut a = kernel[i * n + i] + kernel[t * n + t] - 2.0 * kernel[i * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    sel_j = t;
                }
            }
        }
        if gmax - gmin < eps || sel_j == usize::MAX {
            break;
        }
        let j = sel_j;
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let mut quad = kernel[i * n + i] + kernel[j * n + j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = kernel[i * n + i] + kernel[j * n + j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    DualSolution { alpha, rho, objective, iterations }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut nr_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    if nr_free > 0 {
        sum_free / nr_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_solution() {
        // K = [[1, k], [k, 1]], y = (+1, -1): a1 = a2 = 2 / (2 - 2k)
        let k = 0.25;
        let kernel = [1.0, k, k, 1.0];
        let sol = solve(&kernel, &[1.0, -1.0], &[10.0, 10.0], 1e-10, 1000);
        let expect = 1.0 / (1.0 - k);
        assert!((sol.alpha[0] - expect).abs() < 1e-9);
        assert!((sol.alpha[1] - expect).abs() < 1e-9);
        assert!(sol.rho.abs() < 1e-9);
        assert!((sol.objective + expect).abs() < 1e-9);
    }

    #[test]
    fn box_constraint_binds() {
        let kernel = [1.0, 0.9, 0.9, 1.0];
        let sol = solve(&kernel, &[1.0, -1.0], &[0.5, 0.5], 1e-10, 1000);
        assert_eq!(sol.alpha, vec![0.5, 0.5]);
    }
}
