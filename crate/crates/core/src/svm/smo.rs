//! SMO for the C-SVC dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α ≤ C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs use second-order selection from both ends of the
//! violation range. Ties go to the earliest index in a seeded permutation,
//! so flipping every label swaps the roles of the pair and reproduces the
//! same iterates with opposite sign.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// Decision offset: f(x) = Σ αᵢ yᵢ K(xᵢ, x) − rho.
    pub rho: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final m − M violation.
    pub gap: f64,
}

pub(crate) fn solve(
    kernel: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Solution {
    let s = y.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut rank = vec![0; s];
    for (k, &t) in order.iter().enumerate() {
        rank[t] = k;
    }

    let mut alpha = vec![0.0; s];
    let mut grad = vec![-1.0; s];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m {
                i = t;
                m = v;
            }
            if in_low(alpha[t], y[t]) && v < big_m {
                j = t;
                big_m = v;
            }
        }
        gap = m - big_m;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = second_order_pair(
            kernel,
            y,
            &grad,
            &alpha,
            &order,
            &rank,
            (i, m),
            (j, big_m),
            &in_up,
            &in_low,
        );

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = kernel[(i, j)];
        if y[i] != y[j] {
            let quad = positive(kernel[(i, i)] + kernel[(j, j)] - 2.0 * kij);
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
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = positive(kernel[(i, i)] + kernel[(j, j)] - 2.0 * kij);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (yi, yj) = (y[i], y[j]);
        for t in 0..s {
            grad[t] += y[t] * (yi * kernel[(t, i)] * di + yj * kernel[(t, j)] * dj);
        }
    }

    let rho = offset(&alpha, &grad, y, c);
    Solution {
        alpha,
        rho,
        converged,
        iterations,
        gap,
    }
}

/// Predicted objective decrease b²/a of a step on the pair (p, q).
fn gain(kernel: &DMatrix<f64>, vp: f64, vq: f64, p: usize, q: usize) -> f64 {
    let b = vp - vq;
    b * b / positive(kernel[(p, p)] + kernel[(q, q)] - 2.0 * kernel[(p, q)])
}

/// Second-order working pair. Pairs the maximal violator `i` with the
/// partner of largest predicted gain, does the same from the minimal
/// violator `j`, and keeps the better of the two. Remaining ties go to the
/// pair that appears first in `order`, which keeps the choice independent of
/// which class is labeled positive.
#[allow(clippy::too_many_arguments)]
fn second_order_pair(
    kernel: &DMatrix<f64>,
    y: &[f64],
    grad: &[f64],
    alpha: &[f64],
    order: &[usize],
    rank: &[usize],
    (i, m): (usize, f64),
    (j, big_m): (usize, f64),
    in_up: &impl Fn(f64, f64) -> bool,
    in_low: &impl Fn(f64, f64) -> bool,
) -> (usize, usize) {
    let v = |t: usize| -y[t] * grad[t];
    let (mut q, mut gain_q) = (j, gain(kernel, m, big_m, i, j));
    let (mut p, mut gain_p) = (i, gain_q);
    for &t in order {
        let vt = v(t);
        if in_low(alpha[t], y[t]) && vt < m {
            let g = gain(kernel, m, vt, i, t);
            if g > gain_q {
                (q, gain_q) = (t, g);
            }
        }
        if in_up(alpha[t], y[t]) && vt > big_m {
            let g = gain(kernel, vt, big_m, t, j);
            if g > gain_p {
                (p, gain_p) = (t, g);
            }
        }
    }
    let key = |a: usize, b: usize| (rank[a].min(rank[b]), rank[a].max(rank[b]));
    if gain_q > gain_p || (gain_q == gain_p && key(i, q) <= key(p, j)) {
        (i, q)
    } else {
        (p, j)
    }
}

fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}

fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
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
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
