//! Small dense numerics shared by the fitters and the frontier oracle.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

/// Solves `min ||a x - b||` for a row-major `m x n` matrix with `m >= n`
/// using Householder QR. Returns `None` when `a` is numerically rank deficient.
pub(crate) fn lstsq(a: &[f64], b: &[f64], m: usize, n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), m);
    if m < n {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let mut diag = vec![0.0; n];
    let col_scale: f64 = a.iter().fold(0.0, |acc, v| acc.max(v.abs()));
    if col_scale == 0.0 || !col_scale.is_finite() {
        return None;
    }

    for k in 0..n {
        let mut norm = 0.0;
        for i in k..m {
            norm += a[i * n + k] * a[i * n + k];
        }
        let norm = norm.sqrt();
        if norm <= f64::EPSILON * col_scale * (m as f64) {
            return None;
        }
        let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in column k
        a[k * n + k] -= alpha;
        let mut vnorm2 = 0.0;
        for i in k..m {
            vnorm2 += a[i * n + k] * a[i * n + k];
        }
        if vnorm2 > 0.0 {
            for j in (k + 1)..n {
                let mut dot = 0.0;
                for i in k..m {
                    dot += a[i * n + k] * a[i * n + j];
                }
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    a[i * n + j] -= f * a[i * n + k];
                }
            }
            let mut dot = 0.0;
            for i in k..m {
                dot += a[i * n + k] * b[i];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                b[i] -= f * a[i * n + k];
            }
        }
        diag[k] = alpha;
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in (k + 1)..n {
            s -= a[k * n + j] * x[j];
        }
        x[k] = s / diag[k];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// A nonlinear least-squares problem in `n_params` unknowns.
pub(crate) trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Row-major `n_residuals x n_params`.
    fn jacobian(&self, params: &[f64], out: &mut [f64]);
    fn feasible(&self, _params: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    pub rss: f64,
}

pub(crate) struct Damping {
    /// Stop once an accepted step improves the RSS by less than this fraction.
    pub rel_rss_tol: f64,
    pub max_iterations: usize,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            rel_rss_tol: 1e-10,
            max_iterations: 500,
        }
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Levenberg-Marquardt: Gauss-Newton steps damped by `lambda * diag(J^T J)`,
/// each solved as an augmented least-squares problem by QR.
pub(crate) fn levenberg_marquardt<P: LeastSquares>(
    problem: &P,
    start: &[f64],
    damping: &Damping,
) -> Option<Solution> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if !problem.feasible(start) {
        return None;
    }
    let mut params = start.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&params, &mut r);
    let mut rss = sum_sq(&r);
    if !rss.is_finite() {
        return None;
    }

    let mut jac = vec![0.0; m * n];
    let mut aug = vec![0.0; (m + n) * n];
    let mut rhs = vec![0.0; m + n];
    let mut r_new = vec![0.0; m];
    let mut trial = vec![0.0; n];
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < damping.max_iterations {
        iterations += 1;
        problem.jacobian(&params, &mut jac);
        let mut scale = vec![0.0; n];
        for row in 0..m {
            for (col, s) in scale.iter_mut().enumerate() {
                *s += jac[row * n + col] * jac[row * n + col];
            }
        }
        for s in scale.iter_mut() {
            *s = s.max(1e-300);
        }

        let mut accepted = None;
        while lambda < 1e20 {
            aug[..m * n].copy_from_slice(&jac);
            aug[m * n..].iter_mut().for_each(|v| *v = 0.0);
            for (col, s) in scale.iter().enumerate() {
                aug[(m + col) * n + col] = (lambda * s).sqrt();
            }
            for (dst, src) in rhs.iter_mut().zip(r.iter()) {
                *dst = -src;
            }
            rhs[m..].iter_mut().for_each(|v| *v = 0.0);

            let Some(step) = lstsq(&aug, &rhs, m + n, n) else {
                lambda *= 10.0;
                continue;
            };
            for i in 0..n {
                trial[i] = params[i] + step[i];
            }
            if !trial.iter().all(|v| v.is_finite()) || !problem.feasible(&trial) {
                lambda *= 10.0;
                continue;
            }
            problem.residuals(&trial, &mut r_new);
            let rss_new = sum_sq(&r_new);
            if rss_new.is_finite() && rss_new <= rss {
                let tiny_step = step
                    .iter()
                    .zip(params.iter())
                    .all(|(s, p)| s.abs() <= 1e-15 * p.abs().max(1e-15));
                accepted = Some((rss_new, tiny_step));
                break;
            }
            lambda *= 10.0;
        }

        let Some((rss_new, tiny_step)) = accepted else {
            // no downhill step at any damping: a stationary point
            break;
        };
        let improvement = (rss - rss_new) / rss.max(f64::MIN_POSITIVE);
        params.copy_from_slice(&trial);
        core::mem::swap(&mut r, &mut r_new);
        rss = rss_new;
        lambda = (lambda * 0.1).max(1e-15);
        if improvement < damping.rel_rss_tol || tiny_step || rss <= 1e-32 * m as f64 {
            break;
        }
    }

    Some(Solution {
        params,
        rss,
    })
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= 4.0 * f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Bisection for a root of an increasing `f` with `f(lo) <= 0 <= f(hi)`.
pub(crate) fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
