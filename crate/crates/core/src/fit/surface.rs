//! Four-parameter fits of `L(N, D)` and `L(N, S_min)`.
//!
//! Parameters are fitted as logarithms, so every constant stays positive.
//! For fixed exponents both surfaces are linear in their two scale terms
//! (after raising the loss to `1/alpha_D` for `L(N, D)`), which turns each
//! grid point of exponents into a complete starting guess.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use super::{check_positive_points, count_distinct, FitResult, LawId};
use crate::error::{Error, Result};
use crate::numeric::{levenberg_marquardt, lstsq, Damping, LeastSquares, Solution};

const SEED_GRID: usize = 12;
const SEED_MIN: f64 = 0.02;
const SEED_MAX: f64 = 1.0;
/// Number of best-ranked seeds handed to the refinement.
const REFINED_SEEDS: usize = 4;

fn seed_exponents() -> impl Iterator<Item = f64> + Clone {
    let ratio = (SEED_MAX / SEED_MIN).ln() / (SEED_GRID - 1) as f64;
    (0..SEED_GRID).map(move |i| SEED_MIN * (ratio * i as f64).exp())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.ln(), n + 1));
    (sum / n as f64).exp()
}

/// Shared shape of both surfaces: three coordinates per point, log model.
trait Surface {
    fn points(&self) -> &[(f64, f64, f64)];
    fn log_model(&self, theta: &[f64], point: (f64, f64, f64)) -> f64;
    fn gradient(&self, theta: &[f64], point: (f64, f64, f64), out: &mut [f64]);
}

struct Problem<'a, S: Surface>(&'a S);

impl<S: Surface> LeastSquares for Problem<'_, S> {
    fn n_params(&self) -> usize {
        4
    }

    fn n_residuals(&self) -> usize {
        self.0.points().len()
    }

    fn residuals(&self, theta: &[f64], out: &mut [f64]) {
        for (r, p) in out.iter_mut().zip(self.0.points()) {
            *r = self.0.log_model(theta, *p) - p.2.ln();
        }
    }

    fn jacobian(&self, theta: &[f64], out: &mut [f64]) {
        for (row, p) in out.chunks_exact_mut(4).zip(self.0.points()) {
            self.0.gradient(theta, *p, row);
        }
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        // exponents between 1e-6 and 1e3
        theta[..2].iter().all(|t| (-13.8..6.9).contains(t))
    }
}

fn seed_rss<S: Surface>(surface: &S, theta: &[f64]) -> f64 {
    let rss: f64 = surface
        .points()
        .iter()
        .map(|p| {
            let r = surface.log_model(theta, *p) - p.2.ln();
            r * r
        })
        .sum();
    if rss.is_finite() {
        rss
    } else {
        f64::INFINITY
    }
}

/// Ranks the seeds, refines the best few and returns the lowest-RSS solution.
fn refine<S: Surface>(surface: &S, seeds: Vec<[f64; 4]>) -> Result<Solution> {
    let mut ranked: Vec<(f64, [f64; 4])> = seeds
        .into_iter()
        .map(|theta| (seed_rss(surface, &theta), theta))
        .filter(|(rss, _)| rss.is_finite())
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    if ranked.is_empty() {
        return Err(Error::FitFailed(String::from("no usable starting point on the exponent grid")));
    }

    let problem = Problem(surface);
    let damping = Damping::default();
    let mut best: Option<Solution> = None;
    for (_, theta) in ranked.iter().take(REFINED_SEEDS) {
        if let Some(sol) = levenberg_marquardt(&problem, theta, &damping) {
            if best.as_ref().is_none_or(|b| sol.rss < b.rss) {
                best = Some(sol);
            }
        }
    }
    best.ok_or_else(|| Error::FitFailed(String::from("refinement failed from every seed")))
}

fn validate(points: &[(f64, f64, f64)], second: &str) -> Result<()> {
    check_positive_points(points.iter().flat_map(|p| [p.0, p.1, p.2]))?;
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    if count_distinct(points.iter().map(|p| p.0)) < 2 {
        return Err(Error::Degenerate(String::from("every point has the same N")));
    }
    if count_distinct(points.iter().map(|p| p.1)) < 2 {
        return Err(Error::Degenerate(format!("every point has the same {second}")));
    }
    Ok(())
}

/// `theta = (ln alpha_N, ln alpha_D, ln N_c, ln D_c)`.
struct DataSurface<'a> {
    points: &'a [(f64, f64, f64)],
}

impl Surface for DataSurface<'_> {
    fn points(&self) -> &[(f64, f64, f64)] {
        self.points
    }

    fn log_model(&self, theta: &[f64], (n, d, _): (f64, f64, f64)) -> f64 {
        let (alpha_n, alpha_d) = (theta[0].exp(), theta[1].exp());
        let a = alpha_n / alpha_d * (theta[2] - n.ln());
        let b = theta[3] - d.ln();
        alpha_d * log_add_exp(a, b)
    }

    fn gradient(&self, theta: &[f64], (n, d, _): (f64, f64, f64), out: &mut [f64]) {
        let (alpha_n, alpha_d) = (theta[0].exp(), theta[1].exp());
        let log_ratio_n = theta[2] - n.ln();
        let a = alpha_n / alpha_d * log_ratio_n;
        let b = theta[3] - d.ln();
        let log_s = log_add_exp(a, b);
        let u = (a - log_s).exp();
        let v = (b - log_s).exp();
        out[0] = alpha_n * log_ratio_n * u;
        out[1] = alpha_d * log_s - alpha_n * log_ratio_n * u;
        out[2] = alpha_n * u;
        out[3] = alpha_d * v;
    }
}

/// Fits `L(N, D) = [(N_c/N)^(alpha_N/alpha_D) + D_c/D]^alpha_D` to `(N, D, L)` points.
pub fn fit_loss_nd(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    validate(points, "D")?;
    let n_ref = geometric_mean(points.iter().map(|p| p.0));
    let d_ref = geometric_mean(points.iter().map(|p| p.1));

    let mut seeds = Vec::new();
    for alpha_n in seed_exponents() {
        for alpha_d in seed_exponents() {
            let ratio = alpha_n / alpha_d;
            // L^(1/alpha_D) = A (N/N_ref)^(-ratio) + B (D_ref/D)
            let mut a = Vec::with_capacity(points.len() * 2);
            let mut y = Vec::with_capacity(points.len());
            for &(n, d, l) in points {
                a.push((n / n_ref).powf(-ratio));
                a.push(d_ref / d);
                y.push(l.powf(1.0 / alpha_d));
            }
            let Some(coef) = lstsq(&a, &y, points.len(), 2) else {
                continue;
            };
            let floor = 1e-8 * y.iter().sum::<f64>() / y.len() as f64;
            let (ca, cb) = (coef[0].max(floor), coef[1].max(floor));
            seeds.push([
                alpha_n.ln(),
                alpha_d.ln(),
                ca.ln() / ratio + n_ref.ln(),
                cb.ln() + d_ref.ln(),
            ]);
        }
    }

    let surface = DataSurface { points };
    let sol = refine(&surface, seeds)?;
    let theta = &sol.params;
    let residuals = points
        .iter()
        .map(|p| surface.log_model(theta, *p) - p.2.ln())
        .collect();
    Ok(FitResult::new(
        LawId::LossOfNAndD,
        &[
            ("alpha_N", theta[0].exp()),
            ("alpha_D", theta[1].exp()),
            ("N_c", theta[2].exp()),
            ("D_c", theta[3].exp()),
        ],
        residuals,
    ))
}

/// `theta = (ln alpha_N, ln alpha_S, ln N_c, ln S_c)`.
struct StepSurface<'a> {
    points: &'a [(f64, f64, f64)],
}

impl Surface for StepSurface<'_> {
    fn points(&self) -> &[(f64, f64, f64)] {
        self.points
    }

    fn log_model(&self, theta: &[f64], (n, s, _): (f64, f64, f64)) -> f64 {
        let a = theta[0].exp() * (theta[2] - n.ln());
        let b = theta[1].exp() * (theta[3] - s.ln());
        log_add_exp(a, b)
    }

    fn gradient(&self, theta: &[f64], (n, s, _): (f64, f64, f64), out: &mut [f64]) {
        let (alpha_n, alpha_s) = (theta[0].exp(), theta[1].exp());
        let log_ratio_n = theta[2] - n.ln();
        let log_ratio_s = theta[3] - s.ln();
        let a = alpha_n * log_ratio_n;
        let b = alpha_s * log_ratio_s;
        let log_m = log_add_exp(a, b);
        let u = (a - log_m).exp();
        let w = (b - log_m).exp();
        out[0] = alpha_n * log_ratio_n * u;
        out[1] = alpha_s * log_ratio_s * w;
        out[2] = alpha_n * u;
        out[3] = alpha_s * w;
    }
}

/// Fits `L(N, S_min) = (N_c/N)^alpha_N + (S_c/S_min)^alpha_S` to
/// `(N, S_min, L)` points. Steps must already be batch-adjusted.
pub fn fit_loss_ns(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    validate(points, "S_min")?;
    let n_ref = geometric_mean(points.iter().map(|p| p.0));
    let s_ref = geometric_mean(points.iter().map(|p| p.1));

    let mut seeds = Vec::new();
    for alpha_n in seed_exponents() {
        for alpha_s in seed_exponents() {
            // L = A (N/N_ref)^(-alpha_N) + B (S/S_ref)^(-alpha_S)
            let mut a = Vec::with_capacity(points.len() * 2);
            let mut y = Vec::with_capacity(points.len());
            for &(n, s, l) in points {
                a.push((n / n_ref).powf(-alpha_n));
                a.push((s / s_ref).powf(-alpha_s));
                y.push(l);
            }
            let Some(coef) = lstsq(&a, &y, points.len(), 2) else {
                continue;
            };
            let floor = 1e-8 * y.iter().sum::<f64>() / y.len() as f64;
            let (ca, cb) = (coef[0].max(floor), coef[1].max(floor));
            seeds.push([
                alpha_n.ln(),
                alpha_s.ln(),
                ca.ln() / alpha_n + n_ref.ln(),
                cb.ln() / alpha_s + s_ref.ln(),
            ]);
        }
    }

    let surface = StepSurface { points };
    let sol = refine(&surface, seeds)?;
    let theta = &sol.params;
    let residuals = points
        .iter()
        .map(|p| surface.log_model(theta, *p) - p.2.ln())
        .collect();
    Ok(FitResult::new(
        LawId::LossOfNAndSmin,
        &[
            ("alpha_N", theta[0].exp()),
            ("alpha_S", theta[1].exp()),
            ("N_c", theta[2].exp()),
            ("S_c", theta[3].exp()),
        ],
        residuals,
    ))
}
