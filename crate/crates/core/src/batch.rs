//! Steps/data trade-off at a fixed target loss, and conversion of raw runs to
//! the critical-batch frame.
//!
//! Every batch quantity is in tokens, so `E = B S` counts tokens processed.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use crate::error::{positive, Error, Result};
use crate::laws::{critical_batch, ScalingConstants};
use crate::numeric::{levenberg_marquardt, lstsq, Damping, LeastSquares};

/// One run reaching the target loss: `steps` updates, `examples` tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParetoPoint {
    pub steps: f64,
    pub examples: f64,
}

/// The `(S/S_min - 1)(E/E_min - 1) = 1` hyperbola at one target loss.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParetoFront {
    pub target_loss: f64,
    pub s_min: f64,
    pub e_min: f64,
    /// `e_min / s_min`, tokens.
    pub b_crit: f64,
}

impl ParetoFront {
    pub fn new(target_loss: f64, s_min: f64, e_min: f64) -> Result<Self> {
        positive("target_loss", target_loss)?;
        positive("s_min", s_min)?;
        positive("e_min", e_min)?;
        Ok(Self {
            target_loss,
            s_min,
            e_min,
            b_crit: e_min / s_min,
        })
    }

    /// Tokens needed when taking `steps` updates.
    pub fn examples_at(&self, steps: f64) -> Result<f64> {
        tradeoff_curve(self.s_min, self.e_min, steps)
    }
}

/// Tokens processed when reaching the front's loss in `steps` updates:
/// `E = E_min (1 + 1 / (S/S_min - 1))`.
pub fn tradeoff_curve(s_min: f64, e_min: f64, steps: f64) -> Result<f64> {
    positive("s_min", s_min)?;
    positive("e_min", e_min)?;
    positive("steps", steps)?;
    if steps <= s_min {
        return Err(Error::Infeasible {
            what: "steps",
            value: steps,
            bound: s_min,
        });
    }
    Ok(e_min * steps / (steps - s_min))
}

/// `S_min = S / (1 + B_crit(L) / B)`: steps needed at very large batch.
pub fn steps_to_smin(steps: f64, batch_tokens: f64, loss: f64, k: &ScalingConstants) -> Result<f64> {
    positive("steps", steps)?;
    positive("batch_tokens", batch_tokens)?;
    let b_crit = critical_batch(loss, k)?;
    Ok(steps / (1.0 + b_crit / batch_tokens))
}

/// `C_min = C / (1 + B / B_crit(L))`: compute needed at very small batch.
pub fn compute_to_cmin(compute: f64, batch_tokens: f64, loss: f64, k: &ScalingConstants) -> Result<f64> {
    positive("compute", compute)?;
    positive("batch_tokens", batch_tokens)?;
    let b_crit = critical_batch(loss, k)?;
    Ok(compute / (1.0 + batch_tokens / b_crit))
}

/// Log-space residuals `ln E_i - ln[E_min S_i / (S_i - S_min)]` over
/// `theta = (ln S_min, ln E_min)`.
struct ParetoProblem<'a> {
    points: &'a [ParetoPoint],
    min_steps: f64,
}

impl LeastSquares for ParetoProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, theta: &[f64], out: &mut [f64]) {
        let s_min = theta[0].exp();
        for (r, p) in out.iter_mut().zip(self.points) {
            *r = p.examples.ln() - (theta[1] + p.steps.ln() - (p.steps - s_min).ln());
        }
    }

    fn jacobian(&self, theta: &[f64], out: &mut [f64]) {
        let s_min = theta[0].exp();
        for (i, p) in self.points.iter().enumerate() {
            out[2 * i] = -s_min / (p.steps - s_min);
            out[2 * i + 1] = -1.0;
        }
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta[0].exp() < self.min_steps
    }
}

/// Fits `(S_min, E_min)` to runs that all reached `target_loss`.
///
/// Seeded by the linear form `E S = E S_min + S E_min` solved in least
/// squares, then refined in log space. Two points give exact interpolation.
pub fn pareto_from_runs(points: &[ParetoPoint], target_loss: f64) -> Result<ParetoFront> {
    positive("target_loss", target_loss)?;
    for p in points {
        positive("steps", p.steps)?;
        positive("examples", p.examples)?;
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.steps).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: distinct.len(),
        });
    }
    let min_steps = distinct[0];

    // Columns scaled to unit magnitude keep the seed solve well conditioned.
    let s_scale = min_steps;
    let e_scale = points.iter().fold(0.0_f64, |acc, p| acc.max(p.examples));
    let mut a = Vec::with_capacity(points.len() * 2);
    let mut b = Vec::with_capacity(points.len());
    for p in points {
        let row_scale = 1.0 / (p.examples * p.steps);
        a.push(p.examples * s_scale * row_scale);
        a.push(p.steps * e_scale * row_scale);
        b.push(1.0);
    }
    let seed = lstsq(&a, &b, points.len(), 2)
        .ok_or_else(|| Error::FitFailed(format!("singular seed system at loss {target_loss}")))?;
    let (mut s_seed, mut e_seed) = (seed[0] * s_scale, seed[1] * e_scale);
    if s_seed >= min_steps && e_seed > 0.0 {
        // Noise near the S_min asymptote can push the linear seed past the
        // smallest step count. Restart inside the feasible region with E_min
        // matched to the points in the log-mean.
        s_seed = 0.5 * min_steps;
        let ln_e = points
            .iter()
            .map(|p| (p.examples * (1.0 - s_seed / p.steps)).ln())
            .sum::<f64>()
            / points.len() as f64;
        e_seed = ln_e.exp();
    }
    if !(s_seed > 1e-9 * min_steps && e_seed > 0.0) {
        return Err(Error::FitFailed(format!(
            "points do not bend away from the asymptotes at loss {target_loss} \
             (seed S_min = {s_seed:e}, E_min = {e_seed:e}, smallest S = {min_steps:e})"
        )));
    }

    let problem = ParetoProblem { points, min_steps };
    let solution = levenberg_marquardt(&problem, &[s_seed.ln(), e_seed.ln()], &Damping::default())
        .ok_or_else(|| Error::FitFailed(format!("refinement diverged at loss {target_loss}")))?;
    ParetoFront::new(target_loss, solution.params[0].exp(), solution.params[1].exp())
}
