//! Synthetic training runs drawn from known constants, used to check that
//! every fitter recovers the truth.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RunRecord;
use crate::error::{positive, Result};
use crate::laws::{critical_batch, loss_of_n_d, DataLawConstants, ScalingConstants, StepLawConstants};
use crate::numeric::bisect_increasing;

/// The constants synthetic curves are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTruth {
    /// Supplies `B_crit(L)` for the batch-size correction.
    pub scaling: ScalingConstants,
    pub steps: StepLawConstants,
    /// Finite-data runs plateau at `L(N, D)` from these constants.
    pub data: DataLawConstants,
}

impl SyntheticTruth {
    /// Single-law constants throughout.
    pub fn appendix_a() -> Self {
        let k = ScalingConstants::appendix_a();
        Self {
            scaling: k,
            steps: StepLawConstants::from_scaling(&k),
            data: DataLawConstants::from_scaling(&k),
        }
    }

    /// Single-law batch constants with the two joint fits.
    pub fn published() -> Self {
        Self {
            scaling: ScalingConstants::appendix_a(),
            steps: StepLawConstants::table_3(),
            data: DataLawConstants::table_2(),
        }
    }

    /// Noiseless test loss after `step` updates of `batch_tokens` tokens with
    /// unlimited data. Solves `L = L(N, S / (1 + B_crit(L)/B))` for `L`.
    pub fn curve_loss(&self, n_params: f64, batch_tokens: f64, step: f64) -> f64 {
        let k = &self.scaling;
        let j = &self.steps;
        let converged = (j.n_c / n_params).powf(j.alpha_n);
        let at = |loss: f64| {
            let b_crit = k.b_star / loss.powf(1.0 / k.alpha_b);
            let s_min = step / (1.0 + b_crit / batch_tokens);
            converged + (j.s_c / s_min).powf(j.alpha_s)
        };
        // The right-hand side falls as L rises, so L - rhs(L) is increasing;
        // rhs(converged) bounds the root from above.
        let hi = at(converged);
        bisect_increasing(|l| l - at(l), converged, hi)
    }

    /// `dL / dlog10(step)` of the noiseless unlimited-data curve.
    pub fn curve_slope(&self, n_params: f64, batch_tokens: f64, step: f64) -> f64 {
        let k = &self.scaling;
        let j = &self.steps;
        let loss = self.curve_loss(n_params, batch_tokens, step);
        let tail = loss - (j.n_c / n_params).powf(j.alpha_n);
        let b_crit = critical_batch(loss, k).unwrap_or(f64::INFINITY);
        let q = (b_crit / batch_tokens) / (1.0 + b_crit / batch_tokens);
        let per_log = -j.alpha_s * tail / (1.0 + j.alpha_s * tail * q / (k.alpha_b * loss));
        per_log * core::f64::consts::LN_10
    }
}

/// One synthetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub n_params: f64,
    pub n_layer: u32,
    pub batch_tokens: f64,
    pub dataset_tokens: Option<f64>,
    pub max_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub runs: Vec<RunSpec>,
    /// Log-spaced evaluations per run, from step 1 to `max_steps`.
    pub points_per_run: usize,
    pub warmup_steps: u64,
}

/// Depth of a model with `d_model = 64 n_layer` and `N = 12 n_layer d_model^2`.
fn depth_for(n_params: f64) -> u32 {
    let depth = (n_params / (12.0 * 64.0 * 64.0)).cbrt().round();
    if depth < 1.0 {
        1
    } else {
        depth as u32
    }
}

impl SyntheticDesign {
    /// Every combination of model size, batch size and dataset size.
    pub fn grid(
        model_sizes: &[f64],
        batch_tokens: &[f64],
        dataset_tokens: &[Option<f64>],
        max_steps: u64,
        points_per_run: usize,
        warmup_steps: u64,
    ) -> Self {
        let mut runs = Vec::new();
        for &n in model_sizes {
            for &b in batch_tokens {
                for &d in dataset_tokens {
                    runs.push(RunSpec {
                        n_params: n,
                        n_layer: depth_for(n),
                        batch_tokens: b,
                        dataset_tokens: d,
                        max_steps,
                    });
                }
            }
        }
        Self {
            runs,
            points_per_run,
            warmup_steps,
        }
    }

    /// Distinct integer steps, log-spaced from 1 to `max_steps` inclusive.
    pub fn step_schedule(&self, max_steps: u64) -> Vec<u64> {
        let count = self.points_per_run.max(2);
        let top = (max_steps.max(1) as f64).ln();
        let mut steps: Vec<u64> = (0..count)
            .map(|i| (top * i as f64 / (count - 1) as f64).exp().round() as u64)
            .map(|s| s.clamp(1, max_steps.max(1)))
            .collect();
        steps.dedup();
        steps
    }

    pub fn run_id(index: usize) -> alloc::string::String {
        format!("run-{index:04}")
    }

    /// Whether each run ends with its noiseless loss falling by at most
    /// `tol` nats per decade of steps.
    pub fn convergence_labels(&self, truth: &SyntheticTruth, tol: f64) -> Vec<(alloc::string::String, bool)> {
        self.runs
            .iter()
            .enumerate()
            .map(|(i, run)| {
                let step = run.max_steps as f64;
                let plateaued = run.dataset_tokens.is_some_and(|d| {
                    let floor = loss_of_n_d(run.n_params, d, &truth.data).unwrap_or(0.0);
                    truth.curve_loss(run.n_params, run.batch_tokens, step) <= floor
                });
                let slope = if plateaued {
                    0.0
                } else {
                    truth.curve_slope(run.n_params, run.batch_tokens, step)
                };
                (Self::run_id(i), -slope <= tol)
            })
            .collect()
    }
}

/// Samples learning curves from `truth` with multiplicative log-normal noise
/// of relative size `sigma`. The output depends only on the arguments.
///
/// Unlimited-data runs follow the batch-adjusted learning-curve law. Runs with
/// a dataset size cannot fall below `L(N, D)` and are cut at the minimum of
/// their noisy test loss, as early stopping would.
pub fn generate_synthetic_runs(
    truth: &SyntheticTruth,
    design: &SyntheticDesign,
    sigma: f64,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    truth.scaling.validate()?;
    truth.steps.validate()?;
    truth.data.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(crate::Error::NonPositive {
            what: "sigma",
            value: sigma,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        (sigma * z).exp()
    };

    let mut records = Vec::new();
    for (index, run) in design.runs.iter().enumerate() {
        positive("n_params", run.n_params)?;
        positive("batch_tokens", run.batch_tokens)?;
        let floor = match run.dataset_tokens {
            Some(d) => Some(loss_of_n_d(run.n_params, d, &truth.data)?),
            None => None,
        };
        let run_id = SyntheticDesign::run_id(index);
        let mut curve = Vec::new();
        for step in design.step_schedule(run.max_steps) {
            let clean = truth.curve_loss(run.n_params, run.batch_tokens, step as f64);
            let test_loss = floor.map_or(clean, |f| clean.max(f)) * noise();
            let train_loss = floor.map(|_| clean * noise());
            curve.push(RunRecord {
                run_id: run_id.clone(),
                n_params: run.n_params,
                n_layer: run.n_layer,
                batch_tokens: run.batch_tokens,
                step,
                test_loss,
                train_loss,
                dataset_tokens: run.dataset_tokens,
                warmup_steps: design.warmup_steps,
            });
        }
        if floor.is_some() {
            let best = curve
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, r)| if r.test_loss < acc.1 { (i, r.test_loss) } else { acc })
                .0;
            curve.truncate(best + 1);
        }
        records.extend(curve);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::steps_to_smin;
    use crate::laws::loss_of_n_smin;

    #[test]
    fn curve_satisfies_the_batch_adjusted_law() {
        let truth = SyntheticTruth::published();
        for (n, b, s) in [(1e6, 512.0 * 1024.0, 1e4), (3e8, 2048.0, 250.0), (1e9, 1e8, 3e5)] {
            let l = truth.curve_loss(n, b, s);
            let s_min = steps_to_smin(s, b, l, &truth.scaling).unwrap();
            let expected = loss_of_n_smin(n, s_min, &truth.steps).unwrap();
            assert!(((l - expected) / l).abs() < 1e-14, "{l} vs {expected}");
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let truth = SyntheticTruth::published();
        let (n, b, s) = (1e7, 524288.0, 2e4);
        let h = 1e-4;
        let up = truth.curve_loss(n, b, s * 10f64.powf(h));
        let down = truth.curve_loss(n, b, s * 10f64.powf(-h));
        let fd = (up - down) / (2.0 * h);
        let analytic = truth.curve_slope(n, b, s);
        assert!(((fd - analytic) / analytic).abs() < 1e-6, "{fd} vs {analytic}");
    }

    #[test]
    fn zero_noise_reproduces_the_model() {
        let truth = SyntheticTruth::published();
        let design = SyntheticDesign::grid(&[1e6, 1e8], &[524288.0], &[None], 10_000, 10, 0);
        let runs = generate_synthetic_runs(&truth, &design, 0.0, 1).unwrap();
        assert_eq!(runs.len(), 20);
        for r in &runs {
            assert_eq!(r.test_loss, truth.curve_loss(r.n_params, r.batch_tokens, r.step as f64));
        }
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let truth = SyntheticTruth::published();
        let design = SyntheticDesign::grid(&[1e6], &[1e5, 1e6], &[None, Some(1e8)], 50_000, 30, 10);
        let a = generate_synthetic_runs(&truth, &design, 0.02, 42).unwrap();
        let b = generate_synthetic_runs(&truth, &design, 0.02, 42).unwrap();
        let c = generate_synthetic_runs(&truth, &design, 0.02, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn finite_data_runs_stop_at_their_best_loss() {
        let truth = SyntheticTruth::published();
        let design = SyntheticDesign::grid(&[1e8], &[524288.0], &[Some(1e8)], 1_000_000, 40, 0);
        let runs = generate_synthetic_runs(&truth, &design, 0.0, 0).unwrap();
        let floor = loss_of_n_d(1e8, 1e8, &truth.data).unwrap();
        let last = runs.last().unwrap();
        assert_eq!(last.test_loss, floor);
        assert!(runs[..runs.len() - 1].iter().all(|r| r.test_loss > floor));
    }

    #[test]
    fn schedule_is_log_spaced_and_distinct() {
        let design = SyntheticDesign::grid(&[1e6], &[1.0], &[None], 1000, 10, 0);
        let steps = design.step_schedule(1000);
        assert_eq!(steps.first(), Some(&1));
        assert_eq!(steps.last(), Some(&1000));
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }
}
