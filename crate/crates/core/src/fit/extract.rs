//! Turning run logs into the point sets each fitter consumes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use super::RunRecord;
use crate::batch::{steps_to_smin, ParetoPoint};
use crate::error::Result;
use crate::laws::ScalingConstants;

fn by_run(records: &[RunRecord]) -> BTreeMap<&str, Vec<&RunRecord>> {
    let mut runs: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        runs.entry(r.run_id.as_str()).or_default().push(r);
    }
    for curve in runs.values_mut() {
        curve.sort_by_key(|r| r.step);
    }
    runs
}

/// `(N, L)` at the last logged step of each run, ordered by run id.
pub fn final_loss_points(records: &[RunRecord]) -> Vec<(f64, f64)> {
    by_run(records)
        .values()
        .filter_map(|curve| curve.last().map(|r| (r.n_params, r.test_loss)))
        .collect()
}

/// `(N, D, L)` with `L` the lowest test loss of each finite-data run.
pub fn early_stopped_points(records: &[RunRecord]) -> Vec<(f64, f64, f64)> {
    by_run(records)
        .values()
        .filter_map(|curve| {
            let d = curve.first()?.dataset_tokens?;
            let best = curve.iter().map(|r| r.test_loss).fold(f64::INFINITY, f64::min);
            Some((curve[0].n_params, d, best))
        })
        .collect()
}

/// `(N, S_min, L)` for every record, with steps converted to the
/// large-batch frame using the critical batch at the record's own loss.
pub fn learning_curve_points(records: &[RunRecord], k: &ScalingConstants) -> Result<Vec<(f64, f64, f64)>> {
    records
        .iter()
        .map(|r| {
            let s_min = steps_to_smin(r.step as f64, r.batch_tokens, r.test_loss, k)?;
            Ok((r.n_params, s_min, r.test_loss))
        })
        .collect()
}

/// Steps and tokens at which each run of model size `n_params` first reaches
/// `target_loss`, interpolating linearly in `ln(step)` between logged points.
/// Runs that never reach the target, or start below it, are skipped.
pub fn pareto_points(records: &[RunRecord], n_params: f64, target_loss: f64) -> Vec<ParetoPoint> {
    let mut out = Vec::new();
    for curve in by_run(records).values() {
        let Some(first) = curve.first() else { continue };
        if ((first.n_params - n_params) / n_params).abs() > 1e-9 {
            continue;
        }
        let Some(hit) = curve.iter().position(|r| r.test_loss <= target_loss) else {
            continue;
        };
        if hit == 0 {
            continue;
        }
        let (before, after) = (curve[hit - 1], curve[hit]);
        let (s0, s1) = ((before.step as f64).ln(), (after.step as f64).ln());
        let t = (before.test_loss - target_loss) / (before.test_loss - after.test_loss);
        let steps = (s0 + t * (s1 - s0)).exp();
        out.push(ParetoPoint {
            steps,
            examples: steps * after.batch_tokens,
        });
    }
    out
}
