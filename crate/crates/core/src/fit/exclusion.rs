use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use super::{ExcludedCount, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExclusionReason {
    /// One-layer models sit off the trend.
    SingleLayer,
    /// Loss still falling at the end of the run.
    NotConverged,
    /// Step inside the learning-rate warmup.
    Warmup,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::SingleLayer => "single_layer",
            ExclusionReason::NotConverged => "not_converged",
            ExclusionReason::Warmup => "warmup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionPolicy {
    pub drop_single_layer: bool,
    pub drop_unconverged: bool,
    /// Largest tolerated loss decrease over the last decile of a run, in
    /// nats per decade of steps.
    pub convergence_tol: f64,
    pub drop_warmup: bool,
}

impl ExclusionPolicy {
    pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;

    pub fn none() -> Self {
        Self {
            drop_single_layer: false,
            drop_unconverged: false,
            convergence_tol: Self::DEFAULT_CONVERGENCE_TOL,
            drop_warmup: false,
        }
    }

    /// Converged-loss fits `L(N)`: no one-layer models, no runs still improving.
    pub fn loss_of_n() -> Self {
        Self {
            drop_single_layer: true,
            drop_unconverged: true,
            ..Self::none()
        }
    }

    /// Compute-trend fits `L(C)`: no one-layer models.
    pub fn loss_of_c() -> Self {
        Self {
            drop_single_layer: true,
            ..Self::none()
        }
    }

    /// Learning-curve fits `L(N, S_min)`: every step after warmup.
    pub fn learning_curves() -> Self {
        Self {
            drop_warmup: true,
            ..Self::none()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Exclusions {
    pub kept: Vec<RunRecord>,
    pub excluded: Vec<(RunRecord, ExclusionReason)>,
    pub diagnostics: Vec<String>,
}

impl Exclusions {
    pub fn counts(&self) -> Vec<ExcludedCount> {
        let mut counts: BTreeMap<ExclusionReason, usize> = BTreeMap::new();
        for (_, reason) in &self.excluded {
            *counts.entry(*reason).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(reason, count)| ExcludedCount { reason, count })
            .collect()
    }
}

/// Least-squares slope of loss against `log10(step)` over the last tenth of
/// the points (at least two). `points` must be sorted by step.
pub fn last_decile_slope(points: &[(u64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let take = points.len().div_ceil(10).max(2);
    let tail = &points[points.len() - take..];
    let xs: Vec<f64> = tail.iter().map(|(s, _)| (*s as f64).log10()).collect();
    let mx = xs.iter().sum::<f64>() / take as f64;
    let my = tail.iter().map(|(_, l)| l).sum::<f64>() / take as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, (_, y)) in xs.iter().zip(tail) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx > 0.0 {
        Some(sxy / sxx)
    } else {
        None
    }
}

pub fn apply_exclusions(records: &[RunRecord], policy: &ExclusionPolicy) -> Exclusions {
    let mut out = Exclusions::default();

    let mut unconverged: BTreeMap<&str, bool> = BTreeMap::new();
    if policy.drop_unconverged {
        let mut runs: BTreeMap<&str, Vec<(u64, f64)>> = BTreeMap::new();
        for r in records {
            runs.entry(r.run_id.as_str()).or_default().push((r.step, r.test_loss));
        }
        for (run_id, mut curve) in runs {
            curve.sort_by_key(|(step, _)| *step);
            match last_decile_slope(&curve) {
                Some(slope) => {
                    unconverged.insert(run_id, -slope > policy.convergence_tol);
                }
                None => out
                    .diagnostics
                    .push(format!("run {run_id}: too few steps to judge convergence, kept")),
            }
        }
    }

    for r in records {
        let reason = if policy.drop_single_layer && r.n_layer == 1 {
            Some(ExclusionReason::SingleLayer)
        } else if unconverged.get(r.run_id.as_str()).copied().unwrap_or(false) {
            Some(ExclusionReason::NotConverged)
        } else if policy.drop_warmup && r.step <= r.warmup_steps {
            Some(ExclusionReason::Warmup)
        } else {
            None
        };
        match reason {
            Some(reason) => out.excluded.push((r.clone(), reason)),
            None => out.kept.push(r.clone()),
        }
    }

    if out.kept.is_empty() && !records.is_empty() {
        out.diagnostics
            .push(String::from("every record was excluded; no fit is possible"));
    }
    out
}
