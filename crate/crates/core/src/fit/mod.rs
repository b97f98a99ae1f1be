//! Estimating scaling-law parameters from training runs.
//!
//! All objectives are least squares in log-loss. Linear power laws are solved
//! directly; the two-variable surfaces use a deterministic grid of exponent
//! seeds, each completed by the linear sub-problem in the scale parameters,
//! and the best seeds are refined with damped Gauss-Newton.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;


mod exclusion;
mod extract;
mod power;
mod record;
mod surface;
mod synth;

pub use exclusion::{apply_exclusions, last_decile_slope, ExclusionPolicy, ExclusionReason, Exclusions};
pub use extract::{early_stopped_points, final_loss_points, learning_curve_points, pareto_points};
pub use power::{fit_bcrit, fit_power_law, PowerVariable};
pub use record::RunRecord;
pub use surface::{fit_loss_nd, fit_loss_ns};
pub use synth::{generate_synthetic_runs, RunSpec, SyntheticDesign, SyntheticTruth};

use crate::laws::{DataLawConstants, ScalingConstants, StepLawConstants};

/// Which law a [`FitResult`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LawId {
    /// `(X_c / x)^alpha` with an unnamed variable.
    PowerLaw,
    LossOfN,
    LossOfD,
    LossOfCmin,
    LossOfNAndD,
    LossOfNAndSmin,
    ParetoFront,
    CriticalBatch,
}

impl LawId {
    pub fn as_str(self) -> &'static str {
        match self {
            LawId::PowerLaw => "power_law",
            LawId::LossOfN => "loss_of_n",
            LawId::LossOfD => "loss_of_d",
            LawId::LossOfCmin => "loss_of_cmin",
            LawId::LossOfNAndD => "loss_of_n_and_d",
            LawId::LossOfNAndSmin => "loss_of_n_and_smin",
            LawId::ParetoFront => "pareto_front",
            LawId::CriticalBatch => "critical_batch",
        }
    }
}

/// How many records a policy dropped, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExcludedCount {
    pub reason: ExclusionReason,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub law: LawId,
    /// Keyed by the published symbol names (`alpha_N`, `N_c`, ...).
    pub params: BTreeMap<String, f64>,
    /// Sum of squared log-residuals at `params`.
    pub rss: f64,
    pub n_points: usize,
    pub excluded: Vec<ExcludedCount>,
    /// `ln(model) - ln(observed)` per point, in input order.
    pub residuals: Vec<f64>,
    /// Indices of points whose residual is far outside the bulk.
    pub outliers: Vec<usize>,
}

impl FitResult {
    pub(crate) fn new(law: LawId, params: &[(&str, f64)], residuals: Vec<f64>) -> Self {
        let rss = residuals.iter().map(|r| r * r).sum();
        let outliers = flag_outliers(&residuals);
        Self {
            law,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            rss,
            n_points: residuals.len(),
            excluded: Vec::new(),
            residuals,
            outliers,
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Attach the exclusion summary produced while preparing the points.
    pub fn with_exclusions(mut self, excluded: Vec<ExcludedCount>) -> Self {
        self.excluded = excluded;
        self
    }

    pub fn data_law(&self) -> Option<DataLawConstants> {
        Some(DataLawConstants {
            alpha_n: self.param("alpha_N")?,
            alpha_d: self.param("alpha_D")?,
            n_c: self.param("N_c")?,
            d_c: self.param("D_c")?,
        })
    }

    pub fn step_law(&self) -> Option<StepLawConstants> {
        Some(StepLawConstants {
            alpha_n: self.param("alpha_N")?,
            alpha_s: self.param("alpha_S")?,
            n_c: self.param("N_c")?,
            s_c: self.param("S_c")?,
        })
    }

    /// Copies every fitted symbol that `ScalingConstants` carries into `base`.
    pub fn merge_into(&self, base: &ScalingConstants) -> ScalingConstants {
        let mut k = *base;
        for (name, value) in &self.params {
            let slot = match name.as_str() {
                "alpha_N" => &mut k.alpha_n,
                "alpha_D" => &mut k.alpha_d,
                "alpha_C_min" => &mut k.alpha_c_min,
                "alpha_B" => &mut k.alpha_b,
                "alpha_S" => &mut k.alpha_s,
                "N_c" => &mut k.n_c,
                "D_c" => &mut k.d_c,
                "C_c_min" => &mut k.c_c_min,
                "B_star" => &mut k.b_star,
                "S_c" => &mut k.s_c,
                _ => continue,
            };
            *slot = *value;
        }
        k
    }
}

/// Flags residuals more than five robust standard deviations (MAD based)
/// from the median. Needs at least five points to say anything.
fn flag_outliers(residuals: &[f64]) -> Vec<usize> {
    if residuals.len() < 5 {
        return Vec::new();
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        if v.len().is_multiple_of(2) {
            0.5 * (v[mid - 1] + v[mid])
        } else {
            v[mid]
        }
    };
    let center = median(&mut residuals.to_vec());
    let mad = median(&mut residuals.iter().map(|r| (r - center).abs()).collect());
    let sigma = (1.4826 * mad).max(1e-12);
    residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| (*r - center).abs() > 5.0 * sigma)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn check_positive_points(points: impl Iterator<Item = f64>) -> crate::Result<()> {
    for v in points {
        crate::error::positive("fit input", v)?;
    }
    Ok(())
}

pub(crate) fn count_distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outliers_need_a_bulk() {
        let r = [0.01, -0.01, 0.0, 0.02, -0.02, 0.5];
        assert_eq!(flag_outliers(&r), [5]);
        assert!(flag_outliers(&[0.0, 1.0]).is_empty());
    }

    #[test]
    fn merge_fitted_symbols() {
        let base = ScalingConstants::appendix_a();
        let fit = FitResult::new(LawId::CriticalBatch, &[("alpha_B", 0.3), ("B_star", 1e8)], Vec::new());
        let k = fit.merge_into(&base);
        assert_eq!(k.alpha_b, 0.3);
        assert_eq!(k.b_star, 1e8);
        assert_eq!(k.alpha_n, base.alpha_n);
    }
}
