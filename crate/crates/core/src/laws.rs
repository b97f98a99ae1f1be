//! Closed-form scaling laws.
//!
//! Losses are cross-entropy in nats per token. Model sizes are non-embedding
//! parameters, data sizes are tokens, compute is in PF-days and batch sizes
//! are tokens per step. Every law takes its constants explicitly: the
//! single-variable fits ([`ScalingConstants`]) and the joint fits
//! ([`DataLawConstants`], [`StepLawConstants`]) differ slightly and both are
//! kept.

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use crate::error::{positive, Error, Result};

/// Exponents and scales of the single-variable power laws.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingConstants {
    #[cfg_attr(feature = "serde", serde(rename = "alpha_N"))]
    pub alpha_n: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_D"))]
    pub alpha_d: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_C"))]
    pub alpha_c: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_C_min"))]
    pub alpha_c_min: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_B"))]
    pub alpha_b: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_S"))]
    pub alpha_s: f64,
    /// params
    #[cfg_attr(feature = "serde", serde(rename = "N_c"))]
    pub n_c: f64,
    /// tokens
    #[cfg_attr(feature = "serde", serde(rename = "D_c"))]
    pub d_c: f64,
    /// PF-days
    #[cfg_attr(feature = "serde", serde(rename = "C_c"))]
    pub c_c: f64,
    /// PF-days
    #[cfg_attr(feature = "serde", serde(rename = "C_c_min"))]
    pub c_c_min: f64,
    /// tokens
    #[cfg_attr(feature = "serde", serde(rename = "B_star"))]
    pub b_star: f64,
    /// steps
    #[cfg_attr(feature = "serde", serde(rename = "S_c"))]
    pub s_c: f64,
}

impl ScalingConstants {
    /// The published single-law fits for WebText2 with the GPT-2 tokenizer.
    pub const fn appendix_a() -> Self {
        Self {
            alpha_n: 0.076,
            alpha_d: 0.095,
            alpha_c: 0.057,
            alpha_c_min: 0.050,
            alpha_b: 0.21,
            alpha_s: 0.76,
            n_c: 8.8e13,
            d_c: 5.4e13,
            c_c: 1.6e7,
            c_c_min: 3.1e8,
            b_star: 2.1e8,
            s_c: 2.1e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha_N", self.alpha_n)?;
        positive("alpha_D", self.alpha_d)?;
        positive("alpha_C", self.alpha_c)?;
        positive("alpha_C_min", self.alpha_c_min)?;
        positive("alpha_B", self.alpha_b)?;
        positive("alpha_S", self.alpha_s)?;
        positive("N_c", self.n_c)?;
        positive("D_c", self.d_c)?;
        positive("C_c", self.c_c)?;
        positive("C_c_min", self.c_c_min)?;
        positive("B_star", self.b_star)?;
        positive("S_c", self.s_c)?;
        Ok(())
    }
}

impl Default for ScalingConstants {
    fn default() -> Self {
        Self::appendix_a()
    }
}

/// Constants of the early-stopped loss surface `L(N, D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataLawConstants {
    #[cfg_attr(feature = "serde", serde(rename = "alpha_N"))]
    pub alpha_n: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_D"))]
    pub alpha_d: f64,
    #[cfg_attr(feature = "serde", serde(rename = "N_c"))]
    pub n_c: f64,
    #[cfg_attr(feature = "serde", serde(rename = "D_c"))]
    pub d_c: f64,
}

impl DataLawConstants {
    /// Joint four-parameter fit of `L(N, D)`.
    pub const fn table_2() -> Self {
        Self {
            alpha_n: 0.076,
            alpha_d: 0.103,
            n_c: 6.4e13,
            d_c: 1.8e13,
        }
    }

    pub fn from_scaling(k: &ScalingConstants) -> Self {
        Self {
            alpha_n: k.alpha_n,
            alpha_d: k.alpha_d,
            n_c: k.n_c,
            d_c: k.d_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha_N", self.alpha_n)?;
        positive("alpha_D", self.alpha_d)?;
        positive("N_c", self.n_c)?;
        positive("D_c", self.d_c)?;
        Ok(())
    }

    /// `(N / N_c)^(alpha_N / alpha_D) * D_c / D`, the single combination of
    /// model and data size the overfitting fraction depends on.
    fn overfit_ratio(&self, n: f64, d: f64) -> f64 {
        (n / self.n_c).powf(self.alpha_n / self.alpha_d) * self.d_c / d
    }
}

/// Constants of the learning-curve surface `L(N, S_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepLawConstants {
    #[cfg_attr(feature = "serde", serde(rename = "alpha_N"))]
    pub alpha_n: f64,
    #[cfg_attr(feature = "serde", serde(rename = "alpha_S"))]
    pub alpha_s: f64,
    #[cfg_attr(feature = "serde", serde(rename = "N_c"))]
    pub n_c: f64,
    #[cfg_attr(feature = "serde", serde(rename = "S_c"))]
    pub s_c: f64,
}

impl StepLawConstants {
    /// Joint four-parameter fit of `L(N, S_min)`.
    pub const fn table_3() -> Self {
        Self {
            alpha_n: 0.077,
            alpha_s: 0.76,
            n_c: 6.5e13,
            s_c: 2.1e3,
        }
    }

    pub fn from_scaling(k: &ScalingConstants) -> Self {
        Self {
            alpha_n: k.alpha_n,
            alpha_s: k.alpha_s,
            n_c: k.n_c,
            s_c: k.s_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha_N", self.alpha_n)?;
        positive("alpha_S", self.alpha_s)?;
        positive("N_c", self.n_c)?;
        positive("S_c", self.s_c)?;
        Ok(())
    }
}

/// Both joint fits together; the early-stopping bound needs one of each.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JointFitConstants {
    pub data: DataLawConstants,
    pub steps: StepLawConstants,
}

impl JointFitConstants {
    pub const fn published() -> Self {
        Self {
            data: DataLawConstants::table_2(),
            steps: StepLawConstants::table_3(),
        }
    }
}

impl Default for JointFitConstants {
    fn default() -> Self {
        Self::published()
    }
}

/// `L(N) = (N_c / N)^alpha_N`: converged loss with unlimited data.
pub fn loss_of_n(n: f64, k: &ScalingConstants) -> Result<f64> {
    let n = positive("N", n)?;
    Ok((k.n_c / n).powf(k.alpha_n))
}

/// `L(D) = (D_c / D)^alpha_D`: large model trained with early stopping.
pub fn loss_of_d(d: f64, k: &ScalingConstants) -> Result<f64> {
    let d = positive("D", d)?;
    Ok((k.d_c / d).powf(k.alpha_d))
}

/// `L(C) = (C_c / C)^alpha_C` at a fixed batch size (the naive compute trend).
pub fn loss_of_c(c_pf_days: f64, k: &ScalingConstants) -> Result<f64> {
    let c = positive("C", c_pf_days)?;
    Ok((k.c_c / c).powf(k.alpha_c))
}

/// `L(C_min) = (C_c^min / C_min)^alpha_C^min` for an optimally sized model.
pub fn loss_of_cmin(c_min_pf_days: f64, k: &ScalingConstants) -> Result<f64> {
    let c = positive("C_min", c_min_pf_days)?;
    Ok((k.c_c_min / c).powf(k.alpha_c_min))
}

/// `B_crit(L) = B_* / L^(1/alpha_B)`, in tokens. Diverges as the loss goes to zero.
pub fn critical_batch(loss: f64, k: &ScalingConstants) -> Result<f64> {
    let loss = positive("loss", loss)?;
    Ok(k.b_star / loss.powf(1.0 / k.alpha_b))
}

/// `L(N, D) = [(N_c/N)^(alpha_N/alpha_D) + D_c/D]^alpha_D`.
pub fn loss_of_n_d(n: f64, d: f64, j: &DataLawConstants) -> Result<f64> {
    let n = positive("N", n)?;
    let d = positive("D", d)?;
    let base = (j.n_c / n).powf(j.alpha_n / j.alpha_d) + j.d_c / d;
    Ok(base.powf(j.alpha_d))
}

/// `L(N, inf) = (N_c/N)^alpha_N` under the joint `L(N, D)` constants.
pub fn converged_loss(n: f64, j: &DataLawConstants) -> Result<f64> {
    let n = positive("N", n)?;
    Ok((j.n_c / n).powf(j.alpha_n))
}

/// Overfitting fraction `dL = (1 + (N/N_c)^(alpha_N/alpha_D) D_c/D)^alpha_D - 1`.
pub fn overfit_fraction(n: f64, d: f64, j: &DataLawConstants) -> Result<f64> {
    let n = positive("N", n)?;
    let d = positive("D", d)?;
    let x = j.overfit_ratio(n, d);
    Ok((j.alpha_d * x.ln_1p()).exp_m1())
}

/// Overfitting fraction from its definition `L(N, D) / L(N, inf) - 1`.
///
/// Agrees with [`overfit_fraction`] up to cancellation in the final
/// subtraction; prefer the closed form when the fraction is tiny.
pub fn overfit_fraction_ratio(n: f64, d: f64, j: &DataLawConstants) -> Result<f64> {
    Ok(loss_of_n_d(n, d, j)? / converged_loss(n, j)? - 1.0)
}

/// Smallest dataset (tokens) keeping the overfitting fraction at or below `delta`.
pub fn data_requirement(n: f64, delta: f64, j: &DataLawConstants) -> Result<f64> {
    let n = positive("N", n)?;
    let delta = positive("delta", delta)?;
    let scale = (n / j.n_c).powf(j.alpha_n / j.alpha_d) * j.d_c;
    // (1 + delta)^(1/alpha_D) - 1
    let denom = (delta.ln_1p() / j.alpha_d).exp_m1();
    let d = scale / denom;
    if d > 0.0 && d.is_finite() {
        return Ok(d);
    }
    // delta so large that the requirement underflows
    let max = (j.alpha_d * (scale / f64::MIN_POSITIVE).ln_1p()).exp_m1();
    Err(Error::OutOfRange {
        what: "delta",
        value: delta,
        min: 0.0,
        max,
    })
}

/// `L(N, S_min) = (N_c/N)^alpha_N + (S_c/S_min)^alpha_S`.
pub fn loss_of_n_smin(n: f64, s_min: f64, j: &StepLawConstants) -> Result<f64> {
    let n = positive("N", n)?;
    let s = positive("S_min", s_min)?;
    Ok((j.n_c / n).powf(j.alpha_n) + (j.s_c / s).powf(j.alpha_s))
}

/// Lower bound on the early-stopping step, `S_c / [L(N, D) - L(N, inf)]^(1/alpha_S)`.
pub fn early_stop_bound(n: f64, d: f64, j: &JointFitConstants) -> Result<f64> {
    let gap = converged_loss(n, &j.data)? * overfit_fraction(n, d, &j.data)?;
    early_stop_bound_from_gap(gap, &j.steps)
}

/// Early-stopping bound for an explicit finite-data loss gap (nats).
pub fn early_stop_bound_from_gap(gap: f64, steps: &StepLawConstants) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NoFiniteBound);
    }
    let bound = steps.s_c / gap.powf(1.0 / steps.alpha_s);
    if bound.is_finite() {
        Ok(bound)
    } else {
        Err(Error::NoFiniteBound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: ScalingConstants = ScalingConstants::appendix_a();
    const T2: DataLawConstants = DataLawConstants::table_2();
    const T3: StepLawConstants = StepLawConstants::table_3();

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn presets_are_valid() {
        A.validate().unwrap();
        T2.validate().unwrap();
        T3.validate().unwrap();
    }

    #[test]
    fn single_variable_laws() {
        assert!(rel(loss_of_n(A.n_c, &A).unwrap(), 1.0) < 1e-15);
        let doubling = loss_of_n(2e9, &A).unwrap() / loss_of_n(1e9, &A).unwrap();
        assert!((doubling - 0.949).abs() < 5e-4);
        // mpmath reference values
        assert!(rel(loss_of_n(1e9, &A).unwrap(), 2.37564029513452) < 1e-12);
        assert!(rel(loss_of_d(2.29e10, &A).unwrap(), 2.0911877990042) < 1e-12);
        assert!(rel(loss_of_cmin(1.0, &A).unwrap(), 2.65808022624552) < 1e-12);

        assert!(rel(loss_of_d(A.d_c, &A).unwrap(), 1.0) < 1e-15);
        let tenfold = loss_of_d(1e10, &A).unwrap() / loss_of_d(1e9, &A).unwrap();
        assert!((tenfold - 0.804).abs() < 5e-4);
        let tenfold = loss_of_cmin(10.0, &A).unwrap() / loss_of_cmin(1.0, &A).unwrap();
        assert!((tenfold - 0.891).abs() < 5e-4);
        assert!(rel(loss_of_cmin(A.c_c_min, &A).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn rejects_non_positive_arguments() {
        assert!(matches!(loss_of_n(0.0, &A), Err(Error::NonPositive { .. })));
        assert!(loss_of_d(-1.0, &A).is_err());
        assert!(loss_of_cmin(f64::NAN, &A).is_err());
        assert!(critical_batch(0.0, &A).is_err());
        assert!(loss_of_n_d(1e8, 0.0, &T2).is_err());
        assert!(loss_of_n_smin(0.0, 1e3, &T3).is_err());
    }

    #[test]
    fn critical_batch_examples() {
        assert!(rel(critical_batch(1.0, &A).unwrap(), 2.1e8) < 1e-15);
        let ratio = critical_batch(0.87 * 3.0, &A).unwrap() / critical_batch(3.0, &A).unwrap();
        assert!((ratio - 1.94).abs() < 0.005);
        assert!(rel(critical_batch(2.6, &A).unwrap(), 2218991.98196057) < 1e-12);
    }

    #[test]
    fn joint_surfaces_pinned() {
        // mpmath at 50 digits
        assert!(rel(loss_of_n_d(1e8, 1e9, &T2).unwrap(), 2.9567337386333) < 1e-12);
        assert!(rel(loss_of_n_smin(3e8, 1e4, &T3).unwrap(), 2.88087941238648) < 1e-12);
        let j = JointFitConstants::published();
        assert!(rel(early_stop_bound(1e8, 1e9, &j).unwrap(), 18114.4151444179) < 1e-10);
    }

    #[test]
    fn joint_limits() {
        let ln = converged_loss(1e9, &T2).unwrap();
        assert!(rel(loss_of_n_d(1e9, 1e30, &T2).unwrap(), ln) < 1e-6);
        let ld = (T2.d_c / 1e10).powf(T2.alpha_d);
        assert!(rel(loss_of_n_d(1e30, 1e10, &T2).unwrap(), ld) < 1e-6);
        assert!(rel(loss_of_n_smin(1e9, 1e300, &T3).unwrap(), (T3.n_c / 1e9).powf(T3.alpha_n)) < 1e-12);
        assert!(rel(loss_of_n_smin(1e300, T3.s_c, &T3).unwrap(), 1.0) < 1e-12);
    }

    #[test]
    fn overfitting_examples() {
        assert!(overfit_fraction(1e9, f64::MAX, &T2).unwrap() < 1e-290);
        let base = overfit_fraction(1e8, 1e9, &T2).unwrap();
        let k: f64 = 7.0;
        let scaled = overfit_fraction(1e8 * k.powf(T2.alpha_d / T2.alpha_n), 1e9 * k, &T2).unwrap();
        assert!(rel(scaled, base) < 1e-12);
    }

    #[test]
    fn data_requirement_examples() {
        let d = data_requirement(1e9, 0.02, &T2).unwrap();
        let rule = 5e3 * 1e9_f64.powf(0.74);
        assert!(rel(d, rule) < 0.1, "d = {d:e}, rule = {rule:e}");
        // below the full 22.9B-token dataset
        assert!(d < 2.6e10);
        for delta in [1e-6, 1e-3, 0.02, 0.5, 10.0] {
            let d = data_requirement(3e8, delta, &T2).unwrap();
            assert!(rel(overfit_fraction(3e8, d, &T2).unwrap(), delta) < 1e-12);
        }
        let huge = data_requirement(1e9, 1e6, &T2).unwrap();
        assert!(huge < 1e-10);
        assert!(matches!(data_requirement(1e9, 1e300, &T2), Err(Error::OutOfRange { .. })));
        assert!(data_requirement(1e9, 0.0, &T2).is_err());
    }

    #[test]
    fn early_stopping_bound() {
        assert!(rel(early_stop_bound_from_gap(1.0, &T3).unwrap(), T3.s_c) < 1e-15);
        let j = JointFitConstants::published();
        let mut last = 0.0;
        for d in [1e7, 1e8, 1e9, 1e10, 1e11] {
            let s = early_stop_bound(1e8, d, &j).unwrap();
            assert!(s > last);
            last = s;
        }
        assert_eq!(early_stop_bound(1e8, f64::MAX, &j), Err(Error::NoFiniteBound));
        assert_eq!(early_stop_bound_from_gap(0.0, &T3), Err(Error::NoFiniteBound));
    }
}
