//! Compute-efficient training: how to split a compute budget between model
//! size, batch size and steps, and what loss that buys.
//!
//! Budgets are in PF-days at the interface and FLOPs inside.

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use crate::error::{positive, Error, Result};
use crate::laws::{loss_of_cmin, ScalingConstants, StepLawConstants};
use crate::numeric::{bisect_increasing, golden_section};
use crate::PF_DAY_FLOPS;

/// Growth exponents of the optimal allocation, `X_opt ∝ C_min^p_X`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivedExponents {
    #[cfg_attr(feature = "serde", serde(rename = "alpha_C_derived"))]
    pub alpha_c_derived: f64,
    #[cfg_attr(feature = "serde", serde(rename = "p_N"))]
    pub p_n: f64,
    #[cfg_attr(feature = "serde", serde(rename = "p_B"))]
    pub p_b: f64,
    #[cfg_attr(feature = "serde", serde(rename = "p_S"))]
    pub p_s: f64,
    #[cfg_attr(feature = "serde", serde(rename = "p_D"))]
    pub p_d: f64,
}

/// `alpha_C = 1 / (1/alpha_S + 1/alpha_B + 1/alpha_N)` and the share of it
/// going to each of `N`, `B` and `S`.
pub fn derived_exponents(k: &ScalingConstants) -> DerivedExponents {
    let alpha_c = 1.0 / (1.0 / k.alpha_s + 1.0 / k.alpha_b + 1.0 / k.alpha_n);
    let p_n = alpha_c / k.alpha_n;
    let p_b = alpha_c / k.alpha_b;
    let p_s = alpha_c / k.alpha_s;
    DerivedExponents {
        alpha_c_derived: alpha_c,
        p_n,
        p_b,
        p_s,
        p_d: p_b + p_s,
    }
}

/// One point on the compute-efficient frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Allocation {
    /// PF-days
    pub c_min: f64,
    /// non-embedding parameters
    pub n_opt: f64,
    /// tokens per step; the critical batch at `predicted_loss`
    pub b: f64,
    /// steps at very large batch, `6 n_opt b s_min = c_min`
    pub s_min: f64,
    /// steps actually taken at batch `b`, twice `s_min`; uses `2 c_min` of compute
    pub steps: f64,
    /// tokens processed at batch `b`, `2 c_min / (6 n_opt)`
    pub d_processed: f64,
    /// nats per token
    pub predicted_loss: f64,
}

impl Allocation {
    fn from_parts(c_min: f64, n_opt: f64, b: f64, predicted_loss: f64) -> Self {
        let s_min = c_min * PF_DAY_FLOPS / (6.0 * n_opt * b);
        Self {
            c_min,
            n_opt,
            b,
            s_min,
            steps: 2.0 * s_min,
            d_processed: 2.0 * s_min * b,
            predicted_loss,
        }
    }
}

/// Constants of `L(N, S_min)` and `B_crit(L)` that determine the frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierModel {
    pub alpha_n: f64,
    pub n_c: f64,
    pub alpha_s: f64,
    pub s_c: f64,
    pub alpha_b: f64,
    pub b_star: f64,
}

impl FrontierModel {
    pub fn from_scaling(k: &ScalingConstants) -> Self {
        Self {
            alpha_n: k.alpha_n,
            n_c: k.n_c,
            alpha_s: k.alpha_s,
            s_c: k.s_c,
            alpha_b: k.alpha_b,
            b_star: k.b_star,
        }
    }

    /// Learning-curve constants from a joint `L(N, S_min)` fit, batch
    /// constants from `k`.
    pub fn from_step_law(k: &ScalingConstants, steps: &StepLawConstants) -> Self {
        Self {
            alpha_n: steps.alpha_n,
            n_c: steps.n_c,
            alpha_s: steps.alpha_s,
            s_c: steps.s_c,
            ..Self::from_scaling(k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("alpha_N", self.alpha_n),
            ("N_c", self.n_c),
            ("alpha_S", self.alpha_s),
            ("S_c", self.s_c),
            ("alpha_B", self.alpha_b),
            ("B_star", self.b_star),
        ] {
            positive(what, v)?;
        }
        Ok(())
    }

    fn alpha_c(&self) -> f64 {
        1.0 / (1.0 / self.alpha_s + 1.0 / self.alpha_b + 1.0 / self.alpha_n)
    }

    /// Compute scale (FLOPs) such that, on the frontier, the converged-loss
    /// term equals `(C_c / C)^alpha_C`.
    fn compute_scale_flops(&self) -> f64 {
        let r = self.alpha_n / self.alpha_s;
        let ln = (6.0 * self.n_c * self.b_star * self.s_c).ln()
            - (1.0 + r).ln() / self.alpha_b
            - r.ln() / self.alpha_s;
        ln.exp()
    }

    /// The frontier at `c_min` PF-days in closed form. Along it the loss sits
    /// a fixed fraction `alpha_N / alpha_S` above the converged loss of the
    /// chosen model.
    pub fn allocate(&self, c_min: f64) -> Result<Allocation> {
        let c = positive("C_min", c_min)?;
        self.validate()?;
        let r = self.alpha_n / self.alpha_s;
        let ln_ratio = (self.compute_scale_flops() / (c * PF_DAY_FLOPS)).ln();
        let ln_converged = self.alpha_c() * ln_ratio;
        let n_opt = self.n_c * (-ln_converged / self.alpha_n).exp();
        let loss = (1.0 + r) * ln_converged.exp();
        let b = self.b_star / loss.powf(1.0 / self.alpha_b);
        Ok(Allocation::from_parts(c, n_opt, b, loss))
    }

    /// Loss of a model with `n` parameters trained at the critical batch for
    /// `c_min` PF-days of minimum compute. Solves
    /// `L = (N_c/N)^alpha_N + (S_c / S_min(L))^alpha_S` with
    /// `S_min(L) = C_min / (6 N B_crit(L))`.
    pub fn loss_at(&self, n: f64, c_min: f64) -> f64 {
        let converged = (self.n_c / n).powf(self.alpha_n);
        let flops = c_min * PF_DAY_FLOPS;
        let steps_term = |loss: f64| {
            let s_min = flops * loss.powf(1.0 / self.alpha_b) / (6.0 * n * self.b_star);
            (self.s_c / s_min).powf(self.alpha_s)
        };
        let g = |loss: f64| loss - converged - steps_term(loss);
        let mut hi = 2.0 * converged;
        while g(hi) <= 0.0 {
            hi *= 2.0;
        }
        bisect_increasing(g, converged, hi)
    }

    /// Brute-force frontier: minimizes [`FrontierModel::loss_at`] over
    /// `ln N` without using the closed form.
    pub fn allocate_numerically(&self, c_min: f64) -> Result<Allocation> {
        let c = positive("C_min", c_min)?;
        self.validate()?;
        let objective = |ln_n: f64| self.loss_at(ln_n.exp(), c);
        // coarse scan over N in [1, 1e30], then refine around the best cell
        let (lo, hi, cells) = (0.0_f64, 30.0 * core::f64::consts::LN_10, 690);
        let width = (hi - lo) / cells as f64;
        let mut best = (lo, f64::INFINITY);
        for i in 0..=cells {
            let x = lo + width * i as f64;
            let v = objective(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        let ln_n = golden_section(objective, best.0 - width, best.0 + width, 200);
        let n_opt = ln_n.exp();
        let loss = self.loss_at(n_opt, c);
        let b = self.b_star / loss.powf(1.0 / self.alpha_b);
        Ok(Allocation::from_parts(c, n_opt, b, loss))
    }
}

/// The empirically fitted allocation trends, `X = X_e C_min^p_X` with
/// `C_min` in PF-days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalAllocation {
    pub n_scale: f64,
    pub p_n: f64,
    pub b_scale: f64,
    pub p_b: f64,
    pub s_scale: f64,
    pub p_s: f64,
    pub d_scale: f64,
    pub p_d: f64,
}

impl EmpiricalAllocation {
    pub const fn published() -> Self {
        Self {
            n_scale: 1.3e9,
            p_n: 0.73,
            b_scale: 2.0e6,
            p_b: 0.24,
            s_scale: 5.4e3,
            p_s: 0.03,
            d_scale: 2.0e10,
            p_d: 0.27,
        }
    }
}

impl Default for EmpiricalAllocation {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    /// Closed forms from `alpha_N`, `alpha_B`, `alpha_S`.
    #[default]
    Derived,
    /// The fitted `N`, `B` trends, with loss from `L(C_min)`.
    Empirical,
}

/// Optimal model size, batch and steps for `c_min` PF-days.
///
/// In empirical mode `s_min` is recomputed from `c_min / (6 N B)` so the
/// compute identity holds exactly; the fitted step trend agrees to about 3%.
pub fn optimal_allocation(c_min: f64, k: &ScalingConstants, mode: Mode) -> Result<Allocation> {
    match mode {
        Mode::Derived => FrontierModel::from_scaling(k).allocate(c_min),
        Mode::Empirical => {
            let c = positive("C_min", c_min)?;
            let e = EmpiricalAllocation::published();
            let n_opt = e.n_scale * c.powf(e.p_n);
            let b = e.b_scale * c.powf(e.p_b);
            Ok(Allocation::from_parts(c, n_opt, b, loss_of_cmin(c, k)?))
        }
    }
}

/// Allocation exponents for a mode; `alpha_C_derived` is the loss exponent.
pub fn allocation_exponents(k: &ScalingConstants, mode: Mode) -> DerivedExponents {
    match mode {
        Mode::Derived => derived_exponents(k),
        Mode::Empirical => {
            let e = EmpiricalAllocation::published();
            DerivedExponents {
                alpha_c_derived: k.alpha_c_min,
                p_n: e.p_n,
                p_b: e.p_b,
                p_s: e.p_s,
                p_d: e.p_d,
            }
        }
    }
}

/// Ratios `(N, S, C)` of a run stopping `f` above its converged loss to one
/// stopping `f_prime` above it, at equal loss.
pub fn efficient_vs_converged(f: f64, f_prime: f64, k: &ScalingConstants) -> Result<(f64, f64, f64)> {
    let f = positive("f", f)?;
    let f_prime = positive("f_prime", f_prime)?;
    let n = ((1.0 + f) / (1.0 + f_prime)).powf(1.0 / k.alpha_n);
    let s = ((1.0 + 1.0 / f) / (1.0 + 1.0 / f_prime)).powf(1.0 / k.alpha_s);
    Ok((n, s, n * s))
}

/// Smallest `N / N_eff` that can still reach the target loss.
pub fn suboptimal_ratio_bound(k: &ScalingConstants) -> f64 {
    (1.0 + k.alpha_n / k.alpha_s).powf(-1.0 / k.alpha_n)
}

/// Extra compute and step ratio for training a model `ratio` times the
/// optimal size to the same loss. Returns `Infeasible` with the critical
/// ratio below [`suboptimal_ratio_bound`].
pub fn suboptimal_overhead(ratio: f64, k: &ScalingConstants) -> Result<(f64, f64)> {
    let ratio = positive("ratio", ratio)?;
    let bracket = 1.0 + (k.alpha_s / k.alpha_n) * (1.0 - ratio.powf(-k.alpha_n));
    if !(bracket > 0.0) {
        return Err(Error::Infeasible {
            what: "model size ratio",
            value: ratio,
            bound: suboptimal_ratio_bound(k),
        });
    }
    let steps = bracket.powf(-1.0 / k.alpha_s);
    Ok((ratio * steps, steps))
}

/// `N_opt(C_min) = scale C_min^exponent`, `C_min` in PF-days.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NminLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl NminLaw {
    pub const fn published() -> Self {
        Self {
            scale: 1.3e9,
            exponent: 0.73,
        }
    }

    pub fn n_opt(&self, c_min: f64) -> f64 {
        self.scale * c_min.powf(self.exponent)
    }
}

impl Default for NminLaw {
    fn default() -> Self {
        Self::published()
    }
}

/// Tokens seen in one epoch of training at the critical batch,
/// `D = 2 C_min / (6 N(C_min))`. Grows as `C_min^(1 - exponent)`.
pub fn data_trajectory(c_min: f64, law: &NminLaw) -> Result<f64> {
    let c = positive("C_min", c_min)?;
    Ok(2.0 * c * PF_DAY_FLOPS / (6.0 * law.n_opt(c)))
}

/// The rounded trend `4e10 C_min^0.26` quoted alongside the one-epoch form.
pub fn quoted_data_trajectory(c_min: f64) -> Result<f64> {
    let c = positive("C_min", c_min)?;
    Ok(4.0e10 * c.powf(0.26))
}

/// The fitted trend `D_opt = 2e10 C_min^0.27`.
pub fn fitted_data_trajectory(c_min: f64) -> Result<f64> {
    let c = positive("C_min", c_min)?;
    let e = EmpiricalAllocation::published();
    Ok(e.d_scale * c.powf(e.p_d))
}

/// Data needed to keep overfitting negligible along the frontier,
/// `5e3 N^0.74`; about `C_min^0.54` with the published `N(C_min)`.
pub fn overfit_data_trajectory(c_min: f64, law: &NminLaw) -> Result<f64> {
    let c = positive("C_min", c_min)?;
    Ok(5.0e3 * law.n_opt(c).powf(0.74))
}

/// Where `L(D(C_min))` with one-epoch data meets the `L(C_min)` trend.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intersection {
    /// PF-days
    pub c_star: f64,
    pub n_star: f64,
    /// tokens
    pub d_star: f64,
    /// nats per token
    pub l_star: f64,
}

/// Solves `(D_c / D(C))^alpha_D = (C_c^min / C)^alpha_C^min` in log space.
/// Both sides are power laws in `C`, so the crossing is closed form. The
/// result is very sensitive to the exponents.
pub fn intersection_point(k: &ScalingConstants, law: &NminLaw) -> Result<Intersection> {
    k.validate()?;
    positive("N(C_min) scale", law.scale)?;
    // D(C) = d_scale C^p_d
    let d_scale = 2.0 * PF_DAY_FLOPS / (6.0 * law.scale);
    let p_d = 1.0 - law.exponent;
    let denom = k.alpha_c_min - k.alpha_d * p_d;
    if denom.abs() <= 1e-12 * k.alpha_c_min.max(k.alpha_d * p_d.abs()) {
        return Err(Error::NoIntersection);
    }
    let ln_c = (k.alpha_c_min * k.c_c_min.ln() - k.alpha_d * (k.d_c / d_scale).ln()) / denom;
    let c_star = ln_c.exp();
    if !(c_star > 0.0 && c_star.is_finite()) {
        return Err(Error::NoIntersection);
    }
    Ok(Intersection {
        c_star,
        n_star: law.n_opt(c_star),
        d_star: d_scale * c_star.powf(p_d),
        l_star: (k.alpha_c_min * (k.c_c_min.ln() - ln_c)).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::critical_batch;

    const A: ScalingConstants = ScalingConstants::appendix_a();

    fn close(a: f64, b: f64, tol: f64) -> bool {
        ((a - b) / b).abs() < tol
    }

    #[test]
    fn exponents_partition_the_compute_exponent() {
        let e = derived_exponents(&A);
        assert!(close(e.alpha_c_derived, 0.051987, 1e-4));
        assert!((e.p_n + e.p_b + e.p_s - 1.0).abs() < 1e-15);
        let limit = derived_exponents(&ScalingConstants {
            alpha_b: f64::INFINITY,
            alpha_s: f64::INFINITY,
            ..A
        });
        assert_eq!(limit.alpha_c_derived, A.alpha_n);
    }

    #[test]
    fn one_pf_day_allocation() {
        let a = optimal_allocation(1.0, &A, Mode::Derived).unwrap();
        assert!(close(a.n_opt, 6.0326e8, 1e-3), "{}", a.n_opt);
        assert!(close(a.predicted_loss, 2.7155, 1e-4), "{}", a.predicted_loss);
        assert!(close(a.b, critical_batch(a.predicted_loss, &A).unwrap(), 1e-12));
        assert!(close(a.s_min, 13231.6, 1e-3), "{}", a.s_min);
        assert!(close(6.0 * a.n_opt * a.b * a.steps, 2.0 * PF_DAY_FLOPS, 1e-12));
        let converged = (A.n_c / a.n_opt).powf(A.alpha_n);
        assert!(close(a.predicted_loss / converged, 1.1, 1e-12));
    }

    #[test]
    fn closed_form_matches_numerical_minimum() {
        let model = FrontierModel::from_scaling(&A);
        for c in [1e-6, 1e-3, 1.0, 1e2] {
            let exact = model.allocate(c).unwrap();
            let brute = model.allocate_numerically(c).unwrap();
            assert!(close(brute.n_opt, exact.n_opt, 1e-4), "{c}: {} vs {}", brute.n_opt, exact.n_opt);
            assert!(close(brute.predicted_loss, exact.predicted_loss, 1e-6));
        }
    }

    #[test]
    fn closed_form_is_a_stationary_point_of_the_implicit_loss() {
        let model = FrontierModel::from_scaling(&A);
        let a = model.allocate(3.0).unwrap();
        assert!(close(model.loss_at(a.n_opt, 3.0), a.predicted_loss, 1e-12));
        assert!(model.loss_at(a.n_opt * 1.5, 3.0) > a.predicted_loss);
        assert!(model.loss_at(a.n_opt / 1.5, 3.0) > a.predicted_loss);
    }

    #[test]
    fn efficiency_and_overhead_values() {
        let (n, s, c) = efficient_vs_converged(0.1, 0.02, &A).unwrap();
        assert!(close(n, 2.70, 0.01) && close(s, 0.1329, 0.01) && close(c, 0.359, 0.01));
        assert_eq!(efficient_vs_converged(0.05, 0.05, &A).unwrap(), (1.0, 1.0, 1.0));

        let (c, s) = suboptimal_overhead(2.2, &A).unwrap();
        assert!(close(c, 1.203, 2e-3) && close(s, 0.547, 2e-3), "{c} {s}");
        assert!(close(suboptimal_overhead(0.6, &A).unwrap().0, 1.164, 2e-3));
        assert_eq!(suboptimal_overhead(1.0, &A).unwrap(), (1.0, 1.0));
        match suboptimal_overhead(0.2, &A) {
            Err(Error::Infeasible { bound, .. }) => assert!(close(bound, 0.285, 0.01), "{bound}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trajectories() {
        let law = NminLaw::published();
        let d = data_trajectory(1.0, &law).unwrap();
        assert!(close(d, 2.2154e10, 1e-3), "{d}");
        assert!(close(data_trajectory(2.0, &law).unwrap() / d, 2f64.powf(0.27), 1e-12));
        // one epoch at the critical batch
        let e = optimal_allocation(1.0, &A, Mode::Empirical).unwrap();
        assert!(close(e.d_processed, d, 1e-12));
        assert!(close(quoted_data_trajectory(2.0).unwrap() / quoted_data_trajectory(1.0).unwrap(), 1.1975, 1e-3));
    }

    #[test]
    fn intersection() {
        let p = intersection_point(&A, &NminLaw::published()).unwrap();
        assert!(close(p.c_star, 1.67e4, 0.02), "{}", p.c_star);
        assert!(close(p.l_star, 1.635, 0.01), "{}", p.l_star);
        assert!(close(p.l_star, loss_of_cmin(p.c_star, &A).unwrap(), 1e-12));
        let via_d = (A.d_c / p.d_star).powf(A.alpha_d);
        assert!(close(via_d, p.l_star, 1e-12));

        let parallel = ScalingConstants {
            alpha_c_min: A.alpha_d * 0.27,
            ..A
        };
        assert_eq!(intersection_point(&parallel, &NminLaw::published()), Err(Error::NoIntersection));
    }
}
