use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use super::{check_positive_points, count_distinct, FitResult, LawId};
use crate::batch::ParetoFront;
use crate::error::{Error, Result};

/// Which symbols a single-variable power-law fit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerVariable {
    /// `alpha`, `X_c`
    Generic,
    /// `alpha_N`, `N_c`
    Params,
    /// `alpha_D`, `D_c`
    Data,
    /// `alpha_C_min`, `C_c_min`
    ComputeMin,
}

impl PowerVariable {
    fn names(self) -> (LawId, &'static str, &'static str) {
        match self {
            PowerVariable::Generic => (LawId::PowerLaw, "alpha", "X_c"),
            PowerVariable::Params => (LawId::LossOfN, "alpha_N", "N_c"),
            PowerVariable::Data => (LawId::LossOfD, "alpha_D", "D_c"),
            PowerVariable::ComputeMin => (LawId::LossOfCmin, "alpha_C_min", "C_c_min"),
        }
    }
}

/// Ordinary least squares of `y` on `x`: returns `(intercept, slope)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Fits `L = (X_c / x)^alpha` to `(x, L)` pairs by least squares of `ln L` on `ln x`.
pub fn fit_power_law(points: &[(f64, f64)], variable: PowerVariable) -> Result<FitResult> {
    check_positive_points(points.iter().flat_map(|(x, l)| [*x, *l]))?;
    let distinct = count_distinct(points.iter().map(|p| p.0));
    if distinct < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: distinct,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope) = line_fit(&xs, &ys);
    let alpha = -slope;
    if !(alpha > 0.0) {
        return Err(Error::FitFailed(alloc::format!(
            "loss does not decrease with the variable (fitted exponent {alpha})"
        )));
    }
    // ln L = alpha ln X_c - alpha ln x
    let scale = (intercept / alpha).exp();
    let residuals = points
        .iter()
        .map(|(x, l)| alpha * (scale / x).ln() - l.ln())
        .collect();
    let (law, alpha_name, scale_name) = variable.names();
    Ok(FitResult::new(law, &[(alpha_name, alpha), (scale_name, scale)], residuals))
}

/// Fits `B_crit(L) = B_* / L^(1/alpha_B)` to measured fronts.
pub fn fit_bcrit(fronts: &[ParetoFront]) -> Result<FitResult> {
    check_positive_points(fronts.iter().flat_map(|f| [f.target_loss, f.b_crit]))?;
    let distinct = count_distinct(fronts.iter().map(|f| f.target_loss));
    if distinct < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: distinct,
        });
    }
    let xs: Vec<f64> = fronts.iter().map(|f| f.target_loss.ln()).collect();
    let ys: Vec<f64> = fronts.iter().map(|f| f.b_crit.ln()).collect();
    let (intercept, slope) = line_fit(&xs, &ys);
    if !(slope < 0.0) {
        return Err(Error::FitFailed(alloc::format!(
            "critical batch does not grow as the loss falls (slope {slope})"
        )));
    }
    let alpha_b = -1.0 / slope;
    let b_star = intercept.exp();
    let residuals = fronts
        .iter()
        .map(|f| (b_star.ln() - f.target_loss.ln() / alpha_b) - f.b_crit.ln())
        .collect();
    Ok(FitResult::new(
        LawId::CriticalBatch,
        &[("alpha_B", alpha_b), ("B_star", b_star)],
        residuals,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_interpolate_exactly() {
        let pts = [(1e6, (8.8e13_f64 / 1e6).powf(0.076)), (1e9, (8.8e13_f64 / 1e9).powf(0.076))];
        let fit = fit_power_law(&pts, PowerVariable::Params).unwrap();
        assert!((fit.param("alpha_N").unwrap() / 0.076 - 1.0).abs() < 1e-12);
        assert!((fit.param("N_c").unwrap() / 8.8e13 - 1.0).abs() < 1e-10);
        assert!(fit.rss < 1e-28);
    }

    #[test]
    fn rejects_single_abscissa_and_flat_data() {
        let pts = [(1e6, 3.0), (1e6, 3.1)];
        assert!(matches!(
            fit_power_law(&pts, PowerVariable::Generic),
            Err(Error::TooFewPoints { got: 1, .. })
        ));
        let rising = [(1e6, 3.0), (1e7, 3.5)];
        assert!(matches!(fit_power_law(&rising, PowerVariable::Generic), Err(Error::FitFailed(_))));
        assert!(fit_power_law(&[(1.0, -2.0), (2.0, 1.0)], PowerVariable::Generic).is_err());
    }

    #[test]
    fn single_front_is_an_error() {
        let f = ParetoFront::new(3.0, 1e3, 1e9).unwrap();
        assert!(matches!(fit_bcrit(&[f]), Err(Error::TooFewPoints { .. })));
    }
}
