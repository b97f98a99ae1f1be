//! Fit-recovery checks: synthetic data drawn from known constants, fitted,
//! and compared with the truth.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scalelaw_core::batch::{pareto_from_runs, tradeoff_curve, ParetoFront, ParetoPoint};
use scalelaw_core::fit::{
    apply_exclusions, fit_bcrit, fit_loss_nd, fit_loss_ns, fit_power_law, generate_synthetic_runs,
    learning_curve_points, ExclusionPolicy, ExclusionReason, FitResult, PowerVariable, RunSpec, SyntheticDesign,
    SyntheticTruth,
};
use scalelaw_core::laws::{
    critical_batch, loss_of_n_d, loss_of_n_smin, DataLawConstants, ScalingConstants, StepLawConstants,
};

const A: ScalingConstants = ScalingConstants::appendix_a();
const T2: DataLawConstants = DataLawConstants::table_2();
const T3: StepLawConstants = StepLawConstants::table_3();

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

struct Noise(ChaCha8Rng);

impl Noise {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    fn factor(&mut self, sigma: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.0);
        (sigma * z).exp()
    }
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

fn nd_points(noise: Option<(&mut Noise, f64)>) -> Vec<(f64, f64, f64)> {
    let mut pts = Vec::new();
    let mut noise = noise;
    for &n in &log_grid(1e6, 1e10, 6) {
        for &d in &log_grid(1e7, 1e11, 6) {
            let mut l = loss_of_n_d(n, d, &T2).unwrap();
            if let Some((rng, sigma)) = noise.as_mut() {
                l *= rng.factor(*sigma);
            }
            pts.push((n, d, l));
        }
    }
    pts
}

fn recomputed_rss(fit: &FitResult, model: impl Fn(usize) -> f64, observed: impl Fn(usize) -> f64) -> f64 {
    (0..fit.n_points)
        .map(|i| (model(i).ln() - observed(i).ln()).powi(2))
        .sum()
}

#[test]
fn power_law_round_trip_and_noise() {
    let xs = log_grid(1e4, 1e10, 30);
    let exact: Vec<(f64, f64)> = xs.iter().map(|&n| (n, (A.n_c / n).powf(A.alpha_n))).collect();
    let fit = fit_power_law(&exact, PowerVariable::Params).unwrap();
    assert!(rel(fit.param("alpha_N").unwrap(), A.alpha_n) < 1e-10);
    assert!(rel(fit.param("N_c").unwrap(), A.n_c) < 1e-10);

    for seed in 0..5 {
        let mut rng = Noise::new(seed);
        let noisy: Vec<(f64, f64)> = exact.iter().map(|&(n, l)| (n, l * rng.factor(0.01))).collect();
        let fit = fit_power_law(&noisy, PowerVariable::Params).unwrap();
        assert!(rel(fit.param("alpha_N").unwrap(), A.alpha_n) < 0.03, "seed {seed}");
    }
}

#[test]
fn loss_nd_round_trip_and_noise() {
    let fit = fit_loss_nd(&nd_points(None)).unwrap();
    let j = fit.data_law().unwrap();
    for (got, want) in [(j.alpha_n, T2.alpha_n), (j.alpha_d, T2.alpha_d), (j.n_c, T2.n_c), (j.d_c, T2.d_c)] {
        assert!(rel(got, want) < 1e-6, "{got} vs {want}");
    }

    for seed in 0..3 {
        let mut rng = Noise::new(100 + seed);
        let fit = fit_loss_nd(&nd_points(Some((&mut rng, 0.01)))).unwrap();
        let j = fit.data_law().unwrap();
        assert!(rel(j.alpha_n, T2.alpha_n) < 0.05, "seed {seed}: {}", j.alpha_n);
        assert!(rel(j.alpha_d, T2.alpha_d) < 0.05, "seed {seed}: {}", j.alpha_d);
    }
}

#[test]
fn reported_rss_matches_recomputation() {
    let mut rng = Noise::new(7);
    let pts = nd_points(Some((&mut rng, 0.01)));
    let fit = fit_loss_nd(&pts).unwrap();
    let j = fit.data_law().unwrap();
    let rss = recomputed_rss(&fit, |i| loss_of_n_d(pts[i].0, pts[i].1, &j).unwrap(), |i| pts[i].2);
    assert!(rel(fit.rss, rss) < 1e-12, "{} vs {rss}", fit.rss);
}

#[test]
fn tiny_datasets_are_flagged_as_outliers() {
    let mut rng = Noise::new(11);
    let mut pts = nd_points(Some((&mut rng, 0.01)));
    let first_small = pts.len();
    // an epoch of only a few dozen updates: noisy, poorly described points
    for &n in &log_grid(1e6, 1e10, 6) {
        let d = 1e7 / 1024.0;
        pts.push((n, d, loss_of_n_d(n, d, &T2).unwrap() * rng.factor(0.25)));
    }
    let fit = fit_loss_nd(&pts).unwrap();
    assert!(!fit.outliers.is_empty());
    assert!(fit.outliers.iter().all(|&i| i >= first_small), "{:?}", fit.outliers);
}

#[test]
fn fits_are_scale_equivariant() {
    let mut rng = Noise::new(3);
    let pts = nd_points(Some((&mut rng, 0.01)));
    let c: f64 = 1.37;
    let scaled: Vec<_> = pts.iter().map(|&(n, d, l)| (n, d, l * c)).collect();
    let a = fit_loss_nd(&pts).unwrap().data_law().unwrap();
    let b = fit_loss_nd(&scaled).unwrap().data_law().unwrap();
    assert!(rel(b.alpha_n, a.alpha_n) < 1e-6);
    assert!(rel(b.alpha_d, a.alpha_d) < 1e-6);
    assert!(rel(b.n_c, a.n_c * c.powf(1.0 / a.alpha_n)) < 1e-5);
    assert!(rel(b.d_c, a.d_c * c.powf(1.0 / a.alpha_d)) < 1e-5);

    let xs = log_grid(1e5, 1e9, 12);
    let line: Vec<(f64, f64)> = xs.iter().map(|&x| (x, (A.n_c / x).powf(A.alpha_n) * rng.factor(0.01))).collect();
    let line_scaled: Vec<(f64, f64)> = line.iter().map(|&(x, l)| (x, l * c)).collect();
    let p = fit_power_law(&line, PowerVariable::Params).unwrap();
    let q = fit_power_law(&line_scaled, PowerVariable::Params).unwrap();
    let alpha = p.param("alpha_N").unwrap();
    assert!(rel(q.param("alpha_N").unwrap(), alpha) < 1e-12);
    assert!(rel(q.param("N_c").unwrap(), p.param("N_c").unwrap() * c.powf(1.0 / alpha)) < 1e-10);
}

fn learning_curve_design(models: &[f64]) -> SyntheticDesign {
    SyntheticDesign::grid(models, &[(1u64 << 19) as f64], &[None], 300_000, 40, 0)
}

#[test]
fn loss_ns_round_trip_through_the_generator() {
    let truth = SyntheticTruth::published();
    let design = learning_curve_design(&log_grid(1e5, 1e9, 6));
    let runs = generate_synthetic_runs(&truth, &design, 0.0, 0).unwrap();
    let pts = learning_curve_points(&runs, &truth.scaling).unwrap();
    let j = fit_loss_ns(&pts).unwrap().step_law().unwrap();
    for (got, want) in [(j.alpha_n, T3.alpha_n), (j.alpha_s, T3.alpha_s), (j.n_c, T3.n_c), (j.s_c, T3.s_c)] {
        assert!(rel(got, want) < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn loss_ns_recovers_exponents_under_noise() {
    let truth = SyntheticTruth::published();
    let design = SyntheticDesign {
        warmup_steps: 100,
        ..learning_curve_design(&log_grid(1e5, 1e9, 6))
    };
    for seed in [1, 2, 3] {
        let runs = generate_synthetic_runs(&truth, &design, 0.01, seed).unwrap();
        let kept = apply_exclusions(&runs, &ExclusionPolicy::learning_curves()).kept;
        let pts = learning_curve_points(&kept, &truth.scaling).unwrap();
        let j = fit_loss_ns(&pts).unwrap().step_law().unwrap();
        assert!(rel(j.alpha_n, T3.alpha_n) < 0.05, "seed {seed}: {}", j.alpha_n);
        assert!(rel(j.alpha_s, T3.alpha_s) < 0.05, "seed {seed}: {}", j.alpha_s);
    }
}

#[test]
fn early_transients_degrade_the_fit() {
    let truth = SyntheticTruth::published();
    let design = learning_curve_design(&log_grid(1e5, 1e9, 6));
    let runs = generate_synthetic_runs(&truth, &design, 0.0, 0).unwrap();
    let warmup = 300.0;
    // an initialization transient the law does not describe
    let pts: Vec<(f64, f64, f64)> = learning_curve_points(&runs, &truth.scaling)
        .unwrap()
        .into_iter()
        .zip(&runs)
        .map(|((n, s, l), r)| (n, s, l * (1.0 + 0.3 * (-(r.step as f64) / warmup).exp())))
        .collect();
    let late: Vec<_> = pts.iter().copied().filter(|p| p.1 >= 2.0 * warmup).collect();

    let all = fit_loss_ns(&pts).unwrap();
    let clean = fit_loss_ns(&late).unwrap();
    assert!(all.rss / all.n_points as f64 > 10.0 * clean.rss / clean.n_points as f64);

    // the transient drags the whole surface, late points included
    let late_in_all = rms(pts.iter().zip(&all.residuals).filter(|(p, _)| p.1 >= 2.0 * warmup).map(|(_, r)| *r));
    let late_in_clean = rms(clean.residuals.iter().copied());
    assert!(late_in_all > 3.0 * late_in_clean, "{late_in_all} vs {late_in_clean}");

    // dropping the early steps gets close to the truth again
    let j = clean.step_law().unwrap();
    let probe = loss_of_n_smin(1e8, 1e5, &j).unwrap();
    assert!(rel(probe, loss_of_n_smin(1e8, 1e5, &T3).unwrap()) < 0.01);
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    (sum / count as f64).sqrt()
}

/// Points on the hyperbola through `(S_min, E_min)` at the given batch sizes.
fn front_points(s_min: f64, e_min: f64, batches: &[f64]) -> Vec<ParetoPoint> {
    let b_crit = e_min / s_min;
    batches
        .iter()
        .map(|&b| {
            let steps = s_min * (1.0 + b_crit / b);
            ParetoPoint {
                steps,
                examples: tradeoff_curve(s_min, e_min, steps).unwrap(),
            }
        })
        .collect()
}

fn synthetic_fronts(noise: Option<(&mut Noise, f64)>) -> Vec<ParetoFront> {
    let mut noise = noise;
    let losses = log_grid(2.5, 5.0, 10);
    losses
        .iter()
        .map(|&l| {
            let b_crit = critical_batch(l, &A).unwrap();
            let s_min = 1e3 * l.powf(-4.0);
            let batches = log_grid(b_crit / 30.0, b_crit * 30.0, 12);
            let mut pts = front_points(s_min, s_min * b_crit, &batches);
            if let Some((rng, sigma)) = noise.as_mut() {
                // a noisy crossing step; tokens follow from the known batch
                for (p, b) in pts.iter_mut().zip(&batches) {
                    p.steps *= rng.factor(*sigma);
                    p.examples = p.steps * b;
                }
            }
            pareto_from_runs(&pts, l).unwrap()
        })
        .collect()
}

#[test]
fn pareto_and_critical_batch_round_trip() {
    let fronts = synthetic_fronts(None);
    for f in &fronts {
        let b = critical_batch(f.target_loss, &A).unwrap();
        assert!(rel(f.b_crit, b) < 1e-6, "{} vs {b}", f.b_crit);
    }
    let fit = fit_bcrit(&fronts).unwrap();
    assert!(rel(fit.param("alpha_B").unwrap(), A.alpha_b) < 1e-6);
    assert!(rel(fit.param("B_star").unwrap(), A.b_star) < 1e-6);
}

#[test]
fn pareto_and_critical_batch_under_noise() {
    for seed in [5, 6, 7] {
        let mut rng = Noise::new(seed);
        let fronts = synthetic_fronts(Some((&mut rng, 0.02)));
        let fit = fit_bcrit(&fronts).unwrap();
        let alpha_b = fit.param("alpha_B").unwrap();
        assert!(rel(alpha_b, A.alpha_b) < 0.10, "seed {seed}: {alpha_b}");
    }
}

#[test]
fn injected_unconverged_run_is_the_only_exclusion() {
    let truth = SyntheticTruth::published();
    let mut design = SyntheticDesign::grid(&[3e5, 1e6, 3e6], &[(1u64 << 19) as f64], &[None], 5_000_000, 60, 0);
    // same model stopped far too early
    design.runs.push(RunSpec {
        max_steps: 2_000,
        ..design.runs[1].clone()
    });
    let tol = 0.02;
    let labels = design.convergence_labels(&truth, tol);
    assert_eq!(labels.iter().filter(|(_, converged)| !converged).count(), 1);

    let runs = generate_synthetic_runs(&truth, &design, 0.0, 0).unwrap();
    let policy = ExclusionPolicy {
        convergence_tol: tol,
        ..ExclusionPolicy::loss_of_n()
    };
    let ex = apply_exclusions(&runs, &policy);
    let mut dropped: Vec<&str> = ex
        .excluded
        .iter()
        .filter(|(_, why)| *why == ExclusionReason::NotConverged)
        .map(|(r, _)| r.run_id.as_str())
        .collect();
    dropped.dedup();
    let expected: Vec<&str> = labels.iter().filter(|(_, c)| !c).map(|(id, _)| id.as_str()).collect();
    assert_eq!(dropped, expected);
}

#[test]
fn generation_and_fitting_are_deterministic() {
    let truth = SyntheticTruth::published();
    let design = learning_curve_design(&log_grid(1e5, 1e9, 4));
    let a = generate_synthetic_runs(&truth, &design, 0.01, 9).unwrap();
    let b = generate_synthetic_runs(&truth, &design, 0.01, 9).unwrap();
    assert_eq!(a, b);
    let pa = learning_curve_points(&a, &truth.scaling).unwrap();
    let fa = fit_loss_ns(&pa).unwrap();
    let fb = fit_loss_ns(&pa).unwrap();
    assert_eq!(fa, fb);
    for (x, y) in fa.params.values().zip(fb.params.values()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
