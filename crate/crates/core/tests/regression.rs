use nalgebra::{DMatrix, DVector};
use rand::Rng;
use vrslice_core::predictor::{
    build_design, fit_ols, fit_quantile, fit_scoped, pinball_loss, residual_std_surface, residuals, Method,
    PredictionSpec, Scope,
};
use vrslice_core::rng;
use vrslice_core::trace::{surrogate_trace, synthesize_trace, FrameTrace, Source, TraceMeta, SURROGATE_AR};
use vrslice_core::Error;

fn predictions(x: &DMatrix<f64>, theta: &[f64]) -> DVector<f64> {
    x * DVector::from_column_slice(theta)
}

/// Type-1 sample quantile: the ⌈np⌉-th order statistic.
fn lower_order_statistic(ys: &[f64], p: f64) -> f64 {
    let mut v = ys.to_vec();
    v.sort_by(f64::total_cmp);
    let k = (v.len() as f64 * p).ceil() as usize;
    v[k.max(1) - 1]
}

#[test]
fn ols_residuals_are_orthogonal_to_regressors() {
    let t = surrogate_trace("vp", 30_000_000, 60, 50_000, 3).unwrap();
    let d = build_design(&t.normalize(), &PredictionSpec::ols(6, 1, 1)).unwrap();
    let (theta, _) = fit_ols(&d.x, &d.y).unwrap();
    let r = &d.y - predictions(&d.x, &theta);
    let xtr = d.x.transpose() * r;
    let worst = xtr.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / d.rows() as f64;
    assert!(worst < 1e-8, "max |Xᵀr|/n = {worst:e}");
}

#[test]
fn exact_recovery_without_noise() {
    let mut r = rng::stream(9, 0);
    let theta = [0.3, -1.2, 0.7, 2.5];
    let rows = 400;
    let x = DMatrix::from_fn(rows, 4, |_, c| if c == 0 { 1.0 } else { r.random_range(-3.0..3.0) });
    let y = &x * DVector::from_column_slice(&theta);
    let (fit, mse) = fit_ols(&x, &y).unwrap();
    for (a, b) in fit.iter().zip(&theta) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(mse < 1e-20);
    let (q, loss) = fit_quantile(&x, &y, 0.9).unwrap();
    for (a, b) in q.iter().zip(&theta) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(loss < 1e-8);
}

#[test]
fn ar_coefficients_recovered_within_three_standard_errors() {
    let meta = TraceMeta::new("ar", 30_000_000, 60, Source::Synthetic).unwrap();
    let b = 0.104 * meta.expected_frame_bytes();
    let trace = synthesize_trace(meta, 50_000, &SURROGATE_AR, b, 77).unwrap();
    let d = build_design(&trace.normalize(), &PredictionSpec::ols(6, 1, 1)).unwrap();
    let (theta, mse) = fit_ols(&d.x, &d.y).unwrap();
    let rows = d.rows() as f64;
    let sigma2 = mse * rows / (rows - 7.0);
    let cov = (d.x.transpose() * &d.x).try_inverse().unwrap() * sigma2;
    let intercept = 1.0 - SURROGATE_AR.iter().sum::<f64>();
    let truth: Vec<f64> = std::iter::once(intercept).chain(SURROGATE_AR).collect();
    for j in 0..7 {
        let se = cov[(j, j)].sqrt();
        assert!(
            (theta[j] - truth[j]).abs() < 3.0 * se,
            "θ{j} = {} vs {} (se {se})",
            theta[j],
            truth[j]
        );
    }
}

#[test]
fn quantile_fit_covers_its_level() {
    let t = surrogate_trace("vp", 30_000_000, 60, 50_000, 12).unwrap();
    for p in [0.01, 0.5, 0.95, 0.99, 0.999] {
        let spec = PredictionSpec::quantile(6, 1, 1, p);
        let d = build_design(&t.normalize(), &spec).unwrap();
        let (theta, _) = fit_quantile(&d.x, &d.y, p).unwrap();
        let pred = predictions(&d.x, &theta);
        let below = d.y.iter().zip(pred.iter()).filter(|(y, f)| y <= f).count();
        let coverage = below as f64 / d.rows() as f64;
        let tol = 8.0 / d.rows() as f64;
        assert!(
            (coverage - p).abs() <= tol,
            "p = {p}: coverage {coverage}, tolerance {tol}"
        );
    }
}

#[test]
fn intercept_only_quantile_is_an_order_statistic() {
    let mut r = rng::stream(4, 0);
    let ys: Vec<f64> = (0..501).map(|_| rng::laplace(&mut r, 2.0, 1.0)).collect();
    let x = DMatrix::from_element(ys.len(), 1, 1.0);
    let y = DVector::from_column_slice(&ys);
    for p in [0.1, 0.5, 0.95] {
        let (theta, loss) = fit_quantile(&x, &y, p).unwrap();
        let q = lower_order_statistic(&ys, p);
        assert!((theta[0] - q).abs() < 1e-6, "p = {p}: {} vs {q}", theta[0]);
        let best = pinball_loss(ys.iter().map(|v| v - q), p);
        assert!(loss <= best + 1e-9);
    }
}

#[test]
fn median_regression_is_close_to_ols_under_symmetric_noise() {
    let t = surrogate_trace("vp", 30_000_000, 60, 50_000, 5).unwrap();
    let d = build_design(&t.normalize(), &PredictionSpec::ols(6, 1, 1)).unwrap();
    let (ols, _) = fit_ols(&d.x, &d.y).unwrap();
    let (med, _) = fit_quantile(&d.x, &d.y, 0.5).unwrap();
    let diff = predictions(&d.x, &ols) - predictions(&d.x, &med);
    let mean_abs = diff.iter().map(|v| v.abs()).sum::<f64>() / d.rows() as f64;
    assert!(mean_abs < 0.01, "mean |OLS - median| = {mean_abs}");
}

#[test]
fn fits_are_scale_equivariant() {
    let t = surrogate_trace("vp", 30_000_000, 60, 5_000, 6).unwrap();
    let d = build_design(&t.normalize(), &PredictionSpec::ols(4, 1, 1)).unwrap();
    let (a, _) = fit_ols(&d.x, &d.y).unwrap();
    let (b, _) = fit_ols(&(&d.x * 3.0), &(&d.y * 3.0)).unwrap();
    // Scaling every column including the intercept leaves θ unchanged.
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-9);
    }
    let (qa, _) = fit_quantile(&d.x, &d.y, 0.9).unwrap();
    let (qb, _) = fit_quantile(&d.x, &(&d.y * 2.0), 0.9).unwrap();
    let pa = predictions(&d.x, &qa) * 2.0;
    let pb = predictions(&d.x, &qb);
    let gap = (pa - pb).amax();
    assert!(gap < 1e-4, "max prediction gap {gap}");
}

#[test]
fn duplicated_column_is_rank_deficient() {
    let x = DMatrix::from_fn(50, 3, |r, c| if c == 0 { 1.0 } else { (r % 7) as f64 });
    let y = DVector::from_fn(50, |r, _| r as f64);
    assert!(matches!(fit_ols(&x, &y), Err(Error::RankDeficient { .. })));
}

#[test]
fn residual_std_decreases_with_memory() {
    let t = surrogate_trace("vp", 30_000_000, 60, 30_000, 8).unwrap();
    let surface = residual_std_surface(&t, &[0, 1, 2, 4, 6], &[1], 1, Method::Ols, None).unwrap();
    for pair in surface.windows(2) {
        assert!(pair[1][0] <= pair[0][0] * (1.0 + 1e-3), "{surface:?}");
    }
    // Memory matters: AR(6) dynamics leave N = 0 clearly worse than N = 6.
    assert!(surface[4][0] < 0.9 * surface[0][0]);
}

#[test]
fn generalization_scopes_order_in_sample_error() {
    let a = surrogate_trace("a", 30_000_000, 60, 10_000, 1).unwrap();
    let a2 = surrogate_trace("a", 10_000_000, 60, 10_000, 2).unwrap();
    // A different process for the other content.
    let meta = TraceMeta::new("b", 20_000_000, 60, Source::Synthetic).unwrap();
    let b_noise = 0.2 * meta.expected_frame_bytes();
    let b = synthesize_trace(meta, 10_000, &[0.8, -0.1], b_noise, 3).unwrap();
    let spec = PredictionSpec::ols(6, 1, 1);
    let norm: Vec<_> = [&a, &a2, &b].iter().map(|t| t.normalize()).collect();
    let crm = fit_scoped(&norm[..1], &spec, Scope::ContentRate).unwrap();
    let cm = fit_scoped(&norm[..2], &spec, Scope::Content).unwrap();
    let gm = fit_scoped(&norm, &spec, Scope::General).unwrap();
    let mse = |m, ts: &[&FrameTrace]| -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for t in ts {
            let r = residuals(m, t).unwrap();
            let unit = t.meta().expected_frame_bytes();
            sum += r.w.iter().map(|w| (w / unit).powi(2)).sum::<f64>();
            n += r.len();
        }
        sum / n as f64
    };
    assert!(mse(&crm, &[&a]) <= mse(&cm, &[&a]));
    assert!(mse(&cm, &[&a, &a2]) <= mse(&gm, &[&a, &a2]));
    assert!(matches!(
        fit_scoped(&norm[1..], &spec, Scope::Content),
        Err(Error::ScopeMismatch(_))
    ));
}
