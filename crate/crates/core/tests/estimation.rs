mod common;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sli::*;

#[test]
fn rosenbrock_matches_grid_search() {
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let bounds = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let opts = BoxOptions { f_tol: 1e-12, x_tol: 1e-8, ..Default::default() };
    let r = minimize_box(f, &[-1.2, 1.0], &bounds, &opts).unwrap();

    let mut best = (f64::INFINITY, 0.0, 0.0);
    let steps = 800;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = [-2.0 + 4.0 * i as f64 / steps as f64, -2.0 + 4.0 * j as f64 / steps as f64];
            let v = f(&x);
            if v < best.0 {
                best = (v, x[0], x[1]);
            }
        }
    }
    assert!((r.x[0] - best.1).abs() < 1e-2 && (r.x[1] - best.2).abs() < 1e-2, "{:?} vs {:?}", r.x, best);
    assert!(r.f <= best.0 + 1e-6);
}

#[test]
fn pinned_bounds_return_pinned_values() {
    let inst = common::random_instance(3, 30, 0);
    let config = FitConfig {
        initial: inst.params.clone(),
        bounds: ParamBounds::pinned(&inst.params),
        lambda_mode: LambdaMode::Joint,
        options: BoxOptions::default(),
    };
    let m = fit(&inst.data, &config).unwrap();
    assert_eq!(m.params, inst.params);
    assert!((m.nll - nll(&inst.params, &inst.data).unwrap()).abs() <= 1e-12 * m.nll.abs().max(1.0));
    assert_eq!(m.diagnostics.unwrap().termination, Termination::NoFreeParameters);
}

#[test]
fn nearly_pinned_bounds() {
    let inst = common::random_instance(4, 30, 0);
    let p = &inst.params;
    let eps = 1e-9;
    let bounds = ParamBounds {
        trend_lower: vec![p.trend.coefficients[0] - eps],
        trend_upper: vec![p.trend.coefficients[0]],
        lambda: [p.precision.lambda * (1.0 - eps), p.precision.lambda],
        c1: [p.precision.c1 * (1.0 - eps), p.precision.c1],
        mu_s: [p.bandwidth.mu_s * (1.0 - eps), p.bandwidth.mu_s],
        mu_t: [p.bandwidth.mu_t * (1.0 - eps), p.bandwidth.mu_t],
    };
    let config = FitConfig { initial: p.clone(), bounds, lambda_mode: LambdaMode::Joint, options: BoxOptions::default() };
    let m = fit(&inst.data, &config).unwrap();
    assert!((m.params.precision.c1 / p.precision.c1 - 1.0).abs() <= 2.0 * eps);
    assert!((m.nll - nll(&m.params, &inst.data).unwrap()).abs() <= 1e-10 * m.nll.abs().max(1.0));
}

fn small_field(seed: u64) -> STDataset {
    simulate_grf(&GrfSpec { n_locations: 15, n_times: 8, domain_side: 50.0, seed, ..Default::default() }).unwrap()
}

#[test]
fn fit_improves_on_start_and_respects_bounds() {
    let data = small_field(1);
    let config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic).unwrap();
    let m = fit(&data, &config).unwrap();
    let d = m.diagnostics.clone().unwrap();
    assert!(m.nll <= d.nll_initial);
    let b = &config.bounds;
    assert!(b.mu_s[0] <= m.params.bandwidth.mu_s && m.params.bandwidth.mu_s <= b.mu_s[1]);
    assert!(b.mu_t[0] <= m.params.bandwidth.mu_t && m.params.bandwidth.mu_t <= b.mu_t[1]);
    assert!(b.trend_lower[0] <= m.params.trend.coefficients[0] && m.params.trend.coefficients[0] <= b.trend_upper[0]);
    assert!(d.nll_trace.windows(2).all(|w| w[1] <= w[0]));
    // The profiled scale is the optimum for the fitted structure.
    assert!((m.params.precision.lambda - profile_lambda(&m.params, &data).unwrap()).abs() <= 1e-12 * m.params.precision.lambda);
    assert!(factorize(&assemble_j(&m.weights, &m.params.precision).unwrap()).is_ok());
}

#[test]
fn joint_scale_search_agrees_with_profiling() {
    let data = small_field(2);
    let mut config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic).unwrap();
    let profiled = fit(&data, &config).unwrap();
    config.lambda_mode = LambdaMode::Joint;
    config.initial = profiled.params.clone();
    config.bounds.lambda = [profiled.params.precision.lambda / 100.0, profiled.params.precision.lambda * 100.0];
    let joint = fit(&data, &config).unwrap();
    assert!(joint.nll <= profiled.nll + 1e-3);
}

#[test]
fn fit_is_deterministic() {
    let data = small_field(3);
    let config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::composite(2.0), KernelFunction::Triangular).unwrap();
    let a = fit(&data, &config).unwrap();
    let b = fit(&data, &config).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.nll, b.nll);
    assert_eq!(a.diagnostics, b.diagnostics);
}

#[test]
fn constant_trend_with_white_noise_recovers_mean() {
    // i.i.d. noise on scattered points: the fitted constant lies within three
    // standard errors of the sample mean.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let normal = statrs::distribution::Normal::standard();
    use statrs::distribution::ContinuousCDF;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..12 {
        let s = vec![rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0];
        for t in 0..6 {
            pts.push(STPoint::new(s.clone(), t as f64));
            vals.push(4.0 + 0.5 * normal.inverse_cdf(rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12)));
        }
    }
    let data = STDataset::new(pts, vals).unwrap();
    let config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic).unwrap();
    let m = fit(&data, &config).unwrap();
    let n = data.len() as f64;
    let mean = data.mean();
    let sd = (data.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((m.params.trend.coefficients[0] - mean).abs() <= 3.0 * sd / n.sqrt());
}

#[test]
fn degenerate_residuals_are_reported() {
    let pts: Vec<STPoint> = (0..6).map(|i| STPoint::new(vec![i as f64], (i % 2) as f64)).collect();
    let data = STDataset::new(pts, vec![3.0; 6]).unwrap();
    let mut config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic).unwrap();
    config.bounds.trend_lower = vec![3.0];
    config.bounds.trend_upper = vec![3.0];
    config.initial.bandwidth = BandwidthSpec { k_t: 1, ..Default::default() };
    config.initial.trend = TrendModel::constant(3.0);
    assert_eq!(fit(&data, &config).unwrap_err(), SliError::DegenerateResiduals);
    assert_eq!(profile_lambda(&config.initial, &data).unwrap_err(), SliError::DegenerateResiduals);
}
