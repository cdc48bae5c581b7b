mod common;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use sli::evaluate::{average_ranks, pearson, spearman};
use sli::trend::{detrend, evaluate_trend, ols_fit};
use sli::*;

fn periodic_basis() -> TrendBasis {
    TrendBasis(vec![BasisTerm::Constant, BasisTerm::PeriodicTime { period: 24.0, envelope_degree: 2 }])
}

#[test]
fn periodic_regression_coverage() {
    // Coefficients of a daily-periodic trend with quadratic envelopes,
    // recovered from noisy hourly data.
    let truth = [40.0, 8.0, 0.05, -0.001, -5.0, 0.1, 0.0005];
    let basis = periodic_basis();
    let model = TrendModel::new(basis.clone(), truth.to_vec()).unwrap();
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<STPoint> = (1..=120).map(|t| STPoint::new(vec![0.0], t as f64)).collect();
    let m = evaluate_trend(&model, &pts).unwrap();
    let reps = 100;
    let mut misses = [0usize; 7];
    for _ in 0..reps {
        let vals: Vec<f64> = m.iter().map(|v| v + 3.0 * normal.inverse_cdf(rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12))).collect();
        let fit = ols_fit(&basis, &STDataset::new(pts.clone(), vals).unwrap()).unwrap();
        for k in 0..7 {
            if (fit.coefficients[k] - truth[k]).abs() > 3.0 * fit.std_errors[k] {
                misses[k] += 1;
            }
        }
    }
    // A 3-sigma miss has probability 0.27%; allow a handful over 100 replicates.
    for (k, miss) in misses.iter().enumerate() {
        assert!(*miss <= 3, "coefficient {k}: {miss} misses");
    }
}

#[test]
fn trend_is_linear_in_coefficients() {
    let basis = TrendBasis(vec![BasisTerm::Constant, BasisTerm::PolyTime { degree: 2 }, BasisTerm::PolySpace { degree: 2 }]);
    let pts = vec![STPoint::new(vec![1.0, -2.0], 3.0), STPoint::new(vec![0.5, 4.0], -1.0)];
    let a = vec![1.0, 2.0, -0.5, 0.3, 0.1, -0.2, 0.05];
    let b = vec![-3.0, 0.5, 0.25, 1.0, 0.0, 0.7, -0.1];
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let ea = evaluate_trend(&TrendModel::new(basis.clone(), a).unwrap(), &pts).unwrap();
    let eb = evaluate_trend(&TrendModel::new(basis.clone(), b).unwrap(), &pts).unwrap();
    let es = evaluate_trend(&TrendModel::new(basis, sum).unwrap(), &pts).unwrap();
    for i in 0..2 {
        assert!((ea[i] + eb[i] - es[i]).abs() < 1e-12);
    }
}

#[test]
fn detrended_synthetic_has_expected_mean() {
    let data = simulate_grf(&GrfSpec { seed: 9, ..Default::default() }).unwrap();
    let r = detrend(&TrendModel::constant(9.7424), &data).unwrap();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    assert!((mean - (data.mean() - 9.7424)).abs() < 1e-10);
}

#[test]
fn spearman_without_ties_is_pearson_on_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = a.iter().map(|x| x * x + 0.3 * rng.random::<f64>()).collect();
    // Ranks from a plain sort, independent of the tie-averaging code.
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = (pos + 1) as f64;
        }
        r
    };
    assert_eq!(average_ranks(&a), rank(&a));
    assert!((spearman(&a, &b).unwrap() - pearson(&rank(&a), &rank(&b)).unwrap()).abs() < 1e-15);
}

fn toy_two_slices() -> STDataset {
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for (k, s) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.5], [2.0, 0.5]].iter().enumerate() {
        for t in [0.0, 1.0] {
            pts.push(STPoint::new(s.to_vec(), t));
            vals.push(3.0 + k as f64 * 0.7 + t * 0.4 + if k % 2 == 0 { 0.3 } else { -0.2 });
        }
    }
    STDataset::new(pts, vals).unwrap()
}

// Composite metric: a single retained time stamp leaves no temporal
// neighbors for separable bandwidths.
fn toy_params(c1: f64) -> SliParams {
    SliParams {
        trend: TrendModel::constant(4.0),
        precision: PrecisionParams { lambda: 1.0, c1 },
        bandwidth: BandwidthSpec { mu_s: 1.5, mu_t: 1.5, k_s: 2, k_t: 1 },
        metric: MetricSpec::composite(1.0),
        kernel: KernelFunction::Quadratic,
        conventions: ModelConventions::default(),
    }
}

#[test]
fn two_slice_cross_validation() {
    let data = toy_two_slices();
    let report = one_slice_out(&CvMode::Fixed(toy_params(5.0)), &data).unwrap();
    assert_eq!(report.n_slices, 2);
    assert_eq!(report.per_slice.iter().map(|s| s.n).sum::<usize>(), data.len());
    // Each slice is predicted from a model conditioned on the other slice.
    for slice in &report.per_slice {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data.points()[i].t == slice.time);
        let model = FittedModel::from_params(data.subset(&kept), toy_params(5.0)).unwrap();
        let targets: Vec<STPoint> = held.iter().map(|&i| data.points()[i].clone()).collect();
        let r = predict(&model, &targets, 0.95).unwrap();
        for (i, m) in held.iter().zip(&r.mean) {
            assert_eq!(report.predicted[*i], *m);
        }
    }
    // Pooled squared error is the size-weighted mean of the slice values.
    let pooled: f64 = report.per_slice.iter().map(|s| s.n as f64 * s.metrics.rmse.powi(2)).sum::<f64>() / data.len() as f64;
    assert!((pooled - report.aggregate.rmse.powi(2)).abs() < 1e-12);
}

#[test]
fn zero_coupling_predicts_the_trend() {
    let data = toy_two_slices();
    let report = one_slice_out(&CvMode::Fixed(toy_params(0.0)), &data).unwrap();
    assert!(report.predicted.iter().all(|p| *p == 4.0));
    let truth = data.values();
    let n = truth.len() as f64;
    let me = truth.iter().map(|x| 4.0 - x).sum::<f64>() / n;
    let rmse = (truth.iter().map(|x| (4.0 - x).powi(2)).sum::<f64>() / n).sqrt();
    let m = report.aggregate;
    assert!((m.me - me).abs() < 1e-12 && (m.rmse - rmse).abs() < 1e-12);
    // A constant prediction has no correlation.
    assert!(m.r_pearson.is_nan() && m.r_spearman.is_nan());
}

#[test]
fn single_slice_is_rejected() {
    let pts = vec![STPoint::new(vec![0.0], 1.0), STPoint::new(vec![1.0], 1.0)];
    let data = STDataset::new(pts, vec![1.0, 2.0]).unwrap();
    assert!(matches!(one_slice_out(&CvMode::Fixed(toy_params(1.0)), &data), Err(SliError::CrossValidation(_))));
}

#[test]
fn cross_validation_is_deterministic() {
    let data = toy_two_slices();
    let a = one_slice_out(&CvMode::Fixed(toy_params(2.0)), &data).unwrap();
    let b = one_slice_out(&CvMode::Fixed(toy_params(2.0)), &data).unwrap();
    assert_eq!(a.predicted, b.predicted);
}

#[test]
fn refit_mode_runs_per_slice() {
    let data = simulate_grf(&GrfSpec { n_locations: 12, n_times: 5, domain_side: 40.0, seed: 8, ..Default::default() }).unwrap();
    let config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic).unwrap();
    let report = one_slice_out(&CvMode::Refit(config), &data).unwrap();
    assert_eq!(report.n_slices, 5);
    assert!(report.predicted.iter().all(|p| p.is_finite()));
}
