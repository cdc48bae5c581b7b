//! Validation metrics and one-slice-out cross validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};
use crate::estimate::{fit, FitConfig, FittedModel, SliParams};
use crate::geometry::{STDataset, STPoint};
use crate::predict::predict;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub me: f64,
    pub mae: f64,
    pub mare: f64,
    pub rmse: f64,
    pub rmsre: f64,
    pub r_pearson: f64,
    pub r_spearman: f64,
}

impl MetricSet {
    pub const HEADER: [&'static str; 7] = ["ME", "MAE", "MARE", "RMSE", "RMSRE", "R", "R_S"];

    pub fn as_array(&self) -> [f64; 7] {
        [self.me, self.mae, self.mare, self.rmse, self.rmsre, self.r_pearson, self.r_spearman]
    }
}

fn check_lengths(predicted: &[f64], truth: &[f64]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(SliError::DimensionMismatch(format!("{} predictions for {} values", predicted.len(), truth.len())));
    }
    if predicted.is_empty() {
        return Err(SliError::InvalidArgument("no values to compare".into()));
    }
    Ok(())
}

/// Error and correlation measures of `predicted` against `truth`.
/// Relative errors are infinite when `truth` contains a zero.
pub fn metrics(predicted: &[f64], truth: &[f64]) -> Result<MetricSet> {
    check_lengths(predicted, truth)?;
    let mut m = error_measures(predicted, truth);
    m.r_pearson = pearson(predicted, truth)?;
    m.r_spearman = spearman(predicted, truth)?;
    Ok(m)
}

/// As [`metrics`] but with NaN correlations instead of an error when either
/// input is constant.
pub fn metrics_lenient(predicted: &[f64], truth: &[f64]) -> Result<MetricSet> {
    check_lengths(predicted, truth)?;
    let mut m = error_measures(predicted, truth);
    m.r_pearson = pearson(predicted, truth).unwrap_or(f64::NAN);
    m.r_spearman = spearman(predicted, truth).unwrap_or(f64::NAN);
    Ok(m)
}

fn error_measures(predicted: &[f64], truth: &[f64]) -> MetricSet {
    let n = truth.len() as f64;
    let (mut me, mut mae, mut mse, mut are, mut sre) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, x) in predicted.iter().zip(truth) {
        let e = p - x;
        me += e;
        mae += e.abs();
        mse += e * e;
        if *x == 0.0 {
            are = f64::INFINITY;
            sre = f64::INFINITY;
        } else {
            are += (e / x).abs();
            sre += (e / x) * (e / x);
        }
    }
    MetricSet {
        me: me / n,
        mae: mae / n,
        mare: are / n,
        rmse: (mse / n).sqrt(),
        rmsre: (sre / n).sqrt(),
        r_pearson: f64::NAN,
        r_spearman: f64::NAN,
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(SliError::DegenerateCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Parameters used for every held-out slice.
#[derive(Clone, Debug, PartialEq)]
pub enum CvMode {
    /// Fixed parameters; bandwidths are recomputed on the retained slices.
    Fixed(SliParams),
    /// Parameters re-estimated on the retained slices.
    Refit(FitConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub time: f64,
    pub n: usize,
    pub metrics: MetricSet,
}

/// Correlations are NaN where predictions or truth are constant.
#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub per_slice: Vec<SliceMetrics>,
    pub aggregate: MetricSet,
    pub n_slices: usize,
    /// Cross-validation prediction of every data point, in dataset order.
    pub predicted: Vec<f64>,
}

/// Holds out each time slice in turn and predicts it from the others.
pub fn one_slice_out(mode: &CvMode, data: &STDataset) -> Result<CvReport> {
    let times = data.distinct_times();
    if times.len() < 2 {
        return Err(SliError::CrossValidation("at least two time slices are required".into()));
    }
    let slices: Vec<(f64, Vec<usize>, Vec<usize>)> = times
        .iter()
        .map(|&t| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data.points()[i].t == t);
            (t, held, kept)
        })
        .collect();

    let run = |(t, held, kept): &(f64, Vec<usize>, Vec<usize>)| -> Result<(f64, Vec<usize>, Vec<f64>)> {
        let train = data.subset(kept);
        let model = match mode {
            CvMode::Fixed(params) => FittedModel::from_params(train, params.clone())?,
            CvMode::Refit(config) => fit(&train, config)?,
        };
        let targets: Vec<STPoint> = held.iter().map(|&i| data.points()[i].clone()).collect();
        let r = predict(&model, &targets, 0.95)?;
        Ok((*t, held.clone(), r.mean))
    };
    let results: Vec<(f64, Vec<usize>, Vec<f64>)> = match mode {
        CvMode::Fixed(_) => slices.par_iter().map(run).collect::<Result<_>>()?,
        CvMode::Refit(_) => slices.iter().map(run).collect::<Result<_>>()?,
    };

    let mut predicted = vec![f64::NAN; data.len()];
    let mut per_slice = Vec::with_capacity(results.len());
    for (t, held, mean) in results {
        let truth: Vec<f64> = held.iter().map(|&i| data.values()[i]).collect();
        per_slice.push(SliceMetrics { time: t, n: held.len(), metrics: metrics_lenient(&mean, &truth)? });
        for (i, m) in held.into_iter().zip(mean) {
            predicted[i] = m;
        }
    }
    let aggregate = metrics_lenient(&predicted, data.values())?;
    Ok(CvReport { n_slices: per_slice.len(), per_slice, aggregate, predicted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let x = [1.0, 3.0, 2.0, 5.0];
        let m = metrics(&x, &x).unwrap();
        assert_eq!((m.me, m.mae, m.rmse, m.mare, m.rmsre), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!((m.r_pearson - 1.0).abs() < 1e-15 && (m.r_spearman - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_example() {
        let e = error_measures(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]);
        assert!(e.me.abs() < 1e-15);
        assert!((e.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((e.mare - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(), SliError::DegenerateCorrelation);
    }

    #[test]
    fn zero_truth_is_infinite() {
        let m = metrics(&[1.0, 2.0, 4.0], &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mare, f64::INFINITY);
        assert_eq!(m.rmsre, f64::INFINITY);
        assert!(m.rmse.is_finite());
    }

    #[test]
    fn tied_ranks() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn swap_symmetry() {
        let a = [1.0, 4.0, 2.5, 3.0];
        let b = [1.5, 3.0, 2.0, 4.5];
        let ab = metrics(&a, &b).unwrap();
        let ba = metrics(&b, &a).unwrap();
        assert_eq!(ab.me, -ba.me);
        assert_eq!(ab.mae, ba.mae);
        assert_eq!(ab.rmse, ba.rmse);
    }
}
