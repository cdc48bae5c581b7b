//! Conditional mean, conditional variance and prediction intervals at target
//! points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};
use crate::estimate::FittedModel;
use crate::geometry::STPoint;
use crate::precision::{assemble_blocks, BlockPrecision};
use crate::sparse_linalg::factorize;
use crate::trend::evaluate_trend;

pub use crate::trend::z_score;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// `1 / J_GG[p, p]`: variance of one target given all other points.
    #[default]
    Diagonal,
    /// `diag(J_GG^-1)`: marginal variance given the samples only.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub level: f64,
    pub variance: VarianceMode,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions { level: 0.95, variance: VarianceMode::Diagonal }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub targets: Vec<STPoint>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

impl PredictionResult {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn predict(model: &FittedModel, targets: &[STPoint], level: f64) -> Result<PredictionResult> {
    predict_with(model, targets, &PredictOptions { level, ..Default::default() })
}

pub fn predict_with(model: &FittedModel, targets: &[STPoint], options: &PredictOptions) -> Result<PredictionResult> {
    let z = z_score(options.level)?;
    if targets.is_empty() {
        return Ok(PredictionResult {
            targets: Vec::new(),
            mean: Vec::new(),
            variance: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            level: options.level,
        });
    }
    let p = &model.params;
    let blocks = assemble_blocks(&model.data, targets, &p.bandwidth, &p.metric, p.kernel, &p.precision, &p.conventions)?;
    let (mean, variance) = conditional_moments(model, targets, &blocks, options.variance)?;
    let half: Vec<f64> = variance.iter().map(|v| z * v.sqrt()).collect();
    Ok(PredictionResult {
        targets: targets.to_vec(),
        lower: mean.iter().zip(&half).map(|(m, h)| m - h).collect(),
        upper: mean.iter().zip(&half).map(|(m, h)| m + h).collect(),
        mean,
        variance,
        level: options.level,
    })
}

fn conditional_moments(
    model: &FittedModel,
    targets: &[STPoint],
    blocks: &BlockPrecision,
    mode: VarianceMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = crate::trend::detrend(&model.params.trend, &model.data)?;
    let m_g = evaluate_trend(&model.params.trend, targets)?;
    let factor = factorize(&blocks.j_gg)?;
    let shift = factor.solve(&blocks.j_gs.mul_vec(&x)?)?;
    let mean = m_g.iter().zip(&shift).map(|(m, s)| m - s).collect();
    let variance = match mode {
        VarianceMode::Diagonal => blocks.j_gg.csr().diagonal().iter().map(|d| 1.0 / d).collect(),
        VarianceMode::Exact => (0..blocks.p)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; blocks.p];
                e[i] = 1.0;
                factor.solve(&e).map(|col| col[i])
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    if let Some(i) = variance.iter().position(|v: &f64| !(*v > 0.0 && v.is_finite())) {
        return Err(SliError::NotPositiveDefinite { pivot: i, value: variance[i] });
    }
    Ok((mean, variance))
}

/// Prediction at `locations`, all at time `time`.
pub fn predict_slice(model: &FittedModel, time: f64, locations: &[Vec<f64>], level: f64) -> Result<PredictionResult> {
    let targets: Vec<STPoint> = locations.iter().map(|s| STPoint::new(s.clone(), time)).collect();
    predict(model, &targets, level)
}
