//! Negative log-likelihood, scale profiling and maximum likelihood fitting.
//!
//! With residuals `x' = x - m` and `J~ = lambda J`, the objective is
//! `NLL = (x'^T J~ x' / lambda + N ln lambda - ln det J~) / 2`, which omits the
//! `N ln(2 pi) / 2` constant. For fixed `J~` it is minimized by
//! `lambda* = x'^T J~ x' / N`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};
use crate::geometry::{BandwidthSpec, KnnDistances, MetricSpec, STDataset};
use crate::kernels::{KernelFunction, NeighborIndex, WeightMatrix};
use crate::optimize::{minimize_box, BoxOptions, Bounds, Termination};
use crate::precision::{assemble_j_tilde, ModelConventions, PrecisionParams};
use crate::sparse_linalg::{factorize, Factorization, SparseSymMatrix};
use crate::trend::{ols_fit, TrendBasis, TrendModel};

/// Full model parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliParams {
    pub trend: TrendModel,
    pub precision: PrecisionParams,
    pub bandwidth: BandwidthSpec,
    pub metric: MetricSpec,
    pub kernel: KernelFunction,
    #[serde(default)]
    pub conventions: ModelConventions,
}

impl SliParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.trend.basis.validate()?;
        let k = self.trend.basis.n_columns(dim);
        if k != self.trend.coefficients.len() {
            return Err(SliError::DimensionMismatch(format!(
                "trend basis has {k} functions but {} coefficients",
                self.trend.coefficients.len()
            )));
        }
        self.precision.validate()?;
        self.bandwidth.validate()?;
        self.metric.validate()
    }
}

/// Normalized weights of a dataset under `params`.
pub fn dataset_weights(params: &SliParams, data: &STDataset) -> Result<WeightMatrix> {
    let knn = KnnDistances::for_dataset(data, &params.bandwidth, &params.metric)?;
    let bw = knn.bandwidths(&params.bandwidth, &params.metric)?;
    let w = NeighborIndex::new(data.points()).raw_weights(&bw, &params.metric, params.kernel, params.conventions.diagonal)?;
    WeightMatrix::from_raw(w)
}

fn residuals(params: &SliParams, data: &STDataset) -> Result<Vec<f64>> {
    params.validate(data.dim())?;
    crate::trend::detrend(&params.trend, data)
}

/// Negative log-likelihood at `params`.
pub fn nll(params: &SliParams, data: &STDataset) -> Result<f64> {
    let weights = dataset_weights(params, data)?;
    nll_with_weights(params, data, &weights)
}

/// As [`nll`], reusing weights built for the same bandwidth settings.
pub fn nll_with_weights(params: &SliParams, data: &STDataset, weights: &WeightMatrix) -> Result<f64> {
    let x = residuals(params, data)?;
    let jt = assemble_j_tilde(weights, params.precision.c1)?;
    let logdet = factorize(&jt)?.log_determinant()?;
    Ok(nll_terms(jt.quadratic_form(&x)?, logdet, x.len(), params.precision.lambda))
}

fn nll_terms(quad: f64, logdet: f64, n: usize, lambda: f64) -> f64 {
    0.5 * (quad / lambda + n as f64 * lambda.ln() - logdet)
}

/// Scale minimizing the NLL for the remaining parameters of `params`.
pub fn profile_lambda(params: &SliParams, data: &STDataset) -> Result<f64> {
    let weights = dataset_weights(params, data)?;
    let x = residuals(params, data)?;
    let jt = assemble_j_tilde(&weights, params.precision.c1)?;
    profiled_scale(&jt, &x)
}

fn profiled_scale(jt: &SparseSymMatrix, x: &[f64]) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) {
        return Err(SliError::DegenerateResiduals);
    }
    Ok(jt.quadratic_form(x)? / x.len() as f64)
}

/// How the scale `lambda` is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Replaced by its closed-form optimum at every evaluation.
    #[default]
    Profiled,
    /// Searched together with the other parameters.
    Joint,
}

/// Box constraints of the free parameters. `lower == upper` pins a value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub trend_lower: Vec<f64>,
    pub trend_upper: Vec<f64>,
    pub lambda: [f64; 2],
    pub c1: [f64; 2],
    pub mu_s: [f64; 2],
    pub mu_t: [f64; 2],
}

impl ParamBounds {
    /// Trend bounds `[lower, upper]` with default ranges for the rest.
    pub fn with_trend(trend_lower: Vec<f64>, trend_upper: Vec<f64>) -> Self {
        ParamBounds { trend_lower, trend_upper, lambda: [1e-6, 1e6], c1: [1e-3, 1e7], mu_s: [0.1, 10.0], mu_t: [0.1, 10.0] }
    }

    /// Every parameter pinned at its value in `params`.
    pub fn pinned(params: &SliParams) -> Self {
        let b = params.trend.coefficients.clone();
        let p = |v: f64| [v, v];
        ParamBounds {
            trend_lower: b.clone(),
            trend_upper: b,
            lambda: p(params.precision.lambda),
            c1: p(params.precision.c1),
            mu_s: p(params.bandwidth.mu_s),
            mu_t: p(params.bandwidth.mu_t),
        }
    }

    pub fn validate(&self, n_trend: usize) -> Result<()> {
        if self.trend_lower.len() != n_trend || self.trend_upper.len() != n_trend {
            return Err(SliError::InvalidBounds(format!("expected {n_trend} trend bounds")));
        }
        for (i, (l, u)) in self.trend_lower.iter().zip(&self.trend_upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(SliError::InvalidBounds(format!("trend coefficient {i}: [{l}, {u}]")));
            }
        }
        for (name, [l, u]) in [("lambda", self.lambda), ("c1", self.c1), ("mu_s", self.mu_s), ("mu_t", self.mu_t)] {
            if !(l > 0.0 && u.is_finite() && l <= u) {
                return Err(SliError::InvalidBounds(format!("{name}: [{l}, {u}] must satisfy 0 < lower <= upper")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Starting point; clamped into the bounds before the search.
    pub initial: SliParams,
    pub bounds: ParamBounds,
    pub lambda_mode: LambdaMode,
    pub options: BoxOptions,
}

impl FitConfig {
    /// Trend start and bounds from OLS, `c1 = mu_s = mu_t = 1`, `K_s = K_t = 3`.
    pub fn from_ols(data: &STDataset, basis: TrendBasis, metric: MetricSpec, kernel: KernelFunction) -> Result<Self> {
        let ols = ols_fit(&basis, data)?;
        let initial = SliParams {
            trend: ols.model(basis),
            precision: PrecisionParams { lambda: 1.0, c1: 1.0 },
            bandwidth: BandwidthSpec::default(),
            metric,
            kernel,
            conventions: ModelConventions::default(),
        };
        Ok(FitConfig {
            initial,
            bounds: ParamBounds::with_trend(ols.lower, ols.upper),
            lambda_mode: LambdaMode::default(),
            options: BoxOptions::default(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub nll_initial: f64,
    /// Nonzeros of `J` over `N^2`.
    pub sparsity_index: f64,
    pub nnz: usize,
    pub nll_trace: Vec<f64>,
}

/// Data, parameters and the precision structure at those parameters.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub data: STDataset,
    pub params: SliParams,
    pub nll: f64,
    pub weights: WeightMatrix,
    /// Factorization of `J~ = lambda J`.
    pub factor: Factorization,
    pub diagnostics: Option<FitDiagnostics>,
}

impl FittedModel {
    /// Model at fixed parameters, without any search.
    pub fn from_params(data: STDataset, params: SliParams) -> Result<Self> {
        let weights = dataset_weights(&params, &data)?;
        let x = residuals(&params, &data)?;
        let jt = assemble_j_tilde(&weights, params.precision.c1)?;
        let factor = factorize(&jt)?;
        let nll = nll_terms(jt.quadratic_form(&x)?, factor.log_determinant()?, x.len(), params.precision.lambda);
        Ok(FittedModel { data, params, nll, weights, factor, diagnostics: None })
    }

    pub fn precision_nnz(&self) -> usize {
        let jt = assemble_j_tilde(&self.weights, self.params.precision.c1).expect("weights were validated");
        jt.nnz()
    }

    pub fn sparsity_index(&self) -> f64 {
        let n = self.data.len() as f64;
        self.precision_nnz() as f64 / (n * n)
    }
}

struct Structure {
    jt: SparseSymMatrix,
    logdet: f64,
}

/// Objective evaluator with caches of weights per `(mu_s, mu_t)` and of
/// factorized precision matrices per `(mu_s, mu_t, c1)`.
struct Evaluator<'a> {
    data: &'a STDataset,
    template: &'a SliParams,
    knn: KnnDistances,
    index: NeighborIndex,
    design: DMatrix<f64>,
    values: DVector<f64>,
    weights: VecDeque<([u64; 2], Arc<WeightMatrix>)>,
    structures: VecDeque<([u64; 3], Arc<Structure>)>,
}

const CACHE: usize = 16;

fn cached<K: PartialEq + Copy, V>(cache: &mut VecDeque<(K, Arc<V>)>, key: K, make: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
    if let Some((_, v)) = cache.iter().find(|(k, _)| *k == key) {
        return Ok(v.clone());
    }
    let v = Arc::new(make()?);
    if cache.len() == CACHE {
        cache.pop_front();
    }
    cache.push_back((key, v.clone()));
    Ok(v)
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a STDataset, template: &'a SliParams) -> Result<Self> {
        Ok(Evaluator {
            data,
            template,
            knn: KnnDistances::for_dataset(data, &template.bandwidth, &template.metric)?,
            index: NeighborIndex::new(data.points()),
            design: template.trend.basis.design(data.points()),
            values: DVector::from_column_slice(data.values()),
            weights: VecDeque::new(),
            structures: VecDeque::new(),
        })
    }

    fn weights(&mut self, mu_s: f64, mu_t: f64) -> Result<Arc<WeightMatrix>> {
        let spec = BandwidthSpec { mu_s, mu_t, ..self.template.bandwidth };
        let (knn, index, t) = (&self.knn, &self.index, self.template);
        cached(&mut self.weights, [mu_s.to_bits(), mu_t.to_bits()], || {
            let bw = knn.bandwidths(&spec, &t.metric)?;
            WeightMatrix::from_raw(index.raw_weights(&bw, &t.metric, t.kernel, t.conventions.diagonal)?)
        })
    }

    fn structure(&mut self, mu_s: f64, mu_t: f64, c1: f64) -> Result<Arc<Structure>> {
        let w = self.weights(mu_s, mu_t)?;
        cached(&mut self.structures, [mu_s.to_bits(), mu_t.to_bits(), c1.to_bits()], || {
            let jt = assemble_j_tilde(&w, c1)?;
            let logdet = factorize(&jt)?.log_determinant()?;
            Ok(Structure { jt, logdet })
        })
    }

    fn residuals(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.design * DVector::from_column_slice(b);
        (&self.values - m).iter().copied().collect()
    }

    /// NLL and the scale used, profiling when `lambda` is `None`.
    fn eval(&mut self, p: &Point) -> Result<(f64, f64)> {
        let s = self.structure(p.mu_s, p.mu_t, p.c1)?;
        let x = self.residuals(&p.b);
        let n = self.data.len();
        let quad = s.jt.quadratic_form(&x)?;
        let lambda = match p.lambda {
            Some(l) => l,
            None => {
                if quad <= 0.0 {
                    return Err(SliError::DegenerateResiduals);
                }
                quad / n as f64
            }
        };
        Ok((nll_terms(quad, s.logdet, n, lambda), lambda))
    }
}

#[derive(Clone, Debug)]
struct Point {
    b: Vec<f64>,
    lambda: Option<f64>,
    c1: f64,
    mu_s: f64,
    mu_t: f64,
}

/// Map between parameters and the unit box searched by the optimizer.
/// Trend coefficients scale linearly, positive parameters logarithmically.
struct Coordinates {
    ranges: Vec<(f64, f64, bool)>,
    n_trend: usize,
    joint: bool,
}

impl Coordinates {
    fn new(bounds: &ParamBounds, mode: LambdaMode) -> Self {
        let mut ranges: Vec<(f64, f64, bool)> =
            bounds.trend_lower.iter().zip(&bounds.trend_upper).map(|(&l, &u)| (l, u, false)).collect();
        let joint = mode == LambdaMode::Joint;
        if joint {
            ranges.push((bounds.lambda[0], bounds.lambda[1], true));
        }
        for [l, u] in [bounds.c1, bounds.mu_s, bounds.mu_t] {
            ranges.push((l, u, true));
        }
        Coordinates { ranges, n_trend: bounds.trend_lower.len(), joint }
    }

    fn unit_bounds(&self) -> Bounds {
        let upper = self.ranges.iter().map(|&(l, u, _)| if l < u { 1.0 } else { 0.0 }).collect();
        Bounds { lower: vec![0.0; self.ranges.len()], upper }
    }

    fn to_unit(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.ranges)
            .map(|(&x, &(l, u, log))| {
                if l >= u {
                    0.0
                } else if log {
                    ((x.clamp(l, u).ln() - l.ln()) / (u.ln() - l.ln())).clamp(0.0, 1.0)
                } else {
                    ((x.clamp(l, u) - l) / (u - l)).clamp(0.0, 1.0)
                }
            })
            .collect()
    }

    fn from_unit(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.ranges)
            .map(|(&z, &(l, u, log))| {
                if l >= u || z <= 0.0 {
                    l
                } else if z >= 1.0 {
                    u
                } else if log {
                    (l.ln() + z * (u.ln() - l.ln())).exp()
                } else {
                    l + z * (u - l)
                }
            })
            .collect()
    }

    fn point(&self, v: &[f64]) -> Point {
        let k = self.n_trend;
        let (lambda, rest) = if self.joint { (Some(v[k]), &v[k + 1..]) } else { (None, &v[k..]) };
        Point { b: v[..k].to_vec(), lambda, c1: rest[0], mu_s: rest[1], mu_t: rest[2] }
    }

    fn values(&self, p: &SliParams) -> Vec<f64> {
        let mut v = p.trend.coefficients.clone();
        if self.joint {
            v.push(p.precision.lambda);
        }
        v.extend([p.precision.c1, p.bandwidth.mu_s, p.bandwidth.mu_t]);
        v
    }
}

/// Maximum likelihood estimation of trend coefficients, `c1`, `mu_s`, `mu_t`
/// and `lambda`, with `K_s`, `K_t`, metric and kernel held fixed.
pub fn fit(data: &STDataset, config: &FitConfig) -> Result<FittedModel> {
    let init = &config.initial;
    init.validate(data.dim())?;
    config.bounds.validate(init.trend.coefficients.len())?;
    let coords = Coordinates::new(&config.bounds, config.lambda_mode);
    let unit = coords.unit_bounds();
    let z0 = coords.to_unit(&coords.values(init));

    let mut eval = Evaluator::new(data, init)?;
    // Surface the cause when the starting point itself cannot be evaluated.
    eval.eval(&coords.point(&coords.from_unit(&z0)))?;
    let result = minimize_box(
        |z| match eval.eval(&coords.point(&coords.from_unit(z))) {
            Ok((v, _)) if v.is_finite() => v,
            _ => f64::INFINITY,
        },
        &z0,
        &unit,
        &config.options,
    )?;

    let best = coords.point(&coords.from_unit(&result.x));
    let (_, lambda) = eval.eval(&best)?;
    let params = SliParams {
        trend: TrendModel { basis: init.trend.basis.clone(), coefficients: best.b.clone() },
        precision: PrecisionParams { lambda, c1: best.c1 },
        bandwidth: BandwidthSpec { mu_s: best.mu_s, mu_t: best.mu_t, ..init.bandwidth },
        ..init.clone()
    };
    let weights = (*eval.weights(best.mu_s, best.mu_t)?).clone();
    let jt = assemble_j_tilde(&weights, best.c1)?;
    let factor = factorize(&jt)?;
    let n = data.len();
    let x = residuals(&params, data)?;
    let nll = nll_terms(jt.quadratic_form(&x)?, factor.log_determinant()?, n, lambda);
    let diagnostics = FitDiagnostics {
        iterations: result.iterations,
        evaluations: result.evaluations,
        termination: result.termination,
        nll_initial: result.f_initial,
        sparsity_index: jt.nnz() as f64 / (n as f64 * n as f64),
        nnz: jt.nnz(),
        nll_trace: result.trace,
    };
    Ok(FittedModel { data: data.clone(), params, nll, weights, factor, diagnostics: Some(diagnostics) })
}
