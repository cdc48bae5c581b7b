//! Run configuration: a TOML document whose sections bind the model
//! components. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sli::estimate::LambdaMode;
use sli::trend::ols_fit_level;
use sli::{
    BandwidthSpec, BoxOptions, C0Convention, CvMode, DiagonalConvention, FitConfig, GrfSpec, KernelFunction, MetricKind, MetricSpec,
    ModelConventions, ParamBounds, PrecisionParams, STDataset, SliParams, TrendBasis, TrendModel, VarianceMode,
};

use crate::error::{invalid, CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random draw of the run.
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub bandwidth: BandwidthSection,
    #[serde(default)]
    pub conventions: ConventionsSection,
    #[serde(default)]
    pub trend: TrendSection,
    #[serde(default)]
    pub estimation: EstimationSection,
    #[serde(default)]
    pub prediction: PredictionSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Sample file; written by `simulate`, read by `fit` and `cv`.
    pub path: PathBuf,
    /// Number of spatial coordinates.
    pub dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub kind: MetricKind,
    pub alpha: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection { kind: MetricKind::Separable, alpha: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub kind: KernelFunction,
}

/// Neighbor orders and the starting bandwidth scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthSection {
    pub mu_s: f64,
    pub mu_t: f64,
    pub k_s: usize,
    pub k_t: usize,
}

impl Default for BandwidthSection {
    fn default() -> Self {
        let b = BandwidthSpec::default();
        BandwidthSection { mu_s: b.mu_s, mu_t: b.mu_t, k_s: b.k_s, k_t: b.k_t }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConventionsSection {
    pub diagonal: DiagonalConvention,
    pub c0: C0Convention,
}

/// Trend basis with starting coefficients and bounds. Missing values are
/// filled from least squares: coefficients and their `level` intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendSection {
    pub basis: TrendBasis,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl Default for TrendSection {
    fn default() -> Self {
        TrendSection { basis: TrendBasis::constant(), level: 0.95, initial: None, lower: None, upper: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSection {
    pub lambda: f64,
    pub c1: f64,
    pub lambda_mode: LambdaMode,
    pub lambda_bounds: [f64; 2],
    pub c1_bounds: [f64; 2],
    pub mu_s_bounds: [f64; 2],
    pub mu_t_bounds: [f64; 2],
    pub optimizer: BoxOptions,
}

impl Default for EstimationSection {
    fn default() -> Self {
        let b = ParamBounds::with_trend(Vec::new(), Vec::new());
        EstimationSection {
            lambda: 1.0,
            c1: 1.0,
            lambda_mode: LambdaMode::default(),
            lambda_bounds: b.lambda,
            c1_bounds: b.c1,
            mu_s_bounds: b.mu_s,
            mu_t_bounds: b.mu_t,
            optimizer: BoxOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionSection {
    pub level: f64,
    pub variance: VarianceMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

impl Default for PredictionSection {
    fn default() -> Self {
        PredictionSection { level: 0.95, variance: VarianceMode::default(), targets: None, grid: None }
    }
}

/// Cartesian product of the axes, repeated at each of `times`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub axes: Vec<Axis>,
    pub times: Vec<f64>,
}

/// `n` equally spaced values from `start` to `end` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.end } else { self.start + step * i as f64 }).collect()
    }
}

impl GridSection {
    /// Grid locations with the first axis varying slowest.
    pub fn locations(&self) -> Vec<Vec<f64>> {
        let mut locs = vec![Vec::new()];
        for axis in &self.axes {
            let vals = axis.values();
            locs = locs.into_iter().flat_map(|l| vals.iter().map(move |v| [l.as_slice(), &[*v]].concat())).collect();
        }
        locs
    }

    fn validate(&self, dim: usize) -> CliResult<()> {
        if self.axes.len() != dim {
            return Err(CliError::usage(format!("prediction.grid: {} axes for spatial dimension {dim}", self.axes.len())));
        }
        if self.times.is_empty() {
            return Err(CliError::usage("prediction.grid.times is empty"));
        }
        for a in &self.axes {
            if a.n == 0 || !a.start.is_finite() || !a.end.is_finite() {
                return Err(CliError::usage("prediction.grid: axes need n >= 1 and finite ends"));
            }
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(CliError::usage("prediction.grid.times must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvModeKind {
    /// One parameter set for every slice.
    #[default]
    Fixed,
    /// Parameters re-estimated without each held-out slice.
    Refit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub mode: CvModeKind,
    /// Fixed mode takes its parameters from this model file when set, and
    /// from the starting values of this config otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

/// Generator settings; the seed is the top-level `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub mean: f64,
    pub variance: f64,
    pub xi_s: f64,
    pub xi_t: f64,
    pub n_locations: usize,
    pub domain_side: f64,
    pub n_times: usize,
    pub dt: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let g = GrfSpec::default();
        SimulateSection {
            mean: g.mean,
            variance: g.variance,
            xi_s: g.xi_s,
            xi_t: g.xi_t,
            n_locations: g.n_locations,
            domain_side: g.domain_side,
            n_times: g.n_times,
            dt: g.dt,
        }
    }
}

fn absolute(base: &Path, p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(base.join(p)).map_err(|e| CliError::usage(format!("cannot resolve {}: {e}", p.display())))
}

/// Directory against which relative paths in the file at `path` resolve.
pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl RunConfig {
    /// Parses the file and makes its paths absolute.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let base = base_dir(path);
        cfg.data.path = absolute(&base, &cfg.data.path)?;
        if let Some(t) = &cfg.prediction.targets {
            cfg.prediction.targets = Some(absolute(&base, t)?);
        }
        if let Some(m) = &cfg.cv.model {
            cfg.cv.model = Some(absolute(&base, m)?);
        }
        if cfg.data.dimension == 0 {
            return Err(CliError::usage("data.dimension must be >= 1"));
        }
        if let Some(g) = &cfg.prediction.grid {
            g.validate(cfg.data.dimension)?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is serializable")
    }

    /// Fills missing trend values by least squares on `data` and checks every
    /// model setting.
    pub fn resolve(&mut self, data: &STDataset) -> CliResult<()> {
        if data.dim() != self.data.dimension {
            return Err(CliError::usage(format!("data has {} spatial columns, data.dimension is {}", data.dim(), self.data.dimension)));
        }
        self.trend.basis.validate().map_err(invalid("trend.basis"))?;
        let t = &mut self.trend;
        if t.initial.is_none() || t.lower.is_none() || t.upper.is_none() {
            let ols = ols_fit_level(&t.basis, data, t.level)?;
            t.initial.get_or_insert(ols.coefficients);
            t.lower.get_or_insert(ols.lower);
            t.upper.get_or_insert(ols.upper);
        }
        self.params()?.validate(self.data.dimension).map_err(invalid("model parameters"))?;
        self.bounds()?.validate(self.trend.basis.n_columns(self.data.dimension)).map_err(invalid("estimation bounds"))?;
        Ok(())
    }

    /// Model parameters at the configured starting values.
    pub fn params(&self) -> CliResult<SliParams> {
        let b = &self.bandwidth;
        let coefficients = self.trend.initial.clone().ok_or_else(|| CliError::usage("trend.initial is not set"))?;
        Ok(SliParams {
            trend: TrendModel { basis: self.trend.basis.clone(), coefficients },
            precision: PrecisionParams { lambda: self.estimation.lambda, c1: self.estimation.c1 },
            bandwidth: BandwidthSpec { mu_s: b.mu_s, mu_t: b.mu_t, k_s: b.k_s, k_t: b.k_t },
            metric: MetricSpec { kind: self.metric.kind, alpha: self.metric.alpha },
            kernel: self.kernel.kind,
            conventions: ModelConventions { diagonal: self.conventions.diagonal, c0: self.conventions.c0 },
        })
    }

    pub fn bounds(&self) -> CliResult<ParamBounds> {
        let e = &self.estimation;
        Ok(ParamBounds {
            trend_lower: self.trend.lower.clone().ok_or_else(|| CliError::usage("trend.lower is not set"))?,
            trend_upper: self.trend.upper.clone().ok_or_else(|| CliError::usage("trend.upper is not set"))?,
            lambda: e.lambda_bounds,
            c1: e.c1_bounds,
            mu_s: e.mu_s_bounds,
            mu_t: e.mu_t_bounds,
        })
    }

    pub fn fit_config(&self) -> CliResult<FitConfig> {
        Ok(FitConfig {
            initial: self.params()?,
            bounds: self.bounds()?,
            lambda_mode: self.estimation.lambda_mode,
            options: self.estimation.optimizer,
        })
    }

    /// Cross-validation mode for parameters not taken from a model file.
    pub fn cv_mode(&self) -> CliResult<CvMode> {
        Ok(match self.cv.mode {
            CvModeKind::Fixed => CvMode::Fixed(self.params()?),
            CvModeKind::Refit => CvMode::Refit(self.fit_config()?),
        })
    }

    pub fn grf_spec(&self) -> CliResult<GrfSpec> {
        if self.data.dimension != 2 {
            return Err(CliError::usage(format!("simulate produces planar locations; data.dimension is {}", self.data.dimension)));
        }
        let s = &self.simulate;
        let spec = GrfSpec {
            mean: s.mean,
            variance: s.variance,
            xi_s: s.xi_s,
            xi_t: s.xi_t,
            n_locations: s.n_locations,
            domain_side: s.domain_side,
            n_times: s.n_times,
            dt: s.dt,
            seed: self.seed,
        };
        spec.validate().map_err(invalid("simulate"))?;
        Ok(spec)
    }
}
