//! Deterministic trend `m(s, t) = sum_k b_k f_k(s, t)` and its OLS fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SliError};
use crate::geometry::{STDataset, STPoint};

fn default_period() -> f64 {
    24.0
}

/// A group of basis functions. Each term expands to one or more columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisTerm {
    /// `1`
    Constant,
    /// `t, t^2, ..., t^degree`
    PolyTime { degree: usize },
    /// `cos(w t) t^j` for `j = 0..=envelope_degree`, then the same with `sin`,
    /// where `w = 2 pi / period`.
    PeriodicTime {
        #[serde(default = "default_period")]
        period: f64,
        envelope_degree: usize,
    },
    /// `s_i, s_i^2, ..., s_i^degree` for every spatial axis `i`; `degree <= 2`.
    PolySpace { degree: usize },
}

impl BasisTerm {
    pub fn n_columns(&self, dim: usize) -> usize {
        match *self {
            BasisTerm::Constant => 1,
            BasisTerm::PolyTime { degree } => degree,
            BasisTerm::PeriodicTime { envelope_degree, .. } => 2 * (envelope_degree + 1),
            BasisTerm::PolySpace { degree } => degree * dim,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BasisTerm::PolyTime { degree: 0 } => Err(SliError::InvalidArgument("poly_time degree must be >= 1".into())),
            BasisTerm::PolySpace { degree } if degree == 0 || degree > 2 => {
                Err(SliError::InvalidArgument(format!("poly_space degree must be 1 or 2, got {degree}")))
            }
            BasisTerm::PeriodicTime { period, .. } if !(period > 0.0 && period.is_finite()) => {
                Err(SliError::InvalidArgument(format!("period must be > 0, got {period}")))
            }
            _ => Ok(()),
        }
    }

    fn push_values(&self, p: &STPoint, out: &mut Vec<f64>) {
        match *self {
            BasisTerm::Constant => out.push(1.0),
            BasisTerm::PolyTime { degree } => out.extend((1..=degree).map(|j| p.t.powi(j as i32))),
            BasisTerm::PeriodicTime { period, envelope_degree } => {
                let phase = 2.0 * std::f64::consts::PI * p.t / period;
                let (sin, cos) = phase.sin_cos();
                out.extend((0..=envelope_degree).map(|j| cos * p.t.powi(j as i32)));
                out.extend((0..=envelope_degree).map(|j| sin * p.t.powi(j as i32)));
            }
            BasisTerm::PolySpace { degree } => {
                for &x in &p.s {
                    out.extend((1..=degree).map(|j| x.powi(j as i32)));
                }
            }
        }
    }
}

/// Ordered basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrendBasis(pub Vec<BasisTerm>);

impl Default for TrendBasis {
    fn default() -> Self {
        TrendBasis(vec![BasisTerm::Constant])
    }
}

impl TrendBasis {
    pub fn constant() -> Self {
        Self::default()
    }

    pub fn n_columns(&self, dim: usize) -> usize {
        self.0.iter().map(|t| t.n_columns(dim)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(SliError::InvalidArgument("trend basis is empty".into()));
        }
        self.0.iter().try_for_each(BasisTerm::validate)
    }

    /// Values of all basis functions at `p`.
    pub fn row(&self, p: &STPoint) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_columns(p.dim()));
        for term in &self.0 {
            term.push_values(p, &mut out);
        }
        out
    }

    /// Row-major design matrix, one row per point.
    pub fn design(&self, points: &[STPoint]) -> DMatrix<f64> {
        let k = points.first().map_or(0, |p| self.n_columns(p.dim()));
        let mut m = DMatrix::zeros(points.len(), k);
        for (i, p) in points.iter().enumerate() {
            for (j, v) in self.row(p).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Basis plus coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub basis: TrendBasis,
    pub coefficients: Vec<f64>,
}

impl TrendModel {
    pub fn new(basis: TrendBasis, coefficients: Vec<f64>) -> Result<Self> {
        basis.validate()?;
        let model = TrendModel { basis, coefficients };
        Ok(model)
    }

    pub fn constant(value: f64) -> Self {
        TrendModel { basis: TrendBasis::constant(), coefficients: vec![value] }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let k = self.basis.n_columns(dim);
        if k != self.coefficients.len() {
            return Err(SliError::DimensionMismatch(format!(
                "trend basis has {k} functions but {} coefficients were given",
                self.coefficients.len()
            )));
        }
        Ok(())
    }

    pub fn value_at(&self, p: &STPoint) -> f64 {
        self.basis.row(p).iter().zip(&self.coefficients).map(|(f, b)| f * b).sum()
    }
}

pub fn evaluate_trend(model: &TrendModel, points: &[STPoint]) -> Result<Vec<f64>> {
    if let Some(p) = points.first() {
        model.check_dim(p.dim())?;
    }
    Ok(points.iter().map(|p| model.value_at(p)).collect())
}

/// Residuals `x - m`.
pub fn detrend(model: &TrendModel, data: &STDataset) -> Result<Vec<f64>> {
    let m = evaluate_trend(model, data.points())?;
    Ok(data.values().iter().zip(m).map(|(x, m)| x - m).collect())
}

/// Least-squares coefficients with normal-theory confidence intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub residual_variance: f64,
}

impl OlsFit {
    pub fn model(&self, basis: TrendBasis) -> TrendModel {
        TrendModel { basis, coefficients: self.coefficients.clone() }
    }
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn z_score(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SliError::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 * (1.0 + level)))
}

/// Ordinary least squares with 95% intervals.
pub fn ols_fit(basis: &TrendBasis, data: &STDataset) -> Result<OlsFit> {
    ols_fit_level(basis, data, 0.95)
}

pub fn ols_fit_level(basis: &TrendBasis, data: &STDataset, level: f64) -> Result<OlsFit> {
    basis.validate()?;
    let z = z_score(level)?;
    let f = basis.design(data.points());
    let (n, k) = f.shape();
    if n < k {
        return Err(SliError::CollinearBasis);
    }
    let x = DVector::from_column_slice(data.values());
    let qr = f.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= scale * 1e-10 * n.max(k) as f64) || scale == 0.0 {
        return Err(SliError::CollinearBasis);
    }
    let qtx = qr.q().transpose() * &x;
    let b = r.solve_upper_triangular(&qtx).ok_or(SliError::CollinearBasis)?;
    let resid = &x - &f * &b;
    let rss = resid.norm_squared();
    let s2 = if n > k { rss / (n - k) as f64 } else { 0.0 };
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or(SliError::CollinearBasis)?;
    let cov_diag: Vec<f64> = (0..k).map(|i| s2 * r_inv.row(i).norm_squared()).collect();
    let se: Vec<f64> = cov_diag.iter().map(|v| v.sqrt()).collect();
    let coefficients: Vec<f64> = b.iter().copied().collect();
    Ok(OlsFit {
        lower: coefficients.iter().zip(&se).map(|(b, s)| b - z * s).collect(),
        upper: coefficients.iter().zip(&se).map(|(b, s)| b + z * s).collect(),
        coefficients,
        std_errors: se,
        residual_variance: s2,
    })
}
