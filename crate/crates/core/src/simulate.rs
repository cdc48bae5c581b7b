//! Gaussian random fields with separable exponential covariance
//! `sigma^2 exp(-|r| / xi_s - |tau| / xi_t)` on random locations in a square
//! times a regular time grid.
//!
//! Values are flattened location-major: index `loc * n_times + t`, matching
//! the Kronecker ordering `C_s (x) C_t`.

use nalgebra::DMatrix;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SliError};
use crate::geometry::{STDataset, STPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSpec {
    pub mean: f64,
    pub variance: f64,
    pub xi_s: f64,
    pub xi_t: f64,
    pub n_locations: usize,
    pub domain_side: f64,
    pub n_times: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for GrfSpec {
    fn default() -> Self {
        GrfSpec {
            mean: 10.0,
            variance: 5.0,
            xi_s: 20.0,
            xi_t: 10.0,
            n_locations: 100,
            domain_side: 100.0,
            n_times: 50,
            dt: 1.0,
            seed: 0,
        }
    }
}

impl GrfSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [("xi_s", self.xi_s), ("xi_t", self.xi_t), ("domain_side", self.domain_side), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SliError::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) || !self.mean.is_finite() {
            return Err(SliError::InvalidArgument("mean must be finite and variance >= 0".into()));
        }
        if self.n_locations == 0 || self.n_times == 0 {
            return Err(SliError::InvalidArgument("n_locations and n_times must be >= 1".into()));
        }
        Ok(())
    }

    /// `dt, 2 dt, ..., n_times dt`
    pub fn times(&self) -> Vec<f64> {
        (1..=self.n_times).map(|n| n as f64 * self.dt).collect()
    }
}

/// Elementwise `exp(-d / xi)`.
pub fn exponential_corr(dist: &DMatrix<f64>, xi: f64) -> Result<DMatrix<f64>> {
    if !(xi > 0.0) {
        return Err(SliError::InvalidArgument(format!("correlation length must be > 0, got {xi}")));
    }
    if dist.iter().any(|d| !(*d >= 0.0)) {
        return Err(SliError::InvalidArgument("distances must be >= 0".into()));
    }
    Ok(dist.map(|d| (-d / xi).exp()))
}

pub fn distance_matrix(points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn time_distance_matrix(times: &[f64]) -> DMatrix<f64> {
    let n = times.len();
    DMatrix::from_fn(n, n, |i, j| (times[i] - times[j]).abs())
}

fn cholesky(c: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    c.cholesky().map(|f| f.l()).ok_or_else(|| {
        SliError::InvalidDataset(format!("{what} correlation matrix of size {n} is not positive definite (duplicate coordinates?)"))
    })
}

/// Uniform variate on (0, 1) from the top 53 bits.
fn open_unit(rng: &mut impl Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn standard_normal(rng: &mut impl Rng, normal: &Normal) -> f64 {
    normal.inverse_cdf(open_unit(rng))
}

/// Field values at given locations and times, flattened location-major.
pub fn simulate_values(spec: &GrfSpec, locations: &[Vec<f64>], times: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    spec.validate()?;
    let (ns, nt) = (locations.len(), times.len());
    let ls = cholesky(exponential_corr(&distance_matrix(locations), spec.xi_s)?, "spatial")?;
    let lt = cholesky(exponential_corr(&time_distance_matrix(times), spec.xi_t)?, "temporal")?;
    let normal = Normal::standard();
    // Row-major draws: location index outer, time inner.
    let mut z = DMatrix::zeros(ns, nt);
    for i in 0..ns {
        for j in 0..nt {
            z[(i, j)] = standard_normal(rng, &normal);
        }
    }
    let field = &ls * z * lt.transpose();
    let sigma = spec.variance.sqrt();
    let mut out = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        for j in 0..nt {
            out.push(spec.mean + sigma * field[(i, j)]);
        }
    }
    Ok(out)
}

/// Random locations in `[0, side]^2`, drawn from the seed.
pub fn random_locations(spec: &GrfSpec, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..spec.n_locations)
        .map(|_| {
            let x = open_unit(rng) * spec.domain_side;
            let y = open_unit(rng) * spec.domain_side;
            vec![x, y]
        })
        .collect()
}

/// One realization: locations and field values both drawn from `spec.seed`.
pub fn simulate_grf(spec: &GrfSpec) -> Result<STDataset> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let locations = random_locations(spec, &mut rng);
    let times = spec.times();
    let values = simulate_values(spec, &locations, &times, &mut rng)?;
    let points = locations.iter().flat_map(|s| times.iter().map(move |&t| STPoint::new(s.clone(), t))).collect();
    STDataset::new(points, values)
}

/// Dense covariance `sigma^2 C_s (x) C_t` in the flattening order above.
pub fn separable_covariance(spec: &GrfSpec, locations: &[Vec<f64>], times: &[f64]) -> Result<DMatrix<f64>> {
    let cs = exponential_corr(&distance_matrix(locations), spec.xi_s)?;
    let ct = exponential_corr(&time_distance_matrix(times), spec.xi_t)?;
    Ok(cs.kronecker(&ct) * spec.variance)
}
