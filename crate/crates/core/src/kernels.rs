//! Compactly supported kernels and the kernel weight matrices `W` and `U`.
//!
//! `W[n, k]` is the kernel weight of point `k` seen from point `n`, evaluated
//! with the bandwidths of the row point `n`. `U = W / ||W||_1` holds the
//! normalized weights of the kernel average of squared increments. By default
//! the self-weights `W[n, n] = 1` are part of `W` and of its norm; they do not
//! enter the increments but they do set the normalization (and hence the scale
//! of `c1`).

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};
use crate::geometry::{cmp_coords, Bandwidths, MetricKind, MetricSpec, STPoint};
use crate::sparse_linalg::CsrMatrix;

/// Kernel profile on `[0, 1)`, zero outside.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFunction {
    /// `1 - u^2`
    #[default]
    Quadratic,
    /// `1 - u`
    Triangular,
    /// `1 - 1.5 u + 0.5 u^3`
    Spherical,
}

impl KernelFunction {
    /// Kernel value at a non-negative scaled distance.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(SliError::InvalidArgument(format!(
                "kernel argument must be finite and >= 0, got {u}"
            )));
        }
        Ok(self.value(u))
    }

    #[inline]
    pub(crate) fn value(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let v = match self {
            KernelFunction::Quadratic => 1.0 - u * u,
            KernelFunction::Triangular => 1.0 - u,
            KernelFunction::Spherical => 1.0 - 1.5 * u + 0.5 * u * u * u,
        };
        v.max(0.0)
    }
}

/// Whether the self-weights `W[n, n]` are kept in `W` and in its norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalConvention {
    #[default]
    Include,
    Exclude,
}

/// Raw kernel weights, normalized weights and the normalization constant.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub w: CsrMatrix,
    pub u: CsrMatrix,
    pub l1_norm: f64,
}

impl WeightMatrix {
    /// Normalizes `w` by its entry-wise L1 norm.
    pub fn from_raw(w: CsrMatrix) -> Result<Self> {
        let l1_norm = w.entrywise_l1();
        if !(l1_norm > 0.0) {
            return Err(SliError::DegenerateWeights);
        }
        let u = w.scaled(1.0 / l1_norm);
        Ok(Self { w, u, l1_norm })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

/// Neighbor index over a fixed point set: distinct locations sorted by their
/// first coordinate, each with its samples sorted by time.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Vec<STPoint>,
    /// Distinct locations, sorted by first coordinate.
    locations: Vec<Vec<f64>>,
    /// `(t, point index)` per location, sorted by time.
    members: Vec<Vec<(f64, usize)>>,
    /// Location of every point.
    location_of: Vec<usize>,
}

impl NeighborIndex {
    pub fn new(points: &[STPoint]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| cmp_coords(&points[a].s, &points[b].s));
        let mut locations: Vec<Vec<f64>> = Vec::new();
        let mut members: Vec<Vec<(f64, usize)>> = Vec::new();
        let mut location_of = vec![0; points.len()];
        for i in order {
            let p = &points[i];
            let same = locations
                .last()
                .is_some_and(|l| cmp_coords(l, &p.s) == Ordering::Equal);
            if !same {
                locations.push(p.s.clone());
                members.push(Vec::new());
            }
            location_of[i] = locations.len() - 1;
            members.last_mut().unwrap().push((p.t, i));
        }
        for m in &mut members {
            m.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Self { points: points.to_vec(), locations, members, location_of }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[STPoint] {
        &self.points
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    /// Locations within Euclidean distance `< radius` of `origin`, with the
    /// distance.
    fn locations_within(&self, origin: &[f64], radius: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let x0 = origin[0];
        let start = self.locations.partition_point(|l| l[0] <= x0 - radius);
        for (k, loc) in self.locations.iter().enumerate().skip(start) {
            if loc[0] >= x0 + radius {
                break;
            }
            let r = loc.iter().zip(origin).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if r < radius {
                out.push((k, r));
            }
        }
    }

    /// Raw kernel weight matrix `W`.
    pub fn raw_weights(
        &self,
        bw: &Bandwidths,
        metric: &MetricSpec,
        kernel: KernelFunction,
        diagonal: DiagonalConvention,
    ) -> Result<CsrMatrix> {
        let n = self.points.len();
        if bw.len() != n || bw.h_t.len() != n {
            return Err(SliError::DimensionMismatch(format!(
                "{} bandwidths for {n} points",
                bw.len()
            )));
        }
        metric.validate()?;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map_init(Vec::new, |scratch, i| self.row_weights(i, bw, metric, kernel, diagonal, scratch))
            .collect();
        CsrMatrix::from_rows(n, n, rows)
    }

    fn row_weights(
        &self,
        i: usize,
        bw: &Bandwidths,
        metric: &MetricSpec,
        kernel: KernelFunction,
        diagonal: DiagonalConvention,
        near: &mut Vec<(usize, f64)>,
    ) -> Vec<(usize, f64)> {
        let p = &self.points[i];
        let (h_s, h_t) = (bw.h_s[i], bw.h_t[i]);
        let mut row = Vec::new();
        self.locations_within(&p.s, h_s, near);
        for &(loc, r) in near.iter() {
            let samples = &self.members[loc];
            let lo = samples.partition_point(|&(t, _)| t <= p.t - h_t);
            let spatial = match metric.kind {
                MetricKind::Separable => kernel.value(r / h_s),
                MetricKind::Composite => 1.0,
            };
            for &(t, j) in &samples[lo..] {
                let tau = t - p.t;
                if tau >= h_t {
                    break;
                }
                if j == i && diagonal == DiagonalConvention::Exclude {
                    continue;
                }
                let w = match metric.kind {
                    MetricKind::Separable => spatial * kernel.value(tau.abs() / h_t),
                    MetricKind::Composite => {
                        let a = metric.alpha * tau;
                        kernel.value((r * r + a * a).sqrt() / h_s)
                    }
                };
                if w > 0.0 {
                    row.push((j, w));
                }
            }
        }
        row
    }

    /// Location index of every point.
    pub fn location_of(&self) -> &[usize] {
        &self.location_of
    }
}

/// Kernel weights over a point set with per-point bandwidths.
pub fn build_weights(
    points: &[STPoint],
    bw: &Bandwidths,
    metric: &MetricSpec,
    kernel: KernelFunction,
) -> Result<WeightMatrix> {
    build_weights_with(points, bw, metric, kernel, DiagonalConvention::Include)
}

pub fn build_weights_with(
    points: &[STPoint],
    bw: &Bandwidths,
    metric: &MetricSpec,
    kernel: KernelFunction,
    diagonal: DiagonalConvention,
) -> Result<WeightMatrix> {
    let w = NeighborIndex::new(points).raw_weights(bw, metric, kernel, diagonal)?;
    WeightMatrix::from_raw(w)
}

/// Spatial kernel matrix `K_s[i, k] = K(|s_i - s_k| / h_i)`.
pub fn spatial_kernel_matrix(locations: &[Vec<f64>], h_s: &[f64], kernel: KernelFunction) -> Result<CsrMatrix> {
    if locations.len() != h_s.len() {
        return Err(SliError::DimensionMismatch("one bandwidth per location required".into()));
    }
    let rows = locations
        .iter()
        .zip(h_s)
        .map(|(a, &h)| {
            locations
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let r = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    (k, kernel.value(r / h))
                })
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(locations.len(), locations.len(), rows)
}

/// Temporal kernel matrix `K_t[j, l] = K(|t_j - t_l| / h_j)`.
pub fn temporal_kernel_matrix(times: &[f64], h_t: &[f64], kernel: KernelFunction) -> Result<CsrMatrix> {
    if times.len() != h_t.len() {
        return Err(SliError::DimensionMismatch("one bandwidth per time required".into()));
    }
    let rows = times
        .iter()
        .zip(h_t)
        .map(|(&a, &h)| {
            times
                .iter()
                .enumerate()
                .map(|(l, &b)| (l, kernel.value((a - b).abs() / h)))
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(times.len(), times.len(), rows)
}

/// Weights on a full location × time grid ordered location-major:
/// `W = K_s ⊗ K_t`.
pub fn build_weights_gridded(spatial: &CsrMatrix, temporal: &CsrMatrix) -> Result<WeightMatrix> {
    if spatial.nrows() != spatial.ncols() || temporal.nrows() != temporal.ncols() {
        return Err(SliError::DimensionMismatch("kernel matrices must be square".into()));
    }
    WeightMatrix::from_raw(spatial.kron(temporal))
}

/// Kernel average of squared increments `sum_nk u_nk (x_n - x_k)^2`.
pub fn average_squared_increments(u: &CsrMatrix, residuals: &[f64]) -> Result<f64> {
    if residuals.len() != u.nrows() || u.nrows() != u.ncols() {
        return Err(SliError::DimensionMismatch(format!(
            "{} residuals for a {}x{} weight matrix",
            residuals.len(),
            u.nrows(),
            u.ncols()
        )));
    }
    Ok(u.iter()
        .map(|(n, k, v)| {
            let d = residuals[n] - residuals[k];
            v * d * d
        })
        .sum())
}
