//! Space-time coordinates, distance metrics and adaptive bandwidths.
//!
//! Bandwidths are proportional to nearest-neighbor distances: the spatial
//! bandwidth of a point is `mu_s` times the distance to its `K_s`-th nearest
//! distinct location, the temporal bandwidth is either `mu_t` times the lag to
//! the `K_t`-th nearest distinct time stamp (separable metric) or `h_s / alpha`
//! (composite metric).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};

/// A space-time coordinate `(s, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct STPoint {
    pub s: Vec<f64>,
    pub t: f64,
}

impl STPoint {
    pub fn new(s: Vec<f64>, t: f64) -> Self {
        Self { s, t }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite() && self.s.iter().all(|v| v.is_finite())
    }
}

/// Lexicographic total order on coordinates, used for deduplication.
pub(crate) fn cmp_coords(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn cmp_points(a: &STPoint, b: &STPoint) -> Ordering {
    cmp_coords(&a.s, &b.s).then(a.t.total_cmp(&b.t))
}

/// Observed values at a set of space-time points.
#[derive(Clone, Debug, PartialEq)]
pub struct STDataset {
    dim: usize,
    points: Vec<STPoint>,
    values: Vec<f64>,
}

impl STDataset {
    /// Builds a dataset, checking that coordinates are finite, of equal
    /// dimension, and that no `(s, t)` pair occurs twice.
    pub fn new(points: Vec<STPoint>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(SliError::DimensionMismatch(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points.first().map_or(1, STPoint::dim);
        if dim == 0 {
            return Err(SliError::InvalidDataset("spatial dimension must be >= 1".into()));
        }
        for (i, (p, v)) in points.iter().zip(&values).enumerate() {
            if p.dim() != dim {
                return Err(SliError::InvalidDataset(format!(
                    "point {i} has dimension {} (expected {dim})",
                    p.dim()
                )));
            }
            if !p.is_finite() || !v.is_finite() {
                return Err(SliError::InvalidDataset(format!("point {i} is not finite")));
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| cmp_points(&points[a], &points[b]));
        for w in order.windows(2) {
            if cmp_points(&points[w[0]], &points[w[1]]) == Ordering::Equal {
                return Err(SliError::InvalidDataset(format!(
                    "duplicate space-time point at rows {} and {}",
                    w[0].min(w[1]),
                    w[0].max(w[1])
                )));
            }
        }
        Ok(Self { dim, points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[STPoint] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dataset restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> STDataset {
        STDataset {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }

    /// Sorted distinct time stamps.
    pub fn distinct_times(&self) -> Vec<f64> {
        distinct_times(self.points.iter().map(|p| p.t))
    }

    /// Sorted distinct spatial locations.
    pub fn distinct_locations(&self) -> Vec<Vec<f64>> {
        distinct_locations(self.points.iter().map(|p| p.s.as_slice()))
    }

    /// Whether `p` is one of the sample coordinates.
    pub fn contains(&self, p: &STPoint) -> bool {
        self.points.iter().any(|q| cmp_points(p, q) == Ordering::Equal)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub(crate) fn distinct_times(times: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut ts: Vec<f64> = times.collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
    ts
}

pub(crate) fn distinct_locations<'a>(locs: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = locs.map(<[f64]>::to_vec).collect();
    out.sort_by(|a, b| cmp_coords(a, b));
    out.dedup_by(|a, b| cmp_coords(a, b) == Ordering::Equal);
    out
}

/// Kind of space-time distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Composite,
    Separable,
}

/// Space-time metric: composite `sqrt(|r|^2 + alpha^2 tau^2)` or separable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    /// Space units per time unit; only used by the composite metric.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl MetricSpec {
    pub fn separable() -> Self {
        Self { kind: MetricKind::Separable, alpha: 1.0 }
    }

    pub fn composite(alpha: f64) -> Self {
        Self { kind: MetricKind::Composite, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == MetricKind::Composite && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(SliError::InvalidArgument(format!(
                "composite metric requires alpha > 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::separable()
    }
}

/// Bandwidth scale factors and neighbor orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec {
    pub mu_s: f64,
    pub mu_t: f64,
    pub k_s: usize,
    pub k_t: usize,
}

impl Default for BandwidthSpec {
    fn default() -> Self {
        Self { mu_s: 1.0, mu_t: 1.0, k_s: 3, k_t: 3 }
    }
}

impl BandwidthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu_s", self.mu_s), ("mu_t", self.mu_t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SliError::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.k_s == 0 || self.k_t == 0 {
            return Err(SliError::InvalidArgument("neighbor orders must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-point spatial and temporal bandwidths.
#[derive(Clone, Debug, PartialEq)]
pub struct Bandwidths {
    pub h_s: Vec<f64>,
    pub h_t: Vec<f64>,
}

impl Bandwidths {
    pub fn len(&self) -> usize {
        self.h_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_s.is_empty()
    }

    fn validate(&self) -> Result<()> {
        for (i, (&hs, &ht)) in self.h_s.iter().zip(&self.h_t).enumerate() {
            if !(hs > 0.0 && ht > 0.0 && hs.is_finite() && ht.is_finite()) {
                return Err(SliError::ZeroBandwidthDistance { index: i });
            }
        }
        Ok(())
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Query for a nearest-neighbor distance.
#[derive(Clone, Copy, Debug)]
pub enum KnnQuery<'a> {
    /// A member of the point list; only the member itself is excluded.
    Member(usize),
    /// An external point; candidates at zero distance are treated as the
    /// point's own location and excluded.
    Point(&'a [f64]),
}

fn kth_smallest(mut cands: Vec<(f64, usize)>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(SliError::InvalidArgument("neighbor order must be >= 1".into()));
    }
    if cands.len() < k {
        return Err(SliError::InsufficientNeighbors { needed: k, available: cands.len() });
    }
    // Ties broken by ascending candidate index.
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(cands[k - 1].0)
}

/// Distance from the query to its `k`-th nearest neighbor among `points`.
pub fn spatial_knn_distance(points: &[Vec<f64>], k: usize, query: KnnQuery<'_>) -> Result<f64> {
    match query {
        KnnQuery::Member(q) => {
            let origin = points.get(q).ok_or_else(|| {
                SliError::InvalidArgument(format!("query index {q} out of range"))
            })?;
            let cands = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != q)
                .map(|(j, p)| (euclidean(origin, p), j))
                .collect();
            let d = kth_smallest(cands, k)?;
            if d == 0.0 {
                return Err(SliError::ZeroBandwidthDistance { index: q });
            }
            Ok(d)
        }
        KnnQuery::Point(origin) => {
            let cands = points
                .iter()
                .enumerate()
                .map(|(j, p)| (euclidean(origin, p), j))
                .filter(|&(d, _)| d > 0.0)
                .collect();
            kth_smallest(cands, k)
        }
    }
}

/// Lag from `query` to its `k`-th nearest time stamp among the distinct
/// values of `times` other than `query` itself.
pub fn temporal_knn_distance(times: &[f64], k: usize, query: f64) -> Result<f64> {
    let distinct = distinct_times(times.iter().copied());
    let cands = distinct
        .iter()
        .enumerate()
        .map(|(j, &t)| ((t - query).abs(), j))
        .filter(|&(d, _)| d > 0.0)
        .collect();
    kth_smallest(cands, k)
}

/// Raw nearest-neighbor distances for a set of query points, computed against
/// a reference sample. Multiplying by `mu_s`, `mu_t` gives the bandwidths.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnDistances {
    pub spatial: Vec<f64>,
    /// Empty for the composite metric, where temporal bandwidths derive from
    /// the spatial ones.
    pub temporal: Vec<f64>,
}

impl KnnDistances {
    /// kNN distances of every dataset point against the dataset itself.
    pub fn for_dataset(data: &STDataset, spec: &BandwidthSpec, metric: &MetricSpec) -> Result<Self> {
        Self::compute(data, data.points(), spec, metric)
    }

    /// kNN distances of `queries` against the distinct locations and time
    /// stamps of `reference`.
    pub fn compute(
        reference: &STDataset,
        queries: &[STPoint],
        spec: &BandwidthSpec,
        metric: &MetricSpec,
    ) -> Result<Self> {
        spec.validate()?;
        metric.validate()?;
        let locations = reference.distinct_locations();
        let query_locs = distinct_locations(queries.iter().map(|p| p.s.as_slice()));
        let loc_dist = query_locs
            .iter()
            .map(|q| spatial_knn_distance(&locations, spec.k_s, KnnQuery::Point(q)))
            .collect::<Result<Vec<_>>>()?;
        let spatial = queries
            .iter()
            .map(|p| {
                let i = query_locs
                    .binary_search_by(|l| cmp_coords(l, &p.s))
                    .expect("query location indexed");
                loc_dist[i]
            })
            .collect();

        let temporal = match metric.kind {
            MetricKind::Composite => Vec::new(),
            MetricKind::Separable => {
                let times = reference.distinct_times();
                let query_times = distinct_times(queries.iter().map(|p| p.t));
                let time_dist = query_times
                    .iter()
                    .map(|&t| temporal_knn_distance(&times, spec.k_t, t))
                    .collect::<Result<Vec<_>>>()?;
                queries
                    .iter()
                    .map(|p| {
                        let i = query_times
                            .binary_search_by(|t| t.total_cmp(&p.t))
                            .expect("query time indexed");
                        time_dist[i]
                    })
                    .collect()
            }
        };
        Ok(Self { spatial, temporal })
    }

    /// Scales the distances into bandwidths.
    pub fn bandwidths(&self, spec: &BandwidthSpec, metric: &MetricSpec) -> Result<Bandwidths> {
        spec.validate()?;
        metric.validate()?;
        let h_s: Vec<f64> = self.spatial.iter().map(|d| spec.mu_s * d).collect();
        let h_t = match metric.kind {
            MetricKind::Composite => h_s.iter().map(|h| h / metric.alpha).collect(),
            MetricKind::Separable => self.temporal.iter().map(|d| spec.mu_t * d).collect(),
        };
        let bw = Bandwidths { h_s, h_t };
        bw.validate()?;
        Ok(bw)
    }
}

/// Bandwidths of every dataset point.
pub fn compute_bandwidths(
    data: &STDataset,
    spec: &BandwidthSpec,
    metric: &MetricSpec,
) -> Result<Bandwidths> {
    if data.is_empty() {
        return Err(SliError::InvalidDataset("empty dataset".into()));
    }
    KnnDistances::for_dataset(data, spec, metric)?.bandwidths(spec, metric)
}

/// Bandwidth-scaled space-time distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaledDistance {
    Composite(f64),
    /// `(|r| / h_s, |tau| / h_t)`
    Separable(f64, f64),
}

/// Distance from `from` to `to` scaled by the bandwidths `h_s`, `h_t`.
pub fn scaled_st_distance(
    from: &STPoint,
    to: &STPoint,
    metric: &MetricSpec,
    h_s: f64,
    h_t: f64,
) -> ScaledDistance {
    let r2: f64 = from.s.iter().zip(&to.s).map(|(a, b)| (a - b) * (a - b)).sum();
    let tau = from.t - to.t;
    match metric.kind {
        MetricKind::Composite => {
            ScaledDistance::Composite((r2 + metric.alpha * metric.alpha * tau * tau).sqrt() / h_s)
        }
        MetricKind::Separable => ScaledDistance::Separable(r2.sqrt() / h_s, tau.abs() / h_t),
    }
}
