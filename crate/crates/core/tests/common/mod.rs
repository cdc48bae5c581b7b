//! Dense reference implementations used as test oracles. Everything here is
//! written with plain double loops and dense nalgebra matrices, independently
//! of the sparse code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sli::{
    BandwidthSpec, KernelFunction, MetricKind, MetricSpec, ModelConventions, PrecisionParams, STDataset, STPoint,
    SliParams, TrendModel,
};

pub fn kernel(kind: KernelFunction, u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    match kind {
        KernelFunction::Quadratic => 1.0 - u * u,
        KernelFunction::Triangular => 1.0 - u,
        KernelFunction::Spherical => 1.0 - 1.5 * u + 0.5 * u * u * u,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn kth(mut d: Vec<f64>, k: usize) -> f64 {
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[k - 1]
}

/// Bandwidths of `queries` against the distinct locations and times of
/// `reference`, excluding candidates at zero distance.
pub fn dense_bandwidths(reference: &[STPoint], queries: &[STPoint], spec: &BandwidthSpec, metric: &MetricSpec) -> (Vec<f64>, Vec<f64>) {
    let mut locs: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for p in reference {
        if !locs.iter().any(|l| *l == p.s) {
            locs.push(p.s.clone());
        }
        if !times.contains(&p.t) {
            times.push(p.t);
        }
    }
    let mut h_s = Vec::new();
    let mut h_t = Vec::new();
    for q in queries {
        let ds: Vec<f64> = locs.iter().map(|l| dist(l, &q.s)).filter(|d| *d > 0.0).collect();
        let hs = spec.mu_s * kth(ds, spec.k_s);
        h_s.push(hs);
        h_t.push(match metric.kind {
            MetricKind::Composite => hs / metric.alpha,
            MetricKind::Separable => {
                let dt: Vec<f64> = times.iter().map(|t| (t - q.t).abs()).filter(|d| *d > 0.0).collect();
                spec.mu_t * kth(dt, spec.k_t)
            }
        });
    }
    (h_s, h_t)
}

/// Raw weights by double loop, self-weights included.
pub fn dense_raw_weights(points: &[STPoint], h_s: &[f64], h_t: &[f64], metric: &MetricSpec, kind: KernelFunction) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let r = dist(&points[i].s, &points[j].s);
        let tau = (points[i].t - points[j].t).abs();
        match metric.kind {
            MetricKind::Separable => kernel(kind, r / h_s[i]) * kernel(kind, tau / h_t[i]),
            MetricKind::Composite => kernel(kind, (r * r + metric.alpha * metric.alpha * tau * tau).sqrt() / h_s[i]),
        }
    })
}

pub fn normalize(w: &DMatrix<f64>) -> DMatrix<f64> {
    let s: f64 = w.iter().map(|v| v.abs()).sum();
    w / s
}

/// `c0 I + c1 J1` from normalized weights.
pub fn dense_scale_free_precision(u: &DMatrix<f64>, c0: f64, c1: f64) -> DMatrix<f64> {
    let n = u.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let coupling: f64 = (0..n).filter(|&l| l != i).map(|l| u[(i, l)] + u[(l, i)]).sum();
            c0 + c1 * coupling
        } else {
            -c1 * (u[(i, j)] + u[(j, i)])
        }
    })
}

pub fn dense_u(data: &STDataset, params: &SliParams) -> DMatrix<f64> {
    let (h_s, h_t) = dense_bandwidths(data.points(), data.points(), &params.bandwidth, &params.metric);
    normalize(&dense_raw_weights(data.points(), &h_s, &h_t, &params.metric, params.kernel))
}

/// Precision matrix `J` of the training set.
pub fn dense_j(data: &STDataset, params: &SliParams) -> DMatrix<f64> {
    let u = dense_u(data, params);
    dense_scale_free_precision(&u, 1.0 / data.len() as f64, params.precision.c1) / params.precision.lambda
}

/// `-ln p(x)` of the Gaussian with precision `J`, minus `N ln(2 pi) / 2`.
pub fn dense_negative_log_pdf(j: &DMatrix<f64>, residuals: &[f64]) -> f64 {
    let x = DVector::from_column_slice(residuals);
    let chol = j.clone().cholesky().expect("precision is SPD");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    0.5 * (x.transpose() * j * &x)[(0, 0)] - 0.5 * logdet
}

/// Combined precision over samples then targets.
pub fn dense_combined_precision(data: &STDataset, targets: &[STPoint], params: &SliParams, c0: f64) -> DMatrix<f64> {
    let mut all: Vec<STPoint> = data.points().to_vec();
    all.extend_from_slice(targets);
    let (h_s, h_t) = dense_bandwidths(data.points(), &all, &params.bandwidth, &params.metric);
    let u = normalize(&dense_raw_weights(&all, &h_s, &h_t, &params.metric, params.kernel));
    dense_scale_free_precision(&u, c0, params.precision.c1) / params.precision.lambda
}

/// `m_G - J_GG^-1 J_GS x'` with an explicit dense inverse.
pub fn dense_conditional_mean(data: &STDataset, targets: &[STPoint], params: &SliParams) -> Vec<f64> {
    let n = data.len();
    let p = targets.len();
    let j = dense_combined_precision(data, targets, params, 1.0 / (n + p) as f64);
    let j_gg = j.view((n, n), (p, p)).into_owned();
    let j_gs = j.view((n, 0), (p, n)).into_owned();
    let m = |pt: &STPoint| params.trend.value_at(pt);
    let x = DVector::from_iterator(n, data.points().iter().zip(data.values()).map(|(pt, v)| v - m(pt)));
    let shift = j_gg.try_inverse().expect("J_GG invertible") * j_gs * x;
    targets.iter().zip(shift.iter()).map(|(t, s)| m(t) - s).collect()
}

/// Random scattered instance with shared stations and shared times.
pub struct Instance {
    pub data: STDataset,
    pub params: SliParams,
    pub targets: Vec<STPoint>,
}

pub fn random_instance(seed: u64, n: usize, p: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_loc = n / 3 + 2;
    let locs: Vec<Vec<f64>> = (0..n_loc).map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    let mut pts: Vec<STPoint> = Vec::new();
    while pts.len() < n {
        let s = locs[rng.random_range(0..n_loc)].clone();
        let t = rng.random_range(0..6) as f64;
        if !pts.iter().any(|q| q.s == s && q.t == t) {
            pts.push(STPoint::new(s, t));
        }
    }
    let values: Vec<f64> = pts.iter().map(|q| 5.0 + 0.3 * q.s[0] - 0.2 * q.t + rng.random::<f64>() * 2.0).collect();
    let data = STDataset::new(pts, values).unwrap();
    let mut targets: Vec<STPoint> = Vec::new();
    while targets.len() < p {
        let q = STPoint::new(vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0], rng.random_range(0..12) as f64 * 0.5);
        if !data.contains(&q) && !targets.contains(&q) {
            targets.push(q);
        }
    }
    let metric = if rng.random::<bool>() {
        MetricSpec::separable()
    } else {
        MetricSpec::composite(0.5 + rng.random::<f64>() * 2.0)
    };
    let kernel = [KernelFunction::Quadratic, KernelFunction::Triangular, KernelFunction::Spherical][rng.random_range(0..3)];
    let params = SliParams {
        trend: TrendModel::constant(6.0),
        precision: PrecisionParams { lambda: 0.2 + rng.random::<f64>() * 3.0, c1: 10f64.powf(rng.random::<f64>() * 4.0 - 1.0) },
        bandwidth: BandwidthSpec {
            mu_s: 0.8 + rng.random::<f64>() * 1.7,
            mu_t: 0.8 + rng.random::<f64>() * 1.7,
            k_s: rng.random_range(1..4),
            k_t: rng.random_range(1..3),
        },
        metric,
        kernel,
        conventions: ModelConventions::default(),
    };
    Instance { data, params, targets }
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn csr_to_dense(m: &sli::CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), &m.to_dense())
}
