//! Sparse SLI precision matrices.
//!
//! The increment matrix `J1` is the graph Laplacian of the symmetrized
//! normalized weights: `J1[n, k] = -(u_nk + u_kn)` off the diagonal and
//! `J1[n, n] = sum_{l != n} (u_nl + u_ln)`. The precision matrix is
//! `J = (c0 I + c1 J1) / lambda`, with `c0 = 1/N` for a sample of size `N`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};
use crate::geometry::{BandwidthSpec, KnnDistances, MetricSpec, STDataset, STPoint};
use crate::kernels::{DiagonalConvention, KernelFunction, NeighborIndex, WeightMatrix};
use crate::sparse_linalg::{CsrMatrix, SparseSymMatrix};

/// Overall scale `lambda` and increment coefficient `c1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionParams {
    pub lambda: f64,
    pub c1: f64,
}

impl PrecisionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SliError::InvalidArgument(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(SliError::InvalidArgument(format!("c1 must be >= 0, got {}", self.c1)));
        }
        Ok(())
    }
}

/// Diagonal constant used when targets are added to the sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C0Convention {
    /// `1 / (N + P)`
    #[default]
    CombinedSize,
    /// `1 / N`
    SampleSize,
}

impl C0Convention {
    pub fn value(&self, n_samples: usize, n_targets: usize) -> f64 {
        match self {
            C0Convention::CombinedSize => 1.0 / (n_samples + n_targets) as f64,
            C0Convention::SampleSize => 1.0 / n_samples as f64,
        }
    }
}

/// Increment matrix `J1` built from normalized weights. Self-weights cancel.
pub fn increment_matrix(u: &CsrMatrix) -> Result<SparseSymMatrix> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(SliError::DimensionMismatch("weight matrix must be square".into()));
    }
    let ut = u.transpose();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let (c1, v1) = u.row(i);
        let (c2, v2) = ut.row(i);
        // Merge the two sorted rows of U and U^T.
        let mut row = Vec::with_capacity(c1.len() + c2.len() + 1);
        let (mut a, mut b) = (0, 0);
        let mut diag = 0.0;
        while a < c1.len() || b < c2.len() {
            let (col, val) = match (c1.get(a), c2.get(b)) {
                (Some(&x), Some(&y)) if x == y => {
                    a += 1;
                    b += 1;
                    (x, v1[a - 1] + v2[b - 1])
                }
                (Some(&x), Some(&y)) if x < y => {
                    a += 1;
                    (x, v1[a - 1])
                }
                (Some(&x), None) => {
                    a += 1;
                    (x, v1[a - 1])
                }
                (_, Some(&y)) => {
                    b += 1;
                    (y, v2[b - 1])
                }
                (None, None) => unreachable!(),
            };
            if col != i && val != 0.0 {
                diag += val;
                row.push((col, -val));
            }
        }
        if diag != 0.0 {
            row.push((i, diag));
        }
        rows.push(row);
    }
    SparseSymMatrix::new(CsrMatrix::from_rows(n, n, rows)?)
}

/// `c0 I + c1 J1`
pub fn assemble_scaled_free(u: &CsrMatrix, c0: f64, c1: f64) -> Result<SparseSymMatrix> {
    let j1 = increment_matrix(u)?;
    let id = CsrMatrix::identity(u.nrows());
    SparseSymMatrix::new(id.linear_combination(c0, j1.csr(), c1)?)
}

/// Scale-free precision matrix `J~ = lambda J = I/N + c1 J1`.
pub fn assemble_j_tilde(weights: &WeightMatrix, c1: f64) -> Result<SparseSymMatrix> {
    let n = weights.n();
    assemble_scaled_free(&weights.u, 1.0 / n as f64, c1)
}

/// Precision matrix `J = (I/N + c1 J1) / lambda`.
pub fn assemble_j(weights: &WeightMatrix, params: &PrecisionParams) -> Result<SparseSymMatrix> {
    params.validate()?;
    Ok(assemble_j_tilde(weights, params.c1)?.scaled(1.0 / params.lambda))
}

/// Precision blocks over the sample set `S` (first `n` indices) and the
/// target set `G` (last `p` indices).
#[derive(Clone, Debug)]
pub struct BlockPrecision {
    pub j_ss: SparseSymMatrix,
    pub j_sg: CsrMatrix,
    pub j_gs: CsrMatrix,
    pub j_gg: SparseSymMatrix,
    pub n: usize,
    pub p: usize,
    pub c0: f64,
    pub lambda: f64,
    /// Weights over the combined point set.
    pub weights: WeightMatrix,
}

/// Settings that are not part of the parameter vector proper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConventions {
    #[serde(default)]
    pub diagonal: DiagonalConvention,
    #[serde(default)]
    pub c0: C0Convention,
}

/// Assembles the block precision matrix for prediction at `targets`.
///
/// Weights are computed over the combined set with a single normalization;
/// target bandwidths come from kNN distances to the sample coordinates.
pub fn assemble_blocks(
    samples: &STDataset,
    targets: &[STPoint],
    spec: &BandwidthSpec,
    metric: &MetricSpec,
    kernel: KernelFunction,
    params: &PrecisionParams,
    conventions: &ModelConventions,
) -> Result<BlockPrecision> {
    params.validate()?;
    let n = samples.len();
    let p = targets.len();
    if n == 0 {
        return Err(SliError::InvalidDataset("empty sample set".into()));
    }
    for (i, t) in targets.iter().enumerate() {
        if t.dim() != samples.dim() {
            return Err(SliError::DimensionMismatch(format!(
                "target {i} has dimension {} (expected {})",
                t.dim(),
                samples.dim()
            )));
        }
    }
    check_disjoint(samples, targets)?;

    let mut combined: Vec<STPoint> = samples.points().to_vec();
    combined.extend_from_slice(targets);
    let bw = KnnDistances::compute(samples, &combined, spec, metric)?.bandwidths(spec, metric)?;
    let w = NeighborIndex::new(&combined).raw_weights(&bw, metric, kernel, conventions.diagonal)?;
    let weights = WeightMatrix::from_raw(w)?;
    let c0 = conventions.c0.value(n, p);
    let full = assemble_scaled_free(&weights.u, c0, params.c1)?.scaled(1.0 / params.lambda);
    Ok(split_blocks(full.csr(), n, p, c0, params.lambda, weights))
}

fn split_blocks(full: &CsrMatrix, n: usize, p: usize, c0: f64, lambda: f64, weights: WeightMatrix) -> BlockPrecision {
    let s: Range<usize> = 0..n;
    let g: Range<usize> = n..n + p;
    BlockPrecision {
        j_ss: SparseSymMatrix::new(full.block(s.clone(), s.clone())).expect("diagonal block is symmetric"),
        j_sg: full.block(s.clone(), g.clone()),
        j_gs: full.block(g.clone(), s),
        j_gg: SparseSymMatrix::new(full.block(g.clone(), g)).expect("diagonal block is symmetric"),
        n,
        p,
        c0,
        lambda,
        weights,
    }
}

fn check_disjoint(samples: &STDataset, targets: &[STPoint]) -> Result<()> {
    use std::collections::HashSet;
    let key = |p: &STPoint| -> Vec<u64> {
        p.s.iter().map(|v| v.to_bits()).chain(std::iter::once(p.t.to_bits())).collect()
    };
    let set: HashSet<Vec<u64>> = samples.points().iter().map(key).collect();
    match targets.iter().position(|t| set.contains(&key(t))) {
        Some(index) => Err(SliError::TargetInSampleSet { index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_linalg::factorize;

    fn two_point_weights() -> WeightMatrix {
        let u = CsrMatrix::from_dense(2, 2, &[0.25, 0.25, 0.25, 0.25]).unwrap();
        WeightMatrix { w: u.scaled(4.0), u, l1_norm: 4.0 }
    }

    #[test]
    fn two_point_precision() {
        let j = assemble_j(&two_point_weights(), &PrecisionParams { lambda: 1.0, c1: 1.0 }).unwrap();
        assert_eq!(j.csr().to_dense(), vec![1.0, -0.5, -0.5, 1.0]);
    }

    #[test]
    fn no_increments_gives_scaled_identity() {
        let j = assemble_j(&two_point_weights(), &PrecisionParams { lambda: 4.0, c1: 0.0 }).unwrap();
        assert_eq!(j.csr().to_dense(), vec![0.125, 0.0, 0.0, 0.125]);
    }

    #[test]
    fn laplacian_rows_vanish_and_j_is_spd() {
        let u = CsrMatrix::from_dense(3, 3, &[0.1, 0.2, 0.0, 0.05, 0.1, 0.15, 0.0, 0.3, 0.1]).unwrap();
        let j1 = increment_matrix(&u).unwrap();
        for r in j1.mul_vec(&[1.0; 3]).unwrap() {
            assert!(r.abs() < 1e-15);
        }
        let wm = WeightMatrix { w: u.clone(), u, l1_norm: 1.0 };
        let j = assemble_j(&wm, &PrecisionParams { lambda: 2.0, c1: 5.0 }).unwrap();
        for r in j.mul_vec(&[1.0; 3]).unwrap() {
            assert!((r - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(factorize(&j).is_ok());
    }

    #[test]
    fn self_weights_cancel_in_increments() {
        let u = CsrMatrix::from_dense(3, 3, &[0.1, 0.2, 0.0, 0.05, 0.1, 0.15, 0.0, 0.3, 0.1]).unwrap();
        let zeroed = CsrMatrix::from_dense(3, 3, &[0.0, 0.2, 0.0, 0.05, 0.0, 0.15, 0.0, 0.3, 0.0]).unwrap();
        assert_eq!(increment_matrix(&u).unwrap(), increment_matrix(&zeroed).unwrap());
    }

    #[test]
    fn c0_conventions() {
        assert_eq!(C0Convention::CombinedSize.value(3, 1), 0.25);
        assert_eq!(C0Convention::SampleSize.value(4, 6), 0.25);
    }

    #[test]
    fn target_in_sample_rejected() {
        let data = STDataset::new(
            vec![STPoint::new(vec![0.0], 0.0), STPoint::new(vec![1.0], 0.0), STPoint::new(vec![2.0], 0.0)],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let spec = BandwidthSpec { mu_s: 1.0, mu_t: 1.0, k_s: 1, k_t: 1 };
        let err = assemble_blocks(
            &data,
            &[STPoint::new(vec![5.0], 0.0), STPoint::new(vec![1.0], 0.0)],
            &spec,
            &MetricSpec::composite(1.0),
            KernelFunction::Quadratic,
            &PrecisionParams { lambda: 1.0, c1: 1.0 },
            &ModelConventions::default(),
        );
        assert_eq!(err.unwrap_err(), SliError::TargetInSampleSet { index: 1 });
    }

    #[test]
    fn three_point_blocks_by_hand() {
        // Samples at 0 and 1, target at 3 on a line, single time, composite
        // metric with K_s = 1 and mu_s = 1.5.
        // Bandwidths: h(0) = 1.5, h(1) = 1.5, h(3) = 1.5 * 2 = 3.
        // W = [[1, 1 - 1/2.25, 0], [1 - 1/2.25, 1, 0], [0, 1 - 4/9, 1]]
        let data = STDataset::new(vec![STPoint::new(vec![0.0], 0.0), STPoint::new(vec![1.0], 0.0)], vec![2.0, 4.0]).unwrap();
        let spec = BandwidthSpec { mu_s: 1.5, mu_t: 1.0, k_s: 1, k_t: 1 };
        let params = PrecisionParams { lambda: 2.0, c1: 3.0 };
        let blocks = assemble_blocks(
            &data,
            &[STPoint::new(vec![3.0], 0.0)],
            &spec,
            &MetricSpec::composite(1.0),
            KernelFunction::Quadratic,
            &params,
            &ModelConventions::default(),
        )
        .unwrap();
        let a = 1.0 - 1.0 / 2.25;
        let b = 1.0 - 4.0 / 9.0;
        let norm = 3.0 + 2.0 * a + b;
        let (ua, ub) = (a / norm, b / norm);
        let c0 = 1.0 / 3.0;
        let lam = 2.0;
        let close = |x: f64, y: f64| assert!((x - y).abs() < 1e-14, "{x} vs {y}");
        close(blocks.j_ss.get(0, 0), (c0 + 3.0 * 2.0 * ua) / lam);
        close(blocks.j_ss.get(0, 1), -3.0 * 2.0 * ua / lam);
        close(blocks.j_ss.get(1, 1), (c0 + 3.0 * (2.0 * ua + ub)) / lam);
        close(blocks.j_sg.get(0, 0), 0.0);
        close(blocks.j_sg.get(1, 0), -3.0 * ub / lam);
        close(blocks.j_gs.get(0, 1), -3.0 * ub / lam);
        close(blocks.j_gg.get(0, 0), (c0 + 3.0 * ub) / lam);
        assert_eq!(blocks.c0, c0);
    }

    #[test]
    fn isolated_target_block() {
        let data = STDataset::new(vec![STPoint::new(vec![0.0], 0.0), STPoint::new(vec![1.0], 0.0)], vec![2.0, 4.0]).unwrap();
        let spec = BandwidthSpec { mu_s: 0.9, mu_t: 1.0, k_s: 1, k_t: 1 };
        let blocks = assemble_blocks(
            &data,
            &[STPoint::new(vec![100.0], 0.0)],
            &spec,
            &MetricSpec::composite(1.0),
            KernelFunction::Quadratic,
            &PrecisionParams { lambda: 2.0, c1: 3.0 },
            &ModelConventions::default(),
        )
        .unwrap();
        assert_eq!(blocks.j_gs.nnz(), 0);
        assert_eq!(blocks.j_gg.csr().to_dense(), vec![1.0 / 3.0 / 2.0]);
    }
}
