//! Compressed sparse row matrices and sparse symmetric factorization.
//!
//! Symmetric matrices are factorized as `P A P^T = L D L^T` with a unit lower
//! triangular `L`, using the up-looking algorithm of Davis' LDL package on an
//! approximate-minimum-degree ordering. Requiring every pivot of `D` to be
//! positive gives the Cholesky factorization (`L sqrt(D)`) and doubles as the
//! positive-definiteness test; the unrestricted variant is the symmetric LU
//! factorization `U = D L^T`.

use crate::error::{Result, SliError};

/// Sparse matrix in compressed row storage with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries are
    /// sorted, duplicates summed, and explicit zeros dropped.
    pub fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != nrows {
            return Err(SliError::DimensionMismatch(format!(
                "{} rows supplied for a {nrows}-row matrix",
                rows.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, v) in row {
                if c >= ncols {
                    return Err(SliError::DimensionMismatch(format!(
                        "column {c} out of range for {ncols} columns"
                    )));
                }
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            // Drop exact zeros, including cancelled duplicates.
            let mut w = start;
            for r in start..col_idx.len() {
                if values[r] != 0.0 {
                    col_idx[w] = col_idx[r];
                    values[w] = values[r];
                    w += 1;
                }
            }
            col_idx.truncate(w);
            values.truncate(w);
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows {
                return Err(SliError::DimensionMismatch(format!("row {i} out of range")));
            }
            rows[i].push((j, v));
        }
        Self::from_rows(nrows, ncols, rows)
    }

    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(SliError::DimensionMismatch("dense buffer size".into()));
        }
        let rows = (0..nrows)
            .map(|i| (0..ncols).map(|j| (j, data[i * ncols + j])).collect())
            .collect();
        Self::from_rows(nrows, ncols, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let rows = diag.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect();
        Self::from_rows(n, n, rows).expect("diagonal is well formed")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let p = next[j];
            col_idx[p] = i;
            values[p] = v;
            next[j] += 1;
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// `self * factor` with the sparsity pattern kept.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Entry-wise sum `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SliError::DimensionMismatch("matrix shapes differ".into()));
        }
        let rows = (0..self.nrows)
            .map(|i| {
                let (c1, v1) = self.row(i);
                let (c2, v2) = other.row(i);
                c1.iter()
                    .zip(v1)
                    .map(|(&c, &v)| (c, a * v))
                    .chain(c2.iter().zip(v2).map(|(&c, &v)| (c, b * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.nrows, self.ncols, rows)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(SliError::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.ncols
            )));
        }
        Ok((0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect())
    }

    /// Sum of the absolute values of all entries.
    pub fn entrywise_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            out[i * self.ncols + j] = v;
        }
        out
    }

    /// Sub-matrix with rows in `rows` and columns in `cols` (half-open ranges).
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let (c0, c1) = (cols.start, cols.end);
        let out_rows = rows
            .clone()
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&j, _)| j >= c0 && j < c1)
                    .map(|(&j, &x)| (j - c0, x))
                    .collect()
            })
            .collect();
        Self::from_rows(rows.len(), c1 - c0, out_rows).expect("block of a valid matrix")
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CsrMatrix) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut rows = Vec::with_capacity(nrows);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for j in 0..other.nrows {
                let (cb, vb) = other.row(j);
                let mut row = Vec::with_capacity(ca.len() * cb.len());
                for (&k, &a) in ca.iter().zip(va) {
                    for (&l, &b) in cb.iter().zip(vb) {
                        row.push((k * other.ncols + l, a * b));
                    }
                }
                rows.push(row);
            }
        }
        Self::from_rows(nrows, ncols, rows).expect("kronecker of valid matrices")
    }

    fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(i, j, _)| self.row(j).0.binary_search(&i).is_ok())
    }
}

/// Square sparse matrix with a structurally symmetric pattern, stored in full
/// (both triangles).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    inner: CsrMatrix,
}

impl SparseSymMatrix {
    pub fn new(inner: CsrMatrix) -> Result<Self> {
        if inner.nrows != inner.ncols {
            return Err(SliError::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                inner.nrows, inner.ncols
            )));
        }
        if inner.values.iter().any(|v| !v.is_finite()) {
            return Err(SliError::InvalidArgument("matrix has non-finite entries".into()));
        }
        if !inner.is_structurally_symmetric() {
            return Err(SliError::InvalidArgument("sparsity pattern is not symmetric".into()));
        }
        Ok(Self { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn into_csr(self) -> CsrMatrix {
        self.inner
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.mul_vec(x)
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.mul_vec(x)?;
        Ok(ax.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { inner: self.inner.scaled(factor) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Lu,
}

/// Symmetric fill-reducing permutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FillOrdering {
    Natural,
    ApproximateMinimumDegree,
    /// `perm[new] = old`
    Custom(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorOptions {
    pub kind: FactorKind,
    pub ordering: FillOrdering,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { kind: FactorKind::Cholesky, ordering: FillOrdering::ApproximateMinimumDegree }
    }
}

/// `P A P^T = L D L^T` with unit lower triangular `L` stored by columns.
#[derive(Clone, Debug)]
pub struct Factorization {
    kind: FactorKind,
    n: usize,
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
}

const NONE: usize = usize::MAX;

fn amd_ordering(a: &CsrMatrix) -> Result<Vec<usize>> {
    let n = a.nrows;
    if n == 0 {
        return Ok(Vec::new());
    }
    // The pattern is symmetric, so CSR row pointers double as CSC.
    let (p, _, _) = amd::order::<usize>(n, &a.row_ptr, &a.col_idx, &amd::Control::default())
        .map_err(|s| SliError::InvalidArgument(format!("ordering failed: {s:?}")))?;
    Ok(p)
}

fn validate_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(SliError::InvalidArgument("permutation has wrong length".into()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(SliError::InvalidArgument("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Cholesky factorization with an approximate-minimum-degree ordering.
pub fn factorize(a: &SparseSymMatrix) -> Result<Factorization> {
    factorize_with(a, &FactorOptions::default())
}

pub fn factorize_with(a: &SparseSymMatrix, options: &FactorOptions) -> Result<Factorization> {
    let n = a.n();
    let csr = a.csr();
    let perm = match &options.ordering {
        FillOrdering::Natural => (0..n).collect(),
        FillOrdering::ApproximateMinimumDegree => amd_ordering(csr)?,
        FillOrdering::Custom(p) => {
            validate_perm(p, n)?;
            p.clone()
        }
    };
    let mut pinv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        pinv[old] = new;
    }

    // Symbolic: elimination tree and column counts of L.
    let mut parent = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        let (cols, _) = csr.row(perm[k]);
        for &j in cols {
            let mut i = pinv[j];
            if i < k {
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
    }
    let mut l_ptr = vec![0usize; n + 1];
    for k in 0..n {
        l_ptr[k + 1] = l_ptr[k] + lnz[k];
    }

    // Numeric.
    let total = l_ptr[n];
    let mut l_idx = vec![0usize; total];
    let mut l_val = vec![0.0; total];
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut pattern = vec![0usize; n];
    lnz.iter_mut().for_each(|c| *c = 0);
    flag.iter_mut().for_each(|f| *f = NONE);
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        let (cols, vals) = csr.row(perm[k]);
        for (&j, &v) in cols.iter().zip(vals) {
            let mut i = pinv[j];
            if i <= k {
                y[i] += v;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
        }
        d[k] = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let p2 = l_ptr[i] + lnz[i];
            for p in l_ptr[i]..p2 {
                y[l_idx[p]] -= l_val[p] * yi;
            }
            let l_ki = yi / d[i];
            d[k] -= l_ki * yi;
            l_idx[p2] = k;
            l_val[p2] = l_ki;
            lnz[i] += 1;
        }
        match options.kind {
            FactorKind::Cholesky if !(d[k] > 0.0) || !d[k].is_finite() => {
                return Err(SliError::NotPositiveDefinite { pivot: k, value: d[k] });
            }
            FactorKind::Lu if d[k] == 0.0 || !d[k].is_finite() => {
                return Err(SliError::Singular { pivot: k });
            }
            _ => {}
        }
    }
    Ok(Factorization { kind: options.kind, n, perm, l_ptr, l_idx, l_val, d })
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `perm[new] = old`
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(SliError::DimensionMismatch(format!(
                "right-hand side of length {} for order {}",
                b.len(),
                self.n
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                xj -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = xj;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }

    /// `(ln |det A|, sign of det A)`
    pub fn log_abs_determinant(&self) -> (f64, f64) {
        let mut sign = 1.0;
        let mut acc = 0.0;
        for &d in &self.d {
            if d < 0.0 {
                sign = -sign;
            }
            acc += d.abs().ln();
        }
        (acc, sign)
    }

    /// `ln det A`; errors if the determinant is negative.
    pub fn log_determinant(&self) -> Result<f64> {
        let (value, sign) = self.log_abs_determinant();
        if sign < 0.0 {
            return Err(SliError::NegativeDeterminant);
        }
        Ok(value)
    }

    /// Diagonal of the Cholesky factor `L sqrt(D)`; `None` for indefinite
    /// factorizations.
    pub fn cholesky_diagonal(&self) -> Option<Vec<f64>> {
        self.d.iter().map(|&d| (d > 0.0).then(|| d.sqrt())).collect()
    }
}
