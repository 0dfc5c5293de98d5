//! Sparse (CSR) and dense kernels shared by every solver component.
//!
//! Vectors are plain `[f64]` slices. The dense routines here are sized for
//! local subdomain blocks and for the brute-force oracles, not for large
//! problems.

use crate::error::{check_len, Error, Result};

/// Default largest dimension the dense oracles accept.
pub const DEFAULT_ORACLE_CAP: usize = 512;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays. Column indices inside each row
    /// must be strictly increasing.
    pub fn try_new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets must start at 0".into()));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices, values and row_offsets disagree on nnz".into(),
            ));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if hi < lo {
                return Err(Error::InvalidMatrix(format!("row_offsets decrease at row {i}")));
            }
            for k in lo..hi {
                if col_indices[k] >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        index: col_indices[k],
                        len: n_cols,
                    });
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return Err(Error::InvalidMatrix(format!(
                        "row {i}: columns not strictly increasing (duplicate or unsorted)"
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed
    /// and explicit zeros are kept.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            if i >= n_rows {
                return Err(Error::IndexOutOfRange { index: i, len: n_rows });
            }
            if j >= n_cols {
                return Err(Error::IndexOutOfRange { index: j, len: n_cols });
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_offsets.push(values.len());
        }
        Self::try_new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Constant-coefficient tridiagonal matrix `tridiag(lower, diag, upper)`.
    pub fn tridiagonal(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        let mut t = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, lower));
            }
            t.push((i, i, diag));
            if i + 1 < n {
                t.push((i, i + 1, upper));
            }
        }
        Self::from_triplets(n, n, &t).expect("tridiagonal construction is valid")
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.n_rows() {
            for j in 0..m.n_cols() {
                let v = m.get(i, j);
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.n_rows(), m.n_cols(), &t).expect("dense conversion is valid")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// `Σ_k A_ik x_k`, accumulated left to right.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut acc = 0.0;
        for (&j, &a) in cols.iter().zip(vals) {
            acc += a * x[j];
        }
        acc
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n_cols, x.len())?;
        check_len(self.n_rows, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, &t).expect("transpose is valid")
    }

    /// Symmetry within `rel_tol · max|A|`, entrywise.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = rel_tol * scale;
        (0..self.n_rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol)
        })
    }

    /// Principal submatrix `A(idx, idx)` as a dense block.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<DenseMatrix> {
        let mut pos = vec![usize::MAX; self.n_cols];
        for (p, &g) in idx.iter().enumerate() {
            if g >= self.n_rows || g >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    index: g,
                    len: self.n_rows,
                });
            }
            pos[g] = p;
        }
        let m = idx.len();
        let mut out = DenseMatrix::zeros(m, m);
        for (p, &g) in idx.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                if pos[j] != usize::MAX {
                    out.set(p, pos[j], v);
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d.set(i, j, v);
            }
        }
        d
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_rows * n_cols, values.len())?;
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    /// Panics if the rows are ragged; meant for literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self {
            n_rows,
            n_cols,
            values: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, &v) in col.iter().enumerate() {
            self.set(i, j, v);
        }
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cols, x.len())?;
        Ok((0..self.n_rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.n_cols, other.n_rows)?;
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.values[i * other.n_cols..(i + 1) * other.n_cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.n_rows, other.n_rows)?;
        check_len(self.n_cols, other.n_cols)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix { values, ..*self })
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..*self
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrized(&self) -> DenseMatrix {
        let mut s = self.clone();
        for i in 0..self.n_rows {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        s
    }

    pub fn lu(&self) -> Result<LuFactor> {
        LuFactor::new(self)
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let lu = self.lu()?;
        let n = self.n_rows;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            inv.set_column(j, &lu.solve(&e)?);
        }
        Ok(inv)
    }
}

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

/// Pivots below this fraction of `max|M|` are treated as zero.
const PIVOT_REL_TOL: f64 = 1e-14;

impl LuFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.n_rows,
                found: m.n_cols,
            });
        }
        let n = m.n_rows;
        let threshold = PIVOT_REL_TOL * m.max_abs();
        let mut lu = m.values.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, lu[k * n + k].abs());
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best <= threshold || best == 0.0 {
                return Err(Error::Singular {
                    step: k,
                    pivot: best,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    let (top, bottom) = lu.split_at_mut(i * n);
                    let krow = &top[k * n + k + 1..k * n + n];
                    let irow = &mut bottom[k + 1..n];
                    for (a, &b) in irow.iter_mut().zip(krow) {
                        *a -= l * b;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.solve_permuted_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_permuted_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = x[i];
            for (l, xv) in row.iter().zip(&x[..i]) {
                acc -= l * xv;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let mut acc = x[i];
            for (u, xv) in row.iter().zip(&x[i + 1..]) {
                acc -= u * xv;
            }
            x[i] = acc / self.lu[i * n + i];
        }
    }
}

pub fn dense_lu_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    m.lu()?.solve(b)
}

/// Dense Cholesky factor `M = L Lᵀ`, lower triangle stored row-major.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.n_rows,
                found: m.n_cols,
            });
        }
        let n = m.n_rows;
        let scale = m.max_abs();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > PIVOT_REL_TOL * scale) {
                return Err(Error::NotSpd(format!(
                    "non-positive Cholesky pivot {d:e} at column {j}"
                )));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= self.l[k * n + i] * x[k];
            }
            x[i] = acc / self.l[i * n + i];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        Ok(self.backward(&self.forward(b)))
    }

    /// `L⁻¹ M L⁻ᵀ` for symmetric `M`, symmetrized on return.
    pub fn congruence_inverse(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.n, m.n_rows())?;
        check_len(self.n, m.n_cols())?;
        let n = self.n;
        // Y = L⁻¹ M, column by column.
        let mut y = DenseMatrix::zeros(n, n);
        for j in 0..n {
            y.set_column(j, &self.forward(&m.column(j)));
        }
        // B = L⁻¹ Yᵀ, valid because M is symmetric.
        let yt = y.transpose();
        let mut b = DenseMatrix::zeros(n, n);
        for j in 0..n {
            b.set_column(j, &self.forward(&yt.column(j)));
        }
        Ok(b.symmetrized())
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows,
            found: m.n_cols,
        });
    }
    let n = m.n_rows;
    let mut a = m.symmetrized();
    let mut v = DenseMatrix::identity(n);
    let frob: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let eigvals = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &v.column(src));
    }
    Ok((eigvals, vecs))
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

pub fn inner(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(dot(x, y))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(A x, y)`.
pub fn a_inner(a: &SparseMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(a.n_rows(), y.len())?;
    let ax = a.spmv(x)?;
    Ok(dot(&ax, y))
}

pub fn a_norm(a: &SparseMatrix, x: &[f64]) -> Result<f64> {
    let q = a_inner(a, x, x)?;
    if q < -1e-12 * dot(x, x) {
        return Err(Error::NotSpd(format!("(Ax, x) = {q:e} is negative")));
    }
    Ok(q.max(0.0).sqrt())
}

/// `f - A v`.
pub fn residual(a: &SparseMatrix, f: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n_rows(), f.len())?;
    let mut r = a.spmv(v)?;
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = fi - *ri;
    }
    Ok(r)
}

/// `‖E‖_A = max_v ‖E v‖_A / ‖v‖_A` for a dense propagation operator `E`.
pub fn operator_a_norm(a: &SparseMatrix, e: &DenseMatrix) -> Result<f64> {
    operator_a_norm_capped(a, e, DEFAULT_ORACLE_CAP)
}

pub fn operator_a_norm_capped(a: &SparseMatrix, e: &DenseMatrix, cap: usize) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            found: a.n_cols(),
        });
    }
    if a.n_rows() > cap {
        return Err(Error::OracleCap {
            n: a.n_rows(),
            cap,
        });
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::NotSpd("matrix is not symmetric".into()));
    }
    dense_operator_a_norm(&a.to_dense(), e)
}

/// Dense counterpart of [`operator_a_norm`]: largest generalized eigenvalue of
/// `EᵀAE x = λ A x`, reduced through `A = LLᵀ` to a standard symmetric
/// problem and solved by Jacobi.
pub fn dense_operator_a_norm(a: &DenseMatrix, e: &DenseMatrix) -> Result<f64> {
    check_len(a.n_rows(), e.n_rows())?;
    check_len(a.n_rows(), e.n_cols())?;
    let chol = a.cholesky()?;
    let ae = a.matmul(e)?;
    let m = e.transpose().matmul(&ae)?.symmetrized();
    let b = chol.congruence_inverse(&m)?;
    let (eig, _) = symmetric_eigen(&b)?;
    let top = eig.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}
