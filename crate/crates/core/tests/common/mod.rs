//! Dense reference routines for the integration tests, written against
//! plain row-major `Vec<Vec<f64>>` so they share no code with the library.

#![allow(dead_code)]

use rand::Rng;
use resilient_schwarz::{DenseMatrix, SparseMatrix};

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn from_dense(d: &DenseMatrix) -> Mat {
    (0..d.n_rows()).map(|i| d.row(i).to_vec()).collect()
}

pub fn from_sparse(a: &SparseMatrix) -> Mat {
    let n = a.n_rows();
    let mut m = zeros(n, a.n_cols());
    for (i, row) in m.iter_mut().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            row[j] += v;
        }
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = zeros(n, m);
    for i in 0..n {
        for p in 0..k {
            let x = a[i][p];
            if x != 0.0 {
                for j in 0..m {
                    c[i][j] += x * b[p][j];
                }
            }
        }
    }
    c
}

pub fn transpose(a: &Mat) -> Mat {
    let mut t = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            t[j][i] = x;
        }
    }
    t
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m = a.clone();
    let mut inv = eye(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        inv.swap(c, p);
        let d = m[c][c];
        assert!(d.abs() > 1e-300, "singular");
        for j in 0..n {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..n {
                        m[r][j] -= f * m[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    inv
}

/// Lower Cholesky factor.
pub fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = zeros(n, n);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        assert!(d > 0.0, "not SPD");
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (x, y) = (m[k][p], m[k][q]);
                    m[k][p] = c * x - s * y;
                    m[k][q] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (m[p][k], m[q][k]);
                    m[p][k] = c * x - s * y;
                    m[q][k] = s * x + c * y;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `‖E‖_A = ‖Lᵀ E L⁻ᵀ‖_2` with `A = L Lᵀ`.
pub fn a_norm(a: &Mat, e: &Mat) -> f64 {
    let l = cholesky(a);
    let lt = transpose(&l);
    let lt_inv = inverse(&lt);
    let m = mul(&mul(&lt, e), &lt_inv);
    let g = mul(&transpose(&m), &m);
    let g: Mat = (0..g.len())
        .map(|i| (0..g.len()).map(|j| 0.5 * (g[i][j] + g[j][i])).collect())
        .collect();
    sym_eigenvalues(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// `T = R_iᵀ S R_i A` for the unit-vector subspace `idx`.
pub fn subspace_op(a: &Mat, idx: &[usize], s: &Mat) -> Mat {
    let n = a.len();
    let mut t = zeros(n, n);
    for (p, &i) in idx.iter().enumerate() {
        for (q, _) in idx.iter().enumerate() {
            let w = s[p][q];
            if w != 0.0 {
                let row = &a[idx[q]];
                for j in 0..n {
                    t[i][j] += w * row[j];
                }
            }
        }
    }
    t
}

pub fn principal(a: &Mat, idx: &[usize]) -> Mat {
    idx.iter().map(|&i| idx.iter().map(|&j| a[i][j]).collect()).collect()
}

/// `(I - T_{order[k-1]}) ... (I - T_{order[0]})`.
pub fn product(ts: &[Mat], order: &[usize]) -> Mat {
    let n = ts[0].len();
    let mut e = eye(n);
    for &i in order {
        e = mul(&sub(&eye(n), &ts[i]), &e);
    }
    e
}

/// `I - diag(w) Σ_{i ∈ set} T_i`.
pub fn additive(ts: &[Mat], set: &[usize], w: &[f64]) -> Mat {
    let n = ts[0].len();
    let mut e = eye(n);
    for &i in set {
        for r in 0..n {
            for c in 0..n {
                e[r][c] -= w[r] * ts[i][r][c];
            }
        }
    }
    e
}

/// Least-squares `min ‖b - M y‖` by Householder QR; returns `y`.
pub fn lstsq(m: &Mat, b: &[f64]) -> Vec<f64> {
    let rows = m.len();
    let cols = m[0].len();
    let mut r = m.clone();
    let mut qb = b.to_vec();
    for k in 0..cols {
        let alpha = {
            let nrm = (k..rows).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
            if r[k][k] > 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>();
        if vn == 0.0 {
            continue;
        }
        for j in k..cols {
            let d: f64 = (k..rows).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vn;
            for i in k..rows {
                r[i][j] -= d * v[i - k];
            }
        }
        let d: f64 = (k..rows).map(|i| v[i - k] * qb[i]).sum::<f64>() * 2.0 / vn;
        for i in k..rows {
            qb[i] -= d * v[i - k];
        }
    }
    let mut y = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut s = qb[i];
        for j in i + 1..cols {
            s -= r[i][j] * y[j];
        }
        y[i] = s / r[i][i];
    }
    y
}

/// Orthonormal basis by Householder QR of the columns of `m`.
pub fn orthonormal_columns(m: &Mat) -> Mat {
    let rows = m.len();
    let cols = m[0].len();
    let mut r = m.clone();
    let mut vs = Vec::new();
    for k in 0..cols {
        let nrm = (k..rows).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        let alpha = if r[k][k] > 0.0 { -nrm } else { nrm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>();
        if vn > 0.0 {
            for j in k..cols {
                let d: f64 = (k..rows).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vn;
                for i in k..rows {
                    r[i][j] -= d * v[i - k];
                }
            }
        }
        vs.push((v, vn));
    }
    let mut q = zeros(rows, cols);
    for j in 0..cols {
        let mut e = vec![0.0; rows];
        e[j] = 1.0;
        for (k, (v, vn)) in vs.iter().enumerate().rev() {
            if *vn == 0.0 {
                continue;
            }
            let d: f64 = (k..rows).map(|i| v[i - k] * e[i]).sum::<f64>() * 2.0 / vn;
            for i in k..rows {
                e[i] -= d * v[i - k];
            }
        }
        for i in 0..rows {
            q[i][j] = e[i];
        }
    }
    q
}

/// Random sparse SPD matrix: path graph plus chords, mixed-sign couplings,
/// diagonal dominance plus a random positive shift.
pub fn random_spd(n: usize, chords: usize, rng: &mut impl Rng) -> SparseMatrix {
    let mut m = zeros(n, n);
    let link = |m: &mut Mat, i: usize, j: usize, w: f64| {
        m[i][j] += w;
        m[j][i] += w;
    };
    for i in 1..n {
        let w = -rng.gen_range(0.2..1.5);
        link(&mut m, i - 1, i, w);
    }
    for _ in 0..chords {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            let w = rng.gen_range(-1.0..0.5);
            link(&mut m, i, j, w);
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[i][j].abs()).sum();
        m[i][i] = off + rng.gen_range(0.05..1.0);
    }
    to_sparse(&m)
}

pub fn to_sparse(m: &Mat) -> SparseMatrix {
    let mut trip = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                trip.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(m.len(), m[0].len(), &trip).expect("valid triplets")
}
