//! Restriction to a subdomain, local solvers and single subspace
//! corrections `v <- v + Rᵀ S R (f - A v)`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{LuFactor, SparseMatrix};

pub fn restrict(v: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&k| {
            v.get(k).copied().ok_or(Error::IndexOutOfRange {
                index: k,
                len: v.len(),
            })
        })
        .collect()
}

pub fn prolong(v_local: &[f64], indices: &[usize], n: usize) -> Result<Vec<f64>> {
    check_len(indices.len(), v_local.len())?;
    let mut out = vec![0.0; n];
    for (&k, &x) in indices.iter().zip(v_local) {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
        out[k] = x;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense LU of the principal block, `S_i = A_i⁻¹`.
    Exact,
    /// Richardson step `S_i = α I` with `α = 1/‖A_i‖_∞`.
    ScaledIdentity,
    /// No correction.
    Zero,
}

#[derive(Clone, Debug)]
enum LocalSolve {
    Exact(LuFactor),
    Scaled(f64),
    Zero,
}

/// Solver for one subspace `V_i`, spanned by the unit vectors of `indices`.
#[derive(Clone, Debug)]
pub struct SubspaceSolver {
    subdomain: usize,
    indices: Vec<usize>,
    local: LocalSolve,
}

impl SubspaceSolver {
    pub fn build(
        a: &SparseMatrix,
        subdomain: usize,
        indices: &[usize],
        kind: SolverKind,
    ) -> Result<Self> {
        if kind != SolverKind::Zero && indices.is_empty() {
            return Err(Error::Partition(format!("subdomain {subdomain} has no unknowns")));
        }
        let local = match kind {
            SolverKind::Exact => LocalSolve::Exact(a.principal_submatrix(indices)?.lu()?),
            SolverKind::ScaledIdentity => {
                let block = a.principal_submatrix(indices)?;
                let norm = block.inf_norm();
                if !(norm > 0.0) {
                    return Err(Error::NotSpd(format!("subdomain {subdomain} block is zero")));
                }
                LocalSolve::Scaled(1.0 / norm)
            }
            SolverKind::Zero => LocalSolve::Zero,
        };
        Ok(Self {
            subdomain,
            indices: indices.to_vec(),
            local,
        })
    }

    /// Scaled identity with a caller-chosen `α`.
    pub fn scaled(subdomain: usize, indices: &[usize], alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            subdomain,
            indices: indices.to_vec(),
            local: LocalSolve::Scaled(alpha),
        })
    }

    pub fn subdomain(&self) -> usize {
        self.subdomain
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn kind(&self) -> SolverKind {
        match self.local {
            LocalSolve::Exact(_) => SolverKind::Exact,
            LocalSolve::Scaled(_) => SolverKind::ScaledIdentity,
            LocalSolve::Zero => SolverKind::Zero,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.local {
            LocalSolve::Scaled(a) => Some(a),
            _ => None,
        }
    }

    /// `S_i r` for a local residual.
    pub fn solve_local(&self, r_local: &[f64]) -> Result<Vec<f64>> {
        check_len(self.indices.len(), r_local.len())?;
        Ok(match &self.local {
            LocalSolve::Exact(lu) => lu.solve(r_local)?,
            LocalSolve::Scaled(alpha) => r_local.iter().map(|r| alpha * r).collect(),
            LocalSolve::Zero => vec![0.0; r_local.len()],
        })
    }

    /// `R_i (f - A v)`, computed row by row over the subdomain.
    pub fn local_residual(&self, a: &SparseMatrix, f: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len(a.n_rows(), f.len())?;
        check_len(a.n_cols(), v.len())?;
        Ok(self.indices.iter().map(|&k| f[k] - a.row_dot(k, v)).collect())
    }

    /// Local correction `S_i R_i (f - A v)`.
    pub fn correction(&self, a: &SparseMatrix, f: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if matches!(self.local, LocalSolve::Zero) {
            check_len(a.n_rows(), f.len())?;
            check_len(a.n_cols(), v.len())?;
            return Ok(vec![0.0; self.indices.len()]);
        }
        self.solve_local(&self.local_residual(a, f, v)?)
    }

    /// Adds `Rᵢᵀ c` to `v`.
    pub fn scatter_add(&self, local: &[f64], v: &mut [f64]) {
        for (&k, &c) in self.indices.iter().zip(local) {
            v[k] += c;
        }
    }

    pub fn correct_in_place(&self, a: &SparseMatrix, f: &[f64], v: &mut [f64]) -> Result<()> {
        let c = self.correction(a, f, v)?;
        self.scatter_add(&c, v);
        Ok(())
    }

    /// `v + Rᵢᵀ S_i R_i (f - A v)`.
    pub fn apply_correction(&self, a: &SparseMatrix, f: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.correct_in_place(a, f, &mut out)?;
        Ok(out)
    }
}
