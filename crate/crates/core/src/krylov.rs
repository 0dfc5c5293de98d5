//! Restarted flexible GMRES and a stationary-iteration driver.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm2, residual, SparseMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub restart: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Subdiagonal Hessenberg entries below `breakdown_tol · β` end a cycle.
    pub breakdown_tol: f64,
    /// Stationary runs abort once the relative residual exceeds this.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            restart: 30,
            tol: 1e-8,
            max_iters: 10_000,
            breakdown_tol: 1e-14,
            divergence_factor: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::Config("restart must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::Config("divergence factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Relative residual `‖f - A x‖ / ‖f‖`; entry `k` is after `k` iterations.
    pub residual_history: Vec<f64>,
    pub messages: u64,
    pub local_solves: u64,
    /// Alive ranks during each iteration (empty when no rank model applies).
    pub active_ranks_per_iter: Vec<Vec<usize>>,
}

impl SolveReport {
    pub fn final_relres(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Preconditioner whose action may change between inner steps.
pub trait FlexiblePreconditioner {
    /// `iteration` counts the inner steps taken before this one.
    fn apply(&mut self, iteration: usize, r: &[f64]) -> Result<Vec<f64>>;

    fn active_ranks(&self) -> Option<Vec<usize>> {
        None
    }

    fn messages(&self) -> u64 {
        0
    }

    fn local_solves(&self) -> u64 {
        0
    }
}

impl<F> FlexiblePreconditioner for F
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    fn apply(&mut self, iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        self(iteration, r)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityPreconditioner;

impl FlexiblePreconditioner for IdentityPreconditioner {
    fn apply(&mut self, _iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// State-updating sweep `v <- Φ(v, f)` for the stationary driver.
pub trait Sweep {
    fn sweep(&mut self, iteration: usize, v: &mut [f64], f: &[f64]) -> Result<()>;

    fn active_ranks(&self) -> Option<Vec<usize>> {
        None
    }

    fn messages(&self) -> u64 {
        0
    }

    fn local_solves(&self) -> u64 {
        0
    }
}

impl<F> Sweep for F
where
    F: FnMut(usize, &mut [f64], &[f64]) -> Result<()>,
{
    fn sweep(&mut self, iteration: usize, v: &mut [f64], f: &[f64]) -> Result<()> {
        self(iteration, v, f)
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Back substitution on the leading `k x k` block of the rotated Hessenberg.
fn solve_upper(h: &[Vec<f64>], g: &[f64], k: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    y
}

/// Right-preconditioned FGMRES(m) from a zero initial guess.
pub fn fgmres<P: FlexiblePreconditioner + ?Sized>(
    a: &SparseMatrix,
    f: &[f64],
    precond: &mut P,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    config.validate()?;
    if !a.is_square() {
        return Err(Error::InvalidMatrix("FGMRES needs a square matrix".into()));
    }
    check_len(a.n_rows(), f.len())?;
    let n = f.len();
    let m = config.restart;
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        residual_history: vec![1.0],
        ..SolveReport::default()
    };
    let fnorm = norm2(f);
    if fnorm == 0.0 {
        report.residual_history[0] = 0.0;
        report.converged = true;
        return Ok((x, report));
    }
    let start_messages = precond.messages();
    let start_solves = precond.local_solves();

    let mut r = f.to_vec();
    'outer: while report.iterations < config.max_iters {
        let beta = norm2(&r);
        if beta / fnorm <= config.tol {
            report.converged = true;
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        // Column j of the Hessenberg, length j + 2, rotated in place.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut x_cycle = x.clone();

        for j in 0..m {
            let z = precond.apply(report.iterations, &basis[j])?;
            check_len(n, z.len())?;
            report.iterations += 1;
            if let Some(active) = precond.active_ranks() {
                report.active_ranks_per_iter.push(active);
            }
            let mut w = a.spmv(&z)?;
            zs.push(z);

            let mut col = vec![0.0; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                axpy(-hij, vi, &mut w);
            }
            let sub = norm2(&w);
            col[j + 1] = sub;
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a0, a1) = (col[i], col[i + 1]);
                col[i] = c * a0 + s * a1;
                col[i + 1] = -s * a0 + c * a1;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = 0.0;
            rot.push((c, s));
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);

            let y = solve_upper(&h, &g, j + 1);
            x_cycle.copy_from_slice(&x);
            for (yi, zi) in y.iter().zip(&zs) {
                axpy(*yi, zi, &mut x_cycle);
            }
            r = residual(a, f, &x_cycle)?;
            let relres = norm2(&r) / fnorm;
            report.residual_history.push(relres);

            let breakdown = sub <= config.breakdown_tol * beta;
            if relres <= config.tol {
                x.copy_from_slice(&x_cycle);
                report.converged = true;
                break 'outer;
            }
            if !relres.is_finite() {
                return Err(Error::Divergence {
                    iteration: report.iterations,
                    relres,
                });
            }
            if breakdown || report.iterations >= config.max_iters || j + 1 == m {
                break;
            }
            basis.push(w.iter().map(|x| x / sub).collect());
        }
        x.copy_from_slice(&x_cycle);
    }
    report.messages = precond.messages() - start_messages;
    report.local_solves = precond.local_solves() - start_solves;
    Ok((x, report))
}

/// Repeats `v <- sweep(v, f)` from `v = 0` until the relative residual
/// reaches `tol`.
pub fn stationary_solve<S: Sweep + ?Sized>(
    a: &SparseMatrix,
    f: &[f64],
    sweep: &mut S,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    config.validate()?;
    check_len(a.n_rows(), f.len())?;
    let mut v = vec![0.0; a.n_cols()];
    let fnorm = norm2(f);
    let mut report = SolveReport {
        residual_history: vec![if fnorm == 0.0 { 0.0 } else { 1.0 }],
        ..SolveReport::default()
    };
    if fnorm == 0.0 {
        report.converged = true;
        return Ok((v, report));
    }
    let start_messages = sweep.messages();
    let start_solves = sweep.local_solves();
    while report.iterations < config.max_iters {
        sweep.sweep(report.iterations, &mut v, f)?;
        report.iterations += 1;
        if let Some(active) = sweep.active_ranks() {
            report.active_ranks_per_iter.push(active);
        }
        let relres = norm2(&residual(a, f, &v)?) / fnorm;
        report.residual_history.push(relres);
        if relres <= config.tol {
            report.converged = true;
            break;
        }
        if !(relres < config.divergence_factor) {
            return Err(Error::Divergence {
                iteration: report.iterations,
                relres,
            });
        }
    }
    report.messages = sweep.messages() - start_messages;
    report.local_solves = sweep.local_solves() - start_solves;
    Ok((v, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LuFactor;
    use crate::partition::OverlapPartition;
    use crate::schwarz::{SchwarzOperator, SchwarzVariant};
    use crate::subspace::SolverKind;
    use std::sync::Arc;

    #[test]
    fn identity_matrix_one_iteration() {
        let a = SparseMatrix::identity(5);
        let f = [1.0, -2.0, 0.5, 3.0, 4.0];
        let (x, rep) = fgmres(&a, &f, &mut IdentityPreconditioner, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, f.to_vec());
    }

    #[test]
    fn exact_preconditioner_one_iteration() {
        let a = SparseMatrix::tridiagonal(12, -1.0, 2.0, -1.0);
        let lu = LuFactor::new(&a.to_dense()).unwrap();
        let f: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
        let mut p = |_: usize, r: &[f64]| lu.solve(r);
        let (_, rep) = fgmres(&a, &f, &mut p, &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_relres() <= 1e-12);
    }

    #[test]
    fn one_step_least_squares() {
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0]);
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let (x, rep) = fgmres(&a, &[1.0, 1.0], &mut IdentityPreconditioner, &cfg).unwrap();
        assert!(!rep.converged);
        // α = 3/5, residual (2/5, -1/5)
        assert_close!(x[0], 0.6, 1e-15);
        assert_close!(rep.residual_history[1] * 2f64.sqrt(), 5f64.sqrt() / 5.0, 1e-15);
        let (_, rep) = fgmres(&a, &[1.0, 1.0], &mut IdentityPreconditioner, &SolverConfig::default()).unwrap();
        assert!(rep.converged && rep.iterations == 2);
    }

    #[test]
    fn zero_rhs() {
        let a = SparseMatrix::tridiagonal(4, -1.0, 2.0, -1.0);
        let (x, rep) = fgmres(&a, &[0.0; 4], &mut IdentityPreconditioner, &SolverConfig::default()).unwrap();
        assert!(rep.converged && rep.iterations == 0);
        assert_eq!(x, vec![0.0; 4]);
        let mut sw = |_: usize, _: &mut [f64], _: &[f64]| -> Result<()> { unreachable!() };
        let (_, rep) = stationary_solve(&a, &[0.0; 4], &mut sw, &SolverConfig::default()).unwrap();
        assert!(rep.converged && rep.iterations == 0);
    }

    #[test]
    fn max_iters_not_converged() {
        let a = SparseMatrix::tridiagonal(50, -1.0, 2.0, -1.0);
        let cfg = SolverConfig {
            restart: 5,
            max_iters: 12,
            ..SolverConfig::default()
        };
        let (_, rep) = fgmres(&a, &[1.0; 50], &mut IdentityPreconditioner, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 12);
        assert_eq!(rep.residual_history.len(), 13);
        for cycle in rep.residual_history[1..].chunks(5) {
            for w in cycle.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn stationary_ssc_example() {
        let a = Arc::new(SparseMatrix::tridiagonal(3, -1.0, 2.0, -1.0));
        let p = OverlapPartition::from_owned(&a, vec![vec![0, 1], vec![2]], 0).unwrap();
        let op = SchwarzOperator::new(a.clone(), p, SolverKind::Exact, SchwarzVariant::Ssc).unwrap();
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let mut sw = |_: usize, v: &mut [f64], f: &[f64]| op.sweep_in_place(v, f, None);
        let (_, rep) = stationary_solve(&a, &[3.0; 3], &mut sw, &cfg).unwrap();
        assert_close!(rep.residual_history[1], 3.0 / 27f64.sqrt(), 1e-14);

        let (_, rep) = stationary_solve(&a, &[3.0; 3], &mut sw, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
    }

    #[test]
    fn stationary_whole_space_one_sweep() {
        let a = SparseMatrix::tridiagonal(6, -1.0, 2.0, -1.0);
        let lu = LuFactor::new(&a.to_dense()).unwrap();
        let mut sw = |_: usize, v: &mut [f64], f: &[f64]| {
            let r = residual(&a, f, v)?;
            let c = lu.solve(&r)?;
            axpy(1.0, &c, v);
            Ok(())
        };
        let (_, rep) = stationary_solve(&a, &[1.0; 6], &mut sw, &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn divergence_guard() {
        let a = SparseMatrix::identity(3);
        let mut sw = |_: usize, v: &mut [f64], _: &[f64]| {
            for x in v.iter_mut() {
                *x = 10.0 * *x - 1.0;
            }
            Ok(())
        };
        let err = stationary_solve(&a, &[1.0; 3], &mut sw, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn flexible_preconditioner_sees_iteration_index() {
        let a = SparseMatrix::tridiagonal(10, -1.0, 2.0, -1.0);
        let mut seen = Vec::new();
        let mut p = |k: usize, r: &[f64]| {
            seen.push(k);
            Ok(r.iter().map(|x| x / (2.0 + k as f64 * 0.01)).collect())
        };
        let (_, rep) = fgmres(&a, &[1.0; 10], &mut p, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(seen, (0..rep.iterations).collect::<Vec<_>>());
    }
}
