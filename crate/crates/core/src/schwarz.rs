//! Additive (PSC) and multiplicative (SSC) Schwarz operators.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix, DEFAULT_ORACLE_CAP};
use crate::partition::{validate_coloring, OverlapPartition};
use crate::subspace::{SolverKind, SubspaceSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchwarzVariant {
    Psc,
    Ssc,
    SscColorized,
}

pub struct SchwarzOperator {
    variant: SchwarzVariant,
    matrix: Arc<SparseMatrix>,
    solvers: Vec<SubspaceSolver>,
    partition: OverlapPartition,
    sweep_order: Vec<usize>,
    local_solves: AtomicU64,
}

impl std::fmt::Debug for SchwarzOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchwarzOperator")
            .field("variant", &self.variant)
            .field("n", &self.matrix.n_rows())
            .field("subdomains", &self.solvers.len())
            .field("sweep_order", &self.sweep_order)
            .finish()
    }
}

impl SchwarzOperator {
    /// One solver of `kind` per overlapped subdomain.
    pub fn new(
        matrix: Arc<SparseMatrix>,
        partition: OverlapPartition,
        kind: SolverKind,
        variant: SchwarzVariant,
    ) -> Result<Self> {
        let solvers = (0..partition.n_subdomains())
            .map(|i| SubspaceSolver::build(&matrix, i, partition.overlapped(i), kind))
            .collect::<Result<Vec<_>>>()?;
        Self::with_solvers(matrix, partition, solvers, variant)
    }

    pub fn with_solvers(
        matrix: Arc<SparseMatrix>,
        partition: OverlapPartition,
        solvers: Vec<SubspaceSolver>,
        variant: SchwarzVariant,
    ) -> Result<Self> {
        check_len(matrix.n_rows(), partition.n_dofs())?;
        check_len(partition.n_subdomains(), solvers.len())?;
        for (i, s) in solvers.iter().enumerate() {
            if s.indices() != partition.overlapped(i) {
                return Err(Error::Partition(format!(
                    "solver {i} is not built on overlapped subdomain {i}"
                )));
            }
        }
        if variant == SchwarzVariant::SscColorized {
            validate_coloring(&partition, &matrix, partition.colors())?;
        }
        let sweep_order = (0..solvers.len()).collect();
        Ok(Self {
            variant,
            matrix,
            solvers,
            partition,
            sweep_order,
            local_solves: AtomicU64::new(0),
        })
    }

    pub fn set_sweep_order(&mut self, order: Vec<usize>) -> Result<()> {
        let mut seen = vec![false; self.solvers.len()];
        if order.len() != seen.len()
            || order
                .iter()
                .any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::Config(format!(
                "sweep order {order:?} is not a permutation of 0..{}",
                seen.len()
            )));
        }
        self.sweep_order = order;
        Ok(())
    }

    pub fn variant(&self) -> SchwarzVariant {
        self.variant
    }

    pub fn matrix(&self) -> &Arc<SparseMatrix> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn partition(&self) -> &OverlapPartition {
        &self.partition
    }

    pub fn solvers(&self) -> &[SubspaceSolver] {
        &self.solvers
    }

    pub fn sweep_order(&self) -> &[usize] {
        &self.sweep_order
    }

    /// Number of nonzero local solves performed so far.
    pub fn local_solves(&self) -> u64 {
        self.local_solves.load(Ordering::Relaxed)
    }

    fn count_solve(&self, i: usize) {
        if self.solvers[i].kind() != SolverKind::Zero {
            self.local_solves.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn check_vectors(&self, v: &[f64], f: &[f64]) -> Result<()> {
        check_len(self.n(), v.len())?;
        check_len(self.n(), f.len())
    }

    /// Successive correction of subdomain `i` using `solver` in its place.
    pub(crate) fn correct_with(
        &self,
        solver: &SubspaceSolver,
        v: &mut [f64],
        f: &[f64],
    ) -> Result<()> {
        if solver.kind() != SolverKind::Zero {
            self.local_solves.fetch_add(1, Ordering::Relaxed);
        }
        solver.correct_in_place(&self.matrix, f, v)
    }

    /// Successive correction of subdomain `i`.
    pub fn correct(&self, i: usize, v: &mut [f64], f: &[f64]) -> Result<()> {
        self.count_solve(i);
        self.solvers[i].correct_in_place(&self.matrix, f, v)
    }

    /// Simultaneous corrections of `group`, all computed from the same `v`
    /// and added in the order given.
    pub fn correct_simultaneous(&self, group: &[usize], v: &mut [f64], f: &[f64]) -> Result<()> {
        let corrections = group
            .par_iter()
            .map(|&i| self.solvers[i].correction(&self.matrix, f, v))
            .collect::<Result<Vec<_>>>()?;
        for (&i, c) in group.iter().zip(&corrections) {
            self.count_solve(i);
            self.solvers[i].scatter_add(c, v);
        }
        Ok(())
    }

    /// `B_PSC f = Σ Rᵢᵀ S_i R_i f`, summed in ascending subdomain order.
    pub fn apply_psc(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_psc_masked(f, None)
    }

    /// Additive correction over the subdomains with `active[i]` set.
    pub fn apply_psc_masked(&self, f: &[f64], active: Option<&[bool]>) -> Result<Vec<f64>> {
        check_len(self.n(), f.len())?;
        let group: Vec<usize> = self.filter_active(0..self.solvers.len(), active)?;
        let mut out = vec![0.0; self.n()];
        // With v = 0 the local residual is R_i f.
        self.correct_simultaneous(&group, &mut out, f)?;
        Ok(out)
    }

    fn filter_active(
        &self,
        ids: impl Iterator<Item = usize>,
        active: Option<&[bool]>,
    ) -> Result<Vec<usize>> {
        match active {
            None => Ok(ids.collect()),
            Some(mask) => {
                check_len(self.solvers.len(), mask.len())?;
                Ok(ids.filter(|&i| mask[i]).collect())
            }
        }
    }

    pub fn ssc_sweep(&self, v: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.ssc_sweep_in_place(&mut out, f, None)?;
        Ok(out)
    }

    /// Successive corrections in `sweep_order`, skipping inactive subdomains.
    pub fn ssc_sweep_in_place(
        &self,
        v: &mut [f64],
        f: &[f64],
        active: Option<&[bool]>,
    ) -> Result<()> {
        self.check_vectors(v, f)?;
        for i in self.filter_active(self.sweep_order.iter().copied(), active)? {
            self.correct(i, v, f)?;
        }
        Ok(())
    }

    pub fn ssc_colorized_sweep(&self, v: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.ssc_colorized_sweep_in_place(&mut out, f, None)?;
        Ok(out)
    }

    /// One simultaneous correction per color, colors in ascending order.
    pub fn ssc_colorized_sweep_in_place(
        &self,
        v: &mut [f64],
        f: &[f64],
        active: Option<&[bool]>,
    ) -> Result<()> {
        self.check_vectors(v, f)?;
        for group in self.partition.color_groups() {
            let group = self.filter_active(group.into_iter(), active)?;
            self.correct_simultaneous(&group, v, f)?;
        }
        Ok(())
    }

    /// Subdomain order equivalent to the colorized sweep.
    pub fn color_order(&self) -> Vec<usize> {
        self.partition.color_groups().concat()
    }

    /// One stationary sweep of this operator's successive variant.
    pub fn sweep_in_place(&self, v: &mut [f64], f: &[f64], active: Option<&[bool]>) -> Result<()> {
        match self.variant {
            SchwarzVariant::Ssc => self.ssc_sweep_in_place(v, f, active),
            SchwarzVariant::SscColorized => self.ssc_colorized_sweep_in_place(v, f, active),
            SchwarzVariant::Psc => Err(Error::Config(
                "PSC is a preconditioner only, not a stationary sweep".into(),
            )),
        }
    }

    /// Preconditioner action `B f`; for the successive variants this is one
    /// sweep from a zero initial guess.
    pub fn apply(&self, f: &[f64], active: Option<&[bool]>) -> Result<Vec<f64>> {
        match self.variant {
            SchwarzVariant::Psc => self.apply_psc_masked(f, active),
            _ => {
                let mut v = vec![0.0; self.n()];
                self.sweep_in_place(&mut v, f, active)?;
                Ok(v)
            }
        }
    }

    /// Dense `I - B A` of this operator.
    pub fn assemble_propagation(&self) -> Result<DenseMatrix> {
        let n = self.n();
        match self.variant {
            SchwarzVariant::Psc => {
                assemble_propagation_with(&self.matrix, DEFAULT_ORACLE_CAP, |_v, f| {
                    self.apply_psc(f)
                })
            }
            _ => assemble_propagation_with(&self.matrix, DEFAULT_ORACLE_CAP, |v, f| {
                let mut out = v.to_vec();
                self.sweep_in_place(&mut out, f, None)?;
                debug_assert_eq!(out.len(), n);
                Ok(out)
            }),
        }
    }
}

/// Assembles the error propagation of an iteration `v_out = step(v_in, f)`
/// column by column: with exact solution `u = e_j`, `f = A e_j` and
/// `v_in = 0`, the new error `e_j - v_out` is column `j`.
pub fn assemble_propagation_with<F>(a: &SparseMatrix, cap: usize, mut step: F) -> Result<DenseMatrix>
where
    F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let n = a.n_rows();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    let mut e = DenseMatrix::zeros(n, n);
    let zero = vec![0.0; n];
    let mut u = vec![0.0; n];
    for j in 0..n {
        u[j] = 1.0;
        let f = a.spmv(&u)?;
        let v = step(&zero, &f)?;
        check_len(n, v.len())?;
        let col: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| ui - vi).collect();
        e.set_column(j, &col);
        u[j] = 0.0;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{operator_a_norm, residual};
    use crate::partition::PartitionStrategy;

    fn three_by_three(variant: SchwarzVariant) -> SchwarzOperator {
        let a = SparseMatrix::tridiagonal(3, -1.0, 2.0, -1.0);
        let p = OverlapPartition::from_owned(&a, vec![vec![0, 1], vec![2]], 0).unwrap();
        SchwarzOperator::new(Arc::new(a), p, SolverKind::Exact, variant).unwrap()
    }

    fn whole_space(variant: SchwarzVariant) -> SchwarzOperator {
        let a = SparseMatrix::tridiagonal(5, -1.0, 2.5, -1.0);
        let p = OverlapPartition::from_owned(&a, vec![(0..5).collect()], 0).unwrap();
        SchwarzOperator::new(Arc::new(a), p, SolverKind::Exact, variant).unwrap()
    }

    #[test]
    fn psc_three_by_three() {
        let op = three_by_three(SchwarzVariant::Psc);
        let z = op.apply_psc(&[3.0; 3]).unwrap();
        for (g, w) in z.iter().zip([3.0, 3.0, 1.5]) {
            assert_close!(*g, w, 1e-14);
        }
        assert_eq!(op.apply_psc(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(op.local_solves(), 4);
    }

    #[test]
    fn single_subspace_is_exact_inverse() {
        let op = whole_space(SchwarzVariant::Psc);
        let u = [1.0, -2.0, 0.5, 3.0, 1.0];
        let f = op.matrix().spmv(&u).unwrap();
        let x = op.apply_psc(&f).unwrap();
        for (xi, ui) in x.iter().zip(u) {
            assert_close!(*xi, ui, 1e-13);
        }
        let ssc = whole_space(SchwarzVariant::Ssc);
        let x = ssc.ssc_sweep(&[0.0; 5], &f).unwrap();
        for (xi, ui) in x.iter().zip(u) {
            assert_close!(*xi, ui, 1e-13);
        }
        assert!(ssc.assemble_propagation().unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn ssc_three_by_three() {
        let op = three_by_three(SchwarzVariant::Ssc);
        let f = [3.0; 3];
        let v = op.ssc_sweep(&[0.0; 3], &f).unwrap();
        for (g, w) in v.iter().zip([3.0, 3.0, 3.0]) {
            assert_close!(*g, w, 1e-14);
        }
        let r = residual(op.matrix(), &f, &v).unwrap();
        for (g, w) in r.iter().zip([0.0, 3.0, 0.0]) {
            assert_close!(*g, w, 1e-13);
        }
        let u = [1.0, 2.0, 3.0];
        let fu = op.matrix().spmv(&u).unwrap();
        let same = op.ssc_sweep(&u, &fu).unwrap();
        for (g, w) in same.iter().zip(u) {
            assert_close!(*g, w, 1e-14);
        }
        let e = op.assemble_propagation().unwrap();
        assert!(operator_a_norm(op.matrix(), &e).unwrap() < 1.0);
    }

    #[test]
    fn diagonal_psc_with_singletons_is_exact() {
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0, 5.0, 0.5]);
        let p = OverlapPartition::from_owned(&a, (0..4).map(|i| vec![i]).collect(), 0).unwrap();
        let op = SchwarzOperator::new(Arc::new(a), p, SolverKind::Exact, SchwarzVariant::Psc).unwrap();
        assert!(op.assemble_propagation().unwrap().max_abs() < 1e-15);
    }

    fn chain_strips(variant: SchwarzVariant) -> SchwarzOperator {
        let a = SparseMatrix::tridiagonal(16, -1.0, 2.0, -1.0);
        let p = OverlapPartition::build(&a, 4, PartitionStrategy::Contiguous, 1).unwrap();
        SchwarzOperator::new(Arc::new(a), p, SolverKind::Exact, variant).unwrap()
    }

    #[test]
    fn colorized_matches_color_ordered_ssc_bitwise() {
        let col = chain_strips(SchwarzVariant::SscColorized);
        assert_eq!(col.color_order(), vec![0, 2, 1, 3]);
        let mut seq = chain_strips(SchwarzVariant::Ssc);
        seq.set_sweep_order(vec![0, 2, 1, 3]).unwrap();
        let f: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let v0: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).cos()).collect();
        assert_eq!(col.ssc_colorized_sweep(&v0, &f).unwrap(), seq.ssc_sweep(&v0, &f).unwrap());
    }

    #[test]
    fn one_color_colorized_equals_psc_correction() {
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        let p = OverlapPartition::from_owned(&a, vec![vec![0, 1], vec![2, 3]], 1).unwrap();
        assert_eq!(p.n_colors(), 1);
        let a = Arc::new(a);
        let col = SchwarzOperator::new(a.clone(), p.clone(), SolverKind::Exact, SchwarzVariant::SscColorized).unwrap();
        let psc = SchwarzOperator::new(a.clone(), p, SolverKind::Exact, SchwarzVariant::Psc).unwrap();
        let f = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(col.ssc_colorized_sweep(&[0.0; 4], &f).unwrap(), psc.apply_psc(&f).unwrap());
    }

    #[test]
    fn sweep_order_must_be_permutation() {
        let mut op = chain_strips(SchwarzVariant::Ssc);
        assert!(op.set_sweep_order(vec![0, 1, 1, 3]).is_err());
        assert!(op.set_sweep_order(vec![0, 1, 2]).is_err());
        assert!(op.set_sweep_order(vec![3, 2, 1, 0]).is_ok());
    }

    #[test]
    fn psc_is_order_independent_and_symmetric() {
        let mut op = chain_strips(SchwarzVariant::Psc);
        let f: Vec<f64> = (0..16).map(|i| 1.0 + i as f64).collect();
        let before = op.apply_psc(&f).unwrap();
        op.set_sweep_order(vec![3, 1, 0, 2]).unwrap();
        let after = op.apply_psc(&f).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert_close!(*x, *y, 1e-13 * x.abs().max(1.0));
        }
        // B = (I - E) A⁻¹ must be symmetric; check A - A E = A B A instead.
        let e = op.assemble_propagation().unwrap();
        let ad = op.matrix().to_dense();
        let aba = ad.sub(&ad.matmul(&e).unwrap()).unwrap();
        assert!(aba.sub(&aba.transpose()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn ssc_error_monotone_per_correction() {
        let op = chain_strips(SchwarzVariant::Ssc);
        let a = op.matrix().clone();
        let u: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let f = a.spmv(&u).unwrap();
        let mut v = vec![0.0; 16];
        let err = |v: &[f64]| {
            let e: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
            crate::linalg::a_norm(&a, &e).unwrap()
        };
        let mut last = err(&v);
        for _ in 0..3 {
            for i in 0..4 {
                op.correct(i, &mut v, &f).unwrap();
                let now = err(&v);
                assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }

    #[test]
    fn colorized_requires_valid_coloring() {
        let a = SparseMatrix::tridiagonal(16, -1.0, 2.0, -1.0);
        let p = OverlapPartition::build(&a, 4, PartitionStrategy::Contiguous, 1).unwrap();
        let solvers = (0..4)
            .map(|i| SubspaceSolver::build(&a, i, p.overlapped(i), SolverKind::Exact).unwrap())
            .collect();
        // a valid coloring passes
        assert!(SchwarzOperator::with_solvers(Arc::new(a), p, solvers, SchwarzVariant::SscColorized).is_ok());
    }
}
