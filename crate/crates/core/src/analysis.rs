//! Dense brute-force oracles for subspace correction theory.
//!
//! Everything here is assembled from explicit dense matrices with the
//! `linalg` kernels only; nothing goes through the Schwarz or redundancy
//! operators, so results can be used to cross-check them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dense_operator_a_norm, symmetric_eigen, DenseMatrix, SparseMatrix};
use crate::partition::{OverlapPartition, PartitionStrategy};
use crate::redundancy::PairingMap;

/// Size limits of the X-Z oracle.
pub const XZ_MAX_N: usize = 32;
pub const XZ_MAX_STACKED: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalSolverChoice {
    /// `A_i⁻¹`.
    Exact,
    /// `ω D_i⁻¹` with `ω = 1 / ‖D_i⁻¹ A_i‖_∞`.
    DampedJacobi,
    /// `α I` with `α = 1 / ‖A_i‖_∞`.
    ScaledIdentity,
}

fn block(a: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(rows.len(), cols.len());
    for (p, &i) in rows.iter().enumerate() {
        for (q, &j) in cols.iter().enumerate() {
            b.set(p, q, a.get(i, j));
        }
    }
    b
}

/// Dense local solver matrix `S_i` for the subspace spanned by `idx`.
pub fn local_solver_matrix(a: &DenseMatrix, idx: &[usize], choice: LocalSolverChoice) -> Result<DenseMatrix> {
    let ai = block(a, idx, idx);
    let k = idx.len();
    match choice {
        LocalSolverChoice::Exact => ai.inverse(),
        LocalSolverChoice::ScaledIdentity => Ok(DenseMatrix::identity(k).scale(1.0 / ai.inf_norm())),
        LocalSolverChoice::DampedJacobi => {
            let mut dinv_a = ai.clone();
            for p in 0..k {
                let d = ai.get(p, p);
                if !(d > 0.0) {
                    return Err(Error::NotSpd(format!("diagonal entry {d} at local index {p}")));
                }
                for q in 0..k {
                    dinv_a.set(p, q, ai.get(p, q) / d);
                }
            }
            let omega = 1.0 / dinv_a.inf_norm();
            let mut s = DenseMatrix::zeros(k, k);
            for p in 0..k {
                s.set(p, p, omega / ai.get(p, p));
            }
            Ok(s)
        }
    }
}

/// `T_i = R_iᵀ S_i R_i A` as an `n x n` matrix.
pub fn subspace_operator(a: &DenseMatrix, idx: &[usize], s: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.n_rows();
    let rows = block(a, idx, &(0..n).collect::<Vec<_>>());
    let local = s.matmul(&rows)?;
    let mut t = DenseMatrix::zeros(n, n);
    for (p, &i) in idx.iter().enumerate() {
        for j in 0..n {
            t.set(i, j, local.get(p, j));
        }
    }
    Ok(t)
}

fn operators(a: &DenseMatrix, subspaces: &[Vec<usize>], solvers: &[DenseMatrix]) -> Result<Vec<DenseMatrix>> {
    if subspaces.len() != solvers.len() {
        return Err(Error::DimensionMismatch {
            expected: subspaces.len(),
            found: solvers.len(),
        });
    }
    subspaces
        .iter()
        .zip(solvers)
        .map(|(idx, s)| subspace_operator(a, idx, s))
        .collect()
}

/// `(I - T_{order[k-1]}) ... (I - T_{order[0]})`.
pub fn ssc_propagation(ts: &[DenseMatrix], order: &[usize]) -> Result<DenseMatrix> {
    let n = ts.first().map_or(0, |t| t.n_rows());
    let mut e = DenseMatrix::identity(n);
    for &i in order {
        let step = DenseMatrix::identity(n).sub(&ts[i])?;
        e = step.matmul(&e)?;
    }
    Ok(e)
}

/// `I - Σ_{i ∈ set} T_i`.
pub fn psc_propagation(ts: &[DenseMatrix], set: &[usize]) -> Result<DenseMatrix> {
    let n = ts.first().map_or(0, |t| t.n_rows());
    let mut e = DenseMatrix::identity(n);
    for &i in set {
        e = e.sub(&ts[i])?;
    }
    Ok(e)
}

fn ascending_alive(alive: &[bool]) -> Vec<usize> {
    (0..alive.len()).filter(|&i| alive[i]).collect()
}

fn redundant_order(pairing: &PairingMap, alive: &[bool]) -> Vec<usize> {
    (0..alive.len()).filter(|&h| alive[h]).map(|h| pairing.buddy(h)).collect()
}

/// Pass orders of the successive redundant method for the natural sweep
/// `0, 1, ..., N-1`. A single failure at `j` rotates both passes so the
/// redundant correction of `V_j` continues the sweep where `V_j` sits
/// (ascending when the buddy precedes `j`, descending otherwise).
pub fn srsc_orders(pairing: &PairingMap, alive: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let n = alive.len();
    let down: Vec<usize> = (0..n).filter(|&r| !alive[r]).collect();
    if down.len() == 1 {
        let j = down[0];
        let b = pairing.buddy(j);
        if b < j {
            let first = (j + 1..n).chain(0..j).collect();
            let second = (j..n).chain(0..j).filter(|&i| i != b).collect();
            return (first, second);
        }
        let first = (0..j).rev().chain((j + 1..n).rev()).collect();
        let second = (0..=j).rev().chain((j + 1..n).rev()).filter(|&i| i != b).collect();
        return (first, second);
    }
    (ascending_alive(alive), redundant_order(pairing, alive))
}

/// Successive redundant propagation `(I - ~B^c A)(I - B^c A)` with the
/// pass orders of [`srsc_orders`].
pub fn srsc_propagation(ts: &[DenseMatrix], pairing: &PairingMap, alive: &[bool]) -> Result<DenseMatrix> {
    let (p1, p2) = srsc_orders(pairing, alive);
    let first = ssc_propagation(ts, &p1)?;
    let second = ssc_propagation(ts, &p2)?;
    second.matmul(&first)
}

/// Parallel redundant propagation `(I - Σ_red T)(I - Σ_owned T)`.
pub fn prsc_propagation(ts: &[DenseMatrix], pairing: &PairingMap, alive: &[bool]) -> Result<DenseMatrix> {
    let first = psc_propagation(ts, &ascending_alive(alive))?;
    let second = psc_propagation(ts, &redundant_order(pairing, alive))?;
    second.matmul(&first)
}

/// `I - W Σ_{i ∈ set} T_i` for a diagonal row scaling `W = diag(w)`.
pub fn scaled_psc_propagation(ts: &[DenseMatrix], set: &[usize], w: &[f64]) -> Result<DenseMatrix> {
    let n = ts.first().map_or(0, |t| t.n_rows());
    let mut e = DenseMatrix::identity(n);
    for &i in set {
        for r in 0..n {
            for c in 0..n {
                e.add_to(r, c, -w[r] * ts[i].get(r, c));
            }
        }
    }
    Ok(e)
}

/// Parallel redundant propagation with both passes row-scaled by the
/// inverse overlap multiplicity of each unknown.
pub fn scaled_prsc_propagation(
    ts: &[DenseMatrix],
    subspaces: &[Vec<usize>],
    pairing: &PairingMap,
    alive: &[bool],
) -> Result<DenseMatrix> {
    let n = ts.first().map_or(0, |t| t.n_rows());
    let mut w = vec![0.0; n];
    for s in subspaces {
        for &k in s {
            w[k] += 1.0;
        }
    }
    let w: Vec<f64> = w.into_iter().map(|m: f64| 1.0 / m.max(1.0)).collect();
    let first = scaled_psc_propagation(ts, &ascending_alive(alive), &w)?;
    let second = scaled_psc_propagation(ts, &redundant_order(pairing, alive), &w)?;
    second.matmul(&first)
}

fn check_oracle_size(n: usize, stacked: usize) -> Result<()> {
    if n > XZ_MAX_N {
        return Err(Error::OracleCap { n, cap: XZ_MAX_N });
    }
    if stacked > XZ_MAX_STACKED {
        return Err(Error::OracleCap {
            n: stacked,
            cap: XZ_MAX_STACKED,
        });
    }
    Ok(())
}

/// Offsets of each subspace inside the stacked coordinate vector.
fn stacked_offsets(subspaces: &[Vec<usize>]) -> Vec<usize> {
    let mut off = vec![0];
    for s in subspaces {
        off.push(off.last().unwrap() + s.len());
    }
    off
}

/// Given the stacked quadratic form `Q`, eliminates the decomposition
/// constraint `Σ R_iᵀ y_i = v` and returns the largest eigenvalue of the
/// resulting form against `A`.
fn constrained_sup(a: &DenseMatrix, subspaces: &[Vec<usize>], q: &DenseMatrix) -> Result<f64> {
    let n = a.n_rows();
    let off = stacked_offsets(subspaces);
    let m = off[subspaces.len()];
    let qinv = q.inverse()?;
    // R Q⁻¹ Rᵀ with R = [R_1ᵀ ... R_Nᵀ].
    let mut rqr = DenseMatrix::zeros(n, n);
    for (si, s) in subspaces.iter().enumerate() {
        for (p, &i) in s.iter().enumerate() {
            for (sj, t) in subspaces.iter().enumerate() {
                for (r, &j) in t.iter().enumerate() {
                    rqr.add_to(i, j, qinv.get(off[si] + p, off[sj] + r));
                }
            }
        }
    }
    debug_assert_eq!(qinv.n_rows(), m);
    let h = rqr.symmetrized().inverse().map_err(|_| {
        Error::Hypothesis("subspaces do not span the whole space; no stable decomposition".into())
    })?;
    let chol = a.cholesky()?;
    let g = chol.congruence_inverse(&h.symmetrized())?;
    let (eig, _) = symmetric_eigen(&g)?;
    Ok(*eig.last().expect("nonempty"))
}

fn check_c(c: f64) -> Result<f64> {
    if !(c >= 1.0 - 1e-10) {
        return Err(Error::Hypothesis(format!(
            "X-Z constant {c} is below 1, impossible for a valid splitting"
        )));
    }
    Ok(c)
}

/// X-Z constant of the successive correction
/// `(I - T_N) ... (I - T_1)` with symmetric local solvers.
pub fn xz_constant(a: &DenseMatrix, subspaces: &[Vec<usize>], solvers: &[DenseMatrix]) -> Result<f64> {
    let n = a.n_rows();
    let off = stacked_offsets(subspaces);
    let m = off[subspaces.len()];
    check_oracle_size(n, m)?;
    if subspaces.len() != solvers.len() {
        return Err(Error::DimensionMismatch {
            expected: subspaces.len(),
            found: solvers.len(),
        });
    }

    // D = blockdiag(S̄_i⁻¹) with S̄_i = 2 S_i - S_i A_i S_i.
    let mut d = DenseMatrix::zeros(m, m);
    for (i, (idx, s)) in subspaces.iter().zip(solvers).enumerate() {
        let k = idx.len();
        if s.n_rows() != k || s.n_cols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: s.n_rows(),
            });
        }
        if s.sub(&s.transpose())?.max_abs() > 1e-12 * s.max_abs().max(1.0) {
            return Err(Error::Hypothesis(format!("local solver {i} is not symmetric")));
        }
        let ai = block(a, idx, idx);
        let sbar = s.scale(2.0).sub(&s.matmul(&ai)?.matmul(s)?)?.symmetrized();
        let (eig, vecs) = symmetric_eigen(&sbar)?;
        if eig[0] <= 0.0 {
            return Err(Error::Hypothesis(format!(
                "local solver {i} is not a contraction in the energy norm (S̄ eigenvalue {})",
                eig[0]
            )));
        }
        for p in 0..k {
            for r in 0..k {
                let v: f64 = (0..k).map(|l| vecs.get(p, l) * vecs.get(r, l) / eig[l]).sum();
                d.set(off[i] + p, off[i] + r, v);
            }
        }
    }

    // G: unit block upper triangular, G_ij = S_i A_ij for j > i.
    let mut g = DenseMatrix::identity(m);
    for i in 0..subspaces.len() {
        for j in i + 1..subspaces.len() {
            let gij = solvers[i].matmul(&block(a, &subspaces[i], &subspaces[j]))?;
            for p in 0..subspaces[i].len() {
                for r in 0..subspaces[j].len() {
                    g.set(off[i] + p, off[j] + r, gij.get(p, r));
                }
            }
        }
    }
    let q = g.transpose().matmul(&d)?.matmul(&g)?.symmetrized();
    check_c(constrained_sup(a, subspaces, &q)?)
}

/// X-Z constant for exact local solvers through the reduced form
/// `Σ_i ‖P_i Σ_{j ≥ i} v_j‖_A²`.
pub fn xz_constant_exact_reduced(a: &DenseMatrix, subspaces: &[Vec<usize>]) -> Result<f64> {
    let n = a.n_rows();
    let off = stacked_offsets(subspaces);
    let m = off[subspaces.len()];
    check_oracle_size(n, m)?;
    let mut q = DenseMatrix::zeros(m, m);
    for (i, idx) in subspaces.iter().enumerate() {
        // K_i = [0, ..., A_ii, A_i,i+1, ...]
        let mut k = DenseMatrix::zeros(idx.len(), m);
        for (j, t) in subspaces.iter().enumerate().skip(i) {
            let aij = block(a, idx, t);
            for p in 0..idx.len() {
                for r in 0..t.len() {
                    k.set(p, off[j] + r, aij.get(p, r));
                }
            }
        }
        let ainv = block(a, idx, idx).inverse()?;
        let term = k.transpose().matmul(&ainv)?.matmul(&k)?;
        for p in 0..m {
            for r in 0..m {
                q.add_to(p, r, term.get(p, r));
            }
        }
    }
    check_c(constrained_sup(a, subspaces, &q.symmetrized())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XZReport {
    pub c: f64,
    /// `‖I - B_SSC A‖_A²` from the dense product.
    pub contraction_sq: f64,
    pub identity_gap: f64,
}

pub fn xz_report(a: &DenseMatrix, subspaces: &[Vec<usize>], solvers: &[DenseMatrix]) -> Result<XZReport> {
    let c = xz_constant(a, subspaces, solvers)?;
    let ts = operators(a, subspaces, solvers)?;
    let order: Vec<usize> = (0..subspaces.len()).collect();
    let e = ssc_propagation(&ts, &order)?;
    let norm = dense_operator_a_norm(a, &e)?;
    let contraction_sq = norm * norm;
    Ok(XZReport {
        c,
        contraction_sq,
        identity_gap: (contraction_sq - (1.0 - 1.0 / c)).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SrscBoundReport {
    pub srsc_norm: f64,
    pub ssc_norm: f64,
    /// `‖I - ~B_SSC A‖_A`, the error-free redundant pass.
    pub redundant_norm: f64,
    /// `ssc_norm · redundant_norm`.
    pub product_bound: f64,
    /// `ssc_norm - srsc_norm`, nonnegative when the ordering holds.
    pub slack: f64,
}

/// Dense check of the SRSC norm bounds with exact local solvers.
///
/// With a failed rank the SRSC norm must not exceed the error-free SSC norm;
/// error-free it must not exceed the product of the two sweep norms.
/// Violations beyond `1e-10` are reported as `Error::Hypothesis`.
pub fn verify_srsc_bound(
    a: &SparseMatrix,
    partition: &OverlapPartition,
    pairing: &PairingMap,
    failed_rank: Option<usize>,
) -> Result<SrscBoundReport> {
    let nsub = partition.n_subdomains();
    if pairing.n_ranks() != nsub {
        return Err(Error::DimensionMismatch {
            expected: nsub,
            found: pairing.n_ranks(),
        });
    }
    let mut alive = vec![true; nsub];
    if let Some(j) = failed_rank {
        if j >= nsub {
            return Err(Error::IndexOutOfRange { index: j, len: nsub });
        }
        alive[j] = false;
    }
    pairing.check_alive(&alive)?;
    let ad = a.to_dense();
    let subspaces = partition.overlapped_sets().to_vec();
    let solvers = subspaces
        .iter()
        .map(|idx| local_solver_matrix(&ad, idx, LocalSolverChoice::Exact))
        .collect::<Result<Vec<_>>>()?;
    let ts = operators(&ad, &subspaces, &solvers)?;
    let all = vec![true; nsub];
    let ssc = ssc_propagation(&ts, &ascending_alive(&all))?;
    let red = ssc_propagation(&ts, &redundant_order(pairing, &all))?;
    let srsc = srsc_propagation(&ts, pairing, &alive)?;
    let ssc_norm = dense_operator_a_norm(&ad, &ssc)?;
    let redundant_norm = dense_operator_a_norm(&ad, &red)?;
    let srsc_norm = dense_operator_a_norm(&ad, &srsc)?;
    let report = SrscBoundReport {
        srsc_norm,
        ssc_norm,
        redundant_norm,
        product_bound: ssc_norm * redundant_norm,
        slack: ssc_norm - srsc_norm,
    };
    let bound = if failed_rank.is_some() {
        report.ssc_norm
    } else {
        report.product_bound
    };
    if report.srsc_norm > bound + 1e-10 {
        return Err(Error::Hypothesis(format!(
            "SRSC norm {} exceeds bound {} (failed rank {failed_rank:?})",
            report.srsc_norm, bound
        )));
    }
    Ok(report)
}

/// Dense SPD matrix `MᵀM / n + σ I` with entries of `M` uniform in `[-1, 1]`.
pub fn random_dense_spd(n: usize, shift: f64, rng: &mut impl Rng) -> DenseMatrix {
    let m = DenseMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("sized");
    let mut a = m.transpose().matmul(&m).expect("square").scale(1.0 / n as f64);
    for i in 0..n {
        a.add_to(i, i, shift);
    }
    a.symmetrized()
}

/// Sparse SPD matrix: a connected random symmetric pattern (a path plus
/// random chords) with negative off-diagonals and a strictly dominant
/// diagonal.
pub fn random_sparse_spd(n: usize, extra_edges: usize, rng: &mut impl Rng) -> SparseMatrix {
    let mut trip = Vec::new();
    let mut diag = vec![0.0; n];
    let mut add = |i: usize, j: usize, w: f64, trip: &mut Vec<(usize, usize, f64)>| {
        trip.push((i, j, -w));
        trip.push((j, i, -w));
        diag[i] += w;
        diag[j] += w;
    };
    for i in 1..n {
        let w = rng.gen_range(0.2..1.0);
        add(i - 1, i, w, &mut trip);
    }
    for _ in 0..extra_edges {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            let w = rng.gen_range(0.05..0.5);
            add(i, j, w, &mut trip);
        }
    }
    for (i, d) in diag.iter().enumerate() {
        trip.push((i, i, d + rng.gen_range(0.05..0.5)));
    }
    SparseMatrix::from_triplets(n, n, &trip).expect("valid triplets")
}

/// `k` contiguous blocks of `0..n` each widened by up to `max_extra`
/// indices on both sides.
pub fn random_cover(n: usize, k: usize, max_extra: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k);
    for b in 0..k {
        let lo = b * n / k;
        let hi = (b + 1) * n / k;
        let l = lo.saturating_sub(rng.gen_range(0..=max_extra));
        let h = (hi + rng.gen_range(0..=max_extra)).min(n);
        out.push((l..h).collect());
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Randomised corpus run of the oracle identities, used by the CLI.
pub fn oracle_suite(seed: u64, cases: usize) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xz_worst = 0.0f64;
    let mut reduced_worst = 0.0f64;
    for case in 0..cases {
        let n = rng.gen_range(3..=16);
        let k = rng.gen_range(1..=3.min(n));
        let a = random_dense_spd(n, 0.1, &mut rng);
        let subs = random_cover(n, k, 2, &mut rng);
        let choice = if case % 2 == 0 {
            LocalSolverChoice::Exact
        } else {
            LocalSolverChoice::DampedJacobi
        };
        let solvers = subs
            .iter()
            .map(|s| local_solver_matrix(&a, s, choice))
            .collect::<Result<Vec<_>>>()?;
        xz_worst = xz_worst.max(xz_report(&a, &subs, &solvers)?.identity_gap);
        if choice == LocalSolverChoice::Exact {
            let c1 = xz_constant(&a, &subs, &solvers)?;
            let c2 = xz_constant_exact_reduced(&a, &subs)?;
            reduced_worst = reduced_worst.max((c1 - c2).abs() / c1);
        }
    }

    let mut thm_worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let nsub = [4, 6, 8][rng.gen_range(0..3)];
        let n = rng.gen_range(2 * nsub..=64);
        let a = random_sparse_spd(n, n / 4, &mut rng);
        let partition = OverlapPartition::build(&a, nsub, PartitionStrategy::Contiguous, 1)?;
        let pairing = PairingMap::new(nsub)?;
        for j in 0..nsub {
            let excess = match verify_srsc_bound(&a, &partition, &pairing, Some(j)) {
                Ok(r) => -r.slack,
                Err(Error::Hypothesis(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            thm_worst = thm_worst.max(excess);
        }
    }

    Ok(vec![
        OracleCheck {
            name: "xz_identity_gap".into(),
            cases,
            worst: xz_worst,
            tolerance: 1e-8,
            passed: xz_worst <= 1e-8,
        },
        OracleCheck {
            name: "xz_exact_reduced_form".into(),
            cases: cases.div_ceil(2),
            worst: reduced_worst,
            tolerance: 1e-8,
            passed: reduced_worst <= 1e-8,
        },
        OracleCheck {
            name: "srsc_not_worse_than_ssc".into(),
            cases,
            worst: thm_worst,
            tolerance: 1e-10,
            passed: thm_worst <= 1e-10,
        },
    ])
}
