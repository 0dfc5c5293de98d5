mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilient_schwarz::experiment::{run_experiment, ExperimentConfig};
use resilient_schwarz::faultsim::{FaultSchedule, FaultSimulator};
use resilient_schwarz::krylov::{fgmres, SolverConfig};
use resilient_schwarz::linalg::{a_inner, dense_lu_solve, operator_a_norm};
use resilient_schwarz::partition::{grow_overlap, OverlapPartition, PartitionStrategy};
use resilient_schwarz::problems::{build_poisson, ProblemSpec};
use resilient_schwarz::redundancy::{PairingMap, ResilientOperator, ResilientVariant};
use resilient_schwarz::schwarz::{SchwarzOperator, SchwarzVariant};
use resilient_schwarz::subspace::{SolverKind, SubspaceSolver};
use resilient_schwarz::DenseMatrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spmv_is_linear(seed in any::<u64>(), n in 2usize..40, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let x: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + beta * q).collect();
        let lhs = a.spmv(&comb).unwrap();
        let (ax, ay) = (a.spmv(&x).unwrap(), a.spmv(&y).unwrap());
        for k in 0..n {
            prop_assert!(rel_close(lhs[k], alpha * ax[k] + beta * ay[k], 1e-12));
        }
    }

    #[test]
    fn a_inner_is_symmetric(seed in any::<u64>(), n in 2usize..40) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let x: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        prop_assert!(rel_close(a_inner(&a, &x, &y).unwrap(), a_inner(&a, &y, &x).unwrap(), 1e-12));
    }

    #[test]
    fn lu_solve_inverts_matvec(seed in any::<u64>(), n in 1usize..=64) {
        let mut g = rng(seed);
        let mut m = from_sparse(&random_spd(n, n, &mut g));
        for _ in 0..n {
            let (i, j) = (g.gen_range(0..n), g.gen_range(0..n));
            m[i][j] += g.gen_range(-0.3..0.3);
        }
        let d = DenseMatrix::from_row_major(n, n, m.concat()).unwrap();
        let x: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let back = dense_lu_solve(&d, &d.matvec(&x).unwrap()).unwrap();
        let err: f64 = x.iter().zip(&back).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * norm(&x).max(1.0));
    }

    #[test]
    fn operator_a_norm_bounds_sampled_ratios(seed in any::<u64>(), n in 2usize..=16) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let e: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| g.gen_range(-1.0..1.0)).collect()).collect();
        let ed = DenseMatrix::from_row_major(n, n, e.concat()).unwrap();
        let norm_a = operator_a_norm(&a, &ed).unwrap();
        let anorm = |v: &[f64]| a_inner(&a, v, v).unwrap().sqrt();
        let mut best = 0.0f64;
        for _ in 0..20_000 {
            let v: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
            best = best.max(anorm(&mat_vec(&e, &v)) / anorm(&v));
        }
        prop_assert!(best <= norm_a * (1.0 + 1e-6));
        prop_assert!(rel_close(norm_a, a_norm(&from_sparse(&a), &e), 1e-9));
    }

    #[test]
    fn poisson_matrices_are_spd_and_symmetric(nx in 2usize..9, ny in 2usize..9, nz in 2usize..4, dim in 1usize..=3) {
        let dims: Vec<usize> = [nx, ny, nz][..dim].to_vec();
        let sys = build_poisson(&ProblemSpec::poisson(&dims)).unwrap();
        let m = from_sparse(&sys.matrix);
        let n = m.len();
        for i in 0..n {
            prop_assert!(m[i].iter().sum::<f64>() >= -1e-9 * m[i][i]);
            for j in 0..n {
                prop_assert_eq!(m[i][j].to_bits(), m[j][i].to_bits());
            }
        }
        prop_assert!(sym_eigenvalues(&m)[0] > 0.0);
    }

    #[test]
    fn partitions_cover_nest_and_color(seed in any::<u64>(), n in 4usize..60, parts in 1usize..8, delta in 0usize..4, greedy in any::<bool>()) {
        prop_assume!(parts <= n);
        let mut g = rng(seed);
        let a = random_spd(n, g.gen_range(0..n), &mut g);
        let strategy = if greedy { PartitionStrategy::GreedyGraph } else { PartitionStrategy::Contiguous };
        let p = OverlapPartition::build(&a, parts, strategy, delta).unwrap();
        let mut seen = vec![0usize; n];
        for i in 0..parts {
            prop_assert!(!p.owned(i).is_empty());
            for &k in p.owned(i) {
                seen[k] += 1;
                prop_assert!(p.overlapped(i).contains(&k));
            }
            let smaller = grow_overlap(p.owned(i), &a, delta.saturating_sub(1));
            prop_assert!(smaller.iter().all(|k| p.overlapped(i).contains(k)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let m = from_sparse(&a);
        for i in 0..parts {
            for j in i + 1..parts {
                if p.colors()[i] != p.colors()[j] {
                    continue;
                }
                for &k in p.overlapped(i) {
                    prop_assert!(!p.overlapped(j).contains(&k));
                    for &l in p.overlapped(j) {
                        prop_assert!(m[k][l] == 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_subspace_operators_are_a_orthogonal_projections(seed in any::<u64>(), n in 3usize..40) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let ad = from_sparse(&a);
        let lo = g.gen_range(0..n - 1);
        let idx: Vec<usize> = (lo..g.gen_range(lo + 1..=n)).collect();
        let t = subspace_op(&ad, &idx, &inverse(&principal(&ad, &idx)));
        prop_assert!(max_abs(&sub(&mul(&t, &t), &t)) <= 1e-10);
        let at = mul(&ad, &t);
        prop_assert!(max_abs(&sub(&at, &transpose(&at))) <= 1e-10 * max_abs(&ad));
        prop_assert!(a_norm(&ad, &sub(&eye(n), &t)) <= 1.0 + 1e-10);

        let s = SubspaceSolver::build(&a, 0, &idx, SolverKind::ScaledIdentity).unwrap();
        let alpha = s.alpha().unwrap();
        let local = principal(&ad, &idx);
        let k = idx.len();
        let step = sub(&eye(k), &local.iter().map(|r| r.iter().map(|x| alpha * x).collect()).collect());
        let spectral = sym_eigenvalues(&mul(&transpose(&step), &step)).last().unwrap().sqrt();
        prop_assert!(spectral < 1.0);
    }

    #[test]
    fn corrections_stay_local(seed in any::<u64>(), n in 4usize..40) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let idx: Vec<usize> = (0..n).filter(|_| g.gen_bool(0.4)).collect();
        prop_assume!(!idx.is_empty());
        let s = SubspaceSolver::build(&a, 0, &idx, SolverKind::Exact).unwrap();
        let f: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let out = s.apply_correction(&a, &f, &v).unwrap();
        for k in 0..n {
            if !idx.contains(&k) {
                prop_assert_eq!(out[k].to_bits(), v[k].to_bits());
            }
        }
    }

    #[test]
    fn psc_is_symmetric_and_order_free(seed in any::<u64>(), n in 8usize..48, parts in 2usize..6, delta in 0usize..3) {
        let mut g = rng(seed);
        let a = Arc::new(random_spd(n, n, &mut g));
        let p = OverlapPartition::build(&a, parts, PartitionStrategy::Contiguous, delta).unwrap();
        let mut op = SchwarzOperator::new(a.clone(), p, SolverKind::Exact, SchwarzVariant::Psc).unwrap();
        let cols: Vec<Vec<f64>> = (0..n).map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            op.apply_psc(&e).unwrap()
        }).collect();
        prop_assert!(max_abs(&sub(&cols, &transpose(&cols))) <= 1e-12);
        let f: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let before = op.apply_psc(&f).unwrap();
        op.set_sweep_order((0..parts).rev().collect()).unwrap();
        let after = op.apply_psc(&f).unwrap();
        for k in 0..n {
            prop_assert!((before[k] - after[k]).abs() <= 1e-13 * before[k].abs().max(1.0));
        }
    }

    #[test]
    fn ssc_contracts_and_each_correction_reduces_error(seed in any::<u64>(), n in 6usize..40, parts in 1usize..6, delta in 0usize..3) {
        prop_assume!(parts <= n);
        let mut g = rng(seed);
        let a = Arc::new(random_spd(n, n, &mut g));
        let ad = from_sparse(&a);
        let p = OverlapPartition::build(&a, parts, PartitionStrategy::GreedyGraph, delta).unwrap();
        let op = SchwarzOperator::new(a.clone(), p, SolverKind::Exact, SchwarzVariant::Ssc).unwrap();
        let e = op.assemble_propagation().unwrap();
        prop_assert!(operator_a_norm(&a, &e).unwrap() < 1.0);
        let u: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let f = a.spmv(&u).unwrap();
        let mut v = vec![0.0; n];
        let err = |v: &[f64]| {
            let d: Vec<f64> = u.iter().zip(v).map(|(p, q)| p - q).collect();
            mat_vec(&ad, &d).iter().zip(&d).map(|(p, q)| p * q).sum::<f64>().sqrt()
        };
        let mut last = err(&v);
        for i in 0..parts {
            op.correct(i, &mut v, &f).unwrap();
            let now = err(&v);
            prop_assert!(now <= last * (1.0 + 1e-12) + 1e-14);
            last = now;
        }
    }

    #[test]
    fn srsc_matches_reference_under_failure(seed in any::<u64>(), ranks in prop::sample::select(vec![2usize, 4, 6]), delta in 0usize..3) {
        let mut g = rng(seed);
        let n = g.gen_range(2 * ranks..=40);
        let a = Arc::new(random_spd(n, n, &mut g));
        let ad = from_sparse(&a);
        let p = OverlapPartition::build(&a, ranks, PartitionStrategy::Contiguous, delta).unwrap();
        let ts: Vec<Mat> = p.overlapped_sets().iter().map(|idx| subspace_op(&ad, idx, &inverse(&principal(&ad, idx)))).collect();
        let ssc_norm = a_norm(&ad, &product(&ts, &(0..ranks).collect::<Vec<_>>()));
        let mut op = ResilientOperator::new(a.clone(), p, ResilientVariant::Srsc, false).unwrap();
        let j = g.gen_range(0..ranks);
        let mut alive = vec![true; ranks];
        alive[j] = false;
        let e = from_dense(&op.assemble_propagation(&alive).unwrap());
        prop_assert!(a_norm(&ad, &e) <= ssc_norm + 1e-10);
        let moved = sub(&eye(n), &e);
        for idx in op.base().partition().overlapped_sets() {
            let touched = idx.iter().any(|&k| moved[k].iter().any(|x| x.abs() > 1e-14));
            prop_assert!(touched);
        }
    }

    #[test]
    fn pairing_is_an_involution(half in 1usize..20) {
        let p = PairingMap::new(2 * half).unwrap();
        for r in 0..2 * half {
            prop_assert_ne!(p.buddy(r), r);
            prop_assert_eq!(p.buddy(p.buddy(r)), r);
        }
        prop_assert_eq!(p.n_pairs(), half);
    }

    #[test]
    fn fault_simulation_is_deterministic(seed in any::<u64>(), ranks in 2usize..12, count in 0usize..6) {
        let sched = FaultSchedule::random_fail_stops(ranks, count, 50, seed).unwrap();
        let trace = |s: &FaultSchedule| {
            let mut sim = FaultSimulator::new(s.clone(), ranks).unwrap();
            (0..60).map(|k| sim.advance(k).unwrap().alive).collect::<Vec<_>>()
        };
        let a = trace(&sched);
        prop_assert_eq!(&a, &trace(&sched));
        for alive in &a {
            prop_assert!(alive.iter().filter(|x| !**x).count() <= 1);
        }
        let reparsed = FaultSchedule::parse(&sched.to_text()).unwrap();
        prop_assert_eq!(reparsed.events(), sched.events());
    }

    #[test]
    fn fgmres_residuals_are_monotone_within_cycles(seed in any::<u64>(), n in 4usize..40, restart in 2usize..12) {
        let mut g = rng(seed);
        let a = random_spd(n, n, &mut g);
        let f: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let config = SolverConfig { restart, tol: 1e-10, max_iters: 200, ..SolverConfig::default() };
        let mut pre = |_: usize, r: &[f64]| -> resilient_schwarz::Result<Vec<f64>> { Ok(r.to_vec()) };
        let (_, rep) = fgmres(&a, &f, &mut pre, &config).unwrap();
        let (_, again) = fgmres(&a, &f, &mut pre, &config).unwrap();
        prop_assert_eq!(&rep, &again);
        for w in rep.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }
}

#[test]
fn failed_rank_run_is_reproducible() {
    let text = "problem = poisson2d\ngrid = 15x15\nranks = 4\nmethod = srsc\nsolver = fgmres\nfault_schedule = 2 1 fail_stop 6\n";
    let cfg = ExperimentConfig::parse(text, None).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(a.summary.converged);
    assert!(a.summary.same_outcome(&b.summary));
    assert!(a.summary.n_alive.contains(&3));
}
