use std::ffi::{CStr, CString};
use std::ptr;

use resilient_schwarz_ffi::*;

fn last_error() -> String {
    let p = rsc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn poisson(dims: &[usize]) -> *mut RscSystem {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rsc_system_poisson(dims.as_ptr(), dims.len(), &mut sys) }, RscStatus::Ok);
    sys
}

fn solver(sys: *const RscSystem, ranks: usize, method: RscMethod, stationary: bool) -> *mut RscSolver {
    let mut s = ptr::null_mut();
    let st = unsafe { rsc_solver_new(sys, ranks, 2, method as i32, stationary as i32, &mut s) };
    assert_eq!(st, RscStatus::Ok, "{}", last_error());
    s
}

#[test]
fn prsc_solves_poisson_with_a_failed_rank() {
    let sys = poisson(&[15, 15]);
    let mut n = 0;
    assert_eq!(unsafe { rsc_system_size(sys, &mut n) }, RscStatus::Ok);
    assert_eq!(n, 225);
    let s = solver(sys, 4, RscMethod::Prsc, false);
    unsafe { rsc_system_free(sys) };
    assert_eq!(unsafe { rsc_solver_set_failed(s, 0, 0) }, RscStatus::Ok);
    let mut x = vec![0.0; n];
    let (mut its, mut relres) = (0usize, 0.0f64);
    let st = unsafe { rsc_solver_solve(s, 1e-8, 500, x.as_mut_ptr(), n, &mut its, &mut relres) };
    assert_eq!(st, RscStatus::Ok, "{}", last_error());
    assert!(relres <= 1e-8 && its > 0);
    assert!(x.iter().all(|v| v.is_finite() && *v > 0.0));
    unsafe { rsc_solver_free(s) };
}

#[test]
fn csr_system_round_trip_and_dimension_errors() {
    // tridiag(-1, 2, -1), n = 4
    let offsets = [0usize, 2, 5, 8, 10];
    let cols = [0usize, 1, 0, 1, 2, 1, 2, 3, 2, 3];
    let vals = [2.0, -1.0, -1.0, 2.0, -1.0, -1.0, 2.0, -1.0, -1.0, 2.0];
    let rhs = [1.0, 0.0, 0.0, 1.0];
    let mut sys = ptr::null_mut();
    let st = unsafe { rsc_system_from_csr(4, offsets.as_ptr(), cols.as_ptr(), vals.as_ptr(), rhs.as_ptr(), &mut sys) };
    assert_eq!(st, RscStatus::Ok);
    let s = solver(sys, 2, RscMethod::Ssc, true);
    let mut x = [0.0; 4];
    let st = unsafe { rsc_solver_solve(s, 1e-12, 100, x.as_mut_ptr(), 4, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, RscStatus::Ok);
    for v in x {
        assert!((v - 1.0).abs() < 1e-10);
    }
    let st = unsafe { rsc_solver_solve(s, 1e-12, 100, x.as_mut_ptr(), 3, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, RscStatus::Dimension);
    assert_eq!(unsafe { rsc_solver_set_failed(s, 7, 0) }, RscStatus::Dimension);
    unsafe {
        rsc_solver_free(s);
        rsc_system_free(sys);
    }

    let bad_offsets = [0usize, 2, 1, 3, 3];
    let st = unsafe { rsc_system_from_csr(4, bad_offsets.as_ptr(), cols.as_ptr(), vals.as_ptr(), ptr::null(), &mut sys) };
    assert_ne!(st, RscStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn error_codes() {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rsc_system_poisson(ptr::null(), 2, &mut sys) }, RscStatus::NullPointer);
    assert!(last_error().contains("dims"));
    let path = CString::new("/no/such/matrix.mtx").unwrap();
    assert_eq!(unsafe { rsc_system_load_mtx(path.as_ptr(), &mut sys) }, RscStatus::Io);

    let sys = poisson(&[8, 8]);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { rsc_solver_new(sys, 3, 2, RscMethod::Srsc as i32, 0, &mut s) }, RscStatus::InvalidArgument);
    assert_eq!(unsafe { rsc_solver_new(sys, 4, 2, 42, 0, &mut s) }, RscStatus::InvalidArgument);
    assert!(last_error().contains("42"));

    let s = solver(sys, 4, RscMethod::Srsc, true);
    assert_eq!(unsafe { rsc_solver_set_failed(s, 0, 0) }, RscStatus::Ok);
    assert_eq!(unsafe { rsc_solver_set_failed(s, 1, 0) }, RscStatus::PairFailure);
    assert!(last_error().contains("PairWide"));
    assert_eq!(unsafe { rsc_solver_set_failed(s, 2, 5) }, RscStatus::InvalidArgument);
    let mut x = vec![0.0; 64];
    let st = unsafe { rsc_solver_solve(s, 1e-12, 2, x.as_mut_ptr(), 64, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, RscStatus::NotConverged);

    let psc = solver(sys, 4, RscMethod::Psc, false);
    assert_eq!(unsafe { rsc_solver_solve(psc, 1e-8, 100, ptr::null_mut(), 64, ptr::null_mut(), ptr::null_mut()) }, RscStatus::NullPointer);
    unsafe {
        rsc_solver_free(psc);
        rsc_solver_free(s);
        rsc_system_free(sys);
        rsc_system_free(ptr::null_mut());
        rsc_solver_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/resilient_schwarz.h");
    for name in [
        "rsc_system_poisson",
        "rsc_system_from_csr",
        "rsc_system_load_mtx",
        "rsc_system_size",
        "rsc_system_free",
        "rsc_solver_new",
        "rsc_solver_set_failed",
        "rsc_solver_solve",
        "rsc_solver_free",
        "rsc_last_error_message",
        "RSC_STATUS_PAIR_FAILURE = 5",
        "RSC_METHOD_PRSC = 3",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
