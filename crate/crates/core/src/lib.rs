//! Redundant subspace correction on overlapping Schwarz preconditioners.
//!
//! The crate builds additive (PSC) and multiplicative (SSC) Schwarz operators
//! over an algebraic overlapping partition, pairs the simulated ranks that
//! own the subdomains, and composes the successive (SRSC) and parallel
//! (PRSC) redundant corrections that keep converging while a rank is failed.
//! A deterministic fault simulator drives rank availability, FGMRES and a
//! stationary driver run the outer iteration, and the [`analysis`] module
//! holds dense brute-force oracles for the convergence identities.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        let tol: f64 = $tol;
        assert!((a - b).abs() <= tol, "{} vs {} (tol {:e})", a, b, tol);
    }};
}

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod faultsim;
pub mod krylov;
pub mod linalg;
pub mod partition;
pub mod problems;
pub mod redundancy;
pub mod schwarz;
pub mod subspace;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SparseMatrix};
