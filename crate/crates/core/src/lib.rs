//! Numerical verification of transport inequalities on convex measures.
//!
//! The crate builds the `kappa`-concave density families `W^{1/kappa}/Z`
//! (power-of-concave densities on a bounded support for `kappa > 0`,
//! Cauchy-type heavy tails for `kappa < 0`), the Bregman transport cost
//! attached to `W`, the `(kappa, W)`-entropy, the determinant-gap matrix
//! functionals with their quantitative spectral bounds, exact discrete
//! optimal transport, and the weighted Poincare machinery needed to
//! certify the quantitative forms of the inequalities at desk scale.
//!
//! Everything is `no_std + alloc`; float math goes through `libm` in the
//! shipped build, and all randomness is explicitly seeded, so output is
//! bit-reproducible from run to run.

#![no_std]
// `!(x >= 0)`-style comparisons are deliberate NaN guards, and index loops
// mirror the matrix arithmetic they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod functionals;
pub mod grid;
pub mod inequalities;
pub mod linalg;
pub mod measures;
pub mod poincare;
pub mod quad;
pub mod rng;
pub mod special;
pub mod transport;

pub use error::{Error, Result};
