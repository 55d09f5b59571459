//! Finite-size scaling of random k-XORSAT near its satisfiability threshold.
//!
//! The crate generates configuration-model instances, peels them to their
//! 2-core, decides satisfiability exactly over GF(2), and computes the
//! constants of the scaling law `P(sat) ~ Phi(r s_k)` for
//! `m = floor(n rho_k + r sqrt(n))` variables and `n` equations.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod gf2;
pub mod instance;
pub mod peel;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod validate;

pub use error::{Error, Result};
pub use instance::Instance;
