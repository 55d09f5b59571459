//! Exact satisfiability of XOR systems over GF(2).
//!
//! [`Gf2System`] is a dense bitset matrix `[A | b]` solved by plain Gaussian
//! elimination. [`SparseSystem`] keeps rows as sorted column lists and runs
//! Markowitz-style sparse elimination before handing the (much smaller)
//! remainder to the dense solver; it is what the Monte Carlo harness uses on
//! 2-cores with tens of thousands of rows.

mod dense;
mod sparse;

pub use dense::Gf2System;
pub use sparse::{SparseConfig, SparseSystem};

use serde::Serialize;

/// Outcome of a solve. `satisfiable` holds iff `rank_a == rank_ab`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveResult {
    pub satisfiable: bool,
    pub rank_a: usize,
    pub rank_ab: usize,
    /// A satisfying assignment, present only when requested and satisfiable.
    pub witness: Option<Vec<bool>>,
}

impl SolveResult {
    fn from_ranks(rank_a: usize, rank_ab: usize, witness: Option<Vec<bool>>) -> Self {
        let satisfiable = rank_a == rank_ab;
        SolveResult {
            satisfiable,
            rank_a,
            rank_ab,
            witness: if satisfiable { witness } else { None },
        }
    }
}

/// Reduces one equation's variable slots modulo 2: returns the sorted list of
/// variables occurring an odd number of times.
pub fn reduce_mod2(vars: &[u32]) -> Vec<u32> {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(sorted[i]);
        }
        i = j;
    }
    out
}
