use crate::error::{Error, Result};
use crate::instance::Instance;

use super::{reduce_mod2, SolveResult};

/// Dense `[A | b]` over GF(2): `num_rows` bit rows of width `num_vars + 1`,
/// the last column holding the right-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2System {
    num_vars: usize,
    num_rows: usize,
    words: usize,
    data: Vec<u64>,
}

#[inline]
fn bit(c: usize) -> (usize, u64) {
    (c / 64, 1u64 << (c % 64))
}

impl Gf2System {
    pub fn new(num_vars: usize) -> Self {
        Gf2System {
            num_vars,
            num_rows: 0,
            words: (num_vars + 1).div_ceil(64),
            data: Vec::new(),
        }
    }

    /// Appends the row `sum_{v in vars} x_v = rhs`. Repeated variables toggle,
    /// so a variable listed an even number of times drops out.
    ///
    /// # Panics
    ///
    /// Panics if a variable index is `>= num_vars`.
    pub fn push_row(&mut self, vars: &[u32], rhs: bool) {
        let start = self.data.len();
        self.data.resize(start + self.words, 0);
        let row = &mut self.data[start..];
        for &v in vars {
            let v = v as usize;
            assert!(v < self.num_vars, "variable {v} out of range");
            let (w, b) = bit(v);
            row[w] ^= b;
        }
        if rhs {
            let (w, b) = bit(self.num_vars);
            row[w] |= b;
        }
        self.num_rows += 1;
    }

    /// One row per selected equation (all equations when `subset` is `None`),
    /// in the order given.
    pub fn from_instance(inst: &Instance, subset: Option<&[usize]>) -> Self {
        let mut sys = Gf2System::new(inst.m());
        match subset {
            Some(idx) => {
                for &j in idx {
                    sys.push_row(&reduce_mod2(inst.equation(j)), inst.rhs(j));
                }
            }
            None => {
                for (vars, b) in inst.equations() {
                    sys.push_row(&reduce_mod2(vars), b);
                }
            }
        }
        sys
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn coeff(&self, r: usize, v: usize) -> bool {
        assert!(v < self.num_vars);
        let (w, b) = bit(v);
        self.row(r)[w] & b != 0
    }

    pub fn rhs(&self, r: usize) -> bool {
        let (w, b) = bit(self.num_vars);
        self.row(r)[w] & b != 0
    }

    /// Variables with coefficient 1 in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<u32> {
        (0..self.num_vars)
            .filter(|&v| self.coeff(r, v))
            .map(|v| v as u32)
            .collect()
    }

    /// Whether `x` satisfies every row.
    pub fn is_satisfied_by(&self, x: &[bool]) -> bool {
        assert_eq!(x.len(), self.num_vars);
        let packed = pack(x, self.words);
        (0..self.num_rows).all(|r| row_parity(self.row(r), &packed) == self.rhs(r))
    }

    /// Gaussian elimination on a private copy. Pivot is the lowest-index
    /// nonzero column, taken from the first eligible row in scan order.
    pub fn solve(&self, want_witness: bool) -> SolveResult {
        let words = self.words;
        let mut data = self.data.clone();
        let n = self.num_rows;
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..self.num_vars {
            if rank == n {
                break;
            }
            let (w, b) = bit(col);
            let Some(found) = (rank..n).find(|&r| data[r * words + w] & b != 0) else {
                continue;
            };
            if found != rank {
                for i in 0..words {
                    data.swap(rank * words + i, found * words + i);
                }
            }
            let (head, tail) = data.split_at_mut((rank + 1) * words);
            let pivot = &head[rank * words + w..];
            for row in tail.chunks_exact_mut(words) {
                if row[w] & b != 0 {
                    for (dst, src) in row[w..].iter_mut().zip(pivot) {
                        *dst ^= src;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        let (rw, rb) = bit(self.num_vars);
        let inconsistent = (rank..n).any(|r| data[r * words + rw] & rb != 0);
        let rank_ab = rank + usize::from(inconsistent);

        let witness = (want_witness && !inconsistent).then(|| {
            let mut x = vec![0u64; words];
            for (i, &col) in pivots.iter().enumerate().rev() {
                let row = &data[i * words..(i + 1) * words];
                // Columns above `col` among the coefficients are already fixed;
                // the pivot itself is still 0 in `x`.
                let val = (row[rw] & rb != 0) ^ row_parity(row, &x);
                if val {
                    let (w, b) = bit(col);
                    x[w] |= b;
                }
            }
            (0..self.num_vars)
                .map(|v| {
                    let (w, b) = bit(v);
                    x[w] & b != 0
                })
                .collect()
        });
        SolveResult::from_ranks(rank, rank_ab, witness)
    }

    /// Exhaustive search over all `2^num_vars` assignments.
    pub fn brute_force(&self) -> Result<bool> {
        if self.num_vars > 20 {
            return Err(Error::invalid(format!(
                "brute force refuses {} variables (limit 20)",
                self.num_vars
            )));
        }
        // width <= 21 bits, so every row fits in its first word
        let rows: Vec<(u64, bool)> = (0..self.num_rows)
            .map(|r| (self.row(r)[0] & ((1u64 << self.num_vars) - 1), self.rhs(r)))
            .collect();
        Ok((0u64..1 << self.num_vars).any(|x| {
            rows.iter()
                .all(|&(a, b)| ((a & x).count_ones() & 1 == 1) == b)
        }))
    }
}

fn pack(x: &[bool], words: usize) -> Vec<u64> {
    let mut packed = vec![0u64; words];
    for (v, &on) in x.iter().enumerate() {
        if on {
            let (w, b) = bit(v);
            packed[w] |= b;
        }
    }
    packed
}

/// Parity of `row & x`, where `x` never has the rhs bit set.
#[inline]
fn row_parity(row: &[u64], x: &[u64]) -> bool {
    row.iter()
        .zip(x)
        .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
        & 1
        == 1
}
