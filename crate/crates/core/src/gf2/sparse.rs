use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::instance::Instance;

use super::{reduce_mod2, Gf2System, SolveResult};

/// Switch-over thresholds from sparse elimination to the dense solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseConfig {
    /// Largest column weight still eliminated sparsely.
    pub max_col_weight: u32,
    /// Largest pivot row length still eliminated sparsely.
    pub max_row_len: usize,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            max_col_weight: 24,
            max_row_len: 256,
        }
    }
}

/// XOR system with rows stored as sorted, duplicate-free column lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseSystem {
    num_vars: usize,
    rows: Vec<Vec<u32>>,
    rhs: Vec<bool>,
}

struct Pivot {
    col: u32,
    row: Vec<u32>,
    rhs: bool,
}

impl SparseSystem {
    pub fn new(num_vars: usize) -> Self {
        SparseSystem {
            num_vars,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Appends a row; `vars` is reduced modulo 2 first.
    pub fn push_row(&mut self, vars: &[u32], rhs: bool) {
        let row = reduce_mod2(vars);
        if let Some(&last) = row.last() {
            assert!(
                (last as usize) < self.num_vars,
                "variable {last} out of range"
            );
        }
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn from_instance(inst: &Instance, subset: Option<&[usize]>) -> Self {
        let mut sys = SparseSystem::new(inst.m());
        match subset {
            Some(idx) => {
                for &j in idx {
                    sys.push_row(inst.equation(j), inst.rhs(j));
                }
            }
            None => {
                for (vars, b) in inst.equations() {
                    sys.push_row(vars, b);
                }
            }
        }
        sys
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Gf2System {
        let mut d = Gf2System::new(self.num_vars);
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            d.push_row(row, b);
        }
        d
    }

    pub fn is_satisfied_by(&self, x: &[bool]) -> bool {
        self.rows
            .iter()
            .zip(&self.rhs)
            .all(|(row, &b)| row.iter().filter(|&&v| x[v as usize]).count() % 2 == usize::from(b))
    }

    pub fn solve(&self, want_witness: bool) -> SolveResult {
        self.solve_with(SparseConfig::default(), want_witness)
    }

    /// Sparse elimination with minimum-weight column and shortest pivot row,
    /// then dense elimination of whatever is left. Ranks are exact: every
    /// sparse pivot contributes one to both `rank_a` and `rank_ab`.
    pub fn solve_with(&self, cfg: SparseConfig, want_witness: bool) -> SolveResult {
        let nv = self.num_vars;
        let mut rows = self.rows.clone();
        let mut rhs = self.rhs.clone();
        let mut alive = vec![true; rows.len()];
        let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); nv];
        let mut weight = vec![0u32; nv];
        let mut done = vec![false; nv];
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                col_rows[c as usize].push(r as u32);
                weight[c as usize] += 1;
            }
        }
        let mut heap: BinaryHeap<Reverse<(u32, u32)>> = (0..nv as u32)
            .filter(|&c| weight[c as usize] > 0)
            .map(|c| Reverse((weight[c as usize], c)))
            .collect();
        let mut pivots: Vec<Pivot> = Vec::new();
        let mut merged = Vec::new();

        while let Some(Reverse((w, c))) = heap.pop() {
            let ci = c as usize;
            if done[ci] || weight[ci] != w {
                continue;
            }
            if w == 0 {
                done[ci] = true;
                continue;
            }
            if w > cfg.max_col_weight {
                break;
            }
            let mut cand: Vec<u32> = std::mem::take(&mut col_rows[ci])
                .into_iter()
                .filter(|&r| alive[r as usize] && rows[r as usize].binary_search(&c).is_ok())
                .collect();
            cand.sort_unstable();
            cand.dedup();
            debug_assert_eq!(cand.len(), w as usize);
            let p = *cand
                .iter()
                .min_by_key(|&&r| (rows[r as usize].len(), r))
                .expect("weight > 0 implies a live row");
            if rows[p as usize].len() > cfg.max_row_len {
                col_rows[ci] = cand;
                break;
            }
            let prow = std::mem::take(&mut rows[p as usize]);
            let prhs = rhs[p as usize];
            alive[p as usize] = false;
            done[ci] = true;
            weight[ci] = 0;
            for &c2 in &prow {
                if c2 != c {
                    weight[c2 as usize] -= 1;
                    heap.push(Reverse((weight[c2 as usize], c2)));
                }
            }
            for &r in cand.iter().filter(|&&r| r != p) {
                let ri = r as usize;
                merged.clear();
                let row = &rows[ri];
                let (mut i, mut j) = (0, 0);
                while i < row.len() || j < prow.len() {
                    let a = row.get(i).copied().unwrap_or(u32::MAX);
                    let b = prow.get(j).copied().unwrap_or(u32::MAX);
                    if a < b {
                        merged.push(a);
                        i += 1;
                    } else if b < a {
                        // gained column
                        merged.push(b);
                        weight[b as usize] += 1;
                        col_rows[b as usize].push(r);
                        heap.push(Reverse((weight[b as usize], b)));
                        j += 1;
                    } else {
                        // cancelled column
                        if a != c {
                            weight[a as usize] -= 1;
                            heap.push(Reverse((weight[a as usize], a)));
                        }
                        i += 1;
                        j += 1;
                    }
                }
                std::mem::swap(&mut rows[ri], &mut merged);
                rhs[ri] ^= prhs;
            }
            pivots.push(Pivot {
                col: c,
                row: prow,
                rhs: prhs,
            });
        }

        // Dense remainder over the columns still in play.
        let mut dense_col = vec![u32::MAX; nv];
        let mut cols: Vec<u32> = Vec::new();
        for c in 0..nv {
            if !done[c] && weight[c] > 0 {
                dense_col[c] = cols.len() as u32;
                cols.push(c as u32);
            }
        }
        let mut rest = Gf2System::new(cols.len());
        let mut buf = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if alive[r] {
                buf.clear();
                buf.extend(row.iter().map(|&c| dense_col[c as usize]));
                rest.push_row(&buf, rhs[r]);
            }
        }
        let tail = rest.solve(want_witness);
        let rank_a = pivots.len() + tail.rank_a;
        let rank_ab = pivots.len() + tail.rank_ab;

        let witness = tail.witness.map(|wd| {
            let mut x = vec![false; nv];
            for (i, &c) in cols.iter().enumerate() {
                x[c as usize] = wd[i];
            }
            for p in pivots.iter().rev() {
                let val = p
                    .row
                    .iter()
                    .filter(|&&c| c != p.col)
                    .fold(p.rhs, |acc, &c| acc ^ x[c as usize]);
                x[p.col as usize] = val;
            }
            x
        });
        SolveResult::from_ranks(rank_a, rank_ab, witness)
    }
}
