//! Configuration-model k-XORSAT instances.
//!
//! An instance is `n` equations, each an ordered k-tuple of variable indices
//! drawn uniformly with replacement from `[0, m)`, plus a right-hand-side bit.
//! Slot order and equation order are kept exactly as drawn.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct Instance {
    k: usize,
    m: usize,
    /// Flat `n * k` slot array, equation-major.
    slots: Vec<u32>,
    rhs: Vec<bool>,
    seed: Option<u64>,
}

/// Equality ignores the seed tag: two instances are equal when they describe
/// the same system.
impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.m == other.m && self.slots == other.slots && self.rhs == other.rhs
    }
}

impl Eq for Instance {}

/// Degrees of all variables with respect to a set of remaining equations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeTable {
    pub deg: Vec<u32>,
    /// Variables of degree 0.
    pub z0: usize,
    /// Variables of degree exactly 1.
    pub z1: usize,
    /// Variables of degree at least 2.
    pub z2plus: usize,
}

impl DegreeTable {
    fn from_degrees(deg: Vec<u32>) -> Self {
        let (mut z0, mut z1, mut z2plus) = (0, 0, 0);
        for &d in &deg {
            match d {
                0 => z0 += 1,
                1 => z1 += 1,
                _ => z2plus += 1,
            }
        }
        DegreeTable {
            deg,
            z0,
            z1,
            z2plus,
        }
    }

    pub fn total(&self) -> u64 {
        self.deg.iter().map(|&d| d as u64).sum()
    }
}

/// Variable count `floor(n * rho_k + r * sqrt(n))` at scaling parameter `r`.
pub fn m_from_r(k: usize, n: usize, r: f64, rho_k: f64) -> Result<usize> {
    if k < 3 {
        return Err(Error::invalid(format!("arity k = {k} must be at least 3")));
    }
    if n == 0 {
        return Err(Error::invalid("equation count n must be at least 1"));
    }
    if !(rho_k > 0.0) || !rho_k.is_finite() {
        return Err(Error::invalid(format!(
            "threshold rho_k = {rho_k} must be positive"
        )));
    }
    if !r.is_finite() {
        return Err(Error::invalid("scaling parameter r must be finite"));
    }
    let n_f = n as f64;
    let m = (n_f * rho_k + r * n_f.sqrt()).floor();
    if m < 0.0 {
        return Err(Error::invalid(format!(
            "r = {r} gives a negative variable count at n = {n}"
        )));
    }
    if m > u32::MAX as f64 {
        return Err(Error::invalid("variable count exceeds the supported range"));
    }
    Ok(m as usize)
}

impl Instance {
    /// Builds an instance from explicit equations, validating every index.
    pub fn new(k: usize, m: usize, equations: &[(Vec<u32>, bool)]) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("arity k = {k} must be at least 3")));
        }
        let mut slots = Vec::with_capacity(k * equations.len());
        let mut rhs = Vec::with_capacity(equations.len());
        for (j, (vars, b)) in equations.iter().enumerate() {
            if vars.len() != k {
                return Err(Error::invalid(format!(
                    "equation {j} has {} slots, expected {k}",
                    vars.len()
                )));
            }
            if let Some(&v) = vars.iter().find(|&&v| v as usize >= m) {
                return Err(Error::invalid(format!(
                    "equation {j} references variable {v} outside [0, {m})"
                )));
            }
            slots.extend_from_slice(vars);
            rhs.push(*b);
        }
        Ok(Instance {
            k,
            m,
            slots,
            rhs,
            seed: None,
        })
    }

    /// Draws a configuration-model instance. Slots are drawn equation by
    /// equation, each followed by its right-hand-side bit.
    pub fn generate(k: usize, m: usize, n: usize, seed: u64) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("arity k = {k} must be at least 3")));
        }
        if m == 0 && n > 0 {
            return Err(Error::invalid(
                "m = 0 variables cannot host n > 0 equations",
            ));
        }
        if m > u32::MAX as usize {
            return Err(Error::invalid("variable count exceeds the supported range"));
        }
        let mut rng = rng::stream(seed);
        let mut slots = Vec::with_capacity(k * n);
        let mut rhs = Vec::with_capacity(n);
        let bound = m as u32;
        for _ in 0..n {
            for _ in 0..k {
                slots.push(rng.random_range(0..bound));
            }
            rhs.push(rng.random::<bool>());
        }
        Ok(Instance {
            k,
            m,
            slots,
            rhs,
            seed: Some(seed),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of variables.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of equations.
    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn equation(&self, j: usize) -> &[u32] {
        &self.slots[j * self.k..(j + 1) * self.k]
    }

    pub fn rhs(&self, j: usize) -> bool {
        self.rhs[j]
    }

    pub fn equations(&self) -> impl Iterator<Item = (&[u32], bool)> + '_ {
        self.slots
            .chunks_exact(self.k)
            .zip(self.rhs.iter().copied())
    }

    pub(crate) fn slots(&self) -> &[u32] {
        &self.slots
    }

    /// Degree table over all equations except those listed in `removed`.
    ///
    /// # Panics
    ///
    /// Panics if `removed` contains an index `>= n`.
    pub fn degrees(&self, removed: &[usize]) -> DegreeTable {
        let mut gone = vec![false; self.n()];
        for &j in removed {
            assert!(
                j < self.n(),
                "removed equation {j} out of range (n = {})",
                self.n()
            );
            gone[j] = true;
        }
        let mut deg = vec![0u32; self.m];
        for (j, (vars, _)) in self.equations().enumerate() {
            if !gone[j] {
                for &v in vars {
                    deg[v as usize] += 1;
                }
            }
        }
        DegreeTable::from_degrees(deg)
    }

    /// Canonical text encoding (format v1).
    pub fn encode(&self) -> String {
        self.to_string()
    }

    pub fn decode(text: &str) -> Result<Self> {
        text.parse()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.k, self.m, self.n())?;
        for (vars, b) in self.equations() {
            for v in vars {
                write!(f, "{v} ")?;
            }
            writeln!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

fn parse_field(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("{what} `{tok}` is not a nonnegative integer")))
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let head: Vec<&str> = header.split(' ').collect();
        if head.len() != 3 {
            return Err(Error::parse(1, "header must be `k m n`"));
        }
        let k = parse_field(head[0], 1, "k")?;
        let m = parse_field(head[1], 1, "m")?;
        let n = parse_field(head[2], 1, "n")?;
        if k < 3 {
            return Err(Error::parse(1, format!("arity k = {k} must be at least 3")));
        }
        if m > u32::MAX as usize {
            return Err(Error::parse(
                1,
                "variable count exceeds the supported range",
            ));
        }
        let mut slots = Vec::with_capacity(k.saturating_mul(n).min(1 << 24));
        let mut rhs = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let (no, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    rhs.len() + 2,
                    format!("expected {n} equations, found {}", rhs.len()),
                )
            })?;
            let toks: Vec<&str> = line.split(' ').collect();
            if toks.len() != k + 1 {
                return Err(Error::parse(
                    no,
                    format!("expected {} fields, found {}", k + 1, toks.len()),
                ));
            }
            for tok in &toks[..k] {
                let v = parse_field(tok, no, "index")?;
                if v >= m {
                    return Err(Error::parse(
                        no,
                        format!("index {v} out of range for m = {m}"),
                    ));
                }
                slots.push(v as u32);
            }
            rhs.push(match toks[k] {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(no, format!("rhs `{other}` is not 0 or 1"))),
            });
        }
        for (no, line) in lines {
            if !line.is_empty() {
                return Err(Error::parse(
                    no,
                    "unexpected content after the last equation",
                ));
            }
        }
        Ok(Instance {
            k,
            m,
            slots,
            rhs,
            seed: None,
        })
    }
}
