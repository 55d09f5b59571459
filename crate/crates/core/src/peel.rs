//! Peeling to the 2-core.
//!
//! Each step removes one equation that contains a variable of current degree
//! exactly 1 (degrees counted with multiplicity). The run stops when no such
//! equation remains; what is left is the 2-core, which does not depend on the
//! removal order.
//!
//! Two random orders are offered. [`PeelRule::UniformEquation`] picks
//! uniformly among the eligible equations. [`PeelRule::UniformDegreeOneVariable`]
//! picks a uniform degree-1 variable and removes its equation, so an equation
//! is chosen with probability proportional to its number of degree-1
//! variables; this is the chain whose one-step law the approximate kernel
//! describes. Both stop at the same core.
//!
//! Candidates are tracked incrementally: `ones[e]` counts the degree-1
//! variables in equation `e`, and `eq_xor[v]` is the XOR of the indices of
//! the equations holding the remaining occurrences of `v`, so once `v` drops
//! to degree 1 its last equation is read off directly.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::instance::Instance;
use crate::rng::{self, StreamRng};
use crate::theory::{kernel_probs, KernelProbs, StatePoint, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TracePoint {
    pub tau: usize,
    /// Variables of degree exactly 1.
    pub z1: usize,
    /// Variables of degree at least 2.
    pub z2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeelTrace {
    /// `z` before every recorded removal, then at the stopping time.
    pub steps: Vec<TracePoint>,
    pub tau_c: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreResult {
    /// Surviving equations, ascending.
    pub core_eq_indices: Vec<usize>,
    pub n_core: usize,
    /// Variables of degree >= 1 inside the core.
    pub m_core: usize,
    /// `m_core - n_core`.
    pub surplus: i64,
}

impl CoreResult {
    pub fn is_empty(&self) -> bool {
        self.n_core == 0
    }
}

/// How the next equation is chosen among the peelable ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PeelRule {
    /// Uniform over equations containing a degree-1 variable.
    #[default]
    UniformEquation,
    /// Uniform over degree-1 variables; the equation holding it is removed.
    UniformDegreeOneVariable,
}

enum Order<'a> {
    Uniform(&'a mut StreamRng),
    SizeBiased(&'a mut StreamRng),
    Stack,
}

impl<'a> Order<'a> {
    fn random(rule: PeelRule, rng: &'a mut StreamRng) -> Self {
        match rule {
            PeelRule::UniformEquation => Order::Uniform(rng),
            PeelRule::UniformDegreeOneVariable => Order::SizeBiased(rng),
        }
    }
}

struct Peeler<'a> {
    inst: &'a Instance,
    deg: Vec<u32>,
    eq_xor: Vec<u32>,
    ones: Vec<u8>,
    removed: Vec<bool>,
    candidates: Vec<u32>,
    /// Position of each equation in `candidates`, `u32::MAX` if absent.
    pos: Vec<u32>,
    z1: usize,
    z2: usize,
}

impl<'a> Peeler<'a> {
    fn new(inst: &'a Instance) -> Self {
        let n = inst.n();
        let mut deg = vec![0u32; inst.m()];
        let mut eq_xor = vec![0u32; inst.m()];
        for (e, vars) in inst.slots().chunks_exact(inst.k()).enumerate() {
            for &v in vars {
                deg[v as usize] += 1;
                eq_xor[v as usize] ^= e as u32;
            }
        }
        let mut ones = vec![0u8; n];
        let (mut z1, mut z2) = (0, 0);
        for (v, &d) in deg.iter().enumerate() {
            match d {
                0 => {}
                1 => {
                    z1 += 1;
                    ones[eq_xor[v] as usize] += 1;
                }
                _ => z2 += 1,
            }
        }
        let mut candidates = Vec::new();
        let mut pos = vec![u32::MAX; n];
        for (e, &c) in ones.iter().enumerate() {
            if c > 0 {
                pos[e] = candidates.len() as u32;
                candidates.push(e as u32);
            }
        }
        Peeler {
            inst,
            deg,
            eq_xor,
            ones,
            removed: vec![false; n],
            candidates,
            pos,
            z1,
            z2,
        }
    }

    fn pick(&mut self, order: &mut Order<'_>) -> Option<usize> {
        if self.candidates.is_empty() {
            return None;
        }
        let len = self.candidates.len();
        let i = match order {
            Order::Uniform(rng) => rng.random_range(0..len),
            Order::SizeBiased(rng) => {
                // accept a uniform candidate with probability ones / k
                let k = self.inst.k() as u32;
                loop {
                    let i = rng.random_range(0..len);
                    let ones = u32::from(self.ones[self.candidates[i] as usize]);
                    if ones >= k || rng.random_range(0..k) < ones {
                        break i;
                    }
                }
            }
            Order::Stack => len - 1,
        };
        Some(self.candidates[i] as usize)
    }

    fn unlist(&mut self, e: usize) {
        let i = self.pos[e] as usize;
        let last = *self.candidates.last().expect("candidate list not empty");
        self.candidates.swap_remove(i);
        if last as usize != e {
            self.pos[last as usize] = i as u32;
        }
        self.pos[e] = u32::MAX;
    }

    fn remove(&mut self, e: usize) {
        self.unlist(e);
        self.removed[e] = true;
        let vars = self.inst.equation(e);
        for (s, &v) in vars.iter().enumerate() {
            // handle each distinct variable once, with its multiplicity
            if vars[..s].contains(&v) {
                continue;
            }
            let mult = vars[s..].iter().filter(|&&u| u == v).count() as u32;
            let vi = v as usize;
            let old = self.deg[vi];
            let new = old - mult;
            self.deg[vi] = new;
            if mult % 2 == 1 {
                self.eq_xor[vi] ^= e as u32;
            }
            match old {
                1 => self.z1 -= 1,
                _ => self.z2 -= 1,
            }
            match new {
                0 => {}
                1 => {
                    self.z1 += 1;
                    let host = self.eq_xor[vi] as usize;
                    debug_assert!(!self.removed[host]);
                    self.ones[host] += 1;
                    if self.ones[host] == 1 {
                        self.pos[host] = self.candidates.len() as u32;
                        self.candidates.push(host as u32);
                    }
                }
                _ => self.z2 += 1,
            }
        }
    }

    fn core(&self) -> CoreResult {
        let core_eq_indices: Vec<usize> =
            (0..self.inst.n()).filter(|&e| !self.removed[e]).collect();
        let n_core = core_eq_indices.len();
        let m_core = self.deg.iter().filter(|&&d| d > 0).count();
        debug_assert_eq!(self.z1, 0);
        debug_assert_eq!(m_core, self.z2);
        CoreResult {
            n_core,
            m_core,
            surplus: m_core as i64 - n_core as i64,
            core_eq_indices,
        }
    }
}

/// Peels with uniformly random removal order, recording every step.
pub fn peel_run(inst: &Instance, seed: u64) -> (PeelTrace, CoreResult) {
    peel_run_with(inst, seed, 1, PeelRule::UniformEquation)
}

/// Like [`peel_run`] but records only every `stride`-th step (plus the
/// stopping point). `stride` of 0 is treated as 1.
pub fn peel_run_strided(inst: &Instance, seed: u64, stride: usize) -> (PeelTrace, CoreResult) {
    peel_run_with(inst, seed, stride, PeelRule::UniformEquation)
}

/// Peels with the random order given by `rule`, recording every `stride`-th
/// step (plus the stopping point).
pub fn peel_run_with(
    inst: &Instance,
    seed: u64,
    stride: usize,
    rule: PeelRule,
) -> (PeelTrace, CoreResult) {
    let stride = stride.max(1);
    let mut rng = rng::stream(seed);
    let mut order = Order::random(rule, &mut rng);
    let mut p = Peeler::new(inst);
    let mut steps = Vec::with_capacity(inst.n() / stride + 2);
    let mut tau = 0;
    while let Some(e) = p.pick(&mut order) {
        if tau % stride == 0 {
            steps.push(TracePoint {
                tau,
                z1: p.z1,
                z2: p.z2,
            });
        }
        p.remove(e);
        tau += 1;
    }
    steps.push(TracePoint {
        tau,
        z1: p.z1,
        z2: p.z2,
    });
    (PeelTrace { steps, tau_c: tau }, p.core())
}

/// The 2-core, computed with a deterministic removal order.
pub fn core_of(inst: &Instance) -> CoreResult {
    let mut p = Peeler::new(inst);
    let mut order = Order::Stack;
    while let Some(e) = p.pick(&mut order) {
        p.remove(e);
    }
    p.core()
}

/// Random-order peel that reports `(tau, z1, z2, dz1, dz2)` for every
/// removal, `z` taken before the step.
pub fn peel_steps<F: FnMut(usize, usize, usize, i64, i64)>(
    inst: &Instance,
    seed: u64,
    rule: PeelRule,
    mut f: F,
) -> CoreResult {
    let mut rng = rng::stream(seed);
    let mut order = Order::random(rule, &mut rng);
    let mut p = Peeler::new(inst);
    let mut tau = 0;
    while let Some(e) = p.pick(&mut order) {
        let (z1, z2) = (p.z1, p.z2);
        p.remove(e);
        f(
            tau,
            z1,
            z2,
            p.z1 as i64 - z1 as i64,
            p.z2 as i64 - z2 as i64,
        );
        tau += 1;
    }
    p.core()
}

/// One step of the approximate kernel from the scaled state `x` at time
/// `theta`: returns `dz = (q1 - q0, -q1)` where, besides the peeled slot,
/// the `k - 1` other slots of the removed equation fall into the three
/// degree classes with the kernel probabilities.
pub fn sample_kernel(x: Vec2, theta: f64, k: usize, rng: &mut StreamRng) -> Result<(i64, i64)> {
    let p = kernel_probs(&StatePoint::new(x, theta), k)?;
    Ok(sample_delta(&p, k, rng))
}

/// [`sample_kernel`] with the probabilities given directly.
pub fn sample_delta(p: &KernelProbs, k: usize, rng: &mut StreamRng) -> (i64, i64) {
    let (mut q0, mut q1) = (1i64, 0i64);
    for _ in 1..k {
        let u: f64 = rng.random();
        if u < p.p0 {
            q0 += 1;
        } else if u < p.p0 + p.p1 {
            q1 += 1;
        }
    }
    (q1 - q0, -q1)
}
