//! The auxiliary pair chain: two independent walks off the diagonal, with the
//! whole diagonal collapsed into a single state `Δ`.
//!
//! States are the ordered pairs `(x, x')` with `x ≠ x'`, enumerated row-major
//! with the diagonal skipped, followed by `Δ` as the last index. From a pair
//! the chain moves like `P ⊗ P`, landing in `Δ` whenever the two walks meet.
//! From `Δ` it first draws a vertex `z` with probability proportional to
//! `π(z)²` and then makes two independent steps out of `z`.
//!
//! The kernel is never materialized. One step of a measure is computed as
//! `M ↦ Pᵀ M P` on an `n × n` pair matrix `M` whose diagonal carries the `Δ`
//! mass spread by the weights `π(z)²/Σπ²`; the trace of the result is the new
//! `Δ` mass. This costs `2 n² r` instead of `n² r²` per step.

use std::sync::Mutex;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{tv_distance, ChainSpec, CsrMatrix};
use crate::error::{Error, Result};
use crate::fvtl::{return_series, ReturnSeries};
use crate::logbase::LogBase;
use crate::operator::TransitionOperator;

pub const STATIONARITY_TOLERANCE: f64 = 1e-10;
/// Largest `n` for which the mixing event is evaluated from every start.
pub const EXACT_MIXING_LIMIT: usize = 60;
/// Number of uniformly drawn starts (plus `Δ`) used above that size.
pub const SAMPLED_MIXING_STARTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxState {
    Pair(usize, usize),
    Diagonal,
}

struct PairScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairScratch {
    fn new(n: usize) -> Self {
        PairScratch {
            a: vec![0.0; n * n],
            b: vec![0.0; n * n],
        }
    }
}

pub struct AuxChain {
    n: usize,
    walk: CsrMatrix,
    out_degree: Option<usize>,
    pi: Vec<f64>,
    diag_weights: Vec<f64>,
    pi_tilde: Vec<f64>,
    delta_self: f64,
    residual: f64,
    weight_sampler: WeightedIndex<f64>,
    scratch: Mutex<Option<PairScratch>>,
}

impl std::fmt::Debug for AuxChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuxChain")
            .field("n", &self.n)
            .field("out_degree", &self.out_degree)
            .field("pi_tilde_delta", &self.pi_tilde_delta())
            .field("residual", &self.residual)
            .finish()
    }
}

/// Builds the auxiliary chain of a single-walk chain with unique stationary law `pi`.
pub fn build_aux_chain(c: &ChainSpec, pi: &[f64]) -> Result<AuxChain> {
    if c.recurrent_classes().len() != 1 {
        return Err(Error::MultipleRecurrentClasses(c.recurrent_classes().to_vec()));
    }
    let n = c.size();
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.len() });
    }
    let sum_sq: f64 = pi.iter().map(|p| p * p).sum();
    let diag_weights: Vec<f64> = pi.iter().map(|p| p * p / sum_sq).collect();

    let out_degree = c.regular_out_degree();
    let delta_self = match out_degree {
        Some(r) => 1.0 / r as f64,
        None => (0..n)
            .map(|z| diag_weights[z] * c.kernel().row(z).1.iter().map(|p| p * p).sum::<f64>())
            .sum(),
    };

    let mut pi_tilde = Vec::with_capacity(n * (n - 1) + 1);
    for x in 0..n {
        for x2 in 0..n {
            if x != x2 {
                pi_tilde.push(pi[x] * pi[x2]);
            }
        }
    }
    pi_tilde.push(sum_sq);

    let weight_sampler = WeightedIndex::new(&diag_weights)
        .map_err(|e| Error::InvalidParameters(format!("degenerate stationary weights: {e}")))?;
    let mut aux = AuxChain {
        n,
        walk: c.kernel().clone(),
        out_degree,
        pi: pi.to_vec(),
        diag_weights,
        pi_tilde,
        delta_self,
        residual: 0.0,
        weight_sampler,
        scratch: Mutex::new(None),
    };
    let mut next = vec![0.0; aux.num_states()];
    aux.push_forward(&aux.pi_tilde, &mut next);
    aux.residual = next.iter().zip(&aux.pi_tilde).map(|(a, b)| (a - b).abs()).sum();
    if aux.residual > STATIONARITY_TOLERANCE {
        return Err(Error::InvalidParameters(format!(
            "closed-form auxiliary stationary law has residual {:e}; is pi stationary?",
            aux.residual
        )));
    }
    Ok(aux)
}

impl AuxChain {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out_degree(&self) -> Option<usize> {
        self.out_degree
    }

    /// Index of `Δ` (always the last state).
    pub fn delta(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn pair_index(&self, x: usize, x2: usize) -> Option<usize> {
        (x != x2).then(|| x * (self.n - 1) + if x2 < x { x2 } else { x2 - 1 })
    }

    /// The quotient map `V² → Ṽ` sending every diagonal pair to `Δ`.
    pub fn project(&self, x: usize, x2: usize) -> usize {
        self.pair_index(x, x2).unwrap_or_else(|| self.delta())
    }

    pub fn state(&self, idx: usize) -> AuxState {
        if idx == self.delta() {
            return AuxState::Diagonal;
        }
        let x = idx / (self.n - 1);
        let k = idx % (self.n - 1);
        AuxState::Pair(x, if k < x { k } else { k + 1 })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi_tilde(&self) -> &[f64] {
        &self.pi_tilde
    }

    pub fn pi_tilde_delta(&self) -> f64 {
        self.pi_tilde[self.delta()]
    }

    /// `π(z)² / Σ_w π(w)²`, the law of the exit vertex from `Δ`.
    pub fn diag_weights(&self) -> &[f64] {
        &self.diag_weights
    }

    /// `‖π̃P̃ − π̃‖₁` of the closed-form stationary law, measured at construction.
    pub fn stationarity_residual(&self) -> f64 {
        self.residual
    }

    pub fn walk(&self) -> &CsrMatrix {
        &self.walk
    }

    /// Explicit row of the kernel, assembled case by case.
    pub fn row(&self, from: usize) -> Vec<(usize, f64)> {
        let delta = self.delta();
        let mut row = Vec::new();
        match self.state(from) {
            AuxState::Pair(x, x2) => {
                let mut to_delta = 0.0;
                for (y, p) in self.walk.row_entries(x) {
                    for (y2, q) in self.walk.row_entries(x2) {
                        if y == y2 {
                            to_delta += p * q;
                        } else {
                            row.push((self.pair_index(y, y2).unwrap(), p * q));
                        }
                    }
                }
                if to_delta > 0.0 {
                    row.push((delta, to_delta));
                }
            }
            AuxState::Diagonal => {
                for z in 0..self.n {
                    let w = self.diag_weights[z];
                    if w == 0.0 {
                        continue;
                    }
                    for (y, p) in self.walk.row_entries(z) {
                        for (y2, q) in self.walk.row_entries(z) {
                            if y != y2 {
                                row.push((self.pair_index(y, y2).unwrap(), w * p * q));
                            }
                        }
                    }
                }
                row.push((delta, self.delta_self));
            }
        }
        // Merge duplicates so that callers see one entry per target.
        row.sort_unstable_by_key(|&(j, _)| j);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        row
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        if from == self.delta() && to == self.delta() {
            return self.delta_self;
        }
        self.row(from)
            .into_iter()
            .find(|&(j, _)| j == to)
            .map_or(0.0, |(_, p)| p)
    }

    /// Materializes the kernel as an explicit chain (small `n` only).
    pub fn to_chain_spec(&self, max_states: usize) -> Result<ChainSpec> {
        let states = self.num_states();
        if states > max_states {
            return Err(Error::StateSpaceTooLarge { states, cap: max_states });
        }
        ChainSpec::new(CsrMatrix::from_rows((0..states).map(|i| self.row(i)).collect()))
    }

    /// One transition of the chain.
    pub fn sample_step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let (x, x2) = match self.state(from) {
            AuxState::Pair(x, x2) => (x, x2),
            AuxState::Diagonal => {
                let z = self.weight_sampler.sample(rng);
                (z, z)
            }
        };
        let y = sample_row(&self.walk, x, rng);
        let y2 = sample_row(&self.walk, x2, rng);
        self.project(y, y2)
    }

    fn with_scratch<T>(&self, f: impl FnOnce(&mut PairScratch) -> T) -> T {
        match self.scratch.try_lock() {
            Ok(mut guard) => {
                let scratch = guard.get_or_insert_with(|| PairScratch::new(self.n));
                f(scratch)
            }
            Err(_) => f(&mut PairScratch::new(self.n)),
        }
    }

    fn scatter_pairs(&self, v: &[f64], diag: impl Fn(usize) -> f64, m: &mut [f64]) {
        let n = self.n;
        let mut k = 0;
        for x in 0..n {
            let row = &mut m[x * n..(x + 1) * n];
            for (x2, slot) in row.iter_mut().enumerate() {
                if x2 == x {
                    *slot = diag(x);
                } else {
                    *slot = v[k];
                    k += 1;
                }
            }
        }
    }

    fn gather_pairs(&self, m: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut k = 0;
        for x in 0..n {
            for x2 in 0..n {
                if x != x2 {
                    out[k] = m[x * n + x2];
                    k += 1;
                }
            }
        }
    }
}

fn sample_row<R: Rng + ?Sized>(walk: &CsrMatrix, x: usize, rng: &mut R) -> usize {
    let (cols, vals) = walk.row(x);
    let mut u: f64 = rng.random();
    for (&j, &p) in cols.iter().zip(vals) {
        if u < p {
            return j;
        }
        u -= p;
    }
    *cols.last().expect("stochastic rows are non-empty")
}

impl TransitionOperator for AuxChain {
    fn num_states(&self) -> usize {
        self.n * (self.n - 1) + 1
    }

    fn push_forward(&self, dist: &[f64], out: &mut [f64]) {
        let n = self.n;
        let delta_mass = dist[self.delta()];
        self.with_scratch(|s| {
            let (m, a) = (&mut s.a, &mut s.b);
            self.scatter_pairs(dist, |z| delta_mass * self.diag_weights[z], m);
            // a = M P
            a.iter_mut().for_each(|x| *x = 0.0);
            for x in 0..n {
                let mrow = &m[x * n..(x + 1) * n];
                let arow = &mut a[x * n..(x + 1) * n];
                for (x2, &mass) in mrow.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    for (y2, p) in self.walk.row_entries(x2) {
                        arow[y2] += mass * p;
                    }
                }
            }
            // m = Pᵀ a
            m.iter_mut().for_each(|x| *x = 0.0);
            for x in 0..n {
                let arow = &a[x * n..(x + 1) * n];
                for (y, p) in self.walk.row_entries(x) {
                    let mrow = &mut m[y * n..(y + 1) * n];
                    for (t, &s) in mrow.iter_mut().zip(arow) {
                        *t += p * s;
                    }
                }
            }
            self.gather_pairs(m, out);
            out[self.delta()] = (0..n).map(|y| m[y * n + y]).sum();
        });
    }

    fn pull_back(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        let delta_value = f[self.delta()];
        self.with_scratch(|s| {
            let (h, c) = (&mut s.a, &mut s.b);
            self.scatter_pairs(f, |_| delta_value, h);
            // c = H Pᵀ, i.e. c[y][x2] = Σ_{y2} H[y][y2] P(x2, y2)
            for y in 0..n {
                let hrow = &h[y * n..(y + 1) * n];
                let crow = &mut c[y * n..(y + 1) * n];
                for (x2, slot) in crow.iter_mut().enumerate() {
                    *slot = self.walk.row_entries(x2).map(|(y2, p)| p * hrow[y2]).sum();
                }
            }
            // h = P c
            h.iter_mut().for_each(|x| *x = 0.0);
            for x in 0..n {
                let hrow = &mut h[x * n..(x + 1) * n];
                for (y, p) in self.walk.row_entries(x) {
                    let crow = &c[y * n..(y + 1) * n];
                    hrow.iter_mut().zip(crow).for_each(|(t, &s)| *t += p * s);
                }
            }
            self.gather_pairs(h, out);
            out[self.delta()] = (0..n).map(|z| self.diag_weights[z] * h[z * n + z]).sum();
        });
    }
}

/// `μ₊`: the law of the first pair visited after leaving `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitMeasure {
    /// Indexed like the auxiliary states; zero at `Δ`.
    pub mu_plus: Vec<f64>,
}

impl ExitMeasure {
    pub fn max(&self) -> f64 {
        self.mu_plus.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.mu_plus.iter().sum()
    }
}

pub fn exit_measure(a: &AuxChain) -> ExitMeasure {
    let mut mu_plus = vec![0.0; a.num_states()];
    let scale = 1.0 / (1.0 - a.delta_self);
    for z in 0..a.n {
        let w = a.diag_weights[z];
        if w == 0.0 {
            continue;
        }
        for (y, p) in a.walk.row_entries(z) {
            for (y2, q) in a.walk.row_entries(z) {
                if y != y2 {
                    mu_plus[a.pair_index(y, y2).unwrap()] += scale * w * p * q;
                }
            }
        }
    }
    ExitMeasure { mu_plus }
}

/// `Σ_{t=0}^{T} P̃ᵗ(Δ, Δ)`.
pub fn return_mass(a: &AuxChain, horizon: usize) -> Result<ReturnSeries> {
    return_series(a, a.delta(), a.pi_tilde_delta(), horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventCheck {
    pub value: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventReport {
    pub n: usize,
    pub r: usize,
    pub eps: f64,
    pub log_base: LogBase,
    /// Horizon `⌈log⁵ n⌉` of the return mass.
    pub horizon: usize,
    /// Mixing horizon `⌈log³ n⌉`.
    pub mixing_horizon: usize,
    /// `min π̃` over its support against `n^{-3.6}`.
    pub a1_min_pi_tilde: EventCheck,
    /// `max π̃` against `log⁸(n)/n`.
    pub a2_max_pi_tilde: EventCheck,
    /// `|n π̃(Δ) − r/(r−1)|` against `eps`; `value` is `n π̃(Δ)`.
    pub a3_pi_tilde_delta: EventCheck,
    /// `max_ξ ‖P̃ˢ(ξ,·) − π̃‖_TV` against `eps`.
    pub a4_mixing: EventCheck,
    pub a4_exact: bool,
    /// `|R − r/(r−1)|` against `eps`; `value` is `R`.
    pub a5_returns: EventCheck,
}

impl EventReport {
    pub fn all_hold(&self) -> bool {
        [
            self.a1_min_pi_tilde,
            self.a2_max_pi_tilde,
            self.a3_pi_tilde_delta,
            self.a4_mixing,
            self.a5_returns,
        ]
        .iter()
        .all(|e| e.holds)
    }
}

/// Evaluates the five structural events. `rng` picks the sampled starts of
/// the mixing event when `n` exceeds [`EXACT_MIXING_LIMIT`].
pub fn check_events<R: Rng + ?Sized>(a: &AuxChain, eps: f64, base: LogBase, rng: &mut R) -> Result<EventReport> {
    let r = a.out_degree.ok_or_else(|| {
        Error::InvalidParameters("events are defined for DFA walks with a common out-degree".into())
    })?;
    let n = a.n;
    let nf = n as f64;
    let limit = r as f64 / (r as f64 - 1.0);
    let horizon = base.ceil_log_pow(n, 5);
    let mixing_horizon = base.ceil_log_pow(n, 3);

    let min_pt = a.pi_tilde.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    let max_pt = a.pi_tilde.iter().copied().fold(0.0, f64::max);
    let a1 = EventCheck { value: min_pt, threshold: nf.powf(-3.6), holds: min_pt >= nf.powf(-3.6) };
    let upper = base.log(nf).powi(8) / nf;
    let a2 = EventCheck { value: max_pt, threshold: upper, holds: max_pt <= upper };
    let scaled = nf * a.pi_tilde_delta();
    let a3 = EventCheck { value: scaled, threshold: eps, holds: (scaled - limit).abs() < eps };

    let exact = n <= EXACT_MIXING_LIMIT;
    let starts: Vec<usize> = if exact {
        (0..a.num_states()).collect()
    } else {
        let mut s: Vec<usize> = (0..SAMPLED_MIXING_STARTS)
            .map(|_| rng.random_range(0..a.delta()))
            .collect();
        s.push(a.delta());
        s
    };
    let worst_tv = starts
        .par_iter()
        .map(|&xi| tv_after(a, xi, mixing_horizon))
        .reduce(|| 0.0, f64::max);
    let a4 = EventCheck { value: worst_tv, threshold: eps, holds: worst_tv < eps };

    let returns = return_mass(a, horizon)?;
    let a5 = EventCheck {
        value: returns.return_mass,
        threshold: eps,
        holds: (returns.return_mass - limit).abs() < eps,
    };

    Ok(EventReport {
        n,
        r,
        eps,
        log_base: base,
        horizon,
        mixing_horizon,
        a1_min_pi_tilde: a1,
        a2_max_pi_tilde: a2,
        a3_pi_tilde_delta: a3,
        a4_mixing: a4,
        a4_exact: exact,
        a5_returns: a5,
    })
}

/// `‖P̃ˢ(ξ,·) − π̃‖_TV`. The distance to stationarity never increases, so the
/// iteration stops once it is below `1e-13`.
fn tv_after(a: &AuxChain, start: usize, steps: usize) -> f64 {
    let mut dist = vec![0.0; a.num_states()];
    dist[start] = 1.0;
    let mut next = vec![0.0; a.num_states()];
    let mut tv = tv_distance(&dist, &a.pi_tilde);
    for _ in 0..steps {
        if tv < 1e-13 {
            break;
        }
        a.push_forward(&dist, &mut next);
        std::mem::swap(&mut dist, &mut next);
        tv = tv_distance(&dist, &a.pi_tilde);
    }
    tv
}
