//! Finite Markov chains: single walk, product chain, stationary laws,
//! total-variation mixing and exact hitting times.

mod classes;
mod hitting;
mod mixing;
mod random;
mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use classes::recurrent_classes;
pub use hitting::{hitting_time_expectation, hitting_times};
pub use mixing::{mixing_profile, tv_distance, MixingProfile, MIXING_THRESHOLD};
pub use random::random_ergodic_chain;
pub use sparse::CsrMatrix;

use crate::dfa::Dfa;
use crate::error::{Error, Result};
use crate::logbase::LogBase;
use crate::operator::TransitionOperator;

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Largest recurrent class solved by dense LU; power iteration above.
pub const DIRECT_SOLVE_LIMIT: usize = 5000;
pub const POWER_TOLERANCE: f64 = 1e-13;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;
/// Default cap on the base chain size accepted by [`product_matrix`].
pub const DEFAULT_PRODUCT_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationaryMethod {
    /// Dense LU up to [`DIRECT_SOLVE_LIMIT`] states, power iteration above.
    #[default]
    Auto,
    Direct,
    Power,
}

/// A row-stochastic kernel with its recurrent-class decomposition and,
/// once solved, its stationary distribution.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    kernel: CsrMatrix,
    recurrent_classes: Vec<Vec<usize>>,
    stationary: Option<Vec<f64>>,
}

impl ChainSpec {
    pub fn new(kernel: CsrMatrix) -> Result<Self> {
        for i in 0..kernel.size() {
            let sum = kernel.row_sum(i);
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || kernel.row(i).1.iter().any(|&p| p < 0.0) {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        let recurrent_classes = recurrent_classes(&kernel);
        Ok(ChainSpec {
            kernel,
            recurrent_classes,
            stationary: None,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        ChainSpec::new(CsrMatrix::from_dense(rows))
    }

    /// Solves and caches the stationary distribution.
    pub fn with_stationary(mut self, method: StationaryMethod) -> Result<Self> {
        self.stationary = Some(stationary_distribution(&self, method)?);
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.kernel.size()
    }

    pub fn kernel(&self) -> &CsrMatrix {
        &self.kernel
    }

    pub fn recurrent_classes(&self) -> &[Vec<usize>] {
        &self.recurrent_classes
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        self.stationary.as_deref()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel.get(i, j)
    }

    /// Common out-degree `k` when every row has exactly `k` entries equal to `1/k`.
    pub fn regular_out_degree(&self) -> Option<usize> {
        let k = self.kernel.row(0).0.len();
        let p = 1.0 / k as f64;
        (0..self.size())
            .all(|i| {
                let (c, v) = self.kernel.row(i);
                c.len() == k && v.iter().all(|&x| x == p)
            })
            .then_some(k)
    }

    /// `‖πP − π‖₁`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let mut next = vec![0.0; self.size()];
        self.kernel.push_forward(pi, &mut next);
        next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl TransitionOperator for ChainSpec {
    fn num_states(&self) -> usize {
        self.size()
    }

    fn push_forward(&self, dist: &[f64], out: &mut [f64]) {
        self.kernel.push_forward(dist, out)
    }

    fn pull_back(&self, f: &[f64], out: &mut [f64]) {
        self.kernel.pull_back(f, out)
    }
}

/// Single-walk kernel: `P(x, y) = #{c : f_x(c) = y} / r`.
pub fn walk_matrix(d: &Dfa) -> ChainSpec {
    let p = 1.0 / d.r() as f64;
    let rows = d.rows().map(|row| row.iter().map(|&y| (y, p)).collect()).collect();
    ChainSpec::new(CsrMatrix::from_rows(rows)).expect("DFA kernels are stochastic")
}

/// A DFA whose walk has a single recurrent class, with its solved kernel.
#[derive(Debug, Clone)]
pub struct ErgodicDraw {
    pub dfa: Dfa,
    pub chain: ChainSpec,
    /// Draws rejected for having several recurrent classes.
    pub resamples: u64,
}

/// Draws DFAs until the walk has a single recurrent class, then solves for `π`.
pub fn sample_ergodic_walk<R: rand::Rng + ?Sized>(
    n: usize,
    r: usize,
    method: StationaryMethod,
    rng: &mut R,
) -> Result<ErgodicDraw> {
    let mut resamples = 0;
    loop {
        let dfa = Dfa::generate(n, r, rng)?;
        match walk_matrix(&dfa).with_stationary(method) {
            Ok(chain) => return Ok(ErgodicDraw { dfa, chain, resamples }),
            Err(Error::MultipleRecurrentClasses(_)) => resamples += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Index of the pair `(x, x')` in the product chain on `n²` states.
#[inline]
pub fn product_index(n: usize, x: usize, x2: usize) -> usize {
    x * n + x2
}

/// Kernel of two independent copies, `P ⊗ P`, on `n²` states (row-major pairs).
pub fn product_matrix(c: &ChainSpec, max_base_states: usize) -> Result<ChainSpec> {
    let n = c.size();
    if n > max_base_states {
        return Err(Error::StateSpaceTooLarge {
            states: n * n,
            cap: max_base_states * max_base_states,
        });
    }
    let k = &c.kernel;
    let mut rows = Vec::with_capacity(n * n);
    for x in 0..n {
        for x2 in 0..n {
            let mut row = Vec::with_capacity(k.row(x).0.len() * k.row(x2).0.len());
            for (y, p) in k.row_entries(x) {
                for (y2, q) in k.row_entries(x2) {
                    row.push((product_index(n, y, y2), p * q));
                }
            }
            rows.push(row);
        }
    }
    ChainSpec::new(CsrMatrix::from_rows(rows))
}

/// Stationary distribution of a chain with a single recurrent class.
pub fn stationary_distribution(c: &ChainSpec, method: StationaryMethod) -> Result<Vec<f64>> {
    let class = match c.recurrent_classes() {
        [single] => single,
        many => return Err(Error::MultipleRecurrentClasses(many.to_vec())),
    };
    let direct = match method {
        StationaryMethod::Auto => class.len() <= DIRECT_SOLVE_LIMIT,
        StationaryMethod::Direct => true,
        StationaryMethod::Power => false,
    };
    let local = if direct {
        stationary_direct(c, class)?
    } else {
        stationary_power(c, class)?
    };
    let mut pi = vec![0.0; c.size()];
    for (&state, &mass) in class.iter().zip(&local) {
        pi[state] = mass;
    }
    Ok(pi)
}

fn class_positions(n: usize, class: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in class.iter().enumerate() {
        pos[s] = k;
    }
    pos
}

fn stationary_direct(c: &ChainSpec, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let pos = class_positions(c.size(), class);
    // Rows of (Pᵀ − I) restricted to the class; the last equation is replaced
    // by the normalization Σπ = 1.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (k, &s) in class.iter().enumerate() {
        a[(k, k)] -= 1.0;
        for (j, p) in c.kernel.row_entries(s) {
            a[(pos[j], k)] += p;
        }
    }
    for k in 0..m {
        a[(m - 1, k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    Ok(clean_probability(sol.iter().copied().collect()))
}

fn stationary_power(c: &ChainSpec, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let pos = class_positions(c.size(), class);
    let mut v = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut delta = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERATIONS {
        // Lazy step (P + I)/2: same fixed point, no periodicity issues.
        next.iter_mut().zip(&v).for_each(|(o, &x)| *o = 0.5 * x);
        for (k, &s) in class.iter().enumerate() {
            let half = 0.5 * v[k];
            for (j, p) in c.kernel.row_entries(s) {
                next[pos[j]] += half * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if delta <= POWER_TOLERANCE {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        what: "stationary power iteration",
        iterations: POWER_MAX_ITERATIONS,
        last_delta: delta,
    })
}

fn clean_probability(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiExtremes {
    pub min_on_support: f64,
    pub max: f64,
    /// `n^{-1.8}`, the comparison value for the minimum.
    pub min_reference: f64,
    /// `log⁸(n)/n`, the comparison value for the maximum.
    pub max_reference: f64,
    pub min_above_reference: bool,
    pub max_below_reference: bool,
}

pub fn measure_pi_extremes(pi: &[f64], base: LogBase) -> PiExtremes {
    let n = pi.len() as f64;
    let min_on_support = pi.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    let max = pi.iter().copied().fold(0.0, f64::max);
    let min_reference = n.powf(-1.8);
    let max_reference = base.log(n).powi(8) / n;
    PiExtremes {
        min_on_support,
        max,
        min_reference,
        max_reference,
        min_above_reference: min_on_support >= min_reference,
        max_below_reference: max <= max_reference,
    }
}
