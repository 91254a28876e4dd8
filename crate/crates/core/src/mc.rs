//! Seeded Monte Carlo samplers for meeting, coalescence and synchronization.
//!
//! Every trial draws from its own generator keyed by
//! `seed_split(master, trial, mode)`, so results do not depend on how trials
//! are scheduled and any single trial can be replayed from its recorded seed.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dfa::Dfa;
use crate::error::{Error, Result};
use crate::seed::{format_seed, rng_from_seed, seed_split};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DFA_MEET_THREADS";
/// Trials evaluated per parallel batch before records are flushed.
const BATCH: usize = 4096;

pub const CSV_HEADER: [&str; 9] = ["trial", "derived_seed", "mode", "n", "r", "x", "y", "tau", "censored"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Independent,
    Coupled,
    Coalescing,
    Sync,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Independent, Mode::Coupled, Mode::Coalescing, Mode::Sync];

    pub fn tag(self) -> &'static str {
        match self {
            Mode::Independent => "independent",
            Mode::Coupled => "coupled",
            Mode::Coalescing => "coalescing",
            Mode::Sync => "sync",
        }
    }

    /// Whether trials start from a pair of walkers rather than from all vertices.
    pub fn is_pairwise(self) -> bool {
        matches!(self, Mode::Independent | Mode::Coupled)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidParameters(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfaPolicy {
    FreshPerTrial,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Starts {
    /// Two distinct vertices drawn uniformly per trial.
    UniformDistinct,
    Fixed { x: usize, y: usize },
    /// Every vertex carries a walker (coalescing and sync modes).
    AllVertices,
}

/// Outcome of one sampler call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stopping {
    pub tau: u64,
    pub censored: bool,
}

impl Stopping {
    fn hit(tau: u64) -> Self {
        Stopping { tau, censored: false }
    }

    fn cap(cap: u64) -> Self {
        Stopping { tau: cap, censored: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    #[serde(serialize_with = "serialize_seed")]
    pub derived_seed: u128,
    pub mode: Mode,
    pub n: usize,
    pub r: usize,
    pub x: Option<usize>,
    pub y: Option<usize>,
    pub tau: u64,
    pub censored: bool,
}

fn serialize_seed<S: serde::Serializer>(seed: &u128, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_seed(*seed))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub mode: Mode,
    pub n: usize,
    pub r: usize,
    pub trials: u64,
    pub cap: u64,
    pub dfa_policy: DfaPolicy,
    pub starts: Starts,
    /// DFAs discarded and redrawn. None of the simulation modes needs a
    /// stationary law, so this stays zero for every sampler here.
    pub resample_count: u64,
}

impl RunManifest {
    /// Fresh DFA per trial, default cap, and the natural starts for `mode`.
    pub fn new(master_seed: u64, mode: Mode, n: usize, r: usize, trials: u64) -> Self {
        RunManifest {
            master_seed,
            mode,
            n,
            r,
            trials,
            cap: default_cap(n),
            dfa_policy: DfaPolicy::FreshPerTrial,
            starts: if mode.is_pairwise() {
                Starts::UniformDistinct
            } else {
                Starts::AllVertices
            },
            resample_count: 0,
        }
    }

    fn validate(&self, fixed: Option<&Dfa>) -> Result<()> {
        match (self.dfa_policy, fixed) {
            (DfaPolicy::Fixed, None) => {
                return Err(Error::InvalidParameters("fixed DFA policy needs a DFA".into()));
            }
            (DfaPolicy::Fixed, Some(d)) if d.n() != self.n || d.r() != self.r => {
                return Err(Error::InvalidParameters(format!(
                    "DFA has n={}, r={} but the manifest says n={}, r={}",
                    d.n(),
                    d.r(),
                    self.n,
                    self.r
                )));
            }
            _ => {}
        }
        match (self.mode.is_pairwise(), self.starts) {
            (true, Starts::AllVertices) | (false, Starts::UniformDistinct | Starts::Fixed { .. }) => {
                Err(Error::InvalidParameters(format!(
                    "starts {:?} do not fit mode {}",
                    self.starts, self.mode
                )))
            }
            (true, Starts::Fixed { x, y }) if x >= self.n || y >= self.n => Err(Error::InvalidParameters(format!(
                "start pair ({x}, {y}) out of range for n={}",
                self.n
            ))),
            _ => Ok(()),
        }
    }
}

/// `50 · n · ⌈ln n⌉`, at least 50.
pub fn default_cap(n: usize) -> u64 {
    let logn = (n.max(2) as f64).ln().ceil() as u64;
    50 * n as u64 * logn.max(1)
}

/// Two walks with independent uniform colors; `tau` is the first time they
/// occupy the same vertex, `0` when they start together.
pub fn sample_meeting_independent<R: Rng + ?Sized>(d: &Dfa, x: usize, y: usize, cap: u64, rng: &mut R) -> Stopping {
    let (mut a, mut b) = (x, y);
    let r = d.r();
    for t in 0..cap {
        if a == b {
            return Stopping::hit(t);
        }
        a = d.target(a, rng.random_range(0..r));
        b = d.target(b, rng.random_range(0..r));
    }
    if a == b {
        Stopping::hit(cap)
    } else {
        Stopping::cap(cap)
    }
}

/// Two walks reading the same random word.
pub fn sample_meeting_coupled<R: Rng + ?Sized>(d: &Dfa, x: usize, y: usize, cap: u64, rng: &mut R) -> Stopping {
    let (mut a, mut b) = (x, y);
    let r = d.r();
    for t in 0..cap {
        if a == b {
            return Stopping::hit(t);
        }
        let c = rng.random_range(0..r);
        a = d.target(a, c);
        b = d.target(b, c);
    }
    if a == b {
        Stopping::hit(cap)
    } else {
        Stopping::cap(cap)
    }
}

/// Coalescing walks started from every vertex.
pub fn sample_coalescence<R: Rng + ?Sized>(d: &Dfa, cap: u64, rng: &mut R) -> Stopping {
    let all: Vec<usize> = (0..d.n()).collect();
    sample_coalescence_from(d, &all, cap, rng)
}

/// Coalescing walks from an arbitrary walker set. Clusters on the same vertex
/// merge; every cluster draws its own color each step.
pub fn sample_coalescence_from<R: Rng + ?Sized>(d: &Dfa, walkers: &[usize], cap: u64, rng: &mut R) -> Stopping {
    let n = d.n();
    let r = d.r();
    // `seen[v] == stamp` marks vertices already occupied in the current step.
    let mut seen = vec![0u64; n];
    let mut stamp = 1u64;
    let mut clusters: Vec<usize> = Vec::with_capacity(walkers.len());
    for &w in walkers {
        if seen[w] != stamp {
            seen[w] = stamp;
            clusters.push(w);
        }
    }
    let mut next = Vec::with_capacity(clusters.len());
    for t in 0..cap {
        if clusters.len() <= 1 {
            return Stopping::hit(t);
        }
        stamp += 1;
        next.clear();
        for &v in &clusters {
            let w = d.target(v, rng.random_range(0..r));
            if seen[w] != stamp {
                seen[w] = stamp;
                next.push(w);
            }
        }
        std::mem::swap(&mut clusters, &mut next);
    }
    if clusters.len() <= 1 {
        Stopping::hit(cap)
    } else {
        Stopping::cap(cap)
    }
}

/// The image `W(V)` of a growing word, kept as a member list plus a bitset.
#[derive(Debug, Clone)]
pub struct ImageSet {
    members: Vec<usize>,
    bits: Vec<u64>,
    spare: Vec<usize>,
}

impl ImageSet {
    pub fn full(n: usize) -> Self {
        let mut bits = vec![u64::MAX; n.div_ceil(64)];
        if n % 64 != 0 {
            if let Some(last) = bits.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        ImageSet {
            members: (0..n).collect(),
            bits,
            spare: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Replaces the set by its image under color `c`. Costs `O(|S|)`.
    pub fn apply(&mut self, d: &Dfa, c: usize) {
        for &v in &self.members {
            self.bits[v / 64] &= !(1u64 << (v % 64));
        }
        self.spare.clear();
        for &v in &self.members {
            let w = d.target(v, c);
            let (word, bit) = (w / 64, 1u64 << (w % 64));
            if self.bits[word] & bit == 0 {
                self.bits[word] |= bit;
                self.spare.push(w);
            }
        }
        std::mem::swap(&mut self.members, &mut self.spare);
    }
}

/// First length at which a uniformly growing random word synchronizes.
pub fn sample_sync<R: Rng + ?Sized>(d: &Dfa, cap: u64, rng: &mut R) -> Stopping {
    let mut image = ImageSet::full(d.n());
    let r = d.r();
    for t in 0..cap {
        if image.len() <= 1 {
            return Stopping::hit(t);
        }
        image.apply(d, rng.random_range(0..r));
    }
    if image.len() <= 1 {
        Stopping::hit(cap)
    } else {
        Stopping::cap(cap)
    }
}

/// `Σ_{i=2}^{n} Z_i` with independent `Z_i ~ Exp(i(i−1)/2)`: the Kingman
/// coalescence time of `n` lineages, in units of `n` steps.
pub fn sample_kingman_reference<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    assert!(n >= 2, "Kingman reference needs at least two lineages");
    (2..=n)
        .map(|i| {
            let rate = (i * (i - 1)) as f64 / 2.0;
            Exp::new(rate).expect("positive rate").sample(rng)
        })
        .sum()
}

/// `E[Σ_{i=2}^{n} Z_i] = 2(1 − 1/n)`.
pub fn kingman_mean(n: usize) -> f64 {
    2.0 * (1.0 - 1.0 / n as f64)
}

/// Runs trial `index` of `manifest`. `fixed` must be supplied under the fixed policy.
pub fn run_trial(manifest: &RunManifest, fixed: Option<&Dfa>, index: u64) -> Result<TrialRecord> {
    let seed = seed_split(manifest.master_seed, index, manifest.mode.tag());
    let mut rng = rng_from_seed(seed);
    let owned;
    let d = match (manifest.dfa_policy, fixed) {
        (DfaPolicy::Fixed, Some(d)) => d,
        (DfaPolicy::Fixed, None) => {
            return Err(Error::InvalidParameters("fixed DFA policy needs a DFA".into()));
        }
        (DfaPolicy::FreshPerTrial, _) => {
            owned = Dfa::generate(manifest.n, manifest.r, &mut rng)?;
            &owned
        }
    };
    let (x, y) = match manifest.starts {
        Starts::UniformDistinct => {
            let x = rng.random_range(0..d.n());
            let mut y = rng.random_range(0..d.n() - 1);
            if y >= x {
                y += 1;
            }
            (Some(x), Some(y))
        }
        Starts::Fixed { x, y } => (Some(x), Some(y)),
        Starts::AllVertices => (None, None),
    };
    let cap = manifest.cap;
    let stop = match (manifest.mode, x, y) {
        (Mode::Independent, Some(x), Some(y)) => sample_meeting_independent(d, x, y, cap, &mut rng),
        (Mode::Coupled, Some(x), Some(y)) => sample_meeting_coupled(d, x, y, cap, &mut rng),
        (Mode::Coalescing, ..) => sample_coalescence(d, cap, &mut rng),
        (Mode::Sync, ..) => sample_sync(d, cap, &mut rng),
        _ => return Err(Error::InvalidParameters("pairwise mode without start pair".into())),
    };
    Ok(TrialRecord {
        trial: index,
        derived_seed: seed,
        mode: manifest.mode,
        n: d.n(),
        r: d.r(),
        x,
        y,
        tau: stop.tau,
        censored: stop.censored,
    })
}

/// Worker count from `DFA_MEET_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Runs every trial in parallel and hands records to `sink` in trial order.
///
/// `threads = None` falls back to `DFA_MEET_THREADS`, then to rayon's default.
pub fn run_experiment_with<F>(manifest: &RunManifest, fixed: Option<&Dfa>, threads: Option<usize>, mut sink: F) -> Result<()>
where
    F: FnMut(&TrialRecord) -> Result<()>,
{
    manifest.validate(fixed)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads.or_else(threads_from_env) {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameters(format!("thread pool: {e}")))?;
    let mut start = 0u64;
    while start < manifest.trials {
        let end = (start + BATCH as u64).min(manifest.trials);
        let batch: Vec<TrialRecord> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| run_trial(manifest, fixed, i))
                .collect::<Result<_>>()
        })?;
        for rec in &batch {
            sink(rec)?;
        }
        start = end;
    }
    Ok(())
}

pub fn run_experiment(manifest: &RunManifest, fixed: Option<&Dfa>, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::with_capacity(manifest.trials.min(1 << 24) as usize);
    run_experiment_with(manifest, fixed, threads, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Streams results as CSV with header [`CSV_HEADER`].
pub fn write_results_csv<W: Write>(manifest: &RunManifest, fixed: Option<&Dfa>, threads: Option<usize>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    run_experiment_with(manifest, fixed, threads, |rec| {
        write_record(&mut w, rec)?;
        Ok(())
    })?;
    w.flush()?;
    Ok(())
}

fn write_record<W: Write>(w: &mut csv::Writer<W>, rec: &TrialRecord) -> Result<()> {
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    w.write_record([
        rec.trial.to_string(),
        format_seed(rec.derived_seed),
        rec.mode.tag().to_string(),
        rec.n.to_string(),
        rec.r.to_string(),
        opt(rec.x),
        opt(rec.y),
        rec.tau.to_string(),
        u8::from(rec.censored).to_string(),
    ])?;
    Ok(())
}

/// One row of a results file, as read back for verification.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ResultRow {
    pub trial: u64,
    pub derived_seed: String,
    pub mode: Mode,
    pub n: usize,
    pub r: usize,
    pub x: Option<usize>,
    pub y: Option<usize>,
    pub tau: u64,
    pub censored: u8,
}

pub fn read_results_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Structure {
            field: "header",
            message: format!("expected {}", CSV_HEADER.join(",")),
        });
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
