use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use dfa_meet::aux::{check_events, exit_measure, EventReport};
use dfa_meet::chain::{measure_pi_extremes, mixing_profile, PiExtremes};
use dfa_meet::dfa::DfaDiagnostics;
use dfa_meet::fvtl::{aux_fvtl_quantities, FvtlReport};
use dfa_meet::mc::{default_cap, read_results_csv, sample_kingman_reference, write_results_csv, DfaPolicy, Mode, ResultRow, RunManifest, Starts};
use dfa_meet::seed::{rng_from_seed, rng_from_u64, seed_split};
use dfa_meet::stats::{exponential_fit, geometric_mle, geometric_tail_fit, kingman_fit, EmpiricalDist, FitReport};
use dfa_meet::{build_aux_chain, walk_matrix, ChainSpec, Dfa, LogBase, StationaryMethod};

use crate::output::{create, emit_json, resolve};
use crate::Global;

/// Size of the Kingman reference sample used by `verify` and the recipes.
pub const KINGMAN_DRAWS: usize = 100_000;

pub fn read_dfa(path: &Path) -> Result<Dfa> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Dfa::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn gen(g: &Global, n: usize, r: usize, out: &Path) -> Result<ExitCode> {
    let d = Dfa::generate(n, r, &mut rng_from_u64(g.seed))?;
    let path = resolve(&g.out_dir, out);
    let mut w = create(&path)?;
    std::io::Write::write_all(&mut w, d.to_json().as_bytes())?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(ExitCode::SUCCESS)
}

fn solved_walk(d: &Dfa) -> Result<ChainSpec> {
    walk_matrix(d)
        .with_stationary(StationaryMethod::Auto)
        .context("the walk needs a single recurrent class")
}

#[derive(Serialize)]
struct ExactReport {
    n: usize,
    r: usize,
    recurrent_class_size: usize,
    pi: Vec<f64>,
    pi_min: f64,
    pi_max: f64,
    extremes: PiExtremes,
    t_mix: Option<usize>,
    d_tv_series: Vec<f64>,
    diagnostics: DfaDiagnostics,
}

pub fn exact(g: &Global, dfa: &Path, t_cap: usize, base: LogBase, out: Option<&Path>) -> Result<ExitCode> {
    let d = read_dfa(dfa)?;
    let c = solved_walk(&d)?;
    let pi = c.stationary().unwrap().to_vec();
    let extremes = measure_pi_extremes(&pi, base);
    let profile = mixing_profile(&c, t_cap)?;
    let report = ExactReport {
        n: d.n(),
        r: d.r(),
        recurrent_class_size: c.recurrent_classes()[0].len(),
        pi_min: extremes.min_on_support,
        pi_max: extremes.max,
        pi,
        extremes,
        t_mix: profile.t_mix,
        d_tv_series: profile.d_tv,
        diagnostics: d.diagnostics(),
    };
    emit_json(&report, out.map(|p| resolve(&g.out_dir, p)).as_deref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct FvtlOutput {
    report: FvtlReport,
    /// `μ(Δ)/Z(Δ,Δ)`: the rate implied by the fundamental matrix.
    fundamental_rate: f64,
    exit_measure_max: f64,
    events: EventReport,
    all_events_hold: bool,
}

pub fn parse_horizon(text: &str, n: usize, base: LogBase) -> Result<usize> {
    if text == "auto" {
        Ok(base.ceil_log_pow(n, 5))
    } else {
        text.parse().with_context(|| format!("--T expects \"auto\" or an integer, got {text:?}"))
    }
}

pub fn fvtl(g: &Global, dfa: &Path, horizon: &str, eps: f64, base: LogBase, out: Option<&Path>) -> Result<ExitCode> {
    let d = read_dfa(dfa)?;
    let c = solved_walk(&d)?;
    let pi = c.stationary().unwrap().to_vec();
    let a = build_aux_chain(&c, &pi)?;
    let horizon = parse_horizon(horizon, d.n(), base)?;
    let report = aux_fvtl_quantities(&a, horizon)?;
    let events = check_events(&a, eps, base, &mut rng_from_u64(g.seed))?;
    let result = FvtlOutput {
        fundamental_rate: report.mu_target / report.fundamental,
        exit_measure_max: exit_measure(&a).max(),
        all_events_hold: events.all_hold(),
        report,
        events,
    };
    emit_json(&result, out.map(|p| resolve(&g.out_dir, p)).as_deref())?;
    Ok(ExitCode::SUCCESS)
}

pub struct SimulateArgs {
    pub mode: Mode,
    pub n: usize,
    pub r: usize,
    pub trials: u64,
    pub cap: Option<u64>,
    pub fixed_dfa: Option<PathBuf>,
    pub starts: Option<String>,
    pub out: PathBuf,
    pub manifest: Option<PathBuf>,
}

fn parse_starts(text: &str) -> Result<Starts> {
    let (x, y) = text
        .split_once(',')
        .with_context(|| format!("--starts expects \"x,y\", got {text:?}"))?;
    Ok(Starts::Fixed {
        x: x.trim().parse().context("start x")?,
        y: y.trim().parse().context("start y")?,
    })
}

pub fn simulate(g: &Global, a: SimulateArgs) -> Result<ExitCode> {
    let fixed = a.fixed_dfa.as_deref().map(read_dfa).transpose()?;
    let mut m = RunManifest::new(g.seed, a.mode, a.n, a.r, a.trials);
    m.cap = a.cap.unwrap_or_else(|| default_cap(a.n));
    if fixed.is_some() {
        m.dfa_policy = DfaPolicy::Fixed;
    }
    if let Some(s) = &a.starts {
        if !a.mode.is_pairwise() {
            bail!("--starts only applies to the independent and coupled modes");
        }
        m.starts = parse_starts(s)?;
    }
    let path = resolve(&g.out_dir, &a.out);
    write_results_csv(&m, fixed.as_ref(), g.threads, create(&path)?)?;
    if let Some(p) = &a.manifest {
        emit_json(&m, Some(&resolve(&g.out_dir, p)))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub against: String,
    pub mode: Mode,
    pub n: usize,
    pub r: usize,
    pub trials: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    /// `tau` for geometric fits, `tau/n` otherwise.
    pub scale: &'static str,
    pub fit: FitReport,
}

pub fn kingman_reference(seed: u64, n: usize) -> Result<EmpiricalDist> {
    let mut rng = rng_from_seed(seed_split(seed, 0, "kingman"));
    Ok(EmpiricalDist::from_samples(
        (0..KINGMAN_DRAWS).map(|_| sample_kingman_reference(n, &mut rng)).collect(),
    )?)
}

/// Fits `rows` against a reference given as `geom:auto`, `geom:<rate>`,
/// `exp:<rate>` or `kingman`. Censored trials are counted, never fitted.
pub fn verify_rows(rows: &[ResultRow], against: &str, seed: u64) -> Result<VerifyReport> {
    let Some(first) = rows.first() else {
        bail!("results file has no trials");
    };
    if rows.iter().any(|r| r.n != first.n || r.r != first.r || r.mode != first.mode) {
        bail!("results mix several (mode, n, r) settings");
    }
    let n = first.n;
    let pairs = || rows.iter().map(|r| (r.tau, r.censored != 0));
    let (kind, param) = against.split_once(':').unwrap_or((against, ""));
    let (scale, fit, e) = match kind {
        "geom" => {
            let e = EmpiricalDist::from_stopping_times(pairs(), 1.0)?;
            let lambda = if param == "auto" { geometric_mle(&e) } else { param.parse().context("geometric rate")? };
            ("tau", geometric_tail_fit(&e, lambda)?, e)
        }
        "exp" => {
            let e = EmpiricalDist::from_stopping_times(pairs(), n as f64)?;
            let rate = param.parse().context("exponential rate")?;
            ("tau/n", exponential_fit(&e, rate)?, e)
        }
        "kingman" if param.is_empty() => {
            let e = EmpiricalDist::from_stopping_times(pairs(), n as f64)?;
            ("tau/n", kingman_fit(&e, &kingman_reference(seed, n)?)?, e)
        }
        _ => bail!("unknown reference {against:?}; expected geom:auto, geom:<rate>, exp:<rate> or kingman"),
    };
    Ok(VerifyReport {
        against: against.to_string(),
        mode: first.mode,
        n,
        r: first.r,
        trials: rows.len(),
        censored: e.censored_count(),
        censored_fraction: e.censored_fraction(),
        scale,
        fit,
    })
}

pub fn verify(g: &Global, results: &Path, against: &str, report: Option<&Path>) -> Result<ExitCode> {
    let file = fs::File::open(results).with_context(|| format!("opening {}", results.display()))?;
    let rows = read_results_csv(file)?;
    let rep = verify_rows(&rows, against, g.seed)?;
    emit_json(&rep, report.map(|p| resolve(&g.out_dir, p)).as_deref())?;
    Ok(ExitCode::SUCCESS)
}
