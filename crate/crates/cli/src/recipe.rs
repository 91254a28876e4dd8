//! Named end-to-end runs. Each writes its artifacts under
//! `<out-dir>/<recipe>/` and fails only on the bounds it asserts.

use std::path::Path;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use rand::Rng;
use serde::Serialize;

use dfa_meet::aux::{check_events, EventReport};
use dfa_meet::chain::{hitting_time_expectation, random_ergodic_chain, sample_ergodic_walk};
use dfa_meet::fvtl::{fvtl_quantities, quasi_stationary_tail_check};
use dfa_meet::mc::{read_results_csv, write_results_csv, Mode, RunManifest};
use dfa_meet::seed::{rng_from_seed, seed_split};
use dfa_meet::stats::{histogram, EmpiricalDist, HISTOGRAM_UPPER, HISTOGRAM_WIDTH};
use dfa_meet::{build_aux_chain, ChainSpec, LogBase, StationaryMethod};

use crate::commands::{verify_rows, VerifyReport};
use crate::output::{create, emit_json, write_histogram};
use crate::Global;

pub const RECIPES: [&str; 6] = [
    "fig1-independent",
    "fig1-coupled",
    "fig2-coalescing",
    "fig2-sync",
    "thm-fvtl-suite",
    "events-a1-a5",
];

#[derive(Debug, Args)]
pub struct RecipeArgs {
    /// One of: fig1-independent, fig1-coupled, fig2-coalescing, fig2-sync,
    /// thm-fvtl-suite, events-a1-a5.
    pub name: String,
    /// Number of vertices (default 1000; 300 for events-a1-a5).
    #[arg(long)]
    pub n: Option<usize>,
    /// Alphabet sizes to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 20])]
    pub r: Vec<usize>,
    /// Trials per alphabet size (default 10000 for fig1, 1000 for fig2).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Random DFAs per alphabet size in events-a1-a5.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.15)]
    pub eps: f64,
    /// Chains in thm-fvtl-suite.
    #[arg(long, default_value_t = 50)]
    pub chains: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Assertion {
    name: String,
    value: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    pass: bool,
}

fn check(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Assertion {
    let pass = lower.map_or(true, |l| value >= l) && upper.map_or(true, |u| value <= u);
    Assertion { name: name.into(), value, lower, upper, pass }
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    recipe: String,
    master_seed: u64,
    runs: Vec<T>,
    assertions: Vec<Assertion>,
    pass: bool,
}

fn finish<T: Serialize>(dir: &Path, recipe: &str, seed: u64, runs: Vec<T>, assertions: Vec<Assertion>) -> Result<ExitCode> {
    for a in &assertions {
        println!("{} {}: {:.6}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.value);
    }
    let pass = assertions.iter().all(|a| a.pass);
    let summary = Summary { recipe: recipe.into(), master_seed: seed, runs, assertions, pass };
    emit_json(&summary, Some(&dir.join("summary.json")))?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

pub fn run(g: &Global, args: &RecipeArgs) -> Result<ExitCode> {
    if !RECIPES.contains(&args.name.as_str()) {
        eprintln!("error: unknown recipe {:?}", args.name);
        eprintln!("available recipes: {}", RECIPES.join(", "));
        return Ok(ExitCode::from(2));
    }
    let dir = g.out_dir.join(&args.name);
    match args.name.as_str() {
        "fig1-independent" => simulation(g, args, &dir, Mode::Independent),
        "fig1-coupled" => simulation(g, args, &dir, Mode::Coupled),
        "fig2-coalescing" => simulation(g, args, &dir, Mode::Coalescing),
        "fig2-sync" => simulation(g, args, &dir, Mode::Sync),
        "thm-fvtl-suite" => fvtl_suite(g, args, &dir),
        "events-a1-a5" => events(g, args, &dir),
        _ => unreachable!(),
    }
}

#[derive(Serialize)]
struct SimulationRun {
    r: usize,
    manifest: RunManifest,
    verify: VerifyReport,
}

fn simulation(g: &Global, args: &RecipeArgs, dir: &Path, mode: Mode) -> Result<ExitCode> {
    let n = args.n.unwrap_or(1000);
    let trials = args.trials.unwrap_or(if mode.is_pairwise() { 10_000 } else { 1000 });
    let mut runs = Vec::new();
    let mut assertions = Vec::new();
    for &r in &args.r {
        let m = RunManifest::new(g.seed, mode, n, r, trials);
        emit_json(&m, Some(&dir.join(format!("manifest-r{r}.json"))))?;
        let results = dir.join(format!("results-r{r}.csv"));
        write_results_csv(&m, None, g.threads, create(&results)?)?;
        let rows = read_results_csv(std::fs::File::open(&results)?)?;

        let against = match mode {
            Mode::Independent | Mode::Coupled => "exp:1",
            Mode::Coalescing | Mode::Sync => "kingman",
        };
        let rep = verify_rows(&rows, against, g.seed)?;
        emit_json(&rep, Some(&dir.join(format!("verify-r{r}.json"))))?;
        let scaled = EmpiricalDist::from_stopping_times(rows.iter().map(|t| (t.tau, t.censored != 0)), n as f64)?;
        write_histogram(
            &dir.join(format!("plot-r{r}.csv")),
            &histogram(scaled.values(), HISTOGRAM_WIDTH, HISTOGRAM_UPPER),
        )?;

        let fit = &rep.fit;
        let tag = |what: &str| format!("r={r} {what}");
        match mode {
            Mode::Independent => {
                assertions.push(check(&tag("mean tau/n"), fit.mean, Some(0.9), Some(1.1)));
                assertions.push(check(&tag("KS tau/n vs Exp(1)"), fit.ks_distance, None, Some(0.03)));
            }
            Mode::Coupled => {
                assertions.push(check(&tag("W1 tau/n vs Exp(1)"), fit.w1_distance, None, Some(0.1)));
            }
            Mode::Coalescing => {
                assertions.push(check(&tag("mean tau/n"), fit.mean, Some(1.8), Some(2.2)));
                assertions.push(check(&tag("W1 tau/n vs Kingman"), fit.w1_distance, None, Some(0.1)));
            }
            Mode::Sync => {
                // The limit law here is conjectural: report only.
                println!(
                    "INFO r={r} mean tau/n = {:.4}, censoring rate = {:.4}, W1 vs Kingman = {:.4}",
                    fit.mean, rep.censored_fraction, fit.w1_distance
                );
            }
        }
        runs.push(SimulationRun { r, manifest: m, verify: rep });
    }
    finish(dir, &args.name, g.seed, runs, assertions)
}

#[derive(Serialize)]
struct SuiteRun {
    states: usize,
    target: usize,
    identity_gap: f64,
    tail_deviation: f64,
    star_deviation: f64,
}

fn suite_entry(c: &ChainSpec, target: usize) -> Result<SuiteRun> {
    let rep = fvtl_quantities(c, target, 0)?;
    let t_max = (10.0 / rep.lambda_star).ceil() as usize;
    let from_star = hitting_time_expectation(c, &rep.mu_star, &[target])?;
    Ok(SuiteRun {
        states: c.size(),
        target,
        identity_gap: rep.fundamental_identity_gap(),
        tail_deviation: quasi_stationary_tail_check(c, target, &rep.mu_star, rep.lambda_star, t_max),
        star_deviation: (rep.lambda_star * from_star - 1.0).abs(),
    })
}

fn fvtl_suite(g: &Global, args: &RecipeArgs, dir: &Path) -> Result<ExitCode> {
    let states = args.n.unwrap_or(40);
    let mut rng = rng_from_seed(seed_split(g.seed, 0, "fvtl-suite"));
    let mut runs = Vec::new();
    for _ in 0..args.chains {
        let c = random_ergodic_chain(states, 6, &mut rng).with_stationary(StationaryMethod::Direct)?;
        let target = rng.random_range(0..states);
        runs.push(suite_entry(&c, target)?);
    }
    for p in [0.05, 0.3, 0.7, 1.0] {
        for q in [0.1, 0.5, 0.95] {
            let c = ChainSpec::from_dense(&[vec![1.0 - p, p], vec![q, 1.0 - q]])?
                .with_stationary(StationaryMethod::Direct)?;
            runs.push(suite_entry(&c, 1)?);
        }
    }
    let worst = |f: fn(&SuiteRun) -> f64| runs.iter().map(f).fold(0.0, f64::max);
    let assertions = vec![
        check("max |E_mu[tau] - Z/mu|", worst(|s| s.identity_gap), None, Some(1e-8)),
        check("max quasi-stationary tail deviation", worst(|s| s.tail_deviation), None, Some(1e-8)),
        check("max |lambda* E_mu*[tau] - 1|", worst(|s| s.star_deviation), None, Some(1e-8)),
    ];
    finish(dir, &args.name, g.seed, runs, assertions)
}

#[derive(Serialize)]
struct EventsRun {
    r: usize,
    seed_index: u64,
    resamples: u64,
    events: EventReport,
}

fn events(g: &Global, args: &RecipeArgs, dir: &Path) -> Result<ExitCode> {
    let n = args.n.unwrap_or(300);
    let mut runs = Vec::new();
    let mut assertions = Vec::new();
    for &r in &args.r {
        let mut a3 = 0;
        for s in 0..args.seeds {
            let mut rng = rng_from_seed(seed_split(g.seed, s, &format!("events-r{r}")));
            let draw = sample_ergodic_walk(n, r, StationaryMethod::Auto, &mut rng)?;
            let pi = draw.chain.stationary().unwrap().to_vec();
            let aux = build_aux_chain(&draw.chain, &pi)?;
            let events = check_events(&aux, args.eps, LogBase::Natural, &mut rng)?;
            a3 += usize::from(events.a3_pi_tilde_delta.holds);
            println!(
                "INFO r={r} seed {s}: A1 {} A2 {} A3 {} (n*pi(D) = {:.4}) A4 {} (tv = {:.2e}) A5 {} (R = {:.3})",
                events.a1_min_pi_tilde.holds,
                events.a2_max_pi_tilde.holds,
                events.a3_pi_tilde_delta.holds,
                events.a3_pi_tilde_delta.value,
                events.a4_mixing.holds,
                events.a4_mixing.value,
                events.a5_returns.holds,
                events.a5_returns.value
            );
            runs.push(EventsRun { r, seed_index: s, resamples: draw.resamples, events });
        }
        let frac = a3 as f64 / args.seeds.max(1) as f64;
        assertions.push(check(&format!("r={r} fraction of DFAs with A3"), frac, Some(0.9), None));
    }
    finish(dir, &args.name, g.seed, runs, assertions)
}
