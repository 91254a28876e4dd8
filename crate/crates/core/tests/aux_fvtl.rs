use nalgebra::DMatrix;
use rand::Rng;

use dfa_meet::aux::{check_events, exit_measure, return_mass};
use dfa_meet::chain::{hitting_time_expectation, random_ergodic_chain, sample_ergodic_walk};
use dfa_meet::fvtl::{
    fvtl_quantities, quasi_stationary_pair, quasi_stationary_tail_check, return_series, survival_expectation,
    uniform_start_ratio,
};
use dfa_meet::seed::{rng_from_seed, rng_from_u64, seed_split};
use dfa_meet::{build_aux_chain, generate_dfa, walk_matrix, AuxChain, Dfa, LogBase, StationaryMethod};

/// `χ²` 0.999 quantile with 9 degrees of freedom.
const CHI2_999_DF9: f64 = 27.8772;

fn aux_for(d: &Dfa) -> Option<AuxChain> {
    let c = walk_matrix(d).with_stationary(StationaryMethod::Direct).ok()?;
    let pi = c.stationary().unwrap().to_vec();
    Some(build_aux_chain(&c, &pi).unwrap())
}

fn aux_seeded(n: usize, r: usize, master: u64, index: u64) -> AuxChain {
    let mut rng = rng_from_seed(seed_split(master, index, "aux"));
    let draw = sample_ergodic_walk(n, r, StationaryMethod::Auto, &mut rng).unwrap();
    let pi = draw.chain.stationary().unwrap().to_vec();
    build_aux_chain(&draw.chain, &pi).unwrap()
}

#[test]
fn small_instance_is_stationary() {
    let a = aux_for(&generate_dfa(8, 2, 7).unwrap()).expect("seed 7 has a single recurrent class");
    assert!(a.stationarity_residual() <= 1e-10);
    assert_eq!(a.entry(a.delta(), a.delta()), 0.5);
}

#[test]
fn sojourns_at_the_diagonal_are_geometric() {
    for (seed, r) in [(3u64, 2usize), (4, 3)] {
        let a = aux_seeded(60, r, seed, 0);
        let mut rng = rng_from_u64(seed);
        let sojourns = 100_000;
        // Bins: lengths 1..=9 and "10 or more".
        let mut bins = [0u64; 10];
        for _ in 0..sojourns {
            let mut len = 1;
            while a.sample_step(a.delta(), &mut rng) == a.delta() {
                len += 1;
            }
            bins[(len - 1).min(9)] += 1;
        }
        let stay = 1.0 / r as f64;
        let chi2: f64 = (0..10)
            .map(|k| {
                let p = if k < 9 { stay.powi(k as i32) * (1.0 - stay) } else { stay.powi(9) };
                let e = p * sojourns as f64;
                (bins[k] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CHI2_999_DF9, "r={r}: chi2 = {chi2}");
    }
}

#[test]
fn finite_chain_identities() {
    let mut rng = rng_from_u64(40);
    for _ in 0..20 {
        let c = random_ergodic_chain(40, 6, &mut rng)
            .with_stationary(StationaryMethod::Direct)
            .unwrap();
        let target = rng.random_range(0..40);
        let rep = fvtl_quantities(&c, target, 100).unwrap();
        assert!(rep.fundamental_identity_gap() <= 1e-8);
        let t_max = (10.0 / rep.lambda_star).ceil() as usize;
        assert!(quasi_stationary_tail_check(&c, target, &rep.mu_star, rep.lambda_star, t_max) <= 1e-8);
        let from_star = hitting_time_expectation(&c, &rep.mu_star, &[target]).unwrap();
        assert!((rep.lambda_star * from_star - 1.0).abs() <= 1e-8);
        assert!(rep.perron_unique);
    }
}

fn dense_return_mass(a: &AuxChain, horizon: usize) -> f64 {
    let spec = a.to_chain_spec(200).unwrap();
    let k = spec.size();
    let p = DMatrix::from_fn(k, k, |i, j| spec.entry(i, j));
    let d = a.delta();
    let mut power = DMatrix::<f64>::identity(k, k);
    let mut total = 0.0;
    for _ in 0..=horizon {
        total += power[(d, d)];
        power = &power * &p;
    }
    total
}

#[test]
fn return_mass_matches_dense_powers() {
    for n in [4usize, 7, 12] {
        let rows: Vec<Vec<usize>> = (0..n).map(|x| (0..n).map(|c| (x + c) % n).collect()).collect();
        let a = aux_for(&Dfa::from_rows(&rows).unwrap()).unwrap();
        for horizon in [0usize, 1, 5, 40] {
            let fast = return_mass(&a, horizon).unwrap().return_mass;
            assert!((fast - dense_return_mass(&a, horizon)).abs() < 1e-12, "n={n}, T={horizon}");
        }
    }
    for s in 0..10 {
        let Some(a) = aux_for(&generate_dfa(10, 3, s).unwrap()) else { continue };
        let fast = return_mass(&a, 60).unwrap().return_mass;
        assert!((fast - dense_return_mass(&a, 60)).abs() < 1e-11, "seed {s}");
    }
}

#[test]
fn return_mass_lower_bound() {
    for (r, s) in [(2usize, 0u64), (2, 1), (3, 2), (5, 3)] {
        let a = aux_seeded(200, r, 9, s);
        let horizon = LogBase::Natural.ceil_log_pow(200, 5);
        let rm = return_mass(&a, horizon).unwrap().return_mass;
        assert!(rm >= r as f64 / (r as f64 - 1.0) - 0.01, "r={r}: R={rm}");
    }
}

#[test]
fn uniform_start_ratio_at_n_300() {
    let seeds = 10;
    let grid: Vec<usize> = (0..=900).collect();
    let mut good = 0;
    for s in 0..seeds {
        let a = aux_seeded(300, 2, 5, s);
        let ratio = uniform_start_ratio(&a, a.delta(), a.pi_tilde(), &grid);
        assert!(ratio >= 1.0);
        good += usize::from(ratio <= 1.1);
    }
    assert!(good >= 8, "{good}/{seeds} seeds with sup-ratio ≤ 1.1");
}

#[test]
fn fundamental_rate_predicts_quasi_stationary_rate() {
    // Rate μ(Δ)/Z(Δ,Δ) against the quasi-stationary rate and against the mean
    // hitting time from an independent survival sum.
    for s in 0..3 {
        let a = aux_seeded(300, 2, 6, s);
        let mu = a.pi_tilde_delta();
        let series = return_series(&a, a.delta(), mu, 0).unwrap();
        let rate = mu / series.fundamental;
        let qs = quasi_stationary_pair(&a, a.delta()).unwrap();
        let mean = survival_expectation(&a, a.delta(), a.pi_tilde(), qs.lambda_star).unwrap();
        assert!((rate * mean - 1.0).abs() <= 0.05, "seed {s}: {}", rate * mean);
        assert!((rate / qs.lambda_star - 1.0).abs() <= 0.05, "seed {s}: {rate} vs {}", qs.lambda_star);
    }
}

#[test]
fn exit_measure_at_n_1000() {
    let n = 1000f64;
    for s in 0..5 {
        let a = aux_seeded(1000, 2, 8, s);
        let mu_plus = exit_measure(&a);
        assert!((mu_plus.total() - 1.0).abs() < 1e-12);
        assert!(mu_plus.max() <= n.ln().powi(17) / n);
    }
}

#[test]
fn events_on_the_full_alphabet() {
    let n = 6;
    let rows: Vec<Vec<usize>> = (0..n).map(|x| (0..n).map(|c| (x + c) % n).collect()).collect();
    let a = aux_for(&Dfa::from_rows(&rows).unwrap()).unwrap();
    assert!((a.pi_tilde_delta() * n as f64 - 1.0).abs() < 1e-14);
    let slack = (1.0 - n as f64 / (n as f64 - 1.0)).abs() + 1e-9;
    let report = check_events(&a, slack, LogBase::Natural, &mut rng_from_u64(0)).unwrap();
    assert!(report.a3_pi_tilde_delta.holds);
    assert!(report.a4_exact);
}
