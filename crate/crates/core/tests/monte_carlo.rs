use proptest::prelude::*;
use rand::Rng;

use dfa_meet::chain::{hitting_time_expectation, product_index, product_matrix, DEFAULT_PRODUCT_CAP};
use dfa_meet::mc::{
    kingman_mean, run_experiment, sample_coalescence, sample_coalescence_from, sample_kingman_reference,
    sample_meeting_independent, write_results_csv, read_results_csv, DfaPolicy, Mode, RunManifest, Starts,
};
use dfa_meet::seed::{rng_from_seed, rng_from_u64, seed_split};
use dfa_meet::stats::{ks_distance, w1_two_sample, EmpiricalDist, Exponential};
use dfa_meet::{generate_dfa, walk_matrix, Dfa};

fn full_alphabet(n: usize) -> Dfa {
    let rows: Vec<Vec<usize>> = (0..n).map(|x| (0..n).map(|c| (x + c) % n).collect()).collect();
    Dfa::from_rows(&rows).unwrap()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn full_alphabet_meeting_is_geometric() {
    let n = 20;
    let d = full_alphabet(n);
    let taus: Vec<f64> = (0..50_000)
        .map(|i| {
            let mut rng = rng_from_seed(seed_split(3, i, "uniform"));
            sample_meeting_independent(&d, 0, 7, 1 << 30, &mut rng).tau as f64
        })
        .collect();
    // Geom(1/n) on {1, 2, ...} from distinct starts: mean n.
    let (m, se) = mean_and_se(&taus);
    assert!((m - n as f64).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn two_walkers_coalesce_like_the_product_chain_predicts() {
    let d = full_alphabet(2);
    let prod = product_matrix(&walk_matrix(&d), DEFAULT_PRODUCT_CAP).unwrap();
    let mut start = vec![0.0; 4];
    start[product_index(2, 0, 1)] = 1.0;
    let diag = [product_index(2, 0, 0), product_index(2, 1, 1)];
    let exact = hitting_time_expectation(&prod, &start, &diag).unwrap();
    assert!((exact - 2.0).abs() < 1e-12);
    let taus: Vec<f64> = (0..100_000)
        .map(|i| sample_coalescence(&d, 1 << 20, &mut rng_from_seed(seed_split(4, i, "pair"))).tau as f64)
        .collect();
    let (m, se) = mean_and_se(&taus);
    assert!((m - exact).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn two_walker_coalescence_is_meeting() {
    let d = generate_dfa(100, 2, 17).unwrap();
    let (x, y) = (3, 58);
    let trials = 10_000;
    let mut meet = Vec::with_capacity(trials);
    let mut coal = Vec::with_capacity(trials);
    for i in 0..trials as u64 {
        let seed = seed_split(5, i, "paired");
        meet.push(sample_meeting_independent(&d, x, y, 1 << 24, &mut rng_from_seed(seed)).tau as f64);
        coal.push(sample_coalescence_from(&d, &[x, y], 1 << 24, &mut rng_from_seed(seed)).tau as f64);
    }
    let meet = EmpiricalDist::from_samples(meet).unwrap();
    let coal = EmpiricalDist::from_samples(coal).unwrap();
    assert!(ks_distance(&coal, &meet).unwrap() <= 0.02);
}

#[test]
fn kingman_reference_mean() {
    let n = 1000;
    let mut rng = rng_from_u64(21);
    let draws: Vec<f64> = (0..1_000_000).map(|_| sample_kingman_reference(n, &mut rng)).collect();
    let (m, se) = mean_and_se(&draws);
    assert!((kingman_mean(n) - 1.998).abs() < 1e-12);
    assert!((m - kingman_mean(n)).abs() <= 4.0 * se, "{m} ± {se}");
}

fn csv_bytes(m: &RunManifest, fixed: Option<&Dfa>, threads: usize) -> Vec<u8> {
    let mut out = Vec::new();
    write_results_csv(m, fixed, Some(threads), &mut out).unwrap();
    out
}

#[test]
fn output_is_independent_of_worker_count() {
    for mode in Mode::ALL {
        let m = RunManifest::new(77, mode, 60, 3, 300);
        let one = csv_bytes(&m, None, 1);
        assert_eq!(one, csv_bytes(&m, None, 4), "{mode}");
        assert_eq!(one, csv_bytes(&m, None, 1), "{mode}");
    }
}

#[test]
fn empty_run_has_a_header() {
    let m = RunManifest::new(1, Mode::Coupled, 10, 2, 0);
    let text = String::from_utf8(csv_bytes(&m, None, 1)).unwrap();
    assert_eq!(text, "trial,derived_seed,mode,n,r,x,y,tau,censored\n");
}

#[test]
fn results_round_trip_through_csv() {
    let d = generate_dfa(30, 2, 8).unwrap();
    let m = RunManifest {
        dfa_policy: DfaPolicy::Fixed,
        starts: Starts::Fixed { x: 1, y: 2 },
        ..RunManifest::new(3, Mode::Independent, 30, 2, 50)
    };
    let rows = read_results_csv(&csv_bytes(&m, Some(&d), 2)[..]).unwrap();
    let recs = run_experiment(&m, Some(&d), Some(1)).unwrap();
    assert_eq!(rows.len(), 50);
    for (row, rec) in rows.iter().zip(&recs) {
        assert_eq!((row.trial, row.tau, row.x, row.y), (rec.trial, rec.tau, Some(1), Some(2)));
        assert_eq!(row.derived_seed, dfa_meet::seed::format_seed(rec.derived_seed));
    }
}

#[test]
fn equal_starts_agree_in_both_pair_modes() {
    let d = generate_dfa(40, 2, 1).unwrap();
    for mode in [Mode::Independent, Mode::Coupled] {
        let m = RunManifest {
            dfa_policy: DfaPolicy::Fixed,
            starts: Starts::Fixed { x: 5, y: 5 },
            ..RunManifest::new(9, mode, 40, 2, 20)
        };
        assert!(run_experiment(&m, Some(&d), Some(1)).unwrap().iter().all(|r| r.tau == 0));
    }
}

#[test]
fn fresh_meeting_times_scale_like_n() {
    let m = RunManifest::new(12, Mode::Independent, 300, 2, 3000);
    let recs = run_experiment(&m, None, None).unwrap();
    assert!(recs.iter().all(|r| !r.censored && r.x != r.y));
    let e = EmpiricalDist::from_stopping_times(recs.iter().map(|r| (r.tau, r.censored)), 300.0).unwrap();
    assert!((0.85..=1.15).contains(&e.mean()), "{}", e.mean());
    assert!(ks_distance(&e, &Exponential { rate: 1.0 }).unwrap() < 0.05);
}

#[test]
fn exponential_draws_pass_dkw() {
    let mut rng = rng_from_u64(31);
    let x = Exponential { rate: 1.0 };
    let e = EmpiricalDist::from_samples((0..10_000).map(|_| x.quantile(rng.random())).collect()).unwrap();
    assert!(ks_distance(&e, &x).unwrap() <= 0.02);
}

proptest! {
    #[test]
    fn replay_reproduces_any_trial(master in any::<u64>(), index in 0u64..10_000, mode_ix in 0usize..4) {
        let mode = Mode::ALL[mode_ix];
        let m = RunManifest::new(master, mode, 25, 2, index + 1);
        let a = dfa_meet::mc::run_trial(&m, None, index).unwrap();
        let b = dfa_meet::mc::run_trial(&m, None, index).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sample_statistics_ignore_order(mut v in prop::collection::vec(0.0f64..100.0, 1..60), seed in any::<u64>()) {
        let a = EmpiricalDist::from_samples(v.clone()).unwrap();
        let mut rng = rng_from_u64(seed);
        for i in (1..v.len()).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        let b = EmpiricalDist::from_samples(v).unwrap();
        let x = Exponential { rate: 0.1 };
        prop_assert_eq!(ks_distance(&a, &x).unwrap(), ks_distance(&b, &x).unwrap());
        prop_assert_eq!(w1_two_sample(&a, &b).unwrap(), 0.0);
        prop_assert_eq!(a.mean(), b.mean());
    }

    #[test]
    fn w1_triangle_inequality(
        a in prop::collection::vec(-50.0f64..50.0, 1..40),
        b in prop::collection::vec(-50.0f64..50.0, 1..40),
        c in prop::collection::vec(-50.0f64..50.0, 1..40),
    ) {
        let (a, b, c) = (
            EmpiricalDist::from_samples(a).unwrap(),
            EmpiricalDist::from_samples(b).unwrap(),
            EmpiricalDist::from_samples(c).unwrap(),
        );
        let ab = w1_two_sample(&a, &b).unwrap();
        let bc = w1_two_sample(&b, &c).unwrap();
        let ac = w1_two_sample(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab - w1_two_sample(&b, &a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ks_stays_in_unit_interval(v in prop::collection::vec(0.0f64..10.0, 1..80), rate in 0.01f64..10.0) {
        let e = EmpiricalDist::from_samples(v).unwrap();
        let d = ks_distance(&e, &Exponential { rate }).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_distance(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn sync_images_never_grow(seed in any::<u64>(), n in 2usize..80, r in 2usize..5) {
        let r = r.min(n);
        let d = generate_dfa(n, r, seed).unwrap();
        let mut image = dfa_meet::mc::ImageSet::full(n);
        let mut rng = rng_from_u64(seed ^ 1);
        let mut prev = image.len();
        for _ in 0..200 {
            image.apply(&d, rng.random_range(0..r));
            prop_assert!(image.len() <= prev && !image.is_empty());
            prev = image.len();
        }
    }
}
