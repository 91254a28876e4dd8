use rand::seq::index::sample;
use rand::Rng;

use super::{ChainSpec, CsrMatrix};

/// Samples an irreducible aperiodic chain on `n` states. Each row puts random
/// weights on `2..=max_support` uniformly chosen states; draws that are
/// reducible or have no self-loop are rejected.
pub fn random_ergodic_chain<R: Rng + ?Sized>(n: usize, max_support: usize, rng: &mut R) -> ChainSpec {
    assert!(n >= 2, "need at least two states");
    let max_support = max_support.clamp(2, n);
    loop {
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|_| {
                let k = rng.random_range(2..=max_support);
                let cols = sample(rng, n, k);
                let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                cols.iter().zip(weights).map(|(j, w)| (j, w / total)).collect()
            })
            .collect();
        let Ok(chain) = ChainSpec::new(CsrMatrix::from_rows(rows)) else {
            continue;
        };
        let has_loop = (0..n).any(|i| chain.entry(i, i) > 0.0);
        if has_loop && chain.recurrent_classes().len() == 1 && chain.recurrent_classes()[0].len() == n {
            return chain;
        }
    }
}
