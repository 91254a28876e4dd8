use rayon::prelude::*;
use serde::Serialize;

use super::ChainSpec;
use crate::error::{Error, Result};
use crate::operator::TransitionOperator;

/// `1/(2e)`: the total-variation level that defines `t_mix`.
pub const MIXING_THRESHOLD: f64 = 1.0 / (2.0 * std::f64::consts::E);

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must have equal length");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingProfile {
    /// `d_tv[t] = max_x ‖Pᵗ(x,·) − π‖_TV` for `t = 0..=t_cap`.
    pub d_tv: Vec<f64>,
    /// First `t` with `d_tv[t] ≤ 1/(2e)`; `None` when the cap was exhausted.
    pub t_mix: Option<usize>,
}

impl MixingProfile {
    pub fn mixed_by_cap(&self) -> bool {
        self.t_mix.is_some()
    }
}

/// Worst-start total-variation profile, evolving every start state in parallel.
pub fn mixing_profile(c: &ChainSpec, t_cap: usize) -> Result<MixingProfile> {
    let pi = c.stationary().ok_or(Error::InvalidParameters(
        "mixing profile requires a solved stationary distribution".into(),
    ))?;
    let n = c.size();
    let d_tv = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut dist = vec![0.0; n];
            dist[x] = 1.0;
            let mut next = vec![0.0; n];
            let mut series = Vec::with_capacity(t_cap + 1);
            series.push(tv_distance(&dist, pi));
            for _ in 0..t_cap {
                c.push_forward(&dist, &mut next);
                std::mem::swap(&mut dist, &mut next);
                series.push(tv_distance(&dist, pi));
            }
            series
        })
        // Elementwise max is order independent, so the result does not
        // depend on how rayon splits the starts.
        .reduce(
            || vec![0.0; t_cap + 1],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        );
    let t_mix = d_tv.iter().position(|&d| d <= MIXING_THRESHOLD);
    Ok(MixingProfile { d_tv, t_mix })
}
