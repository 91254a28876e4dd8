use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{ChainSpec, DIRECT_SOLVE_LIMIT};
use crate::error::{Error, Result};

const ITERATIVE_TOLERANCE: f64 = 1e-13;
const ITERATIVE_MAX_SWEEPS: usize = 10_000_000;

/// Expected hitting time of `target` from every state, by first-step analysis:
/// `h = 0` on the target and `(I − P)h = 1` elsewhere. States from which the
/// target is not hit almost surely get `f64::INFINITY`.
pub fn hitting_times(c: &ChainSpec, target: &[usize]) -> Result<Vec<f64>> {
    let n = c.size();
    let mut in_target = vec![false; n];
    for &t in target {
        if t >= n {
            return Err(Error::InvalidParameters(format!("target state {t} out of range")));
        }
        in_target[t] = true;
    }
    let reverse = reverse_adjacency(c);

    // States that can reach the target at all.
    let reaches_target = backward_closure(&reverse, target.iter().copied(), |_| true);
    // States that can reach a dead end (a state unable to reach the target)
    // before touching the target: their hitting time is infinite with
    // positive probability.
    let dead: Vec<usize> = (0..n).filter(|&x| !reaches_target[x]).collect();
    let at_risk = backward_closure(&reverse, dead.into_iter(), |x| !in_target[x]);

    let solvable: Vec<usize> = (0..n).filter(|&x| !in_target[x] && !at_risk[x]).collect();
    let mut h = vec![f64::INFINITY; n];
    for &t in target {
        h[t] = 0.0;
    }
    if solvable.is_empty() {
        return Ok(h);
    }
    let values = if solvable.len() <= DIRECT_SOLVE_LIMIT {
        solve_direct(c, &solvable)?
    } else {
        solve_iterative(c, &solvable)?
    };
    for (&x, v) in solvable.iter().zip(values) {
        h[x] = v;
    }
    Ok(h)
}

/// `E_start[τ_target]`, with `τ = 0` for mass starting inside the target.
pub fn hitting_time_expectation(c: &ChainSpec, start: &[f64], target: &[usize]) -> Result<f64> {
    if start.len() != c.size() {
        return Err(Error::DimensionMismatch {
            expected: c.size(),
            got: start.len(),
        });
    }
    let h = hitting_times(c, target)?;
    let mut total = 0.0;
    for (&m, &hx) in start.iter().zip(&h) {
        if m > 0.0 {
            if !hx.is_finite() {
                return Err(Error::UnreachableTarget);
            }
            total += m * hx;
        }
    }
    Ok(total)
}

fn reverse_adjacency(c: &ChainSpec) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); c.size()];
    for i in 0..c.size() {
        for (j, _) in c.kernel().row_entries(i) {
            rev[j].push(i);
        }
    }
    rev
}

/// Marks every state with a path into `seeds` whose intermediate states all
/// satisfy `passable`.
fn backward_closure(
    reverse: &[Vec<usize>],
    seeds: impl Iterator<Item = usize>,
    passable: impl Fn(usize) -> bool,
) -> Vec<bool> {
    let mut seen = vec![false; reverse.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(y) = queue.pop_front() {
        for &x in &reverse[y] {
            if !seen[x] && passable(x) {
                seen[x] = true;
                queue.push_back(x);
            }
        }
    }
    seen
}

fn solve_direct(c: &ChainSpec, states: &[usize]) -> Result<Vec<f64>> {
    let m = states.len();
    let mut pos = vec![usize::MAX; c.size()];
    for (k, &s) in states.iter().enumerate() {
        pos[s] = k;
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    for (k, &s) in states.iter().enumerate() {
        for (j, p) in c.kernel().row_entries(s) {
            if pos[j] != usize::MAX {
                a[(k, pos[j])] -= p;
            }
        }
    }
    let b = DVector::<f64>::from_element(m, 1.0);
    let sol = a.lu().solve(&b).ok_or(Error::UnreachableTarget)?;
    Ok(sol.iter().copied().collect())
}

/// Gauss-Seidel sweeps for systems too large for dense LU. The iteration is
/// monotone from zero, so it converges to the minimal solution.
fn solve_iterative(c: &ChainSpec, states: &[usize]) -> Result<Vec<f64>> {
    let mut h = vec![0.0; c.size()];
    let mut delta = f64::INFINITY;
    for _ in 0..ITERATIVE_MAX_SWEEPS {
        delta = 0.0;
        for &s in states {
            let v = 1.0 + c.kernel().row_entries(s).map(|(j, p)| p * h[j]).sum::<f64>();
            delta = f64::max(delta, (v - h[s]).abs() / v);
            h[s] = v;
        }
        if delta <= ITERATIVE_TOLERANCE {
            return Ok(states.iter().map(|&s| h[s]).collect());
        }
    }
    Err(Error::NotConverged {
        what: "hitting-time Gauss-Seidel",
        iterations: ITERATIVE_MAX_SWEEPS,
        last_delta: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64, q: f64) -> ChainSpec {
        ChainSpec::from_dense(&[vec![1.0 - p, p], vec![q, 1.0 - q]]).unwrap()
    }

    #[test]
    fn start_inside_target() {
        let c = two_state(0.3, 0.6);
        assert_eq!(hitting_time_expectation(&c, &[0.0, 1.0], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn geometric_mean() {
        let c = two_state(0.5, 0.5);
        assert!((hitting_time_expectation(&c, &[1.0, 0.0], &[1]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unreachable_target() {
        let c = ChainSpec::from_dense(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            hitting_time_expectation(&c, &[1.0, 0.0], &[1]),
            Err(Error::UnreachableTarget)
        ));
    }

    #[test]
    fn leaking_to_a_trap_is_infinite() {
        // From 0 the walk hits 2 or falls into the trap 1 forever.
        let c = ChainSpec::from_dense(&[
            vec![0.0, 0.5, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let h = hitting_times(&c, &[2]).unwrap();
        assert!(h[0].is_infinite() && h[1].is_infinite() && h[2] == 0.0);
    }

    #[test]
    fn iterative_matches_direct() {
        let c = two_state(0.1, 0.4);
        let direct = solve_direct(&c, &[0]).unwrap();
        let iter = solve_iterative(&c, &[0]).unwrap();
        assert!((direct[0] - iter[0]).abs() < 1e-10);
        assert!((direct[0] - 10.0).abs() < 1e-12);
    }
}
