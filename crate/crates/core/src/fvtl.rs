//! Hitting times of a single target state from stationarity.
//!
//! For a kernel `Q` with stationary law `μ` and a target `∂`, this module
//! computes the return mass `R = Σ_{t≤T} Qᵗ(∂,∂)`, the fundamental-matrix
//! entry `Z(∂,∂) = Σ_t (Qᵗ(∂,∂) − μ(∂))`, the mean hitting time `E_μ[τ_∂]`,
//! and the quasi-stationary pair `(μ⋆, λ⋆)` of the sub-kernel `[Q]_∂`
//! under which `τ_∂` is exactly geometric: `Q_{μ⋆}(τ_∂ > t) = (1 − λ⋆)ᵗ`.
//! The predicted geometric rate is `μ(∂)/R`.

use serde::Serialize;

use crate::aux::AuxChain;
use crate::chain::{hitting_time_expectation, ChainSpec};
use crate::error::{Error, Result};
use crate::operator::{Killed, TransitionOperator};

/// Terms `|Qᵗ(∂,∂) − μ(∂)|` below this count as converged.
pub const SERIES_TERM_TOLERANCE: f64 = 1e-14;
/// Consecutive converged terms required to stop the fundamental-matrix series.
pub const SERIES_CONSECUTIVE: usize = 50;
pub const SERIES_MAX_STEPS: usize = 50_000_000;
pub const PERRON_TOLERANCE: f64 = 1e-13;
pub const PERRON_MAX_ITERATIONS: usize = 1_000_000;
/// Two Perron vectors from different starts farther apart than this (in ℓ¹)
/// mean the dominant root is shared by several classes.
const PERRON_UNIQUENESS_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnSeries {
    /// `Σ_{t=0}^{T} Qᵗ(∂,∂)`.
    pub return_mass: f64,
    pub horizon: usize,
    /// `Σ_{t≥0} (Qᵗ(∂,∂) − μ(∂))`.
    pub fundamental: f64,
    /// Transitions actually iterated.
    pub steps: usize,
    /// True when the return mass past `steps` was completed with the
    /// stationary value `μ(∂)` per step instead of being iterated.
    pub extrapolated: bool,
    /// Final `Qᵗ(∂,∂) − μ(∂)`; nonzero only when the series stagnated above
    /// tolerance (the supplied `μ(∂)` disagrees with the kernel).
    pub stationary_offset: f64,
}

/// Iterates the row of `target` once and accumulates both the return mass up
/// to `horizon` and the fundamental-matrix entry.
///
/// Once [`SERIES_CONSECUTIVE`] consecutive terms are within
/// [`SERIES_TERM_TOLERANCE`] of `mu_target`, every remaining term of the
/// return mass equals `mu_target` to that tolerance, so the rest of the
/// horizon is added in closed form; the error is below
/// `horizon · SERIES_TERM_TOLERANCE`.
pub fn return_series<K: TransitionOperator + ?Sized>(
    k: &K,
    target: usize,
    mu_target: f64,
    horizon: usize,
) -> Result<ReturnSeries> {
    let n = k.num_states();
    let mut dist = vec![0.0; n];
    dist[target] = 1.0;
    let mut next = vec![0.0; n];

    let mut return_mass = 1.0;
    let mut fundamental = 1.0 - mu_target;
    let mut calm = 0usize;
    let mut stagnant = 0usize;
    let mut prev = 1.0;
    let mut t = 0usize;
    loop {
        let term = dist[target];
        let dev = term - mu_target;
        if dev.abs() < SERIES_TERM_TOLERANCE {
            calm += 1;
        } else {
            calm = 0;
        }
        if t > 0 && (term - prev).abs() < SERIES_TERM_TOLERANCE * 1e-2 {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        let converged = calm >= SERIES_CONSECUTIVE || stagnant >= SERIES_CONSECUTIVE;
        if converged {
            let extrapolated = t < horizon;
            if extrapolated {
                return_mass += (horizon - t) as f64 * mu_target;
            }
            return Ok(ReturnSeries {
                return_mass,
                horizon,
                fundamental,
                steps: t,
                extrapolated,
                stationary_offset: if calm >= SERIES_CONSECUTIVE { 0.0 } else { dev },
            });
        }
        if t >= SERIES_MAX_STEPS {
            return Err(Error::NotConverged {
                what: "fundamental-matrix series",
                iterations: t,
                last_delta: dev.abs(),
            });
        }
        prev = term;
        k.push_forward(&dist, &mut next);
        std::mem::swap(&mut dist, &mut next);
        t += 1;
        let term = dist[target];
        if t <= horizon {
            return_mass += term;
        }
        fundamental += term - mu_target;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiStationary {
    /// `1 −` Perron root of the sub-kernel.
    pub lambda_star: f64,
    /// Left Perron vector, a probability vector vanishing at the target.
    #[serde(skip)]
    pub mu_star: Vec<f64>,
    pub iterations: usize,
    /// False when two strictly positive starts led to different limits.
    pub unique: bool,
}

/// Dominant eigenpair of the target-deleted sub-kernel by lazy power iteration.
pub fn quasi_stationary_pair<K: TransitionOperator + ?Sized>(k: &K, target: usize) -> Result<QuasiStationary> {
    let sub = Killed::new(k, target);
    let n = k.num_states();
    let uniform: Vec<f64> = (0..n).map(|i| if i == target { 0.0 } else { 1.0 }).collect();
    let tilted: Vec<f64> = (0..n)
        .map(|i| if i == target { 0.0 } else { 1.0 + (i % 7) as f64 })
        .collect();
    let (rho, mu_star, iterations) = perron(&sub, uniform)?;
    let (_, other, _) = perron(&sub, tilted)?;
    let gap: f64 = mu_star.iter().zip(&other).map(|(a, b)| (a - b).abs()).sum();
    Ok(QuasiStationary {
        lambda_star: 1.0 - rho,
        mu_star,
        iterations,
        unique: gap <= PERRON_UNIQUENESS_GAP,
    })
}

fn perron<K: TransitionOperator + ?Sized>(sub: &K, start: Vec<f64>) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = start;
    normalize(&mut v);
    let mut next = vec![0.0; v.len()];
    let mut delta = f64::INFINITY;
    for it in 1..=PERRON_MAX_ITERATIONS {
        // Lazy step (Q + I)/2 keeps the Perron root strictly dominant even
        // when the sub-kernel is periodic.
        sub.push_forward(&v, &mut next);
        next.iter_mut().zip(&v).for_each(|(o, &x)| *o = 0.5 * (*o + x));
        let mass = normalize(&mut next);
        if mass == 0.0 {
            return Err(Error::InvalidParameters("sub-kernel annihilates every start".into()));
        }
        delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if delta <= PERRON_TOLERANCE {
            sub.push_forward(&v, &mut next);
            let rho: f64 = next.iter().sum();
            return Ok((rho, v, it));
        }
    }
    Err(Error::NotConverged {
        what: "quasi-stationary power iteration",
        iterations: PERRON_MAX_ITERATIONS,
        last_delta: delta,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    total
}

/// `E_start[τ_target] = Σ_t P_start(τ > t)`, summed until the survival decays
/// at the quasi-stationary rate and closed with the geometric tail.
pub fn survival_expectation<K: TransitionOperator + ?Sized>(
    k: &K,
    target: usize,
    start: &[f64],
    lambda_star: f64,
) -> Result<f64> {
    let sub = Killed::new(k, target);
    let mut dist = start.to_vec();
    dist[target] = 0.0;
    let mut next = vec![0.0; dist.len()];
    let rho = 1.0 - lambda_star;
    let mut survival: f64 = dist.iter().sum();
    let mut total = 0.0;
    let mut calm = 0usize;
    for _ in 0..SERIES_MAX_STEPS {
        if survival == 0.0 {
            return Ok(total);
        }
        total += survival;
        sub.push_forward(&dist, &mut next);
        std::mem::swap(&mut dist, &mut next);
        let following: f64 = dist.iter().sum();
        if ((following / survival) - rho).abs() <= 1e-13 {
            calm += 1;
        } else {
            calm = 0;
        }
        survival = following;
        if calm >= SERIES_CONSECUTIVE {
            return Ok(total + survival / lambda_star);
        }
    }
    Err(Error::NotConverged {
        what: "survival series",
        iterations: SERIES_MAX_STEPS,
        last_delta: survival,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FvtlReport {
    pub target: usize,
    /// `μ(∂)`.
    pub mu_target: f64,
    /// `R = Σ_{t=0}^{T} Qᵗ(∂,∂)`.
    #[serde(rename = "R")]
    pub return_mass: f64,
    #[serde(rename = "T_used")]
    pub horizon: usize,
    /// `Z(∂,∂)`.
    #[serde(rename = "Z_dd")]
    pub fundamental: f64,
    pub lambda_star: f64,
    #[serde(skip)]
    pub mu_star: Vec<f64>,
    pub perron_unique: bool,
    /// `μ(∂)/R`.
    pub predicted_lambda: f64,
    /// `E_μ[τ_∂]`.
    pub expected_hitting_from_mu: f64,
    pub series_steps: usize,
    pub return_mass_extrapolated: bool,
}

impl FvtlReport {
    /// `|E_μ[τ_∂] − Z(∂,∂)/μ(∂)|`.
    pub fn fundamental_identity_gap(&self) -> f64 {
        (self.expected_hitting_from_mu - self.fundamental / self.mu_target).abs()
    }
}

fn assemble(target: usize, mu_target: f64, series: ReturnSeries, qs: QuasiStationary, expected: f64) -> FvtlReport {
    FvtlReport {
        target,
        mu_target,
        return_mass: series.return_mass,
        horizon: series.horizon,
        fundamental: series.fundamental,
        lambda_star: qs.lambda_star,
        mu_star: qs.mu_star,
        perron_unique: qs.unique,
        predicted_lambda: mu_target / series.return_mass,
        expected_hitting_from_mu: expected,
        series_steps: series.steps,
        return_mass_extrapolated: series.extrapolated,
    }
}

/// Full report for an explicit chain. `E_μ[τ_∂]` comes from the linear
/// first-step system, independently of the `Z` series.
pub fn fvtl_quantities(c: &ChainSpec, target: usize, horizon: usize) -> Result<FvtlReport> {
    let mu = c.stationary().ok_or_else(|| {
        Error::InvalidParameters("FVTL quantities need a solved stationary distribution".into())
    })?;
    check_target(mu, target)?;
    let series = return_series(c, target, mu[target], horizon)?;
    let qs = quasi_stationary_pair(c, target)?;
    let expected = hitting_time_expectation(c, mu, &[target])?;
    Ok(assemble(target, mu[target], series, qs, expected))
}

/// Full report for the auxiliary chain with target `Δ`. The mean hitting
/// time is obtained from the survival series since the chain is too large
/// for a direct solve.
pub fn aux_fvtl_quantities(a: &AuxChain, horizon: usize) -> Result<FvtlReport> {
    let target = a.delta();
    let mu = a.pi_tilde();
    let series = return_series(a, target, mu[target], horizon)?;
    let qs = quasi_stationary_pair(a, target)?;
    let expected = survival_expectation(a, target, mu, qs.lambda_star)?;
    Ok(assemble(target, mu[target], series, qs, expected))
}

fn check_target(mu: &[f64], target: usize) -> Result<()> {
    if target >= mu.len() {
        return Err(Error::InvalidParameters(format!("target {target} out of range")));
    }
    if mu[target] <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "target {target} is outside the support of the stationary law"
        )));
    }
    Ok(())
}

/// `max_{t ≤ t_max} |Q_{μ⋆}(τ_∂ > t)/(1 − λ⋆)ᵗ − 1|`.
pub fn quasi_stationary_tail_check<K: TransitionOperator + ?Sized>(
    k: &K,
    target: usize,
    mu_star: &[f64],
    lambda_star: f64,
    t_max: usize,
) -> f64 {
    let sub = Killed::new(k, target);
    let mut dist = mu_star.to_vec();
    let mut next = vec![0.0; dist.len()];
    let rho = 1.0 - lambda_star;
    let mut worst: f64 = (dist.iter().sum::<f64>() - 1.0).abs();
    let mut scale = 1.0;
    for _ in 0..t_max {
        sub.push_forward(&dist, &mut next);
        std::mem::swap(&mut dist, &mut next);
        scale *= rho;
        let survival: f64 = dist.iter().sum();
        worst = worst.max((survival / scale - 1.0).abs());
    }
    worst
}

/// `sup_{t ∈ grid} max_x Q_x(τ_∂ > t) / Q_μ(τ_∂ > t)`, from exact survival
/// functions `h_t(x) = Q_x(τ_∂ > t)` obtained by backward iteration.
pub fn uniform_start_ratio<K: TransitionOperator + ?Sized>(
    k: &K,
    target: usize,
    mu: &[f64],
    grid: &[usize],
) -> f64 {
    let sub = Killed::new(k, target);
    let n = k.num_states();
    let mut h: Vec<f64> = (0..n).map(|x| if x == target { 0.0 } else { 1.0 }).collect();
    let mut next = vec![0.0; n];
    let mut grid: Vec<usize> = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut sup: f64 = 0.0;
    let mut t = 0usize;
    for &g in &grid {
        while t < g {
            sub.pull_back(&h, &mut next);
            std::mem::swap(&mut h, &mut next);
            t += 1;
        }
        let from_mu: f64 = mu.iter().zip(&h).map(|(m, v)| m * v).sum();
        if from_mu > 0.0 {
            let worst = h.iter().copied().fold(0.0, f64::max);
            sup = sup.max(worst / from_mu);
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{random_ergodic_chain, StationaryMethod};
    use crate::seed::rng_from_u64;

    fn two_state(p: f64, q: f64) -> ChainSpec {
        ChainSpec::from_dense(&[vec![1.0 - p, p], vec![q, 1.0 - q]])
            .unwrap()
            .with_stationary(StationaryMethod::Direct)
            .unwrap()
    }

    #[test]
    fn two_state_closed_forms() {
        let (p, q) = (0.3, 0.2);
        let c = two_state(p, q);
        let rep = fvtl_quantities(&c, 1, 100).unwrap();
        assert!((rep.mu_target - p / (p + q)).abs() < 1e-14);
        assert!((rep.lambda_star - p).abs() < 1e-12);
        assert_eq!(rep.mu_star, vec![1.0, 0.0]);
        // E_μ[τ] = μ(0)/p
        let expected = (q / (p + q)) / p;
        assert!((rep.expected_hitting_from_mu - expected).abs() < 1e-12);
        assert!(rep.fundamental_identity_gap() < 1e-10);
        assert!(quasi_stationary_tail_check(&c, 1, &rep.mu_star, rep.lambda_star, 200) < 1e-12);
    }

    #[test]
    fn two_state_start_ratio_is_constant() {
        let (p, q) = (0.3, 0.2);
        let c = two_state(p, q);
        let mu = c.stationary().unwrap().to_vec();
        let ratio = uniform_start_ratio(&c, 1, &mu, &[0, 1, 5, 40]);
        assert!((ratio - (p + q) / q).abs() < 1e-12);
    }

    #[test]
    fn ratio_from_the_reference_start_itself() {
        let c = two_state(0.4, 0.1);
        // With μ = δ_0 the only live start is 0 itself.
        assert!((uniform_start_ratio(&c, 1, &[1.0, 0.0], &[0, 3, 9]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn return_mass_of_two_state_chain() {
        // Q^t(1,1) = μ1 + (1 − μ1)(1 − p − q)^t
        let (p, q) = (0.3, 0.2);
        let c = two_state(p, q);
        let mu1 = p / (p + q);
        let s = return_series(&c, 1, mu1, 10).unwrap();
        let closed: f64 = (0..=10).map(|t| mu1 + (1.0 - mu1) * (1.0 - p - q).powi(t)).sum();
        assert!((s.return_mass - closed).abs() < 1e-12);
        let z = (1.0 - mu1) / (p + q);
        assert!((s.fundamental - z).abs() < 1e-12);
    }

    #[test]
    fn survival_route_matches_linear_solve() {
        let mut rng = rng_from_u64(3);
        let c = random_ergodic_chain(25, 6, &mut rng)
            .with_stationary(StationaryMethod::Direct)
            .unwrap();
        let rep = fvtl_quantities(&c, 4, 50).unwrap();
        let via_survival = survival_expectation(&c, 4, c.stationary().unwrap(), rep.lambda_star).unwrap();
        assert!((via_survival - rep.expected_hitting_from_mu).abs() < 1e-8 * rep.expected_hitting_from_mu);
    }

    #[test]
    fn target_off_support_is_rejected() {
        let c = ChainSpec::from_dense(&[vec![0.0, 1.0], vec![0.0, 1.0]])
            .unwrap()
            .with_stationary(StationaryMethod::Direct)
            .unwrap();
        assert!(fvtl_quantities(&c, 0, 10).is_err());
    }

    #[test]
    fn disjoint_closed_classes_flag_non_uniqueness() {
        // Removing state 2 leaves two absorbing-ish blocks {0} and {1} with
        // the same survival rate.
        let c = ChainSpec::from_dense(&[
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap()
        .with_stationary(StationaryMethod::Direct)
        .unwrap();
        let rep = fvtl_quantities(&c, 2, 10).unwrap();
        assert!(!rep.perron_unique);
        assert!((rep.lambda_star - 0.5).abs() < 1e-12);
    }
}
