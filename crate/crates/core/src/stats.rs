//! Empirical distributions and distances to reference laws.
//!
//! Censored observations never enter a distance or a moment; they are only
//! counted. Meeting times are compared with `Geom(λ)` on `{0, 1, 2, ...}`;
//! rescaled times `τ/n` with `Exp(1)` or a Kingman reference sample.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    values: Vec<f64>,
    censored_count: usize,
}

impl EmpiricalDist {
    pub fn new(mut values: Vec<f64>, censored_count: usize) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameters("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalDist { values, censored_count })
    }

    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 0)
    }

    /// Uncensored values of `(tau, censored)` pairs, each divided by `scale`.
    pub fn from_stopping_times(taus: impl IntoIterator<Item = (u64, bool)>, scale: f64) -> Result<Self> {
        let mut values = Vec::new();
        let mut censored = 0;
        for (tau, cens) in taus {
            if cens {
                censored += 1;
            } else {
                values.push(tau as f64 / scale);
            }
        }
        Self::new(values, censored)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn censored_count(&self) -> usize {
        self.censored_count
    }

    pub fn censored_fraction(&self) -> f64 {
        let total = self.count() + self.censored_count;
        if total == 0 {
            0.0
        } else {
            self.censored_count as f64 / total as f64
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.count() as f64
    }

    /// Unbiased sample variance; zero for a single observation.
    pub fn variance(&self) -> f64 {
        let n = self.count();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance() / self.count() as f64).sqrt()
    }

    /// `#{v ≤ x} / count`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.count() as f64
    }

    /// `#{v ≥ x} / count`.
    pub fn tail_at_least(&self, x: f64) -> f64 {
        (self.count() - self.values.partition_point(|&v| v < x)) as f64 / self.count() as f64
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(Error::InvalidParameters("empty sample".into()))
        } else {
            Ok(())
        }
    }
}

/// A distribution function with its left limits, so that both one-sided
/// jumps of the empirical CDF can be compared.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;
    /// `P(X < x)`.
    fn cdf_left(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    pub rate: f64,
}

impl Exponential {
    pub fn quantile(&self, u: f64) -> f64 {
        -(-u).ln_1p() / self.rate
    }
}

impl Cdf for Exponential {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

/// `Geom(λ)` on `{0, 1, 2, ...}`: `P(X ≥ t) = (1 − λ)ᵗ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometric {
    pub lambda: f64,
}

impl Geometric {
    /// Survival `P(X ≥ t)` at integer `t ≥ 0`.
    pub fn tail_at_least(&self, t: u64) -> f64 {
        (1.0 - self.lambda).powf(t as f64)
    }

    /// Smallest `k` with `P(X ≤ k) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.lambda >= 1.0 || u <= 0.0 {
            return 0.0;
        }
        let q = 1.0 - self.lambda;
        let mut k = ((-u).ln_1p() / q.ln() - 1.0).ceil().max(0.0);
        // Correct the floating-point guess by at most a step either way.
        while k > 0.0 && self.cdf(k - 1.0) >= u {
            k -= 1.0;
        }
        while self.cdf(k) < u {
            k += 1.0;
        }
        k
    }
}

impl Cdf for Geometric {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            1.0 - self.tail_at_least(x.floor() as u64 + 1)
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - self.tail_at_least(x.ceil() as u64)
        }
    }
}

impl Cdf for EmpiricalDist {
    fn cdf(&self, x: f64) -> f64 {
        self.ecdf(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.count() as f64
    }
}

/// Kolmogorov–Smirnov distance `sup_x |F_emp(x) − F(x)|`, checked on both
/// sides of every jump of the empirical CDF.
pub fn ks_distance<C: Cdf + ?Sized>(e: &EmpiricalDist, reference: &C) -> Result<f64> {
    e.require_nonempty()?;
    let v = e.values();
    let n = v.len() as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let j = i + v[i..].partition_point(|&w| w == x);
        let below = i as f64 / n;
        let at = j as f64 / n;
        sup = sup.max((at - reference.cdf(x)).abs()).max((below - reference.cdf_left(x)).abs());
        i = j;
    }
    Ok(sup.min(1.0))
}

/// `∫ |F − G| dx` between two empirical laws. For equal sizes this is the
/// mean absolute difference of order statistics.
pub fn w1_two_sample(a: &EmpiricalDist, b: &EmpiricalDist) -> Result<f64> {
    a.require_nonempty()?;
    b.require_nonempty()?;
    let (va, vb) = (a.values(), b.values());
    let (na, nb) = (va.len() as f64, vb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = va[0].min(vb[0]);
    let mut total = 0.0;
    while i < va.len() || j < vb.len() {
        let x = match (va.get(i), vb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < va.len() && va[i] == x {
            i += 1;
        }
        while j < vb.len() && vb[j] == x {
            j += 1;
        }
        prev = x;
    }
    Ok(total)
}

/// Average of `|X_(i) − Q((i − 1/2)/count)|`.
pub fn w1_against_quantile(e: &EmpiricalDist, quantile: impl Fn(f64) -> f64) -> Result<f64> {
    e.require_nonempty()?;
    let n = e.count() as f64;
    Ok(e
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - quantile((i as f64 + 0.5) / n)).abs())
        .sum::<f64>()
        / n)
}

/// DKW half-width: with probability at least `1 − alpha` the KS distance of
/// `count` i.i.d. draws to their own law is below this.
pub fn dkw_epsilon(count: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * count as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub reference: String,
    pub parameter: Option<f64>,
    pub ks_distance: f64,
    pub w1_distance: f64,
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub count: usize,
    pub censored_count: usize,
    /// `sup_t P_emp(τ ≥ t) / (1 − λ)ᵗ` over well-populated `t`; geometric fits only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_tail_ratio: Option<f64>,
    /// `inf` of the same ratio; geometric fits only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_tail_ratio: Option<f64>,
}

fn base_report(e: &EmpiricalDist, reference: String, parameter: Option<f64>, ks: f64, w1: f64) -> FitReport {
    FitReport {
        reference,
        parameter,
        ks_distance: ks,
        w1_distance: w1,
        mean: e.mean(),
        variance: e.variance(),
        standard_error: e.standard_error(),
        count: e.count(),
        censored_count: e.censored_count(),
        sup_tail_ratio: None,
        inf_tail_ratio: None,
    }
}

/// Compares integer stopping times with `Geom(λ)`.
///
/// The tail ratio is taken over integer `t` at which at least `⌈√count⌉`
/// observations satisfy `τ ≥ t`; further out the empirical tail is a handful
/// of points and the ratio measures noise.
pub fn geometric_tail_fit(e: &EmpiricalDist, lambda: f64) -> Result<FitReport> {
    e.require_nonempty()?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameters(format!("geometric rate {lambda} outside (0, 1]")));
    }
    let g = Geometric { lambda };
    let ks = ks_distance(e, &g)?;
    let w1 = w1_against_quantile(e, |u| g.quantile(u))?;
    let min_support = (e.count() as f64).sqrt().ceil() / e.count() as f64;
    let mut sup: f64 = 0.0;
    let mut inf = f64::INFINITY;
    let mut t = 0u64;
    loop {
        let emp = e.tail_at_least(t as f64);
        let reference = g.tail_at_least(t);
        if emp < min_support || reference <= 0.0 {
            break;
        }
        let ratio = emp / reference;
        sup = sup.max(ratio);
        inf = inf.min(ratio);
        t += 1;
    }
    let mut report = base_report(e, "geometric".into(), Some(lambda), ks, w1);
    report.sup_tail_ratio = Some(sup);
    report.inf_tail_ratio = Some(inf);
    Ok(report)
}

/// Maximum-likelihood rate of `Geom(λ)` on `{0, 1, ...}`: `1/(1 + mean)`.
pub fn geometric_mle(e: &EmpiricalDist) -> f64 {
    1.0 / (1.0 + e.mean())
}

pub fn exponential_fit(e: &EmpiricalDist, rate: f64) -> Result<FitReport> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameters(format!("exponential rate {rate} must be positive")));
    }
    let x = Exponential { rate };
    let ks = ks_distance(e, &x)?;
    let w1 = w1_against_quantile(e, |u| x.quantile(u))?;
    Ok(base_report(e, "exponential".into(), Some(rate), ks, w1))
}

/// Compares with a sample from the Kingman reference law.
pub fn kingman_fit(e: &EmpiricalDist, reference: &EmpiricalDist) -> Result<FitReport> {
    let ks = ks_distance(e, reference)?;
    let w1 = w1_two_sample(e, reference)?;
    Ok(base_report(e, "kingman".into(), None, ks, w1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    /// `f64::INFINITY` for the overflow bin.
    pub upper: f64,
    pub count: usize,
    /// `count / (total · width)`; the overflow bin reports the plain fraction.
    pub density: f64,
}

pub const HISTOGRAM_WIDTH: f64 = 0.1;
pub const HISTOGRAM_UPPER: f64 = 8.0;

/// Fixed bins `[k·width, (k+1)·width)` up to `upper`, then one overflow bin.
pub fn histogram(values: &[f64], width: f64, upper: f64) -> Vec<HistogramBin> {
    let bins = (upper / width).round() as usize;
    let mut counts = vec![0usize; bins + 1];
    for &v in values {
        let k = if v >= upper { bins } else { ((v / width).floor().max(0.0) as usize).min(bins - 1) };
        counts[k] += 1;
    }
    let total = values.len().max(1) as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let overflow = k == bins;
            HistogramBin {
                lower: k as f64 * width,
                upper: if overflow { f64::INFINITY } else { (k + 1) as f64 * width },
                count,
                density: if overflow { count as f64 / total } else { count as f64 / (total * width) },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDist {
        EmpiricalDist::from_samples(v.to_vec()).unwrap()
    }

    #[test]
    fn single_point_at_median() {
        let x = Exponential { rate: 1.0 };
        let e = dist(&[std::f64::consts::LN_2]);
        assert!((ks_distance(&e, &x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_quantiles_are_within_one_over_count() {
        let x = Exponential { rate: 2.0 };
        let n = 1000;
        let e = dist(&(0..n).map(|i| x.quantile((i as f64 + 0.5) / n as f64)).collect::<Vec<_>>());
        assert!(ks_distance(&e, &x).unwrap() <= 1.0 / n as f64);
    }

    #[test]
    fn own_ecdf_has_zero_distance() {
        let e = dist(&[3.0, 1.0, 1.0, 2.0, 7.5, 2.0]);
        assert_eq!(ks_distance(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn point_masses() {
        assert_eq!(w1_two_sample(&dist(&[2.0]), &dist(&[5.5])).unwrap(), 3.5);
        assert_eq!(w1_two_sample(&dist(&[1.0, 4.0]), &dist(&[1.0, 4.0])).unwrap(), 0.0);
    }

    #[test]
    fn w1_equal_sizes_is_order_statistic_gap() {
        let a = dist(&[0.3, 2.0, 1.1, 5.0]);
        let b = dist(&[1.0, 0.0, 4.0, 2.5]);
        let direct: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() / 4.0;
        assert!((w1_two_sample(&a, &b).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn w1_unequal_sizes() {
        // F jumps to 1 at 0; G has mass 1/2 at 0 and 1/2 at 2: ∫|F−G| = 1.
        assert!((w1_two_sample(&dist(&[0.0]), &dist(&[0.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_cdf_steps() {
        let g = Geometric { lambda: 0.25 };
        assert_eq!(g.cdf(-0.5), 0.0);
        assert!((g.cdf(0.0) - 0.25).abs() < 1e-15);
        assert!((g.cdf(0.99) - 0.25).abs() < 1e-15);
        assert_eq!(g.cdf_left(0.0), 0.0);
        assert!((g.cdf_left(1.0) - 0.25).abs() < 1e-15);
        for k in 0..40 {
            let u = g.cdf(k as f64);
            assert_eq!(g.quantile(u), k as f64);
            assert_eq!(g.quantile(u + 1e-9), (k + 1) as f64);
        }
    }

    #[test]
    fn geometric_quantile_sample_tail_ratio() {
        let lambda = 0.01;
        let g = Geometric { lambda };
        let n = 10_000;
        let e = dist(&(0..n).map(|i| g.quantile((i as f64 + 0.5) / n as f64)).collect::<Vec<_>>());
        let fit = geometric_tail_fit(&e, lambda).unwrap();
        let tol = 2.0 / (n as f64).sqrt();
        assert!((fit.sup_tail_ratio.unwrap() - 1.0).abs() <= tol);
        assert!((fit.inf_tail_ratio.unwrap() - 1.0).abs() <= tol);
        assert!(fit.ks_distance <= 1.0 / n as f64);
        assert!((geometric_mle(&e) - lambda).abs() < 1e-3);
    }

    #[test]
    fn degenerate_geometric() {
        let e = dist(&[0.0; 50]);
        let fit = geometric_tail_fit(&e, 1.0).unwrap();
        assert_eq!(fit.sup_tail_ratio, Some(1.0));
        assert_eq!(fit.ks_distance, 0.0);
        assert!(geometric_tail_fit(&e, 0.0).is_err());
    }

    #[test]
    fn censored_values_are_excluded() {
        let e = EmpiricalDist::from_stopping_times([(3, false), (100, true), (5, false)], 1.0).unwrap();
        assert_eq!(e.values(), &[3.0, 5.0]);
        assert_eq!(e.censored_count(), 1);
        assert!((e.censored_fraction() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.mean(), 4.0);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.05, 0.1, 7.99, 8.0, 12.0], HISTOGRAM_WIDTH, HISTOGRAM_UPPER);
        assert_eq!(h.len(), 81);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[79].count, 1);
        assert_eq!(h[80].count, 2);
        assert!(h[80].upper.is_infinite());
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 6);
    }

    #[test]
    fn empty_sample_is_an_error() {
        let e = dist(&[]);
        assert!(ks_distance(&e, &Exponential { rate: 1.0 }).is_err());
    }
}
