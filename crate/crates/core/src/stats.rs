//! Empirical-distribution tools used by the verification suite.

use crate::{Error, Result};

/// Sorted sample.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sorts a copy of `values`. NaNs sort last.
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    /// Right-continuous empirical cdf.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.count() as f64
    }
}

/// Kolmogorov-Smirnov distance between the sample and a continuous cdf:
/// the largest of `|i/N - F(x_i)|` and `|(i-1)/N - F(x_i)|`.
pub fn ks_statistic<F>(emp: &EmpiricalDistribution, cdf: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = emp.count() as f64;
    emp.sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let hi = (i + 1) as f64 / n - f;
            let lo = f - i as f64 / n;
            hi.abs().max(lo.abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`
/// at `lambda = sqrt(N) * statistic`.
pub fn ks_pvalue(statistic: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * statistic;
    kolmogorov_q(lambda)
}

pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        // Jacobi-transformed form; the alternating series converges too
        // slowly here. 1 - Q = sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2)).
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            sum += term;
            if term < 1e-16 * sum {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Level used for ESS-adjusted KS verdicts.
pub const KS_ALPHA: f64 = 1e-3;

/// Smallest KS statistic rejected at level `alpha` for `n_eff` independent
/// samples, from the asymptotic Kolmogorov law.
pub fn ks_critical_value(alpha: f64, n_eff: f64) -> f64 {
    let (mut lo, mut hi) = (0.1, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / n_eff.sqrt()
}

/// Finite distribution as `(value, probability)` sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    points: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// Sorts and merges values closer than `merge_tol`. Masses are kept as
    /// given; normalization is checked where it matters.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>, merge_tol: f64) -> Self {
        let mut v: Vec<(f64, f64)> = pairs.into_iter().collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (x, p) in v {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= merge_tol => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        Self { points: merged }
    }

    /// Empirical distribution of the sample with values merged within `merge_tol`.
    pub fn from_samples(samples: &[f64], merge_tol: f64) -> Self {
        let w = 1.0 / samples.len() as f64;
        Self::from_pairs(samples.iter().map(|&x| (x, w)), merge_tol)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn mean_of<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|&(x, p)| p * f(x)).sum()
    }
}

/// Normalization tolerance for [`tv_distance`].
pub const TV_MASS_TOL: f64 = 1e-9;
/// Values closer than this are treated as the same support point.
pub const TV_MATCH_TOL: f64 = 1e-9;

/// `1/2 sum |p - q|` over the union of supports.
pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    for d in [p, q] {
        let mass = d.total_mass();
        if (mass - 1.0).abs() > TV_MASS_TOL {
            return Err(Error::Unnormalized(mass));
        }
    }
    let (a, b) = (&p.points, &q.points);
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        if i < a.len() && j < b.len() && (a[i].0 - b[j].0).abs() <= TV_MATCH_TOL {
            acc += (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
        } else if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            acc += a[i].1;
            i += 1;
        } else {
            acc += b[j].1;
            j += 1;
        }
    }
    Ok((0.5 * acc).min(1.0))
}

/// Default number of batches.
pub const DEFAULT_BATCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub standard_error: f64,
    pub batch_size: usize,
    pub batches: usize,
    /// Variance of the batch means (denominator `batches - 1`).
    pub batch_variance: f64,
    /// Plain sample variance over the samples used (denominator `len - 1`).
    pub sample_variance: f64,
}

/// Non-overlapping batch means. When the length is not a multiple of
/// `batches`, the leading remainder is dropped.
pub fn batch_means(samples: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 || samples.len() < 2 * batches {
        return Err(Error::TooFewSamples { needed: 2 * batches.max(2), got: samples.len() });
    }
    let size = samples.len() / batches;
    let used = &samples[samples.len() - size * batches..];
    let means: Vec<f64> = used.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let batch_variance = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let (_, sample_variance) = mean_variance(used);
    Ok(BatchMeans {
        mean,
        standard_error: (batch_variance / batches as f64).sqrt(),
        batch_size: size,
        batches,
        batch_variance,
        sample_variance,
    })
}

/// Mean and unbiased variance (0 for a single value).
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Self-normalized weighted mean of `values` with weights `exp(log_w)`,
/// and its delta-method standard error.
pub fn weighted_mean(values: &[f64], log_w: &[f64]) -> (f64, f64) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    let mean = w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / sw;
    let var = w.iter().zip(values).map(|(w, v)| (w * (v - mean)).powi(2)).sum::<f64>();
    (mean, var.sqrt() / sw)
}

/// Kish effective sample size `(sum w)^2 / sum w^2` from log-weights.
pub fn ess_from_log_weights(log_w: &[f64]) -> f64 {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in log_w {
        let w = (l - max).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

/// Equal-width histogram normalized to a density.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &x in samples {
            if x >= lo && x < hi {
                let k = (((x - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        Self { lo, hi, counts, total: samples.len() }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    pub fn density(&self, k: usize) -> f64 {
        self.counts[k] as f64 / (self.total as f64 * self.width())
    }

    /// Binomial standard error of the bin density given an effective sample
    /// size (pass `total` for independent draws).
    pub fn density_se(&self, k: usize, effective: f64) -> f64 {
        let p = self.counts[k] as f64 / self.total as f64;
        (p * (1.0 - p) / effective).sqrt() / self.width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream_rng};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn uniform_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn ks_at_exact_quantiles() {
        let n = 1000;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let emp = EmpiricalDistribution::new(&xs).unwrap();
        assert!((ks_statistic(&emp, uniform_cdf) - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn ks_single_point_at_median() {
        let emp = EmpiricalDistribution::new(&[0.5]).unwrap();
        assert_eq!(ks_statistic(&emp, uniform_cdf), 0.5);
    }

    #[test]
    fn ks_of_own_sample_is_small() {
        let mut rng = stream_rng(3, domain::VERIFY, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let emp = EmpiricalDistribution::new(&xs).unwrap();
        let d = ks_statistic(&emp, uniform_cdf);
        assert!(d < 1.95 / (n as f64).sqrt(), "{d}");
        // against its own ECDF only the half-step discretization remains
        let own = ks_statistic(&emp, |x| emp.cdf(x));
        assert!(own <= 1.0 / n as f64 + 1e-15);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert_eq!(ks_pvalue(0.0, 100), 1.0);
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
        // both branches agree at the switch
        let below = kolmogorov_q(1.0 - 1e-12);
        let above = kolmogorov_q(1.0);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn kolmogorov_tail_monotone_and_continuous() {
        let mut prev = 1.0;
        for k in 1..4000 {
            let lam = k as f64 * 1e-3;
            let q = kolmogorov_q(lam);
            assert!((0.0..=1.0).contains(&q));
            assert!(q <= prev + 1e-12, "not monotone at {lam}");
            assert!((prev - q).abs() < 2e-3, "jump at {lam}");
            prev = q;
        }
    }

    #[test]
    fn tv_examples() {
        let p = DiscreteDistribution::from_pairs([(0.0, 0.5), (1.0, 0.5)], 0.0);
        let q = DiscreteDistribution::from_pairs([(0.0, 0.25), (1.0, 0.75)], 0.0);
        let r = DiscreteDistribution::from_pairs([(2.0, 0.5), (3.0, 0.5)], 0.0);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(tv_distance(&p, &r).unwrap(), 1.0);
        let bad = DiscreteDistribution::from_pairs([(0.0, 0.3)], 0.0);
        assert!(matches!(tv_distance(&p, &bad), Err(Error::Unnormalized(_))));
    }

    fn random_dist(weights: &[f64]) -> DiscreteDistribution {
        let total: f64 = weights.iter().sum();
        DiscreteDistribution::from_pairs(weights.iter().enumerate().map(|(i, w)| (i as f64, w / total)), 0.0)
    }

    proptest! {
        #[test]
        fn tv_symmetric_and_triangle(
            a in prop::collection::vec(0.01f64..1.0, 6),
            b in prop::collection::vec(0.01f64..1.0, 6),
            c in prop::collection::vec(0.01f64..1.0, 6),
        ) {
            let (p, q, r) = (random_dist(&a), random_dist(&b), random_dist(&c));
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
        }
    }

    #[test]
    fn batch_means_examples() {
        let constant = vec![2.5; 1000];
        let bm = batch_means(&constant, 50).unwrap();
        assert_eq!(bm.standard_error, 0.0);
        assert_eq!(bm.mean, 2.5);

        let mut rng = stream_rng(4, domain::VERIFY, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let bm = batch_means(&xs, 50).unwrap();
        let target = 1.0 / (xs.len() as f64).sqrt();
        assert!((bm.standard_error / target - 1.0).abs() < 0.2, "{}", bm.standard_error);
        let plain = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((bm.mean - plain).abs() < 1e-12);

        assert!(matches!(batch_means(&xs[..99], 50), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn ess_limits() {
        assert!((ess_from_log_weights(&[3.0; 100]) - 100.0).abs() < 1e-12);
        let mut lw = vec![0.0; 100];
        lw[7] = 800.0;
        assert!((ess_from_log_weights(&lw) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_mean_equal_weights_is_plain_mean() {
        let v = [1.0, 2.0, 3.0, 6.0];
        let (m, se) = weighted_mean(&v, &[0.0; 4]);
        assert!((m - 3.0).abs() < 1e-15);
        let (_, var) = mean_variance(&v);
        // delta-method SE uses the biased variance
        assert!((se - (var * 3.0 / 4.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn histogram_density_integrates_to_inside_fraction() {
        let xs = [0.1, 0.2, 0.25, 0.9, 1.5];
        let h = Histogram::new(&xs, 0.0, 1.0, 4);
        let mass: f64 = (0..4).map(|k| h.density(k) * h.width()).sum();
        assert!((mass - 0.8).abs() < 1e-15);
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
    }

    #[test]
    fn ks_critical_values() {
        // classical asymptotic critical values 1.358 (5%) and 1.949 (0.1%)
        assert!((ks_critical_value(0.05, 1.0) - 1.3581).abs() < 1e-3);
        assert!((ks_critical_value(KS_ALPHA, 1.0) - 1.9495).abs() < 1e-3);
        assert!((ks_critical_value(0.05, 100.0) - 0.13581).abs() < 1e-4);
    }
}
