//! The quartic limit laws `C exp(-a s^4) ds`.
//!
//! With `G ~ Gamma(1/4, 1)`, `s = ±(G/a)^{1/4}` has density
//! `C exp(-a s^4)`, `C = 2 a^{1/4} / Gamma(1/4)`. Consequently
//! `P(|s| <= x) = P(1/4, a x^4)` and `E|s|^k = a^{-k/4} Gamma((k+1)/4) / Gamma(1/4)`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::measures::BaseMeasure;
use crate::special::{gamma, gamma_q};
use crate::{Error, Result};

/// Which fluctuation result a law describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTheorem {
    /// `S / (n^{1/4} sqrt(T))`, rate `mu4 / (12 sigma^4)`.
    SelfNormalized,
    /// `S / n^{3/4}`, rate `mu4 / (12 sigma^8)`.
    ScaledSum,
    Custom,
}

impl SourceTheorem {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTheorem::SelfNormalized => "theorem1",
            SourceTheorem::ScaledSum => "theorem2",
            SourceTheorem::Custom => "custom",
        }
    }
}

impl fmt::Display for SourceTheorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticLaw {
    a: f64,
    normalization: f64,
    source: SourceTheorem,
}

/// Relative accuracy the quantile bisection runs to.
const QUANTILE_REL_TOL: f64 = 1e-15;

impl QuarticLaw {
    /// Law with density proportional to `exp(-a s^4)`.
    pub fn with_rate(a: f64) -> Result<Self> {
        Self::build(a, SourceTheorem::Custom)
    }

    fn build(a: f64, source: SourceTheorem) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidConfig(format!("quartic rate must be positive, got {a}")));
        }
        Ok(Self { a, normalization: 2.0 * a.powf(0.25) / gamma(0.25), source })
    }

    /// Limit of `S / (n^{1/4} sqrt(T))`: `a = mu4 / (12 sigma^4)`.
    pub fn theorem1(m: &BaseMeasure) -> Self {
        let a = m.fourth_moment() / (12.0 * m.variance().powi(2));
        Self::build(a, SourceTheorem::SelfNormalized).expect("moments of a valid measure are positive")
    }

    /// Limit of `S / n^{3/4}`: `a = mu4 / (12 sigma^8)`. Needs the
    /// exponential square moment, without which `T / n` need not
    /// concentrate.
    pub fn theorem2(m: &BaseMeasure) -> Result<Self> {
        if !m.satisfies_star() {
            return Err(Error::ConditionStarFails(m.name().to_string()));
        }
        let a = m.fourth_moment() / (12.0 * m.variance().powi(4));
        Self::build(a, SourceTheorem::ScaledSum)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn source(&self) -> SourceTheorem {
        self.source
    }

    /// `int exp(-a s^4) ds = Gamma(1/4) / (2 a^{1/4})`.
    pub fn unnormalized_integral(&self) -> f64 {
        gamma(0.25) / (2.0 * self.a.powf(0.25))
    }

    /// Law of `scale * s`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        Self::build(self.a / scale.powi(4), SourceTheorem::Custom)
    }

    pub fn pdf(&self, s: f64) -> f64 {
        self.normalization * (-self.a * s.powi(4)).exp()
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s.is_nan() {
            return f64::NAN;
        }
        let tail = 0.5 * gamma_q(0.25, self.a * s.powi(4));
        if s < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        if p < 0.5 {
            return Ok(-self.quantile(1.0 - p)?);
        }
        let (mut lo, mut hi) = (0.0, self.a.powf(-0.25));
        while self.cdf(hi) < p {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= QUANTILE_REL_TOL * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// One draw via the `Gamma(1/4)` transform.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(0.25, 1.0).expect("shape 1/4 is valid").sample(rng);
        let magnitude = (g / self.a).powf(0.25);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let gamma = Gamma::new(0.25, 1.0).expect("shape 1/4 is valid");
        (0..count)
            .map(|_| {
                let magnitude = (gamma.sample(rng) / self.a).powf(0.25);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect()
    }

    /// `E|s|^k` for `k >= 0`.
    pub fn abs_moment(&self, k: f64) -> f64 {
        self.a.powf(-k / 4.0) * gamma((k + 1.0) / 4.0) / gamma(0.25)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_simpson, SimpsonOptions};
    use crate::rng::{domain, stream_rng};
    use crate::stats::{ks_statistic, EmpiricalDistribution};

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        adaptive_simpson(f, a, b, SimpsonOptions::with_tol(1e-13)).unwrap()
    }

    fn laws() -> Vec<QuarticLaw> {
        [1.0 / 12.0, 0.25, 27.0 / 20.0, 1.0 / 64.0, 3.7].iter().map(|&a| QuarticLaw::with_rate(a).unwrap()).collect()
    }

    #[test]
    fn theorem_rates() {
        let g1 = BaseMeasure::gaussian(1.0).unwrap();
        let rad = BaseMeasure::rademacher();
        let u1 = BaseMeasure::uniform(1.0).unwrap();
        assert!((QuarticLaw::theorem1(&g1).a() - 0.25).abs() < 1e-15);
        assert!((QuarticLaw::theorem1(&rad).a() - 1.0 / 12.0).abs() < 1e-15);
        for x in [0.1, 1.0, 3.0, 40.0] {
            let m = BaseMeasure::two_point(x).unwrap();
            assert!((QuarticLaw::theorem1(&m).a() - 1.0 / 12.0).abs() < 1e-14);
        }
        assert!((QuarticLaw::theorem2(&rad).unwrap().a() - 1.0 / 12.0).abs() < 1e-15);
        assert!((QuarticLaw::theorem2(&g1).unwrap().a() - 0.25).abs() < 1e-15);
        assert!((QuarticLaw::theorem2(&u1).unwrap().a() - 27.0 / 20.0).abs() < 1e-13);
        assert_eq!(QuarticLaw::theorem2(&u1).unwrap().source(), SourceTheorem::ScaledSum);
    }

    #[test]
    fn rates_share_mu4_over_12() {
        for m in ["rademacher", "gaussian:2", "uniform:1.5", "twopoint:0.7", "discrete:0,0.2;1,0.5;2.5,0.3"] {
            let m: BaseMeasure = m.parse().unwrap();
            let s2 = m.variance();
            let t1 = QuarticLaw::theorem1(&m).a() * s2.powi(2);
            let t2 = QuarticLaw::theorem2(&m).unwrap().a() * s2.powi(4);
            let target = m.fourth_moment() / 12.0;
            assert!((t1 - target).abs() < 1e-12 * target && (t2 - target).abs() < 1e-12 * target);
        }
    }

    #[test]
    fn normalization_matches_quadrature_and_closed_form() {
        for law in laws() {
            let scale = law.a().powf(-0.25);
            let integral = 2.0 * quad(|s| (-law.a() * s.powi(4)).exp(), 0.0, 10.0 * scale);
            assert!((law.normalization() * integral - 1.0).abs() < 1e-10);
            assert!((law.unnormalized_integral() - integral).abs() < 1e-10 * integral);
        }
        // C = (4 mu4 / (3 sigma^4))^{1/4} / Gamma(1/4) for the self-normalized law
        for m in ["rademacher", "gaussian:1", "uniform:2"] {
            let m: BaseMeasure = m.parse().unwrap();
            let law = QuarticLaw::theorem1(&m);
            let stated = (4.0 * m.fourth_moment() / (3.0 * m.variance().powi(2))).powf(0.25) / gamma(0.25);
            assert!((law.normalization() - stated).abs() < 1e-10 * stated);
        }
    }

    #[test]
    fn cdf_examples_and_quadrature() {
        for law in laws() {
            assert_eq!(law.cdf(0.0), 0.5);
            let big = 1e3 * law.a().powf(-0.25);
            assert!((law.cdf(big) - 1.0).abs() < 1e-12);
            assert!(law.cdf(-big) < 1e-12);
            let scale = law.a().powf(-0.25);
            let mut max_diff: f64 = 0.0;
            let mut prev = 0.0;
            for k in 0..100 {
                let s = -2.0 * scale + 4.0 * scale * k as f64 / 99.0;
                let by_quad =
                    if s < 0.0 { quad(|x| law.pdf(x), -12.0 * scale, s) } else { 0.5 + quad(|x| law.pdf(x), 0.0, s) };
                let c = law.cdf(s);
                max_diff = max_diff.max((c - by_quad).abs());
                assert!(c > prev);
                prev = c;
            }
            assert!(max_diff <= 1e-9, "max diff {max_diff}");
            assert_eq!(law.pdf(1.3), law.pdf(-1.3));
        }
    }

    #[test]
    fn quantile_round_trip() {
        for law in laws() {
            assert_eq!(law.quantile(0.5).unwrap(), 0.0);
            let mut max_err: f64 = 0.0;
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let q = law.quantile(p).unwrap();
                max_err = max_err.max((law.cdf(q) - p).abs());
                assert_eq!(q, -law.quantile(1.0 - p).unwrap());
            }
            assert!(max_err < 1e-10, "{max_err}");
        }
        let law = QuarticLaw::with_rate(1.0).unwrap();
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(law.quantile(p).is_err());
        }
    }

    #[test]
    fn abs_moments() {
        for law in laws() {
            assert!((law.abs_moment(0.0) - 1.0).abs() < 1e-14);
            assert!((law.abs_moment(4.0) - 1.0 / (4.0 * law.a())).abs() < 1e-10 * law.abs_moment(4.0));
            let expected2 = law.a().powf(-0.5) * gamma(0.75) / gamma(0.25);
            assert!((law.abs_moment(2.0) - expected2).abs() < 1e-14 * expected2);
            let scale = law.a().powf(-0.25);
            for k in [1, 2, 3, 4, 6] {
                let q = 2.0 * quad(|s| s.powi(k) * law.pdf(s), 0.0, 12.0 * scale);
                let m = law.abs_moment(k as f64);
                assert!(((q - m) / m).abs() < 1e-8, "k={k}: {q} vs {m}");
            }
        }
    }

    #[test]
    fn sampler_self_test() {
        let law = QuarticLaw::theorem1(&BaseMeasure::gaussian(1.0).unwrap());
        let mut rng = stream_rng(21, domain::LAW, 0);
        let xs = law.sample(&mut rng, 1_000_000);
        let emp = EmpiricalDistribution::new(&xs).unwrap();
        let d = ks_statistic(&emp, |s| law.cdf(s));
        assert!(d < 0.002, "KS {d}");
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = law.abs_moment(2.0).sqrt();
        assert!(mean.abs() < 4.0 * sd / n.sqrt());
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        // 3 sigma^4 / mu4 = 1 for the Gaussian
        assert!((m4 - 1.0).abs() < 0.01, "{m4}");
    }

    #[test]
    fn scaled_law_links_the_two_theorems() {
        let m = BaseMeasure::gaussian(2.0).unwrap();
        let law1 = QuarticLaw::theorem1(&m);
        let law2 = QuarticLaw::theorem2(&m).unwrap();
        let sigma = m.variance().sqrt();
        assert!((law1.scaled(sigma).unwrap().a() - law2.a()).abs() < 1e-15);
        let mut rng = stream_rng(22, domain::LAW, 0);
        let xs: Vec<f64> = law1.sample(&mut rng, 1_000_000).into_iter().map(|s| sigma * s).collect();
        let d = ks_statistic(&EmpiricalDistribution::new(&xs).unwrap(), |s| law2.cdf(s));
        assert!(d < 0.002, "{d}");
    }

    #[test]
    fn invalid_rates() {
        for a in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(QuarticLaw::with_rate(a).is_err());
        }
    }
}
