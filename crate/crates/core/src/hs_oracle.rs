//! Gaussian-smoothing representation of the self-normalized statistic.
//!
//! Adding an independent `W / n^{1/4}`, `W ~ N(0, 1)`, to
//! `S / (n^{1/4} sqrt(T))` under the Gibbs measure gives a variable whose
//! density is proportional to
//!
//! ```text
//! p(z) = E[exp(sum_i g(z n^{1/4} x_i / sqrt(T)))],   g(y) = ln cosh y - y^2 / 2,
//! ```
//!
//! the expectation taken over i.i.d. draws from the base measure with `T > 0`.
//! `p` is even and bounded by one, and `int p = Z sqrt(2 pi) / n^{1/4}` where
//! `Z` is the Gibbs normalization. [`HsEnsemble`] estimates `p` by Monte
//! Carlo with the same draws at every `z`.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::io::Write;

use rand::RngCore;

use crate::exec::Execution;
use crate::measures::BaseMeasure;
use crate::number::format_real;
use crate::quadrature::{adaptive_simpson_batched, SimpsonOptions};
use crate::rng::{derive_seed, domain, stream_rng};
use crate::special::gamma_quarter;
use crate::stats::mean_variance;
use crate::{Error, Result};

// Coefficients of y^4, y^6, ..., y^34 in ln cosh y.
const G_SERIES: [f64; 16] = [
    -0.08333333333333333,
    0.022222222222222223,
    -0.006746031746031746,
    0.0021869488536155205,
    -0.0007386029608251831,
    0.0002565805740408915,
    -9.09896491907074e-05,
    3.277930227475478e-05,
    -1.1956455712177625e-05,
    4.405244525877023e-06,
    -1.6365968284715348e-06,
    6.122655795895756e-07,
    -2.3041747198769394e-07,
    8.715903837635848e-08,
    -3.3116463500327045e-08,
    1.2632091406687664e-08,
];

// Truncation error of the series below this radius is under 1e-19.
const SERIES_RADIUS: f64 = 0.5;

/// `g(y) / y^4` as a polynomial in `y^2`, valid for `|y| < SERIES_RADIUS`.
#[inline(always)]
fn g_over_y4(y2: f64) -> f64 {
    G_SERIES.iter().rev().fold(0.0, |acc, c| acc * y2 + c)
}

/// `ln cosh y - y^2 / 2`. Even, nonpositive, zero only at the origin.
#[inline]
pub fn g(y: f64) -> f64 {
    let a = y.abs();
    if a < SERIES_RADIUS {
        let y2 = a * a;
        y2 * y2 * g_over_y4(y2)
    } else {
        a - LN_2 + (-2.0 * a).exp().ln_1p() - 0.5 * a * a
    }
}

/// `(1 + y^2) g(y) / y^4`, extended by `h(0) = -1/12`. Tends to `-1/2`.
pub fn h(y: f64) -> f64 {
    let a = y.abs();
    if a < SERIES_RADIUS {
        let y2 = a * a;
        (1.0 + y2) * g_over_y4(y2)
    } else if a > 1e150 {
        -0.5
    } else {
        let y2 = a * a;
        g(a) / y2 * (1.0 + 1.0 / y2)
    }
}

pub const LEMMA_SCAN_HALF_WIDTH: f64 = 50.0;
pub const LEMMA_SCAN_STEP: f64 = 1e-3;
const LEMMA_REFINE: usize = 10;

/// Largest `c` with `h(y) <= -c` everywhere: `c = -sup h`.
///
/// The supremum is located on a grid over `|y| <= 50` (step `1e-3`, using
/// evenness), polished by golden-section search around the best grid point,
/// and the result is accepted only if `h <= -c` holds on a grid ten times
/// finer.
pub fn lemma1_constant() -> Result<f64> {
    let steps = (LEMMA_SCAN_HALF_WIDTH / LEMMA_SCAN_STEP).round() as usize;
    let (mut best_y, mut best_h) = (0.0, h(0.0));
    for i in 1..=steps {
        let y = i as f64 * LEMMA_SCAN_STEP;
        let v = h(y);
        if v > best_h {
            best_y = y;
            best_h = v;
        }
    }
    let lo = (best_y - LEMMA_SCAN_STEP).max(0.0);
    let hi = (best_y + LEMMA_SCAN_STEP).min(LEMMA_SCAN_HALF_WIDTH);
    let (y_gs, h_gs) = golden_section_max(h, lo, hi, 1e-12);
    let sup = if h_gs > best_h { h_gs } else { best_h };
    let c = -sup;
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Certification(format!("sup h = {sup} at y = {y_gs} is not negative")));
    }
    let fine = steps * LEMMA_REFINE;
    let fine_step = LEMMA_SCAN_HALF_WIDTH / fine as f64;
    for i in 0..=fine {
        let y = i as f64 * fine_step;
        if h(y) > -c {
            return Err(Error::Certification(format!("h({y}) = {} exceeds -c = {}", h(y), -c)));
        }
    }
    Ok(c)
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let mut best = (a, f(a));
    for x in [x1, x2, b] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// `sum_i g(z n^{1/4} x_i / sqrt(T))` for `values = (x_1, ..., x_n)`.
pub fn g_sum(z: f64, values: &[f64]) -> Result<f64> {
    let t: f64 = values.iter().map(|x| x * x).sum();
    if t.is_nan() || t <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let scale = z * (values.len() as f64).powf(0.25) / t.sqrt();
    Ok(values.iter().map(|x| g(scale * x)).sum())
}

pub const LEMMA_CHECK_SLACK: f64 = 1e-9;

/// `-c z^4 / (1 + z^2 / sqrt(n))`.
pub fn lemma1_bound(z: f64, n: usize, c: f64) -> f64 {
    let z2 = z * z;
    -c * z2 * z2 / (1.0 + z2 / (n as f64).sqrt())
}

/// `-c sqrt(n) z^2 / 2`, which dominates [`lemma1_bound`] once `|z| > n^{1/4}`.
pub fn tail_bound(z: f64, n: usize, c: f64) -> f64 {
    -0.5 * c * (n as f64).sqrt() * z * z
}

/// Whether `g_sum(z, values) <= lemma1_bound(z, n, c)` up to
/// [`LEMMA_CHECK_SLACK`].
pub fn lemma1_check(z: f64, values: &[f64], c: f64) -> Result<bool> {
    let lhs = g_sum(z, values)?;
    Ok(lhs <= lemma1_bound(z, values.len(), c) + LEMMA_CHECK_SLACK)
}

/// Bound on the mass of `p` outside `[-L, L]`.
pub const TRUNCATION_TAIL: f64 = 1e-12;

/// Half-width `L` of the integration range for `p`: at least
/// `8 (12 sigma^4 / mu4)^{1/4}`, widened until the pointwise bound
/// `p(z) <= exp(lemma1_bound(z, n, c))` leaves less than
/// [`TRUNCATION_TAIL`] outside.
pub fn truncation_half_width(n: usize, m: &BaseMeasure, c: f64) -> f64 {
    let s2 = m.variance();
    let mut l = 8.0 * (12.0 * s2 * s2 / m.fourth_moment()).powf(0.25);
    while tail_mass_bound(l, n, c) >= TRUNCATION_TAIL {
        l *= 1.05;
    }
    l
}

// With 1 + x <= 2 max(1, x): exponent <= -c/2 min(z^4, sqrt(n) z^2), and the
// minimum switches at z = n^{1/4}.
fn tail_mass_bound(l: f64, n: usize, c: f64) -> f64 {
    let knee = (n as f64).powf(0.25);
    let quartic = if l < knee {
        let k = 0.5 * c;
        (-k * l.powi(4)).exp() / (4.0 * k * l.powi(3))
    } else {
        0.0
    };
    let m = l.max(knee);
    let k = 0.5 * c * (n as f64).sqrt();
    let gaussian = (-k * m * m).exp() / (2.0 * k * m);
    2.0 * (quartic + gaussian)
}

/// Monte Carlo estimates of the smoothing profile on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HsProfile {
    pub z_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n: usize,
    pub mc_draws: usize,
    pub measure: String,
}

impl HsProfile {
    /// CSV with header `z,value,std_error`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z,value,std_error")?;
        for ((z, v), e) in self.z_grid.iter().zip(&self.values).zip(&self.std_errors) {
            writeln!(w, "{},{},{}", format_real(*z), format_real(*v), format_real(*e))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Draws per random stream; draw `j` always comes from stream `j / HS_BLOCK`.
pub const HS_BLOCK: usize = 64;

/// A fixed set of `mc_draws` configurations shared by every evaluation of
/// the profile. Per-draw values are cached by `|z|`.
#[derive(Debug)]
pub struct HsEnsemble {
    n: usize,
    measure: BaseMeasure,
    mc_draws: usize,
    seed: u64,
    exec: Execution,
    half_width: f64,
    opts: SimpsonOptions,
    cache: HashMap<u64, Vec<f64>>,
}

impl HsEnsemble {
    pub fn new(n: usize, measure: BaseMeasure, mc_draws: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if mc_draws == 0 {
            return Err(Error::InvalidConfig("mc_draws must be positive".into()));
        }
        let c = lemma1_constant()?;
        let half_width = truncation_half_width(n, &measure, c);
        Ok(HsEnsemble {
            n,
            measure,
            mc_draws,
            seed,
            exec: Execution::default(),
            half_width,
            opts: SimpsonOptions::default(),
            cache: HashMap::new(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_quadrature(mut self, opts: SimpsonOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mc_draws(&self) -> usize {
        self.mc_draws
    }

    pub fn measure(&self) -> &BaseMeasure {
        &self.measure
    }

    /// Integration runs over `[-half_width, half_width]`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of distinct `|z|` evaluated so far.
    pub fn cached_nodes(&self) -> usize {
        self.cache.len()
    }

    /// Per-draw values `exp(g_sum(z, draw_j))` at each of `zs`.
    pub fn draw_values(&mut self, zs: &[f64]) -> Vec<&[f64]> {
        self.fill(zs);
        zs.iter().map(|z| self.cache[&key(*z)].as_slice()).collect()
    }

    fn fill(&mut self, zs: &[f64]) {
        let mut missing: Vec<f64> = Vec::new();
        for z in zs {
            let k = key(*z);
            if !self.cache.contains_key(&k) && !missing.iter().any(|m| key(*m) == k) {
                missing.push(z.abs());
            }
        }
        if missing.is_empty() {
            return;
        }
        let blocks = self.mc_draws.div_ceil(HS_BLOCK);
        let per_block = self.exec.map_indexed(blocks, |b| self.evaluate_block(b, &missing));
        for (k, z) in missing.iter().enumerate() {
            let mut column = Vec::with_capacity(self.mc_draws);
            for block in &per_block {
                let count = block.len() / missing.len();
                column.extend_from_slice(&block[k * count..(k + 1) * count]);
            }
            self.cache.insert(key(*z), column);
        }
    }

    // Layout: node-major, `count` draws per node.
    fn evaluate_block(&self, block: usize, zs: &[f64]) -> Vec<f64> {
        let start = block * HS_BLOCK;
        let count = HS_BLOCK.min(self.mc_draws - start);
        let mut rng = stream_rng(self.seed, domain::HS_ORACLE, block as u64);
        let mut values = vec![0.0; self.n];
        let mut split = SplitSums::new();
        let quarter = (self.n as f64).powf(0.25);
        let mut out = vec![0.0; zs.len() * count];
        for d in 0..count {
            let t = self.measure.sample_nonzero(&mut rng, &mut values);
            split.load(quarter / t.sqrt(), &values);
            for (k, z) in zs.iter().enumerate() {
                out[k * count + d] = split.g_sum(*z).exp();
            }
        }
        out
    }

    fn node_mean(&mut self, z: f64) -> f64 {
        self.fill(&[z]);
        mean_variance(&self.cache[&key(z)]).0
    }

    /// Profile estimates on `z_grid` (strictly increasing, finite).
    pub fn profile(&mut self, z_grid: &[f64]) -> Result<HsProfile> {
        check_grid(z_grid)?;
        let n = self.mc_draws as f64;
        let (values, std_errors) = self
            .draw_values(z_grid)
            .into_iter()
            .map(|col| {
                let (mean, var) = mean_variance(col);
                (mean, (var / n).sqrt())
            })
            .unzip();
        Ok(self.wrap(z_grid, values, std_errors))
    }

    /// Profile divided by its integral: the density of the smoothed statistic.
    /// Standard errors by the delta method over draws.
    pub fn normalized_profile(&mut self, z_grid: &[f64]) -> Result<HsProfile> {
        check_grid(z_grid)?;
        let (total, per_draw) = self.integrate(|_| 1.0)?;
        let n = self.mc_draws as f64;
        let mut values = Vec::with_capacity(z_grid.len());
        let mut std_errors = Vec::with_capacity(z_grid.len());
        for col in self.draw_values(z_grid) {
            let ratio = mean_variance(col).0 / total;
            let resid: Vec<f64> = col.iter().zip(&per_draw).map(|(p, i)| p - ratio * i).collect();
            values.push(ratio);
            std_errors.push((mean_variance(&resid).1 / n).sqrt() / total);
        }
        Ok(self.wrap(z_grid, values, std_errors))
    }

    fn wrap(&self, z_grid: &[f64], values: Vec<f64>, std_errors: Vec<f64>) -> HsProfile {
        HsProfile {
            z_grid: z_grid.to_vec(),
            values,
            std_errors,
            n: self.n,
            mc_draws: self.mc_draws,
            measure: self.measure.name().to_string(),
        }
    }

    /// `int_{-L}^{L} w(z) p(z) dz` for an even weight `w`, by adaptive
    /// Simpson on `[0, L]` applied to the mean profile. Returns the value and
    /// the same rule applied to every draw.
    fn integrate<W: Fn(f64) -> f64>(&mut self, w: W) -> Result<(f64, Vec<f64>)> {
        let opts = self.opts;
        let half = self.half_width;
        let rule = adaptive_simpson_batched(
            |nodes| {
                self.fill(nodes);
                nodes.iter().map(|z| w(*z) * self.node_mean(*z)).collect()
            },
            0.0,
            half,
            opts,
        )?;
        let mut per_draw = vec![0.0; self.mc_draws];
        for (z, wt) in rule.nodes.iter().zip(&rule.weights) {
            let coef = 2.0 * wt * w(*z);
            for (acc, p) in per_draw.iter_mut().zip(&self.cache[&key(*z)]) {
                *acc += coef * p;
            }
        }
        Ok((2.0 * rule.value, per_draw))
    }

    /// `int p(z) dz`, an estimate of `Z sqrt(2 pi) / n^{1/4}`.
    pub fn partition_ratio(&mut self) -> Result<Estimate> {
        let (value, per_draw) = self.integrate(|_| 1.0)?;
        let (_, var) = mean_variance(&per_draw);
        Ok(Estimate { estimate: value, std_error: (var / self.mc_draws as f64).sqrt() })
    }

    /// `E f(W / n^{1/4} + S / (n^{1/4} sqrt(T)))` as the ratio of
    /// `int f p` to `int p`. Only the even part of `f` contributes.
    pub fn smoothed_expectation<F: Fn(f64) -> f64>(&mut self, f: F) -> Result<Estimate> {
        let (num, num_draws) = self.integrate(|z| 0.5 * (f(z) + f(-z)))?;
        let (den, den_draws) = self.integrate(|_| 1.0)?;
        let ratio = num / den;
        let resid: Vec<f64> = num_draws.iter().zip(&den_draws).map(|(a, b)| a - ratio * b).collect();
        let se = (mean_variance(&resid).1 / self.mc_draws as f64).sqrt() / den;
        Ok(Estimate { estimate: ratio, std_error: se })
    }
}

// Node magnitudes separating the precomputed levels of `SplitSums`.
const SPLIT_CUTS: [f64; 11] = [0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0];

/// `sum_i g(z a_i)` for many `z` and fixed `a_i >= 0`. At level `l`, the
/// `a_i` with `a_i SPLIT_CUTS[l] < SERIES_RADIUS` enter through power sums
/// of the series for `g`; the rest are evaluated directly. A node `z` uses
/// the first level with `z <= SPLIT_CUTS[l]`.
struct SplitSums {
    // bucket b holds the a_i inside the series radius at levels 0..b
    direct: Vec<Vec<f64>>,
    // power sums of a^4, a^6, ... per bucket, then suffix-summed per level
    powers: Vec<[f64; 16]>,
    levels: Vec<[f64; 16]>,
}

impl SplitSums {
    fn new() -> Self {
        let buckets = SPLIT_CUTS.len() + 1;
        SplitSums {
            direct: vec![Vec::new(); buckets],
            powers: vec![[0.0; 16]; buckets],
            levels: vec![[0.0; 16]; SPLIT_CUTS.len()],
        }
    }

    fn load(&mut self, scale: f64, values: &[f64]) {
        for (list, p) in self.direct.iter_mut().zip(self.powers.iter_mut()) {
            list.clear();
            *p = [0.0; 16];
        }
        for x in values {
            let a = scale * x.abs();
            let b = SPLIT_CUTS.partition_point(|c| c * a < SERIES_RADIUS);
            self.direct[b].push(a);
            if b > 0 {
                let a2 = a * a;
                let mut term = a2 * a2;
                for p in self.powers[b].iter_mut() {
                    *p += term;
                    term *= a2;
                }
            }
        }
        let mut acc = [0.0; 16];
        for level in (0..SPLIT_CUTS.len()).rev() {
            for (s, p) in acc.iter_mut().zip(&self.powers[level + 1]) {
                *s += p;
            }
            self.levels[level] = acc;
        }
    }

    fn g_sum(&self, z: f64) -> f64 {
        let z = z.abs();
        let level = SPLIT_CUTS.partition_point(|c| *c < z);
        let (series, direct) = if level < SPLIT_CUTS.len() {
            let z2 = z * z;
            let poly = G_SERIES.iter().zip(&self.levels[level]).rev().fold(0.0, |acc, (c, p)| acc * z2 + c * p);
            (z2 * z2 * poly, &self.direct[..=level])
        } else {
            (0.0, &self.direct[..])
        };
        let direct: f64 = direct.iter().flat_map(|l| l.iter()).map(|a| g(z * a)).sum();
        series + direct
    }
}

fn key(z: f64) -> u64 {
    // abs() also folds -0.0 onto 0.0
    z.abs().to_bits()
}

fn check_grid(z_grid: &[f64]) -> Result<()> {
    if z_grid.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidConfig("z grid must be finite".into()));
    }
    if z_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("z grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Profile of `n`-site configurations from `m` on `z_grid`; the ensemble
/// seed is taken from `rng`.
pub fn smoothed_density_profile<R: RngCore + ?Sized>(
    n: usize,
    m: &BaseMeasure,
    z_grid: &[f64],
    mc_draws: usize,
    rng: &mut R,
) -> Result<HsProfile> {
    HsEnsemble::new(n, m.clone(), mc_draws, derive_seed(rng))?.profile(z_grid)
}

pub fn smoothed_expectation<F, R>(
    f: F,
    n: usize,
    m: &BaseMeasure,
    mc_draws: usize,
    opts: SimpsonOptions,
    rng: &mut R,
) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    R: RngCore + ?Sized,
{
    HsEnsemble::new(n, m.clone(), mc_draws, derive_seed(rng))?.with_quadrature(opts).smoothed_expectation(f)
}

pub fn partition_ratio<R: RngCore + ?Sized>(
    n: usize,
    m: &BaseMeasure,
    mc_draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    HsEnsemble::new(n, m.clone(), mc_draws, derive_seed(rng))?.partition_ratio()
}

/// Large-`n` limit of [`partition_ratio`]: `(3 sigma^4 / (4 mu4))^{1/4} Gamma(1/4)`.
pub fn partition_ratio_limit(m: &BaseMeasure) -> Result<f64> {
    let s2 = m.variance();
    Ok((3.0 * s2 * s2 / (4.0 * m.fourth_moment())).powf(0.25) * gamma_quarter()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use crate::special::ln_gamma;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_g(y: f64) -> f64 {
        y.cosh().ln() - 0.5 * y * y
    }

    #[test]
    fn g_reference_values() {
        assert_eq!(g(0.0), 0.0);
        assert!((g(1.0) - -0.06621916951697288).abs() < 1e-16);
        let far = 50.0 - LN_2 - 1250.0;
        assert!(g(50.0).is_finite());
        assert!((g(50.0) - far).abs() < 1e-12, "{}", g(50.0));
        assert!(naive_g(1000.0).is_nan() || naive_g(1000.0).is_infinite());
        assert!(g(1000.0).is_finite());
    }

    #[test]
    fn g_series_agrees_with_direct_form() {
        for i in 1..=500 {
            let y = i as f64 * 1e-3;
            assert!((g(y) - naive_g(y)).abs() < 3e-16, "y = {y}");
        }
        for i in 0..=400 {
            let y = 0.5 + i as f64 * 0.05;
            let d = naive_g(y);
            assert!((g(y) - d).abs() <= 1e-13 * d.abs(), "y = {y}");
        }
        let below = g(SERIES_RADIUS - 1e-15);
        assert!((below - g(SERIES_RADIUS)).abs() < 1e-16);
    }

    #[test]
    fn h_reference_values() {
        assert_eq!(h(0.0), -1.0 / 12.0);
        assert!((h(1e3) + 0.5).abs() < 1e-3);
        assert!((h(1.0) - -0.13243833903394575).abs() < 1e-15);
        assert_eq!(h(1e200), -0.5);
        assert!((h(SERIES_RADIUS - 1e-15) - h(SERIES_RADIUS)).abs() < 1e-14);
        // large-|y| form against (1 + y^2) g / y^4 computed without cancellation concerns
        for y in [2.0f64, 7.5, 30.0] {
            assert!((h(y) - (1.0 + y * y) * naive_g(y) / y.powi(4)).abs() < 1e-14);
        }
    }

    #[test]
    fn lemma_constant_is_one_twelfth() {
        let c = lemma1_constant().unwrap();
        assert!(c > 0.0);
        assert!(c <= 1.0 / 12.0 + 1e-15);
        assert!((c - 1.0 / 12.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn g_sum_edge_cases() {
        assert_eq!(g_sum(0.0, &[1.0, -2.0, 3.0]).unwrap(), 0.0);
        for z in [-3.0, 0.3, 2.0, 11.0] {
            let v = g_sum(z, &[5.0]).unwrap();
            assert!((v - g(z)).abs() <= 1e-15 * g(z).abs(), "z = {z}");
        }
        assert!(matches!(g_sum(1.0, &[0.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(matches!(lemma1_check(1.0, &[0.0], 0.1), Err(Error::ZeroNorm)));
    }

    #[test]
    fn g_sum_gaussian_near_quartic_limit() {
        let n = 10_000;
        let m = BaseMeasure::gaussian(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values = m.sample(&mut rng, n);
        let v = g_sum(1.0, &values).unwrap();
        assert!((v + 0.25).abs() <= (n as f64).powf(-0.25), "{v}");
    }

    fn random_configuration(rng: &mut ChaCha8Rng, m: &BaseMeasure, n: usize) -> Vec<f64> {
        let mut values = vec![0.0; n];
        m.sample_nonzero(rng, &mut values);
        values
    }

    fn measures() -> Vec<BaseMeasure> {
        ["rademacher", "gaussian:1.7", "uniform:0.5", "twopoint:3", "discrete:0,0.2;1,0.5;2.5,0.3"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect()
    }

    #[test]
    fn lemma_holds_on_random_triples_and_fails_for_larger_constant() {
        let c = lemma1_constant().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut violations = 0;
        for (k, m) in measures().iter().cycle().take(2000).enumerate() {
            let n = rng.random_range(1..=300);
            let z = rng.random_range(-20.0..20.0);
            let values = random_configuration(&mut rng, m, n);
            assert!(lemma1_check(z, &values, c).unwrap(), "triple {k}: {m} n={n} z={z}");
            if !lemma1_check(z, &values, 10.0 * c).unwrap() {
                violations += 1;
            }
        }
        assert!(violations > 0);
    }

    proptest! {
        #[test]
        fn g_is_even_nonpositive_and_above_parabola(y in -1e3f64..1e3) {
            prop_assert_eq!(g(y).to_bits(), g(-y).to_bits());
            prop_assert!(g(y) <= 0.0);
            prop_assert!(g(y) + 0.5 * y * y >= 0.0);
            if y != 0.0 {
                prop_assert!(g(y) < 0.0);
            }
        }

        #[test]
        fn h_below_minus_c(y in -100f64..100.0) {
            prop_assert!(h(y) <= -1.0 / 12.0);
        }

        #[test]
        fn tail_bound_dominates_beyond_knee(n in 1usize..100_000, t in 1.0001f64..50.0, sign in proptest::bool::ANY) {
            let z = if sign { t } else { -t } * (n as f64).powf(0.25);
            let c = 1.0 / 12.0;
            prop_assert!(lemma1_bound(z, n, c) <= tail_bound(z, n, c) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn truncation_leaves_small_tail() {
        let c = 1.0 / 12.0;
        for m in measures() {
            for n in [1, 10, 10_000] {
                let l = truncation_half_width(n, &m, c);
                assert!(tail_mass_bound(l, n, c) < TRUNCATION_TAIL);
                let s2 = m.variance();
                assert!(l >= 8.0 * (12.0 * s2 * s2 / m.fourth_moment()).powf(0.25));
            }
        }
    }

    fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
    }

    #[test]
    fn profile_is_exactly_symmetric_and_bounded() {
        let mut e = HsEnsemble::new(50, "uniform:1".parse().unwrap(), 300, 5).unwrap();
        let zs: Vec<f64> = (-20..=20).map(|i| 0.2 * i as f64).collect();
        let p = e.profile(&zs).unwrap();
        for (i, v) in p.values.iter().enumerate() {
            let j = zs.len() - 1 - i;
            assert_eq!(v.to_bits(), p.values[j].to_bits());
            assert_eq!(p.std_errors[i].to_bits(), p.std_errors[j].to_bits());
            assert!((0.0..=1.0).contains(v));
        }
        assert_eq!(p.values[20], 1.0);
        assert_eq!(p.n, 50);
        assert_eq!(p.mc_draws, 300);
        assert_eq!(p.measure, "uniform:1");
    }

    #[test]
    fn single_site_profile_is_exact() {
        for m in measures() {
            let mut e = HsEnsemble::new(1, m.clone(), 100, 1).unwrap();
            let zs = grid(-6.0, 6.0, 24);
            let p = e.profile(&zs).unwrap();
            for ((z, v), se) in zs.iter().zip(&p.values).zip(&p.std_errors) {
                let exact = g(*z).exp();
                // a_1 = |x| / sqrt(x^2) is one up to an ulp
                assert!((v - exact).abs() <= 1e-14 * exact, "{m} z={z}");
                assert!(*se <= 1e-14 * exact);
            }
        }
    }

    #[test]
    fn single_site_partition_ratio() {
        // int cosh(z) exp(-z^2/2) dz = sqrt(2 pi e)
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = partition_ratio(1, &BaseMeasure::rademacher(), 10, &mut rng).unwrap();
        assert!((p.estimate - 4.132731354122493).abs() < 1e-8, "{p:?}");
        assert!(p.std_error < 1e-12);
    }

    /// For Gaussian sites `S^2 / T = n B` with `B ~ Beta(1/2, (n-1)/2)`,
    /// so `Z = E exp(n B / 2)` is a one-dimensional integral (`B = u^2`).
    fn gaussian_partition_ratio(n: usize) -> f64 {
        let nf = n as f64;
        let ln_beta = ln_gamma(0.5) + ln_gamma((nf - 1.0) / 2.0) - ln_gamma(nf / 2.0);
        let z = adaptive_simpson(
            |u| 2.0 * (0.5 * nf * u * u + 0.5 * (nf - 3.0) * (1.0 - u * u).ln() - ln_beta).exp(),
            0.0,
            1.0,
            SimpsonOptions::with_tol(1e-12),
        )
        .unwrap();
        z * (2.0 * std::f64::consts::PI).sqrt() / nf.powf(0.25)
    }

    #[test]
    fn gaussian_partition_ratio_matches_beta_integral() {
        let exact = gaussian_partition_ratio(100);
        assert!((exact - 2.73405769377544).abs() < 1e-9, "{exact}");
        let mut e = HsEnsemble::new(100, BaseMeasure::gaussian(1.0).unwrap(), 4000, 21).unwrap();
        let p = e.partition_ratio().unwrap();
        assert!((p.estimate - exact).abs() < 4.0 * p.std_error, "{p:?} vs {exact}");
        let limit = partition_ratio_limit(&BaseMeasure::gaussian(1.0).unwrap()).unwrap();
        assert!((limit - 2.56369335204085).abs() < 1e-12);
        assert!(p.estimate > limit);
    }

    #[test]
    fn trivial_expectations_are_exact() {
        let mut e = HsEnsemble::new(30, "gaussian:1".parse().unwrap(), 200, 9).unwrap();
        let one = e.smoothed_expectation(|_| 1.0).unwrap();
        assert_eq!(one.estimate, 1.0);
        assert_eq!(one.std_error, 0.0);
        let odd = e.smoothed_expectation(f64::tanh).unwrap();
        assert_eq!(odd.estimate, 0.0);
        let even = e.smoothed_expectation(|z| (-z * z).exp()).unwrap();
        assert!(even.estimate > 0.0 && even.estimate < 1.0);
        assert!(even.std_error > 0.0);
    }

    #[test]
    fn normalized_profile_integrates_to_one() {
        let mut e = HsEnsemble::new(40, BaseMeasure::rademacher(), 200, 2).unwrap();
        let zs = grid(-e.half_width(), e.half_width(), 4000);
        let p = e.normalized_profile(&zs).unwrap();
        let h = zs[1] - zs[0];
        let trapezoid: f64 = p.values.iter().sum::<f64>() * h;
        assert!((trapezoid - 1.0).abs() < 1e-8, "{trapezoid}");
        assert!(p.std_errors.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn execution_mode_does_not_change_estimates() {
        let m: BaseMeasure = "twopoint:2".parse().unwrap();
        let zs = grid(-3.0, 3.0, 12);
        let run = |exec| {
            let mut e = HsEnsemble::new(64, m.clone(), 3 * HS_BLOCK + 5, 4).unwrap().with_execution(exec);
            (e.profile(&zs).unwrap(), e.partition_ratio().unwrap())
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }

    #[test]
    fn grid_validation() {
        let mut e = HsEnsemble::new(3, BaseMeasure::rademacher(), 10, 0).unwrap();
        assert!(e.profile(&[0.0, 0.0]).is_err());
        assert!(e.profile(&[0.0, f64::NAN]).is_err());
        assert!(HsEnsemble::new(0, BaseMeasure::rademacher(), 10, 0).is_err());
        assert!(HsEnsemble::new(3, BaseMeasure::rademacher(), 0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = HsProfile {
            z_grid: vec![-0.5, 0.0],
            values: vec![0.25, 1.0],
            std_errors: vec![1e-20, 0.0],
            n: 1,
            mc_draws: 1,
            measure: "rademacher".into(),
        };
        assert_eq!(p.to_csv_string(), "z,value,std_error\n-0.5,0.25,1e-20\n0.0,1.0,0.0\n");
    }

    #[test]
    fn split_sums_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let values = BaseMeasure::gaussian(1.0).unwrap().sample(&mut rng, 500);
        let scale = 0.3;
        let mut split = SplitSums::new();
        split.load(scale, &values);
        for i in 0..=120 {
            let z = i as f64 * 0.1;
            let direct: f64 = values.iter().map(|x| g(z * scale * x)).sum();
            assert!((split.g_sum(z) - direct).abs() <= 1e-13 * (1.0 + direct.abs()), "z = {z}");
        }
    }
}
