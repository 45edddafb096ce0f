//! Configurations of the model and the Gibbs log-weight `S^2 / (2T)`.

use rand::Rng;

use crate::measures::BaseMeasure;
use crate::{Error, Result};

/// Number of applied updates between full recomputations of `S` and `T`.
pub const REFRESH_INTERVAL: u64 = 10_000;

/// Unnormalized log-density `S^2 / (2T)` of the Gibbs measure relative to
/// the product base measure; minus infinity on `T = 0`.
#[inline]
pub fn log_weight(sum: f64, sum_sq: f64) -> f64 {
    if sum_sq > 0.0 {
        0.5 * sum * sum / sum_sq
    } else {
        f64::NEG_INFINITY
    }
}

/// One state `(x_1, ..., x_n)` with cached `S = sum x_i`, `T = sum x_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    values: Vec<f64>,
    sum: f64,
    sum_sq: f64,
    // Exact zero test for T, immune to cancellation in the running sum.
    nonzero: usize,
    log_w: f64,
    updates_since_refresh: u64,
}

pub(crate) struct RawParts<'a> {
    pub values: &'a mut [f64],
    pub sum: &'a mut f64,
    pub sum_sq: &'a mut f64,
    pub nonzero: &'a mut usize,
    pub log_w: &'a mut f64,
}

/// Effect of replacing one coordinate, computed without mutating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteUpdate {
    pub sum: f64,
    pub sum_sq: f64,
    /// Change in log-weight; minus infinity when the move lands on `T = 0`.
    pub delta_log_weight: f64,
    nonzero: usize,
    log_w: f64,
}

impl SiteUpdate {
    /// Whether the proposed state has `T = 0`.
    pub fn is_zero_norm(&self) -> bool {
        self.nonzero == 0
    }
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("configuration needs n >= 1".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite coordinate {bad}")));
        }
        let mut c =
            Self { values, sum: 0.0, sum_sq: 0.0, nonzero: 0, log_w: f64::NEG_INFINITY, updates_since_refresh: 0 };
        c.recompute();
        Ok(c)
    }

    /// `n` i.i.d. draws from `measure`, redrawn until `T > 0`.
    pub fn sample<R: Rng + ?Sized>(measure: &BaseMeasure, n: usize, rng: &mut R) -> Result<Self> {
        let mut values = vec![0.0; n];
        if n == 0 {
            return Err(Error::InvalidConfig("configuration needs n >= 1".into()));
        }
        measure.sample_nonzero(rng, &mut values);
        Self::new(values)
    }

    /// Recomputes the cached sums from scratch.
    pub fn recompute(&mut self) {
        let (mut s, mut t, mut nz) = (0.0, 0.0, 0);
        for &x in &self.values {
            s += x;
            t += x * x;
            nz += (x != 0.0) as usize;
        }
        self.sum = s;
        self.sum_sq = if nz == 0 { 0.0 } else { t };
        self.nonzero = nz;
        self.log_w = if nz == 0 { f64::NEG_INFINITY } else { log_weight(s, t) };
        self.updates_since_refresh = 0;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cached `S`.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Cached `T`.
    pub fn sum_sq(&self) -> f64 {
        self.sum_sq
    }

    pub fn is_zero_norm(&self) -> bool {
        self.nonzero == 0
    }

    pub fn log_weight(&self) -> f64 {
        self.log_w
    }

    /// `S / (n^{1/4} sqrt(T))`; undefined on `T = 0`.
    pub fn self_normalized_stat(&self) -> Result<f64> {
        if self.is_zero_norm() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.sum / ((self.len() as f64).powf(0.25) * self.sum_sq.sqrt()))
    }

    /// `S / n^{3/4}`.
    pub fn scaled_sum_stat(&self) -> f64 {
        self.sum / (self.len() as f64).powf(0.75)
    }

    /// `S / sqrt(T)`; undefined on `T = 0`.
    pub fn self_normalized_sum(&self) -> Result<f64> {
        if self.is_zero_norm() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.sum / self.sum_sq.sqrt())
    }

    pub fn t_over_n(&self) -> f64 {
        self.sum_sq / self.len() as f64
    }

    /// The effect of setting coordinate `i` (0-based) to `value`.
    #[inline]
    pub fn propose(&self, i: usize, value: f64) -> SiteUpdate {
        let old = self.values[i];
        if old == value {
            return SiteUpdate {
                sum: self.sum,
                sum_sq: self.sum_sq,
                delta_log_weight: 0.0,
                nonzero: self.nonzero,
                log_w: self.log_w,
            };
        }
        let nonzero = self.nonzero - (old != 0.0) as usize + (value != 0.0) as usize;
        let sum = self.sum - old + value;
        if nonzero == 0 {
            return SiteUpdate {
                sum,
                sum_sq: 0.0,
                delta_log_weight: f64::NEG_INFINITY,
                nonzero,
                log_w: f64::NEG_INFINITY,
            };
        }
        let sum_sq = (self.sum_sq - old * old + value * value).max(f64::MIN_POSITIVE);
        let log_w = 0.5 * sum * sum / sum_sq;
        let delta_log_weight = if self.nonzero == 0 { f64::INFINITY } else { log_w - self.log_w };
        SiteUpdate { sum, sum_sq, delta_log_weight, nonzero, log_w }
    }

    /// Commits an update produced by [`Self::propose`] for the same `(i, value)`.
    #[inline]
    pub fn apply(&mut self, i: usize, value: f64, update: &SiteUpdate) {
        self.values[i] = value;
        self.sum = update.sum;
        self.sum_sq = update.sum_sq;
        self.nonzero = update.nonzero;
        self.log_w = update.log_w;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= REFRESH_INTERVAL {
            self.recompute();
        }
    }

    /// Sets coordinate `i` to `value` and returns the update applied.
    pub fn update_site(&mut self, i: usize, value: f64) -> SiteUpdate {
        let update = self.propose(i, value);
        self.apply(i, value, &update);
        update
    }

    /// Mutable access to the coordinates and cached sums for hot loops that
    /// keep `S`, `T` in registers. Callers must leave the caches consistent
    /// and call [`Self::note_updates`] afterwards.
    pub(crate) fn raw_parts_mut(&mut self) -> RawParts<'_> {
        RawParts {
            values: &mut self.values,
            sum: &mut self.sum,
            sum_sq: &mut self.sum_sq,
            nonzero: &mut self.nonzero,
            log_w: &mut self.log_w,
        }
    }

    /// Records `count` applied updates, refreshing the caches when due.
    pub(crate) fn note_updates(&mut self, count: u64) {
        self.updates_since_refresh += count;
        if self.updates_since_refresh >= REFRESH_INTERVAL {
            self.recompute();
        }
    }

    /// The coordinates as a flat list, for checkpoints.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}
