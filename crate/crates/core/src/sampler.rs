//! Sampling the Gibbs measure.
//!
//! Three routes: single-site Metropolis chains, self-normalized importance
//! sampling from the product measure, and brute-force enumeration for
//! finite-support measures with small `n`. The last one is the oracle the
//! other two are checked against.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::checkpoint::Checkpoint;
use crate::exec::Execution;
use crate::measures::{BaseMeasure, MeasureKind};
use crate::model::{log_weight, Configuration};
use crate::rng::{derive_seed, domain, stream_rng, StreamRng};
use crate::stats::{batch_means, ess_from_log_weights, DiscreteDistribution, DEFAULT_BATCHES};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n: usize,
    pub measure: BaseMeasure,
    pub sweeps: u64,
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub seed: u64,
    pub chains: usize,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.sweeps == 0 {
            return bad("sweeps must be positive");
        }
        if self.burn_in_sweeps >= self.sweeps {
            return bad("burn_in must be smaller than sweeps");
        }
        if self.thin_sweeps == 0 {
            return bad("thin must be positive");
        }
        if self.chains == 0 {
            return bad("chains must be positive");
        }
        Ok(())
    }

    /// Number of states kept per chain.
    pub fn retained(&self) -> usize {
        ((self.sweeps - self.burn_in_sweeps) / self.thin_sweeps) as usize
    }
}

/// Output of one Metropolis chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    /// `S / (n^{1/4} sqrt(T))` per retained state.
    pub stat_samples: Vec<f64>,
    /// `S / n^{3/4}` per retained state.
    pub scaled_samples: Vec<f64>,
    pub t_over_n_samples: Vec<f64>,
    pub acceptance_rate: f64,
    pub ess_estimate: f64,
    pub seed: u64,
    pub chain_index: usize,
}

/// One sweep of `n` single-site proposals in index order. Each proposal is
/// a fresh draw from `measure`, so the acceptance probability is
/// `min(1, exp(delta log-weight))`; moves onto `T = 0` are rejected.
/// Returns the number of accepted proposals.
pub fn metropolis_sweep<R: Rng + ?Sized>(c: &mut Configuration, measure: &BaseMeasure, rng: &mut R) -> u64 {
    // Each closure returns the proposal and the acceptance uniform. For the
    // two-point kinds both come from one 64-bit word: the sign from bit 0,
    // the uniform from the top 53 bits. Atomic kinds repeat the current value
    // often enough that skipping those (always accepted) proposals pays.
    match *measure.kind() {
        MeasureKind::Rademacher => sweep_with::<true, _, _>(c, rng, |r| signed_word(r, 1.0)),
        MeasureKind::SymmetricTwoPoint { atom } => sweep_with::<true, _, _>(c, rng, |r| signed_word(r, atom)),
        MeasureKind::Gaussian { scale } => sweep_with::<false, _, _>(c, rng, |r| {
            let v = scale * r.sample::<f64, _>(StandardNormal);
            (v, r.random::<f64>())
        }),
        MeasureKind::Uniform { .. } => sweep_with::<false, _, _>(c, rng, |r| {
            let v = measure.sample_one(r);
            (v, r.random::<f64>())
        }),
        MeasureKind::SymmetricDiscrete { .. } => sweep_with::<true, _, _>(c, rng, |r| {
            let v = measure.sample_one(r);
            (v, r.random::<f64>())
        }),
    }
}

#[inline(always)]
fn signed_word<R: Rng + ?Sized>(rng: &mut R, atom: f64) -> (f64, f64) {
    let w = rng.next_u64();
    let v = f64::from_bits(atom.to_bits() | ((w & 1) << 63));
    (v, (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

#[inline(always)]
fn sweep_with<const SKIP_SAME: bool, R, F>(c: &mut Configuration, rng: &mut R, mut draw: F) -> u64
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> (f64, f64),
{
    let parts = c.raw_parts_mut();
    let values = parts.values;
    let (mut s, mut t, mut nz, mut lw) = (*parts.sum, *parts.sum_sq, *parts.nonzero, *parts.log_w);
    let mut accepted = 0u64;
    for x in values.iter_mut() {
        let (v, u) = draw(rng);
        let old = *x;
        if SKIP_SAME && v == old {
            accepted += 1;
            continue;
        }
        let nz_new = nz - (old != 0.0) as usize + (v != 0.0) as usize;
        if nz_new == 0 {
            continue;
        }
        let s_new = s - old + v;
        let t_new = (t - old * old + v * v).max(f64::MIN_POSITIVE);
        let lw_new = 0.5 * s_new * s_new / t_new;
        // lw is -inf only on the all-zero start, where any move is uphill.
        let delta = lw_new - lw;
        // 1 + delta <= exp(delta), and u < 1 + delta holds for every uphill
        // move, so the exp is only reached on a small share of proposals.
        if u < 1.0 + delta || u < delta.exp() {
            *x = v;
            s = s_new;
            t = t_new;
            nz = nz_new;
            lw = lw_new;
            accepted += 1;
        }
    }
    *parts.sum = s;
    *parts.sum_sq = t;
    *parts.nonzero = nz;
    *parts.log_w = lw;
    c.note_updates(accepted);
    accepted
}

/// A Metropolis chain with its own generator and counters.
#[derive(Debug, Clone)]
pub struct Chain {
    config: Configuration,
    measure: BaseMeasure,
    rng: StreamRng,
    seed: u64,
    chain_index: usize,
    sweeps_done: u64,
    accepted: u64,
    proposed: u64,
}

impl Chain {
    /// Starts chain `chain_index` from i.i.d. draws (redrawn until `T > 0`).
    pub fn new(n: usize, measure: BaseMeasure, seed: u64, chain_index: usize) -> Result<Self> {
        let mut rng = stream_rng(seed, domain::CHAIN, chain_index as u64);
        let config = Configuration::sample(&measure, n, &mut rng)?;
        Ok(Self { config, measure, rng, seed, chain_index, sweeps_done: 0, accepted: 0, proposed: 0 })
    }

    pub fn sweep(&mut self) {
        self.accepted += metropolis_sweep(&mut self.config, &self.measure, &mut self.rng);
        self.proposed += self.config.len() as u64;
        self.sweeps_done += 1;
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            measure: self.measure.name().to_string(),
            values: self.config.to_flat(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
            seed: self.seed,
            chain_index: self.chain_index as u64,
            sweeps_done: self.sweeps_done,
            accepted: self.accepted,
            proposed: self.proposed,
        }
    }

    pub fn resume(cp: &Checkpoint) -> Result<Self> {
        use rand::SeedableRng;
        let measure: BaseMeasure = cp.measure.parse()?;
        let mut rng = StreamRng::from_seed(cp.rng_seed);
        rng.set_stream(cp.rng_stream);
        rng.set_word_pos(cp.rng_word_pos);
        Ok(Self {
            config: Configuration::from_flat(&cp.values)?,
            measure,
            rng,
            seed: cp.seed,
            chain_index: cp.chain_index as usize,
            sweeps_done: cp.sweeps_done,
            accepted: cp.accepted,
            proposed: cp.proposed,
        })
    }
}

/// Runs one chain of `cfg`.
pub fn run_chain(cfg: &SamplerConfig, chain_index: usize) -> Result<ChainRun> {
    cfg.validate()?;
    let mut chain = Chain::new(cfg.n, cfg.measure.clone(), cfg.seed, chain_index)?;
    for _ in 0..cfg.burn_in_sweeps {
        chain.sweep();
    }
    let retained = cfg.retained();
    let mut stat = Vec::with_capacity(retained);
    let mut scaled = Vec::with_capacity(retained);
    let mut t_over_n = Vec::with_capacity(retained);
    for _ in 0..retained {
        for _ in 0..cfg.thin_sweeps {
            chain.sweep();
        }
        let c = chain.configuration();
        stat.push(c.self_normalized_stat()?);
        scaled.push(c.scaled_sum_stat());
        t_over_n.push(c.t_over_n());
    }
    let ess_estimate = match diagnostics(&stat) {
        Ok(d) => d.ess,
        Err(_) => stat.len() as f64,
    };
    Ok(ChainRun {
        stat_samples: stat,
        scaled_samples: scaled,
        t_over_n_samples: t_over_n,
        acceptance_rate: chain.acceptance_rate(),
        ess_estimate,
        seed: cfg.seed,
        chain_index,
    })
}

/// Runs `cfg.chains` independent chains; chain `k` uses stream `k` of the seed.
pub fn run_chains(cfg: &SamplerConfig) -> Result<Vec<ChainRun>> {
    run_chains_with(cfg, Execution::default())
}

pub fn run_chains_with(cfg: &SamplerConfig, exec: Execution) -> Result<Vec<ChainRun>> {
    cfg.validate()?;
    exec.map_indexed(cfg.chains, |k| run_chain(cfg, k)).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub ess: f64,
    /// Integrated autocorrelation time; infinite for a constant series.
    pub tau: f64,
    pub degenerate: bool,
}

/// Minimum series length for [`diagnostics`].
pub const MIN_DIAGNOSTIC_SAMPLES: usize = 100;

/// Batch-means estimate (50 batches) of the integrated autocorrelation time
/// `tau = b Var(batch means) / Var(samples)` and `ESS = N / max(tau, 1)`.
/// A constant series is flagged with `tau = inf` and `ESS = 1`.
pub fn diagnostics(samples: &[f64]) -> Result<Diagnostics> {
    if samples.len() < MIN_DIAGNOSTIC_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_DIAGNOSTIC_SAMPLES, got: samples.len() });
    }
    let bm = batch_means(samples, DEFAULT_BATCHES)?;
    if bm.sample_variance == 0.0 {
        return Ok(Diagnostics { ess: 1.0, tau: f64::INFINITY, degenerate: true });
    }
    let tau = bm.batch_size as f64 * bm.batch_variance / bm.sample_variance;
    Ok(Diagnostics { ess: samples.len() as f64 / tau.max(1.0), tau, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    /// `S / (n^{1/4} sqrt(T))`.
    pub stat: f64,
    /// `S^2 / (2T)`, in `[0, n/2]`.
    pub log_weight: f64,
}

#[derive(Debug, Clone)]
pub struct ImportanceRun {
    pub n: usize,
    pub samples: Vec<WeightedSample>,
    pub ess: f64,
}

impl ImportanceRun {
    /// Self-normalized estimate of `E[f(stat)]` and its delta-method error.
    pub fn estimate<F: Fn(f64) -> f64>(&self, f: F) -> (f64, f64) {
        let values: Vec<f64> = self.samples.iter().map(|s| f(s.stat)).collect();
        let lw: Vec<f64> = self.samples.iter().map(|s| s.log_weight).collect();
        crate::stats::weighted_mean(&values, &lw)
    }
}

/// Draws per independent block of importance samples.
pub const IMPORTANCE_BLOCK: usize = 4096;

/// i.i.d. configurations from the product measure (rejecting `T = 0`),
/// weighted by `exp(S^2 / (2T))`.
pub fn importance_sample<R: Rng + ?Sized>(
    n: usize,
    measure: &BaseMeasure,
    draws: usize,
    rng: &mut R,
) -> Result<ImportanceRun> {
    importance_sample_with(n, measure, draws, rng, Execution::default())
}

pub fn importance_sample_with<R: Rng + ?Sized>(
    n: usize,
    measure: &BaseMeasure,
    draws: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<ImportanceRun> {
    if n == 0 || draws == 0 {
        return Err(Error::InvalidConfig("importance sampling needs n >= 1 and draws >= 1".into()));
    }
    let base = derive_seed(rng);
    let blocks = draws.div_ceil(IMPORTANCE_BLOCK);
    let quarter = (n as f64).powf(0.25);
    let parts = exec.map_indexed(blocks, |b| {
        let count = IMPORTANCE_BLOCK.min(draws - b * IMPORTANCE_BLOCK);
        let mut rng = stream_rng(base, domain::IMPORTANCE, b as u64);
        let mut x = vec![0.0; n];
        (0..count)
            .map(|_| {
                let t = measure.sample_nonzero(&mut rng, &mut x);
                let s: f64 = x.iter().sum();
                WeightedSample { stat: s / (quarter * t.sqrt()), log_weight: log_weight(s, t) }
            })
            .collect::<Vec<_>>()
    });
    let samples: Vec<WeightedSample> = parts.into_iter().flatten().collect();
    let lw: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
    Ok(ImportanceRun { n, ess: ess_from_log_weights(&lw), samples })
}

/// Largest state space [`enumerate_exact`] will visit.
pub const MAX_ENUMERATED_STATES: f64 = 1e7;
pub const MAX_ENUMERATED_N: usize = 20;
/// Values of `S / sqrt(T)` closer than this are merged.
pub const ENUMERATION_MERGE_TOL: f64 = 1e-12;

/// Exact law of `S / sqrt(T)` under the Gibbs measure for a finite-support
/// base measure, by visiting every tuple.
pub fn enumerate_exact(n: usize, measure: &BaseMeasure) -> Result<DiscreteDistribution> {
    let support = measure.support().ok_or_else(|| Error::NotFiniteSupport(measure.name().to_string()))?;
    let k = support.len();
    let states = (k as f64).powi(n as i32);
    if n == 0 || n > MAX_ENUMERATED_N || states > MAX_ENUMERATED_STATES {
        return Err(Error::StateSpaceTooLarge { states, limit: MAX_ENUMERATED_STATES });
    }
    let mut digits = vec![0usize; n];
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    loop {
        let (mut s, mut t, mut p) = (0.0, 0.0, 1.0);
        for &d in &digits {
            let (x, px) = support[d];
            s += x;
            t += x * x;
            p *= px;
        }
        if t > 0.0 && p > 0.0 {
            let w = p * log_weight(s, t).exp();
            total += w;
            pairs.push((s / t.sqrt(), w));
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                let dist = DiscreteDistribution::from_pairs(
                    pairs.into_iter().map(|(v, w)| (v, w / total)),
                    ENUMERATION_MERGE_TOL,
                );
                return Ok(dist);
            }
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
