//! The acceptance checks run by `cwsoc verify` and by the `acceptance` test
//! target. Every threshold lives in this file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use cwsoc::hs_oracle::{lemma1_check, lemma1_constant, partition_ratio_limit, HsEnsemble, LEMMA_SCAN_STEP};
use cwsoc::quadrature::{adaptive_simpson, SimpsonOptions};
use cwsoc::rng::{derive_seed, domain, stream_rng, StreamRng};
use cwsoc::sampler::{enumerate_exact, run_chains_with, ChainRun, SamplerConfig};
use cwsoc::special::{gamma_quarter, reflection_residual};
use cwsoc::stats::{
    ks_critical_value, ks_statistic, mean_variance, tv_distance, DiscreteDistribution, EmpiricalDistribution, KS_ALPHA,
};
use cwsoc::{BaseMeasure, Configuration, Execution, QuarticLaw};

use crate::commands::{self, pooled_mean, total_ess};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const CRITERIA: [&str; 11] = ["AC1", "AC2", "AC3", "AC4", "AC5", "AC6", "AC7", "AC8", "AC9", "AC10", "AC11"];

pub const DEFAULT_SEED: u64 = 1;

// exact-oracle equivalence
const AC1_N: usize = 8;
const AC1_SWEEPS: u64 = 1_000_000;
const AC1_BURN_IN: u64 = 10_000;
const AC1_MAX_TV: f64 = 0.01;
const AC1_MAX_SECONDS: f64 = 60.0;

// chain campaign shared by the fluctuation and concentration checks
const CAMPAIGN_NS: [usize; 2] = [400, 1600];
const CAMPAIGN_MEASURES: [&str; 3] = ["gaussian:1", "rademacher", "gaussian:2"];
const CAMPAIGN_CHAINS: usize = 4;
const CAMPAIGN_BURN_IN: u64 = 10_000;
const CAMPAIGN_THIN: u64 = 10;
// retained sweeps per chain, before thinning
const CAMPAIGN_SWEEPS: [u64; 2] = [375_000, 750_000];
const AC2_MEASURES: [&str; 2] = ["gaussian:1", "rademacher"];
const AC2_MAX_KS: [f64; 2] = [0.05, 0.035];
const AC2_MIN_ESS: f64 = 5_000.0;
const AC2_MAX_SECONDS: f64 = 600.0;
const AC3_MEASURE: &str = "gaussian:2";
const AC3_MAX_KS: f64 = 0.05;
const AC3_MIN_SWAPPED_KS: f64 = 0.15;
// T/n is identically 1 for Rademacher sites, so only spread-out measures
const AC4_MEASURES: [&str; 2] = ["gaussian:1", "gaussian:2"];
const AC4_SE_MULTIPLE: f64 = 3.0;

// smoothing profile against the limit and against chains
const AC5_N: usize = 10_000;
const AC5_DRAWS: usize = 10_000;
const AC5_GRID_HALF_STEPS: i32 = 30;
const AC5_GRID_STEP: f64 = 0.1;
const AC5_SE_MULTIPLE: f64 = 3.0;
const AC5_CHAINS: usize = 4;
const AC5_SWEEPS: u64 = 65_000;
const AC5_BURN_IN: u64 = 2_500;
const AC5_THIN: u64 = 5;
const AC5_BINS: usize = 12;
const AC5_HIST_HALF_WIDTH: f64 = 3.0;
const AC5_MAX_SECONDS: f64 = 300.0;

const AC6_NS: [usize; 3] = [100, 1_000, 10_000];
const AC6_DRAWS: usize = 10_000;
const AC6_SE_MULTIPLE: f64 = 3.0;

const AC7_TRIPLES: usize = 10_000;
const AC7_MAX_N: usize = 1_000;
const AC7_MAX_Z: f64 = 20.0;
const AC7_C_SLACK: f64 = 1e-9;

const AC8_REL_TOL: f64 = 1e-8;
const AC8_REFLECTION_TOL: f64 = 1e-12;

const AC9_NORM_TOL: f64 = 1e-10;
const AC9_DRAWS: usize = 1_000_000;
const AC9_MAX_KS: f64 = 0.002;
const AC9_MOMENT_REL: f64 = 0.01;
const AC9_ANALYTIC_REL: f64 = 1e-10;

const AC10_CONFIGS: usize = 1_000;
const AC10_MAX_N: usize = 200;
const AC10_SCALES: [f64; 3] = [1e-3, 7.0, 1e3];
const AC10_TOL: f64 = 1e-12;

const AC11_THREADS: [usize; 3] = [1, 1, 4];

/// Measures covering every kind.
pub const KIND_SAMPLES: [&str; 5] =
    ["rademacher", "gaussian:1", "uniform:1", "twopoint:2", "discrete:0,0.2;1,0.5;2.5,0.3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Run lengths as pinned above.
    Full,
    /// Short runs for smoke tests; verdicts are not meaningful.
    Quick,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyPlan {
    pub seed: u64,
    pub scale: Scale,
    /// Compare each statistic with the other statistic's limit law.
    pub swap_law: bool,
    pub exec: Execution,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan { seed: DEFAULT_SEED, scale: Scale::Full, swap_law: false, exec: Execution::default() }
    }
}

impl VerifyPlan {
    fn sweeps(&self, full: u64) -> u64 {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => (full / 100).max(2_000),
        }
    }

    fn burn_in(&self, full: u64) -> u64 {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => (full / 100).max(200),
        }
    }

    fn draws(&self, full: usize) -> usize {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => (full / 50).max(200),
        }
    }

    fn sites(&self, full: usize) -> usize {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => full / 10,
        }
    }

    fn seed_for(&self, tag: u64) -> u64 {
        derive_seed(&mut stream_rng(self.seed, domain::VERIFY, tag))
    }

    fn rng_for(&self, tag: u64) -> StreamRng {
        stream_rng(self.seed, domain::VERIFY, tag)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub summary: String,
    pub seconds: f64,
    pub metrics: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub scale: Scale,
    pub swap_law: bool,
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

impl Report {
    pub fn write(&self, path: &Path) -> Result<()> {
        commands::write_json(path, self)
    }
}

impl CriterionOutcome {
    /// One line: id, verdict, summary and timing.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{:<5}{verdict}  {}  ({:.1} s)", self.id, self.summary, self.seconds)
    }
}

struct Check {
    title: &'static str,
    passed: bool,
    summary: String,
    metrics: Value,
}

struct CampaignRun {
    measure: BaseMeasure,
    n: usize,
    chains: Vec<ChainRun>,
}

impl CampaignRun {
    fn series(&self, pick: impl Fn(&ChainRun) -> &[f64]) -> Vec<&[f64]> {
        self.chains.iter().map(pick).collect()
    }

    fn pooled(&self, pick: impl Fn(&ChainRun) -> &[f64]) -> Vec<f64> {
        self.chains.iter().flat_map(|c| pick(c).iter().copied()).collect()
    }
}

/// Runs shared between criteria.
pub struct Session {
    plan: VerifyPlan,
    campaign: Option<(Vec<CampaignRun>, f64)>,
    large_ensemble: Option<(HsEnsemble, f64)>,
}

impl Session {
    pub fn new(plan: VerifyPlan) -> Self {
        Session { plan, campaign: None, large_ensemble: None }
    }

    pub fn plan(&self) -> &VerifyPlan {
        &self.plan
    }

    /// Runs one criterion. Errors inside a check count as a failure.
    pub fn run(&mut self, id: &str) -> Result<CriterionOutcome> {
        let start = Instant::now();
        let outcome = match id {
            "AC1" => self.ac1(),
            "AC2" => self.ac2(),
            "AC3" => self.ac3(),
            "AC4" => self.ac4(),
            "AC5" => self.ac5(),
            "AC6" => self.ac6(),
            "AC7" => self.ac7(),
            "AC8" => self.ac8(),
            "AC9" => self.ac9(),
            "AC10" => self.ac10(),
            "AC11" => self.ac11(),
            other => return Err(CliError::config("only", format!("unknown criterion {other}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let check = outcome.unwrap_or_else(|e| Check {
            title: "error",
            passed: false,
            summary: format!("error: {e}"),
            metrics: Value::Null,
        });
        Ok(CriterionOutcome {
            id: id.to_string(),
            title: check.title.to_string(),
            passed: check.passed,
            summary: check.summary,
            seconds,
            metrics: check.metrics,
        })
    }

    fn ac1(&mut self) -> Result<Check> {
        let p = self.plan;
        let m = BaseMeasure::rademacher();
        let start = Instant::now();
        let burn_in = p.burn_in(AC1_BURN_IN);
        let cfg = SamplerConfig {
            n: AC1_N,
            measure: m.clone(),
            sweeps: burn_in + p.sweeps(AC1_SWEEPS),
            burn_in_sweeps: burn_in,
            thin_sweeps: 1,
            seed: p.seed_for(1),
            chains: 1,
        };
        let run = run_chains_with(&cfg, p.exec)?.remove(0);
        let quarter = (AC1_N as f64).powf(0.25);
        let values: Vec<f64> = run.stat_samples.iter().map(|s| s * quarter).collect();
        let emp = DiscreteDistribution::from_samples(&values, 1e-9);
        let exact = enumerate_exact(AC1_N, &m)?;
        let tv = tv_distance(&emp, &exact)?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(Check {
            title: "chain vs exact enumeration",
            passed: tv <= AC1_MAX_TV && seconds <= AC1_MAX_SECONDS,
            summary: format!("TV {tv:.5} (max {AC1_MAX_TV}), {seconds:.1} s (max {AC1_MAX_SECONDS} s)"),
            metrics: json!({ "tv": tv, "max_tv": AC1_MAX_TV, "samples": values.len(), "seconds": seconds }),
        })
    }

    fn campaign(&mut self) -> Result<(&[CampaignRun], f64)> {
        if self.campaign.is_none() {
            let p = self.plan;
            let start = Instant::now();
            let mut runs = Vec::new();
            for (k, spec) in CAMPAIGN_MEASURES.iter().enumerate() {
                let measure: BaseMeasure = spec.parse()?;
                for (j, (&n, &sweeps)) in CAMPAIGN_NS.iter().zip(&CAMPAIGN_SWEEPS).enumerate() {
                    let burn_in = p.burn_in(CAMPAIGN_BURN_IN);
                    let cfg = SamplerConfig {
                        n,
                        measure: measure.clone(),
                        sweeps: burn_in + p.sweeps(sweeps),
                        burn_in_sweeps: burn_in,
                        thin_sweeps: CAMPAIGN_THIN,
                        seed: p.seed_for(10 + (k * CAMPAIGN_NS.len() + j) as u64),
                        chains: CAMPAIGN_CHAINS,
                    };
                    runs.push(CampaignRun { measure: measure.clone(), n, chains: run_chains_with(&cfg, p.exec)? });
                }
            }
            self.campaign = Some((runs, start.elapsed().as_secs_f64()));
        }
        let (runs, secs) = self.campaign.as_ref().expect("campaign just ran");
        Ok((runs.as_slice(), *secs))
    }

    fn campaign_run(&mut self, spec: &str, n: usize) -> Result<&CampaignRun> {
        let measure: BaseMeasure = spec.parse()?;
        let (runs, _) = self.campaign()?;
        Ok(runs.iter().find(|r| r.measure == measure && r.n == n).expect("campaign covers every measure and n"))
    }

    fn ac2(&mut self) -> Result<Check> {
        let swap = self.plan.swap_law;
        let (_, campaign_secs) = self.campaign()?;
        let start = Instant::now();
        let mut passed = true;
        let mut parts = Vec::new();
        let mut metrics = serde_json::Map::new();
        for spec in AC2_MEASURES {
            let mut ks = Vec::new();
            let mut per_n = serde_json::Map::new();
            for (&n, &max_ks) in CAMPAIGN_NS.iter().zip(&AC2_MAX_KS) {
                let run = self.campaign_run(spec, n)?;
                let law =
                    if swap { swapped_rate_law(&run.measure, false)? } else { QuarticLaw::theorem1(&run.measure) };
                let samples = run.pooled(|c| &c.stat_samples);
                let ess = total_ess(&run.series(|c| &c.stat_samples));
                let d = ks_against(&samples, &law)?;
                let ok = d <= max_ks && ess >= AC2_MIN_ESS;
                passed &= ok;
                ks.push(d);
                per_n.insert(
                    n.to_string(),
                    json!({
                        "ks": d,
                        "max_ks": max_ks,
                        "ess": ess,
                        "min_ess": AC2_MIN_ESS,
                        "samples": samples.len(),
                        "ess_adjusted_threshold": ks_critical_value(KS_ALPHA, ess),
                        "law_rate": law.a(),
                    }),
                );
                parts.push(format!("{spec} n={n}: KS {d:.4} ESS {ess:.0}"));
            }
            let ordered = ks[1] < ks[0];
            passed &= ordered;
            per_n.insert("decreasing".into(), json!(ordered));
            metrics.insert(spec.to_string(), Value::Object(per_n));
        }
        let seconds = campaign_secs + start.elapsed().as_secs_f64();
        passed &= seconds <= AC2_MAX_SECONDS;
        metrics.insert("seconds_including_shared_runs".into(), json!(seconds));
        Ok(Check {
            title: "self-normalized statistic vs quartic law",
            passed,
            summary: format!("{}; {seconds:.0} s with shared runs", parts.join("; ")),
            metrics: Value::Object(metrics),
        })
    }

    fn ac3(&mut self) -> Result<Check> {
        let swap = self.plan.swap_law;
        let n = CAMPAIGN_NS[1];
        let run = self.campaign_run(AC3_MEASURE, n)?;
        let proper = QuarticLaw::theorem2(&run.measure)?;
        let other = swapped_rate_law(&run.measure, true)?;
        let (law, guard) = if swap { (other, proper) } else { (proper, other) };
        let samples = run.pooled(|c| &c.scaled_samples);
        let ess = total_ess(&run.series(|c| &c.scaled_samples));
        let d = ks_against(&samples, &law)?;
        let d_guard = ks_against(&samples, &guard)?;
        Ok(Check {
            title: "scaled sum vs quartic law, with falsification guard",
            passed: d <= AC3_MAX_KS && d_guard >= AC3_MIN_SWAPPED_KS,
            summary: format!(
                "{AC3_MEASURE} n={n}: KS {d:.4} (max {AC3_MAX_KS}), other-form law KS {d_guard:.4} (min {AC3_MIN_SWAPPED_KS})"
            ),
            metrics: json!({
                "ks": d,
                "max_ks": AC3_MAX_KS,
                "law_rate": law.a(),
                "swapped_ks": d_guard,
                "min_swapped_ks": AC3_MIN_SWAPPED_KS,
                "swapped_rate": guard.a(),
                "ess": ess,
                "ess_adjusted_threshold": ks_critical_value(KS_ALPHA, ess),
            }),
        })
    }

    fn ac4(&mut self) -> Result<Check> {
        let mut passed = true;
        let mut parts = Vec::new();
        let mut metrics = serde_json::Map::new();
        for spec in AC4_MEASURES {
            let mut sds = Vec::new();
            let mut per_n = serde_json::Map::new();
            for n in CAMPAIGN_NS {
                let run = self.campaign_run(spec, n)?;
                let sigma2 = run.measure.variance();
                let mean = pooled_mean(&run.series(|c| &c.t_over_n_samples))?;
                let (_, var) = mean_variance(&run.pooled(|c| &c.t_over_n_samples));
                let sd = var.sqrt();
                let z = (mean.estimate - sigma2).abs() / mean.std_error;
                let ok = (mean.estimate - sigma2).abs() <= AC4_SE_MULTIPLE * mean.std_error;
                passed &= ok;
                sds.push(sd);
                per_n.insert(
                    n.to_string(),
                    json!({ "mean": mean.estimate, "std_error": mean.std_error, "sigma2": sigma2, "sd": sd, "z": z }),
                );
                parts.push(format!("{spec} n={n}: mean {:.5} ({z:.1} SE) sd {sd:.4}", mean.estimate));
            }
            let shrinking = sds[1] < sds[0];
            passed &= shrinking;
            per_n.insert("sd_decreasing".into(), json!(shrinking));
            metrics.insert(spec.to_string(), Value::Object(per_n));
        }
        metrics.insert("excluded".into(), json!({ "rademacher": "T/n is identically 1" }));
        Ok(Check { title: "concentration of T/n", passed, summary: parts.join("; "), metrics: Value::Object(metrics) })
    }

    fn large_ensemble(&mut self) -> Result<(&mut HsEnsemble, f64)> {
        if self.large_ensemble.is_none() {
            let p = self.plan;
            let start = Instant::now();
            let mut e =
                HsEnsemble::new(p.sites(AC5_N), BaseMeasure::gaussian(1.0)?, p.draws(AC5_DRAWS), p.seed_for(30))?
                    .with_execution(p.exec);
            e.partition_ratio()?;
            self.large_ensemble = Some((e, start.elapsed().as_secs_f64()));
        }
        let (e, secs) = self.large_ensemble.as_mut().expect("ensemble just built");
        Ok((e, *secs))
    }

    fn ac5(&mut self) -> Result<Check> {
        let p = self.plan;
        let start = Instant::now();
        let m = BaseMeasure::gaussian(1.0)?;
        let law = QuarticLaw::theorem1(&m);
        let (ensemble, build_secs) = self.large_ensemble()?;
        let n = ensemble.n();

        let grid: Vec<f64> = (-AC5_GRID_HALF_STEPS..=AC5_GRID_HALF_STEPS).map(|i| AC5_GRID_STEP * i as f64).collect();
        let profile = ensemble.normalized_profile(&grid)?;
        let mut violations = 0;
        let (mut worst_z, mut worst_score, mut max_gap) = (0.0, 0.0, 0.0f64);
        for ((z, v), se) in grid.iter().zip(&profile.values).zip(&profile.std_errors) {
            max_gap = max_gap.max((v - law.pdf(*z)).abs());
            let score = (v - law.pdf(*z)).abs() / se;
            if score.is_nan() || score > AC5_SE_MULTIPLE {
                violations += 1;
            }
            if score > worst_score {
                worst_score = score;
                worst_z = *z;
            }
        }
        let pointwise_ok = violations == 0;

        // chains at the same n, with the smoothing noise drawn explicitly
        let cfg = SamplerConfig {
            n,
            measure: m.clone(),
            sweeps: p.sweeps(AC5_SWEEPS),
            burn_in_sweeps: p.burn_in(AC5_BURN_IN),
            thin_sweeps: AC5_THIN,
            seed: p.seed_for(31),
            chains: AC5_CHAINS,
        };
        let runs = run_chains_with(&cfg, p.exec)?;
        let mut noise = p.rng_for(32);
        let normal = BaseMeasure::gaussian(1.0)?;
        let scale = (n as f64).powf(-0.25);
        let smoothed: Vec<Vec<f64>> = runs
            .iter()
            .map(|r| r.stat_samples.iter().map(|s| s + scale * normal.sample_one(&mut noise)).collect())
            .collect();
        let ess = total_ess(&runs.iter().map(|r| r.stat_samples.as_slice()).collect::<Vec<_>>());
        let width = 2.0 * AC5_HIST_HALF_WIDTH / AC5_BINS as f64;
        let mut bins = Vec::new();
        let mut hist_ok = true;
        let mut worst_bin = 0.0f64;
        for k in 0..AC5_BINS {
            let lo = -AC5_HIST_HALF_WIDTH + width * k as f64;
            let hi = lo + width;
            let indicators: Vec<Vec<f64>> = smoothed
                .iter()
                .map(|ys| ys.iter().map(|y| if *y >= lo && *y < hi { 1.0 } else { 0.0 }).collect())
                .collect();
            let refs: Vec<&[f64]> = indicators.iter().map(|v| v.as_slice()).collect();
            let frac = pooled_mean(&refs)?;
            let ends = ensemble.normalized_profile(&[lo, 0.5 * (lo + hi), hi])?;
            // Simpson over the bin; errors added linearly, an upper bound
            let mass = width / 6.0 * (ends.values[0] + 4.0 * ends.values[1] + ends.values[2]);
            let mass_se = width / 6.0 * (ends.std_errors[0] + 4.0 * ends.std_errors[1] + ends.std_errors[2]);
            // batch means give 0 for a bin with no hits; floor at the binomial error of the profile mass
            let chain_se = frac.std_error.max((mass * (1.0 - mass) / ess).sqrt());
            let combined = (mass_se * mass_se + chain_se * chain_se).sqrt();
            let score = (mass - frac.estimate).abs() / combined;
            hist_ok &= score <= AC5_SE_MULTIPLE;
            worst_bin = worst_bin.max(score);
            bins.push(json!({ "lo": lo, "hi": hi, "profile_mass": mass, "profile_se": mass_se,
                              "chain_fraction": frac.estimate, "chain_se": chain_se, "score": score }));
        }
        let seconds = build_secs + start.elapsed().as_secs_f64();
        let in_time = seconds <= AC5_MAX_SECONDS;
        Ok(Check {
            title: "smoothing profile vs limit density and vs chains",
            passed: pointwise_ok && hist_ok && in_time,
            summary: format!(
                "vs limit pdf: {violations}/{} points beyond {AC5_SE_MULTIPLE} SE (worst {worst_score:.1} SE at z={worst_z}, largest gap {max_gap:.5}); \
                 vs chain histogram: worst bin {worst_bin:.2} SE; {seconds:.0} s",
                grid.len()
            ),
            metrics: json!({
                "n": n,
                "mc_draws": profile.mc_draws,
                "pointwise": { "violations": violations, "points": grid.len(), "worst_score": worst_score,
                               "worst_z": worst_z, "max_abs_gap": max_gap, "passed": pointwise_ok,
                               "values": profile.values, "std_errors": profile.std_errors,
                               "limit_pdf": grid.iter().map(|z| law.pdf(*z)).collect::<Vec<_>>(), "z": grid },
                "histogram": { "bins": bins, "worst_score": worst_bin, "passed": hist_ok, "chain_ess": ess },
                "seconds": seconds,
            }),
        })
    }

    fn ac6(&mut self) -> Result<Check> {
        let p = self.plan;
        let m = BaseMeasure::gaussian(1.0)?;
        let target = partition_ratio_limit(&m)?;
        let mut estimates = Vec::new();
        for (k, &n) in AC6_NS.iter().enumerate() {
            let n = p.sites(n);
            let est = if k + 1 == AC6_NS.len() {
                self.large_ensemble()?.0.partition_ratio()?
            } else {
                HsEnsemble::new(n, m.clone(), p.draws(AC6_DRAWS), p.seed_for(40 + k as u64))?
                    .with_execution(p.exec)
                    .partition_ratio()?
            };
            estimates.push((n, est));
        }
        let errors: Vec<f64> = estimates.iter().map(|(_, e)| (e.estimate - target).abs()).collect();
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        let (_, last) = estimates[estimates.len() - 1];
        let final_score = errors[errors.len() - 1] / last.std_error;
        let final_ok = final_score <= AC6_SE_MULTIPLE;
        let parts: Vec<String> = estimates
            .iter()
            .zip(&errors)
            .map(|((n, e), err)| format!("n={n}: {:.5}±{:.5} (error {err:.5})", e.estimate, e.std_error))
            .collect();
        Ok(Check {
            title: "partition ratio vs its limit",
            passed: decreasing && final_ok,
            summary: format!(
                "target {target:.7}; {}; decreasing {decreasing}; final {final_score:.1} SE (max {AC6_SE_MULTIPLE})",
                parts.join("; ")
            ),
            metrics: json!({
                "target": target,
                "estimates": estimates.iter().map(|(n, e)| json!({ "n": n, "estimate": e.estimate, "std_error": e.std_error }))
                    .collect::<Vec<_>>(),
                "errors": errors,
                "decreasing": decreasing,
                "final_score": final_score,
                "final_within": final_ok,
            }),
        })
    }

    fn ac7(&mut self) -> Result<Check> {
        let p = self.plan;
        let c = lemma1_constant()?;
        let measures: Vec<BaseMeasure> = KIND_SAMPLES.iter().map(|s| s.parse()).collect::<cwsoc::Result<_>>()?;
        let mut rng = p.rng_for(50);
        let triples = p.draws(AC7_TRIPLES * 50) / 50;
        let mut failures = 0;
        let mut values = Vec::new();
        for k in 0..triples {
            let m = &measures[k % measures.len()];
            let n = rng.random_range(1..=AC7_MAX_N);
            let z = rng.random_range(-AC7_MAX_Z..=AC7_MAX_Z);
            values.resize(n, 0.0);
            m.sample_nonzero(&mut rng, &mut values);
            if !lemma1_check(z, &values, c)? {
                failures += 1;
            }
        }
        let c_ok = c <= 1.0 / 12.0 + AC7_C_SLACK;
        Ok(Check {
            title: "lower bound on the log-cosh sum",
            passed: failures == 0 && c_ok,
            summary: format!(
                "c = {c:.15} (certified on a grid of step {}), {failures}/{triples} violations",
                LEMMA_SCAN_STEP / 10.0
            ),
            metrics: json!({ "c": c, "one_twelfth": 1.0 / 12.0, "triples": triples, "violations": failures, "certified": true }),
        })
    }

    fn ac8(&mut self) -> Result<Check> {
        let g = gamma_quarter()?;
        let mut worst: f64 = 0.0;
        let mut rows = Vec::new();
        for spec in KIND_SAMPLES {
            let m: BaseMeasure = spec.parse()?;
            let (s2, mu4) = (m.variance(), m.fourth_moment());
            let rate = mu4 / (12.0 * s2 * s2);
            // integrand below e^{-750} beyond the cut
            let cut = (750.0 / rate).powf(0.25);
            let half = adaptive_simpson(|z| (-rate * z.powi(4)).exp(), 0.0, cut, SimpsonOptions::with_tol(1e-13))?;
            let quad = 2.0 * half;
            let closed = (3.0 * s2 * s2 / (4.0 * mu4)).powf(0.25) * g;
            let rel = (quad - closed).abs() / closed;
            worst = worst.max(rel);
            rows.push(json!({ "measure": spec, "sigma2": s2, "mu4": mu4, "quadrature": quad, "closed_form": closed, "rel": rel }));
        }
        let residual = reflection_residual();
        Ok(Check {
            title: "quartic integral closed form",
            passed: worst <= AC8_REL_TOL && residual <= AC8_REFLECTION_TOL,
            summary: format!(
                "worst relative gap {worst:.2e} (max {AC8_REL_TOL:e}); reflection residual {residual:.1e}"
            ),
            metrics: json!({ "pairs": rows, "worst_rel": worst, "reflection_residual": residual, "gamma_quarter": g }),
        })
    }

    fn ac9(&mut self) -> Result<Check> {
        let p = self.plan;
        let laws = [
            QuarticLaw::theorem1(&BaseMeasure::gaussian(1.0)?),
            QuarticLaw::theorem2(&"uniform:1".parse()?)?,
            QuarticLaw::theorem1(&"twopoint:2".parse()?),
        ];
        let mut passed = true;
        let mut rows = Vec::new();
        let mut parts = Vec::new();
        for (k, law) in laws.iter().enumerate() {
            let cut = (750.0 / law.a()).powf(0.25);
            let mass = 2.0 * adaptive_simpson(|s| law.pdf(s), 0.0, cut, SimpsonOptions::with_tol(1e-13))?;
            let mut rng = p.rng_for(60 + k as u64);
            let draws = law.sample(&mut rng, p.draws(AC9_DRAWS));
            let ks = ks_against(&draws, law)?;
            let target = 1.0 / (4.0 * law.a());
            let (m4, _) = mean_variance(&draws.iter().map(|s| s.powi(4)).collect::<Vec<_>>());
            let emp_rel = (m4 - target).abs() / target;
            let an_rel = (law.abs_moment(4.0) - target).abs() / target;
            let ok = (mass - 1.0).abs() <= AC9_NORM_TOL
                && ks < AC9_MAX_KS
                && emp_rel <= AC9_MOMENT_REL
                && an_rel <= AC9_ANALYTIC_REL;
            passed &= ok;
            parts.push(format!("a={:.4}: mass-1 {:.1e}, KS {ks:.5}, E s^4 rel {emp_rel:.4}", law.a(), mass - 1.0));
            rows.push(json!({ "a": law.a(), "mass": mass, "ks": ks, "draws": draws.len(), "fourth_moment": m4,
                              "target": target, "empirical_rel": emp_rel, "analytic_rel": an_rel }));
        }
        Ok(Check {
            title: "limit law consistency",
            passed,
            summary: parts.join("; "),
            metrics: json!({ "laws": rows }),
        })
    }

    fn ac10(&mut self) -> Result<Check> {
        let p = self.plan;
        let measures: Vec<BaseMeasure> = KIND_SAMPLES.iter().map(|s| s.parse()).collect::<cwsoc::Result<_>>()?;
        let mut rng = p.rng_for(70);
        let (mut worst_scale, mut worst_sign): (f64, f64) = (0.0, 0.0);
        for k in 0..AC10_CONFIGS {
            let m = &measures[k % measures.len()];
            let n = rng.random_range(1..=AC10_MAX_N);
            let mut values = vec![0.0; n];
            m.sample_nonzero(&mut rng, &mut values);
            let base = Configuration::new(values.clone())?;
            let lw = base.log_weight();
            for lambda in AC10_SCALES {
                let scaled = Configuration::new(values.iter().map(|x| lambda * x).collect())?;
                worst_scale = worst_scale.max((scaled.log_weight() - lw).abs() / lw.abs().max(1.0));
            }
            let flipped = Configuration::new(values.iter().map(|x| -x).collect())?;
            let s = base.self_normalized_stat()?;
            worst_sign = worst_sign.max((flipped.self_normalized_stat()? + s).abs() / s.abs().max(1.0));
        }
        Ok(Check {
            title: "scale and sign invariances",
            passed: worst_scale <= AC10_TOL && worst_sign <= AC10_TOL,
            summary: format!("worst scale gap {worst_scale:.1e}, worst sign gap {worst_sign:.1e} (max {AC10_TOL:e})"),
            metrics: json!({ "configs": AC10_CONFIGS, "scales": AC10_SCALES, "worst_scale": worst_scale, "worst_sign": worst_sign }),
        })
    }

    fn ac11(&mut self) -> Result<Check> {
        let p = self.plan;
        let dir = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
        let out = dir.path().join("run");
        let seed = p.seed_for(80);
        let simulate = ExperimentConfig {
            measure: "uniform:1".into(),
            n: 60,
            sweeps: 3_000,
            burn_in: 500,
            thin: 5,
            chains: 3,
            seed,
            output_dir: out.clone(),
            ..Default::default()
        };
        let oracle = ExperimentConfig {
            measure: "twopoint:2".into(),
            n: 40,
            mc_draws: 300,
            z_steps: 24,
            seed,
            output_dir: out.clone(),
            ..Default::default()
        };
        let enumerate =
            ExperimentConfig { measure: "rademacher".into(), n: 6, output_dir: out.clone(), ..Default::default() };
        let mut snapshots = Vec::new();
        for threads in AC11_THREADS {
            let files = with_threads(threads, || -> Result<BTreeMap<String, Vec<u8>>> {
                commands::simulate(&simulate, Execution::Parallel)?;
                commands::oracle(&oracle, Execution::Parallel)?;
                commands::enumerate(&enumerate)?;
                let mut files = BTreeMap::new();
                for entry in fs::read_dir(&out).map_err(|e| CliError::io(&out, e))? {
                    let path = entry.map_err(|e| CliError::io(&out, e))?.path();
                    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                    files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), bytes);
                }
                fs::remove_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
                Ok(files)
            })??;
            snapshots.push((threads, files));
        }
        let reference = &snapshots[0].1;
        let mismatched: Vec<String> = snapshots[1..]
            .iter()
            .flat_map(|(t, files)| {
                let mut names: Vec<String> = reference
                    .keys()
                    .chain(files.keys())
                    .filter(|k| reference.get(*k) != files.get(*k))
                    .map(|k| format!("{k} ({t} threads)"))
                    .collect();
                names.dedup();
                names
            })
            .collect();
        let bytes: usize = reference.values().map(|v| v.len()).sum();
        Ok(Check {
            title: "byte-identical reruns",
            passed: mismatched.is_empty() && reference.len() == 6,
            summary: format!(
                "{} files ({bytes} bytes) over runs with {:?} threads; {} mismatches",
                reference.len(),
                AC11_THREADS,
                mismatched.len()
            ),
            metrics: json!({ "files": reference.keys().collect::<Vec<_>>(), "threads": AC11_THREADS, "mismatched": mismatched }),
        })
    }
}

fn ks_against(samples: &[f64], law: &QuarticLaw) -> Result<f64> {
    let emp = EmpiricalDistribution::new(samples)?;
    Ok(ks_statistic(&emp, |s| law.cdf(s)))
}

/// The limit law with the other power of the variance:
/// `mu4 / (12 sigma^4)` when `scaled_sum`, `mu4 / (12 sigma^8)` otherwise.
fn swapped_rate_law(m: &BaseMeasure, scaled_sum: bool) -> Result<QuarticLaw> {
    let s2 = m.variance();
    let power = if scaled_sum { 2 } else { 4 };
    Ok(QuarticLaw::with_rate(m.fourth_moment() / (12.0 * s2.powi(power)))?)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Verification(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// Runs `ids` in order, handing each outcome to `on_outcome` as it finishes.
pub fn run_criteria<F: FnMut(&CriterionOutcome)>(ids: &[&str], plan: VerifyPlan, mut on_outcome: F) -> Result<Report> {
    let mut session = Session::new(plan);
    let mut criteria = Vec::new();
    for id in ids {
        let outcome = session.run(id)?;
        on_outcome(&outcome);
        criteria.push(outcome);
    }
    Ok(Report {
        seed: plan.seed,
        scale: plan.scale,
        swap_law: plan.swap_law,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}

/// Parses a comma-separated criterion list, keeping the canonical order.
pub fn select_criteria(list: Option<&str>) -> Result<Vec<&'static str>> {
    let Some(list) = list else {
        return Ok(CRITERIA.to_vec());
    };
    let wanted: Vec<String> =
        list.split(',').map(|s| s.trim().to_ascii_uppercase()).filter(|s| !s.is_empty()).collect();
    if let Some(bad) = wanted.iter().find(|w| !CRITERIA.contains(&w.as_str())) {
        return Err(CliError::config("only", format!("unknown criterion {bad}")));
    }
    Ok(CRITERIA.iter().copied().filter(|c| wanted.iter().any(|w| w == c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_selection() {
        assert_eq!(select_criteria(None).unwrap().len(), 11);
        assert_eq!(select_criteria(Some("ac3, AC1")).unwrap(), vec!["AC1", "AC3"]);
        assert!(select_criteria(Some("AC12")).is_err());
    }

    #[test]
    fn swapped_law_uses_other_variance_power() {
        let m = BaseMeasure::gaussian(2.0).unwrap();
        assert_eq!(swapped_rate_law(&m, true).unwrap().a(), QuarticLaw::theorem1(&m).a());
        assert_eq!(swapped_rate_law(&m, false).unwrap().a(), QuarticLaw::theorem2(&m).unwrap().a());
    }

    #[test]
    fn cheap_criteria_pass() {
        let plan = VerifyPlan { scale: Scale::Quick, ..Default::default() };
        let report = run_criteria(&["AC8", "AC10"], plan, |_| {}).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
