//! The `simulate`, `oracle`, `enumerate` and `limit-law` commands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use cwsoc::hs_oracle::{partition_ratio_limit, HsEnsemble, HsProfile};
use cwsoc::number::format_real;
use cwsoc::sampler::{diagnostics, enumerate_exact, run_chains_with, ChainRun};
use cwsoc::stats::{batch_means, ks_critical_value, ks_statistic, EmpiricalDistribution, DEFAULT_BATCHES, KS_ALPHA};
use cwsoc::{Execution, QuarticLaw};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const SAMPLES_HEADER: &str = "chain,index,stat_self_normalized,stat_scaled_sum,t_over_n";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn write_profile(path: &Path, profile: &HsProfile) -> Result<()> {
    let mut w = create(path)?;
    profile.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValueWithError {
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub mean: ValueWithError,
    pub second: ValueWithError,
    pub fourth: ValueWithError,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawParams {
    pub a: f64,
    pub normalization: f64,
    pub source_theorem: String,
}

impl From<&QuarticLaw> for LawParams {
    fn from(law: &QuarticLaw) -> Self {
        LawParams { a: law.a(), normalization: law.normalization(), source_theorem: law.source().to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KsVerdict {
    pub statistic: f64,
    pub effective_samples: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl KsVerdict {
    pub fn new(samples: &[f64], law: &QuarticLaw, effective_samples: f64) -> Result<Self> {
        let emp = EmpiricalDistribution::new(samples)?;
        let statistic = ks_statistic(&emp, |s| law.cdf(s));
        let threshold = ks_critical_value(KS_ALPHA, effective_samples);
        Ok(KsVerdict { statistic, effective_samples, alpha: KS_ALPHA, threshold, pass: statistic <= threshold })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub acceptance_rate: f64,
    pub ess: f64,
    pub retained: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config: ExperimentConfig,
    pub acceptance_rate: f64,
    pub ess: f64,
    pub chains: Vec<ChainSummary>,
    pub self_normalized: Moments,
    pub scaled_sum: Moments,
    pub t_over_n: Moments,
    pub theorem1_law: LawParams,
    pub theorem2_law: LawParams,
    pub ks_self_normalized_vs_theorem1: KsVerdict,
    pub ks_scaled_sum_vs_theorem2: KsVerdict,
}

/// Mean over chains of per-chain batch means; the chains are independent,
/// so their squared errors add.
pub fn pooled_mean(series: &[&[f64]]) -> Result<ValueWithError> {
    let mut est = 0.0;
    let mut var = 0.0;
    for s in series {
        let bm = batch_means(s, DEFAULT_BATCHES)?;
        est += bm.mean;
        var += bm.standard_error * bm.standard_error;
    }
    let k = series.len() as f64;
    Ok(ValueWithError { estimate: est / k, std_error: var.sqrt() / k })
}

fn moments(series: &[&[f64]]) -> Result<Moments> {
    let powered = |p: i32| -> Result<ValueWithError> {
        let owned: Vec<Vec<f64>> = series.iter().map(|s| s.iter().map(|x| x.powi(p)).collect()).collect();
        let refs: Vec<&[f64]> = owned.iter().map(|v| v.as_slice()).collect();
        pooled_mean(&refs)
    };
    Ok(Moments { mean: powered(1)?, second: powered(2)?, fourth: powered(4)? })
}

fn pooled(runs: &[ChainRun], pick: impl Fn(&ChainRun) -> &[f64]) -> Vec<f64> {
    runs.iter().flat_map(|r| pick(r).iter().copied()).collect()
}

/// Sum of per-chain effective sample sizes of one series.
pub fn total_ess(series: &[&[f64]]) -> f64 {
    series.iter().map(|s| diagnostics(s).map(|d| d.ess).unwrap_or(s.len() as f64)).sum()
}

pub struct SimulateOutput {
    pub runs: Vec<ChainRun>,
    pub summary: SimulateSummary,
    pub samples_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs the chains and writes `samples.csv` and `summary.json`.
pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Result<SimulateOutput> {
    let sampler = cfg.sampler()?;
    sampler.validate()?;
    let runs = run_chains_with(&sampler, exec)?;
    prepare_dir(&cfg.output_dir)?;

    let samples_path = cfg.output_dir.join("samples.csv");
    let mut w = create(&samples_path)?;
    let io = |e| CliError::io(&samples_path, e);
    writeln!(w, "{SAMPLES_HEADER}").map_err(io)?;
    for run in &runs {
        for (i, ((s, q), t)) in run.stat_samples.iter().zip(&run.scaled_samples).zip(&run.t_over_n_samples).enumerate()
        {
            writeln!(w, "{},{},{},{},{}", run.chain_index, i, format_real(*s), format_real(*q), format_real(*t))
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let stat: Vec<&[f64]> = runs.iter().map(|r| r.stat_samples.as_slice()).collect();
    let scaled: Vec<&[f64]> = runs.iter().map(|r| r.scaled_samples.as_slice()).collect();
    let t: Vec<&[f64]> = runs.iter().map(|r| r.t_over_n_samples.as_slice()).collect();
    let measure = &sampler.measure;
    let law1 = QuarticLaw::theorem1(measure);
    let law2 = QuarticLaw::theorem2(measure)?;
    let ess = runs.iter().map(|r| r.ess_estimate).sum();
    let summary = SimulateSummary {
        config: cfg.clone(),
        acceptance_rate: runs.iter().map(|r| r.acceptance_rate).sum::<f64>() / runs.len() as f64,
        ess,
        chains: runs
            .iter()
            .map(|r| ChainSummary {
                chain: r.chain_index,
                acceptance_rate: r.acceptance_rate,
                ess: r.ess_estimate,
                retained: r.stat_samples.len(),
            })
            .collect(),
        self_normalized: moments(&stat)?,
        scaled_sum: moments(&scaled)?,
        t_over_n: moments(&t)?,
        theorem1_law: (&law1).into(),
        theorem2_law: (&law2).into(),
        ks_self_normalized_vs_theorem1: KsVerdict::new(&pooled(&runs, |r| &r.stat_samples), &law1, ess)?,
        ks_scaled_sum_vs_theorem2: KsVerdict::new(&pooled(&runs, |r| &r.scaled_samples), &law2, total_ess(&scaled))?,
    };
    let summary_path = cfg.output_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(SimulateOutput { runs, summary, samples_path, summary_path })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionRatioReport {
    pub estimate: f64,
    pub std_error: f64,
    pub limit_target: f64,
    pub n: usize,
    pub mc_draws: usize,
    pub measure: String,
}

pub struct OracleOutput {
    pub profile: HsProfile,
    pub normalized: HsProfile,
    pub partition_ratio: PartitionRatioReport,
}

/// Writes `profile.csv`, `profile_normalized.csv` and `partition_ratio.json`.
pub fn oracle(cfg: &ExperimentConfig, exec: Execution) -> Result<OracleOutput> {
    let measure = cfg.base_measure()?;
    let mut ensemble = HsEnsemble::new(cfg.n, measure.clone(), cfg.mc_draws, cfg.seed)?.with_execution(exec);
    let grid = cfg.z_grid();
    let profile = ensemble.profile(&grid)?;
    let normalized = ensemble.normalized_profile(&grid)?;
    let ratio = ensemble.partition_ratio()?;
    let partition_ratio = PartitionRatioReport {
        estimate: ratio.estimate,
        std_error: ratio.std_error,
        limit_target: partition_ratio_limit(&measure)?,
        n: cfg.n,
        mc_draws: cfg.mc_draws,
        measure: measure.name().to_string(),
    };
    prepare_dir(&cfg.output_dir)?;
    write_profile(&cfg.output_dir.join("profile.csv"), &profile)?;
    write_profile(&cfg.output_dir.join("profile_normalized.csv"), &normalized)?;
    write_json(&cfg.output_dir.join("partition_ratio.json"), &partition_ratio)?;
    Ok(OracleOutput { profile, normalized, partition_ratio })
}

/// Writes `exact.csv` (`value,probability`, ascending values) with the exact
/// law of `S / sqrt(T)`.
pub fn enumerate(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let measure = cfg.base_measure()?;
    let mut points = enumerate_exact(cfg.n, &measure)?.points().to_vec();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    prepare_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("exact.csv");
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    writeln!(w, "value,probability").map_err(io)?;
    for (v, p) in &points {
        writeln!(w, "{},{}", format_real(*v), format_real(*p)).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(points)
}

pub const LAW_QUANTILES: [f64; 9] = [0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999];

/// Text report: parameters of both limit laws of the measure, quantiles,
/// and the densities on the configured grid.
pub fn limit_law(cfg: &ExperimentConfig) -> Result<String> {
    let measure = cfg.base_measure()?;
    let laws = [QuarticLaw::theorem1(&measure), QuarticLaw::theorem2(&measure)?];
    let mut out = String::new();
    let f = format_real;
    writeln!(out, "# measure {measure}").unwrap();
    writeln!(out, "law,statistic,a,normalization").unwrap();
    let statistic = ["S/(n^(1/4) sqrt(T))", "S/n^(3/4)"];
    for (law, stat) in laws.iter().zip(statistic) {
        writeln!(out, "{},{},{},{}", law.source(), stat, f(law.a()), f(law.normalization())).unwrap();
    }
    writeln!(out, "\np,{},{}", laws[0].source(), laws[1].source()).unwrap();
    for p in LAW_QUANTILES {
        writeln!(out, "{},{},{}", f(p), f(laws[0].quantile(p)?), f(laws[1].quantile(p)?)).unwrap();
    }
    writeln!(out, "\nz,pdf_{},pdf_{}", laws[0].source(), laws[1].source()).unwrap();
    for z in cfg.z_grid() {
        writeln!(out, "{},{},{}", f(z), f(laws[0].pdf(z)), f(laws[1].pdf(z))).unwrap();
    }
    Ok(out)
}
