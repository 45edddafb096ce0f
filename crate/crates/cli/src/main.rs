use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cwsoc::Execution;
use cwsoc_cli::commands;
use cwsoc_cli::config::{ConfigOverrides, ExperimentConfig};
use cwsoc_cli::error::{CliError, Result, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use cwsoc_cli::verify::{self, Scale, VerifyPlan};

#[derive(Parser)]
#[command(name = "cwsoc", version, about = "Self-organized criticality in the Curie-Weiss model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Metropolis chains; writes samples.csv and summary.json.
    Simulate(Common),
    /// Smoothed-density profile and partition ratio by Monte Carlo.
    Oracle(Common),
    /// Exact law of S/sqrt(T) for a finite-support measure; writes exact.csv.
    Enumerate(Common),
    /// Print both limit laws of the measure as CSV.
    LimitLaw(Common),
    /// Run the acceptance checks; writes report.json.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rademacher, gaussian:SIGMA, uniform:A, twopoint:A or discrete:X,P;X,P...
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Total sweeps per chain, burn-in included.
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_draws: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    z_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    z_max: Option<f64>,
    #[arg(long)]
    z_steps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let flags = ConfigOverrides {
            measure: self.measure.clone(),
            n: self.n,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            thin: self.thin,
            chains: self.chains,
            seed: self.seed,
            mc_draws: self.mc_draws,
            z_min: self.z_min,
            z_max: self.z_max,
            z_steps: self.z_steps,
            output_dir: self.out.clone(),
        };
        ExperimentConfig::resolve(self.config.as_deref(), &flags)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Full,
    Quick,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated criteria, e.g. AC1,AC7.
    #[arg(long)]
    only: Option<String>,
    /// Compare each statistic against the other statistic's limit law.
    #[arg(long)]
    swap_law: bool,
    #[arg(long, value_enum, default_value = "full")]
    scale: ScaleArg,
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "cwsoc-out")]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let out = commands::simulate(&cfg, c.exec())?;
            let s = &out.summary;
            println!("acceptance rate {:.4}, ESS {:.0}", s.acceptance_rate, s.ess);
            println!(
                "KS self-normalized {:.4} (threshold {:.4}), scaled sum {:.4} (threshold {:.4})",
                s.ks_self_normalized_vs_theorem1.statistic,
                s.ks_self_normalized_vs_theorem1.threshold,
                s.ks_scaled_sum_vs_theorem2.statistic,
                s.ks_scaled_sum_vs_theorem2.threshold
            );
            println!("wrote {} and {}", out.samples_path.display(), out.summary_path.display());
        }
        Command::Oracle(c) => {
            let cfg = c.resolve()?;
            let out = commands::oracle(&cfg, c.exec())?;
            let r = &out.partition_ratio;
            println!("partition ratio {:.6} ± {:.6} (limit {:.6})", r.estimate, r.std_error, r.limit_target);
            println!("wrote profile.csv, profile_normalized.csv, partition_ratio.json in {}", cfg.output_dir.display());
        }
        Command::Enumerate(c) => {
            let cfg = c.resolve()?;
            let points = commands::enumerate(&cfg)?;
            println!("{} support points; wrote {}", points.len(), cfg.output_dir.join("exact.csv").display());
        }
        Command::LimitLaw(c) => {
            let cfg = c.resolve()?;
            print!("{}", commands::limit_law(&cfg)?);
        }
        Command::Verify(v) => {
            let ids = verify::select_criteria(v.only.as_deref())?;
            let plan = VerifyPlan {
                seed: v.seed,
                scale: match v.scale {
                    ScaleArg::Full => Scale::Full,
                    ScaleArg::Quick => Scale::Quick,
                },
                swap_law: v.swap_law,
                exec: if v.sequential { Execution::Sequential } else { Execution::default() },
            };
            let report = verify::run_criteria(&ids, plan, |o| println!("{}", o.line()))?;
            std::fs::create_dir_all(&v.out).map_err(|e| CliError::io(&v.out, e))?;
            let path = v.out.join("report.json");
            report.write(&path)?;
            let failed = report.criteria.iter().filter(|c| !c.passed).count();
            println!("{} of {} passed; wrote {}", ids.len() - failed, ids.len(), path.display());
            return Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE });
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
