//! Experiment parameters from flags and an optional `key = value` file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use cwsoc::sampler::SamplerConfig;
use cwsoc::BaseMeasure;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub measure: String,
    pub n: usize,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub chains: usize,
    pub seed: u64,
    pub mc_draws: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub z_steps: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            measure: "gaussian:1".into(),
            n: 400,
            sweeps: 100_000,
            burn_in: 1_000,
            thin: 10,
            chains: 4,
            seed: 1,
            mc_draws: 1_000,
            z_min: -3.0,
            z_max: 3.0,
            z_steps: 60,
            output_dir: PathBuf::from("cwsoc-out"),
        }
    }
}

/// Values set explicitly, by flags or by a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub measure: Option<String>,
    pub n: Option<usize>,
    pub sweeps: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub mc_draws: Option<usize>,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub z_steps: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::config(key, format!("cannot parse {value:?}: {e}")))
}

impl ConfigOverrides {
    /// Sets `key` from its textual value. `out` is accepted for `output_dir`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "measure" => self.measure = Some(value.to_string()),
            "n" => self.n = Some(parse(key, value)?),
            "sweeps" => self.sweeps = Some(parse(key, value)?),
            "burn_in" | "burn-in" => self.burn_in = Some(parse(key, value)?),
            "thin" => self.thin = Some(parse(key, value)?),
            "chains" => self.chains = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "mc_draws" | "mc-draws" => self.mc_draws = Some(parse(key, value)?),
            "z_min" | "z-min" => self.z_min = Some(parse(key, value)?),
            "z_max" | "z-max" => self.z_max = Some(parse(key, value)?),
            "z_steps" | "z-steps" => self.z_steps = Some(parse(key, value)?),
            "output_dir" | "out" => self.output_dir = Some(PathBuf::from(value)),
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file_contents(text: &str, path: &Path) -> Result<Self> {
        let mut out = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let file_err = |message: String| CliError::ConfigFile { path: path.to_path_buf(), line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| file_err("expected `key = value`".into()))?;
            out.set(key.trim(), value.trim()).map_err(|e| file_err(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_file_contents(&text, path)
    }

    /// Fields set in `other` win.
    pub fn merged_with(mut self, other: &ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(measure, n, sweeps, burn_in, thin, chains, seed, mc_draws, z_min, z_max, z_steps, output_dir);
        self
    }
}

impl ExperimentConfig {
    /// Defaults, then the config file (if any), then `flags`.
    pub fn resolve(file: Option<&Path>, flags: &ConfigOverrides) -> Result<Self> {
        let from_file = match file {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        };
        let o = from_file.merged_with(flags);
        let d = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            measure: o.measure.unwrap_or(d.measure),
            n: o.n.unwrap_or(d.n),
            sweeps: o.sweeps.unwrap_or(d.sweeps),
            burn_in: o.burn_in.unwrap_or(d.burn_in),
            thin: o.thin.unwrap_or(d.thin),
            chains: o.chains.unwrap_or(d.chains),
            seed: o.seed.unwrap_or(d.seed),
            mc_draws: o.mc_draws.unwrap_or(d.mc_draws),
            z_min: o.z_min.unwrap_or(d.z_min),
            z_max: o.z_max.unwrap_or(d.z_max),
            z_steps: o.z_steps.unwrap_or(d.z_steps),
            output_dir: o.output_dir.unwrap_or(d.output_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.base_measure()?;
        let positive = [
            ("n", self.n as u64),
            ("sweeps", self.sweeps),
            ("thin", self.thin),
            ("chains", self.chains as u64),
            ("mc_draws", self.mc_draws as u64),
            ("z_steps", self.z_steps as u64),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(CliError::config(key, "must be positive"));
            }
        }
        if self.burn_in >= self.sweeps {
            return Err(CliError::config("burn_in", "must be smaller than sweeps"));
        }
        if !self.z_min.is_finite() {
            return Err(CliError::config("z_min", "must be finite"));
        }
        if !self.z_max.is_finite() || self.z_max <= self.z_min {
            return Err(CliError::config("z_max", "must be finite and above z_min"));
        }
        Ok(())
    }

    pub fn base_measure(&self) -> Result<BaseMeasure> {
        self.measure.parse().map_err(|e: cwsoc::Error| CliError::config("measure", e.to_string()))
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        Ok(SamplerConfig {
            n: self.n,
            measure: self.base_measure()?,
            sweeps: self.sweeps,
            burn_in_sweeps: self.burn_in,
            thin_sweeps: self.thin,
            seed: self.seed,
            chains: self.chains,
        })
    }

    /// `z_steps + 1` points from `z_min` to `z_max`. A grid centred on zero is
    /// exactly antisymmetric.
    pub fn z_grid(&self) -> Vec<f64> {
        let centre = 0.5 * (self.z_min + self.z_max);
        let half = 0.5 * (self.z_max - self.z_min);
        let steps = self.z_steps as i64;
        (0..=steps).map(|i| centre + half * ((2 * i - steps) as f64 / steps as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::parse_file_contents(
            "# run\nmeasure = rademacher\nn = 16  # sites\nseed=9\n\nout = results\n",
            Path::new("run.cfg"),
        )
        .unwrap();
        let flags = ConfigOverrides { n: Some(32), ..Default::default() };
        let cfg = ExperimentConfig::resolve(None, &file.merged_with(&flags)).unwrap();
        assert_eq!(cfg.measure, "rademacher");
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert_eq!(cfg.sweeps, ExperimentConfig::default().sweeps);
    }

    #[test]
    fn errors_name_the_key() {
        let err = ConfigOverrides::parse_file_contents("n = ten\n", Path::new("a.cfg")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a.cfg:1") && msg.contains("n:"), "{msg}");
        let err = ConfigOverrides::parse_file_contents("colour = red\n", Path::new("a.cfg")).unwrap_err();
        assert!(err.to_string().contains("colour"));
        assert!(ConfigOverrides::parse_file_contents("just words\n", Path::new("a.cfg")).is_err());

        let bad = |o: ConfigOverrides, key: &str| {
            let e = ExperimentConfig::resolve(None, &o).unwrap_err();
            assert!(e.to_string().starts_with(key), "{e}");
            assert_eq!(e.exit_code(), crate::error::EXIT_USAGE);
        };
        bad(ConfigOverrides { n: Some(0), ..Default::default() }, "n");
        bad(ConfigOverrides { measure: Some("cauchy".into()), ..Default::default() }, "measure");
        bad(ConfigOverrides { burn_in: Some(10), sweeps: Some(10), ..Default::default() }, "burn_in");
        bad(ConfigOverrides { z_min: Some(1.0), z_max: Some(1.0), ..Default::default() }, "z_max");
        bad(ConfigOverrides { mc_draws: Some(0), ..Default::default() }, "mc_draws");
    }

    #[test]
    fn centred_grid_is_antisymmetric() {
        let cfg = ExperimentConfig { z_min: -3.0, z_max: 3.0, z_steps: 37, ..Default::default() };
        let g = cfg.z_grid();
        assert_eq!(g.len(), 38);
        assert_eq!(g[0], -3.0);
        assert_eq!(g[37], 3.0);
        for i in 0..g.len() {
            assert_eq!(g[i], -g[g.len() - 1 - i]);
        }
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
