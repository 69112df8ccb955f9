//! Run configuration: a `key = value` file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Values as given, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub data: Option<PathBuf>,
    pub labels: Option<String>,
    pub outliers: Option<PathBuf>,
    pub k: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub temp: Option<f64>,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RawConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad =
                |e: &dyn std::fmt::Display| CliError::Config(format!("line {}: {key}: {e}", n + 1));
            match key {
                "data" => c.data = Some(value.into()),
                "labels" => c.labels = Some(value.into()),
                "outliers" => c.outliers = Some(value.into()),
                "k" => c.k = Some(value.parse().map_err(|e| bad(&e))?),
                "starts" => c.starts = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => c.seed = Some(value.parse().map_err(|e| bad(&e))?),
                "sigma" => c.sigma = Some(value.parse().map_err(|e| bad(&e))?),
                "alpha" => c.alpha = Some(value.parse().map_err(|e| bad(&e))?),
                "temp" => c.temp = Some(value.parse().map_err(|e| bad(&e))?),
                "budget" => c.budget = Some(value.parse().map_err(|e| bad(&e))?),
                "out" => c.out = Some(value.into()),
                "threads" => c.threads = Some(value.parse().map_err(|e| bad(&e))?),
                _ => {
                    return Err(CliError::Config(format!(
                        "line {}: unknown key {key:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingInput(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Values set in `over` replace those in `self`.
    pub fn overlay(self, over: RawConfig) -> Self {
        RawConfig {
            data: over.data.or(self.data),
            labels: over.labels.or(self.labels),
            outliers: over.outliers.or(self.outliers),
            k: over.k.or(self.k),
            starts: over.starts.or(self.starts),
            seed: over.seed.or(self.seed),
            sigma: over.sigma.or(self.sigma),
            alpha: over.alpha.or(self.alpha),
            temp: over.temp.or(self.temp),
            budget: over.budget.or(self.budget),
            out: over.out.or(self.out),
            threads: over.threads.or(self.threads),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub labels: Option<String>,
    pub outliers: Option<PathBuf>,
    /// Required by `explore`; later commands take K from the database.
    pub k: Option<usize>,
    pub n_starts: usize,
    pub seed: u64,
    pub sigma: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub budget: usize,
    pub out: PathBuf,
    pub threads: usize,
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let cfg = RunConfig {
            data: raw
                .data
                .ok_or_else(|| CliError::Config("no dataset given (--data)".into()))?,
            labels: raw.labels,
            outliers: raw.outliers,
            k: raw.k,
            n_starts: raw.starts.unwrap_or(10_000),
            seed: raw.seed.unwrap_or(1),
            sigma: raw.sigma.unwrap_or(30.0),
            alpha: raw.alpha.unwrap_or(0.02),
            temperature: raw.temp.unwrap_or(1.0),
            budget: raw.budget.unwrap_or(200),
            out: raw.out.unwrap_or_else(|| "out".into()),
            threads: raw.threads.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |m: &str| Err(CliError::Config(m.into()));
        if self.k == Some(0) {
            return fail("k must be at least 1");
        }
        if self.n_starts == 0 {
            return fail("starts must be at least 1");
        }
        if !(self.temperature > 0.0) {
            return fail("temp must be positive");
        }
        if !(self.sigma > 0.0) {
            return fail("sigma must be positive");
        }
        if !(self.alpha > 0.0) {
            return fail("alpha must be positive");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 over the settings that affect results, with the dataset
    /// identified by content rather than path. Output directory and thread
    /// count are left out.
    pub fn hash(&self, dataset_hash: &str) -> String {
        let text = format!(
            "dataset={dataset_hash}\nlabels={}\nk={}\nstarts={}\nseed={}\nsigma={:e}\nalpha={:e}\ntemp={:e}\nbudget={}\n",
            self.labels.as_deref().unwrap_or(""),
            self.k.map_or(String::new(), |k| k.to_string()),
            self.n_starts,
            self.seed,
            self.sigma,
            self.alpha,
            self.temperature,
            self.budget,
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
