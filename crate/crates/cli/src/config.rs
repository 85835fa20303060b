//! JSON run configuration. Precedence: command-line flags > config file > defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version of the JSON config schema described in the README.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Options shared by every command, under the `run` key of a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Destination only; excluded from the config hash.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

impl CommonArgs {
    pub fn apply(&self, run: &mut RunOptions) {
        if let Some(seed) = self.seed {
            run.seed = Some(seed);
        }
        if let Some(out) = &self.out {
            run.out = Some(out.clone());
        }
        if let Some(format) = self.format {
            run.format = format;
        }
    }
}

pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    fn run(&self) -> &RunOptions;
    fn run_mut(&mut self) -> &mut RunOptions;
}

/// Parses a config document; errors name the offending field path.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("config field `{path}`: {}", e.into_inner())
    })
}

/// Defaults, then the file (if any), then the flags.
pub fn load<T: CommandConfig>(args: &CommonArgs) -> anyhow::Result<T> {
    let mut cfg = match &args.config {
        Some(path) => load_file(path)?,
        None => T::default(),
    };
    args.apply(cfg.run_mut());
    Ok(cfg)
}

fn load_file<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Seed for stochastic commands; there is no ambient entropy.
pub fn require_seed(run: &RunOptions, command: &str) -> anyhow::Result<u64> {
    run.seed.with_context(|| format!("`{command}` is stochastic and needs an explicit seed (--seed or run.seed)"))
}

/// Hex SHA-256 of the effective config serialized as compact JSON.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        run: RunOptions,
        inner: Inner,
    }

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Inner {
        trials: usize,
    }

    impl CommandConfig for Demo {
        fn run(&self) -> &RunOptions {
            &self.run
        }
        fn run_mut(&mut self) -> &mut RunOptions {
            &mut self.run
        }
    }

    #[test]
    fn errors_name_field_paths() {
        let err = parse_config::<Demo>(r#"{"inner": {"trials": "many"}}"#).unwrap_err();
        assert!(err.to_string().contains("inner.trials"), "{err}");
        let err = parse_config::<Demo>(r#"{"inner": {"trails": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"run": {"seed": 1, "format": "json"}, "inner": {"trials": 5}}"#).unwrap();
        let args = CommonArgs { config: Some(path), seed: Some(9), ..Default::default() };
        let cfg: Demo = load(&args).unwrap();
        assert_eq!(cfg.run.seed, Some(9));
        assert_eq!(cfg.run.format, ReportFormat::Json);
        assert_eq!(cfg.inner.trials, 5);
        let d: Demo = load(&CommonArgs::default()).unwrap();
        assert_eq!(d, Demo::default());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = Demo::default();
        let mut b = Demo::default();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        b.inner.trials = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
