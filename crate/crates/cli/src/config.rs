//! Protocol configuration: a flat key-value TOML file, with environment
//! overrides for file paths only (`GROUPLINK_<KEY>`).
//!
//! Relative paths resolve against the config file's directory, so each
//! party can keep its working tree self-contained.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Group size shared by both parties.
    pub g: u32,
    /// Shared master seed; per-round salts derive from it.
    pub master_seed: u64,

    /// Registry size, shared as an aggregate by the registry side.
    #[serde(default)]
    pub n_registry: Option<usize>,
    /// Registry turnout rate, shared as an aggregate.
    #[serde(default)]
    pub turnout_p: Option<f64>,
    /// Match rate used by calibration (see `estimate-match-rate`).
    #[serde(default)]
    pub match_rate: Option<f64>,
    #[serde(default = "default_target")]
    pub target_accuracy: f64,
    /// Stage-1 quota; computed by `calibrate` when absent.
    #[serde(default)]
    pub m1: Option<usize>,
    /// Stage-2 quota; computed by `calibrate` when absent.
    #[serde(default)]
    pub m2: Option<usize>,
    /// Label of the dedicated match-rate estimation salt.
    #[serde(default = "default_estimation_salt")]
    pub estimation_salt: String,
    /// Simulation RNG seed; defaults to `master_seed`.
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Simulated population size for `calibrate` and `simulate`.
    #[serde(default = "default_sim_n")]
    pub sim_n: usize,
    /// Optional platform CSV column carried for grouped reporting.
    #[serde(default)]
    pub attribute_column: Option<String>,

    #[serde(default = "default_registry_csv")]
    pub registry_csv: PathBuf,
    #[serde(default = "default_platform_csv")]
    pub platform_csv: PathBuf,
    #[serde(default = "default_registry_store")]
    pub registry_store: PathBuf,
    #[serde(default = "default_platform_store")]
    pub platform_store: PathBuf,
    #[serde(default = "default_table_dir")]
    pub table_dir: PathBuf,
    #[serde(default = "default_draw_store")]
    pub draw_store: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_target() -> f64 {
    0.95
}
fn default_estimation_salt() -> String {
    "match-rate-estimation".to_string()
}
fn default_replicates() -> usize {
    3
}
fn default_sim_n() -> usize {
    100_000
}
fn default_registry_csv() -> PathBuf {
    "registry.csv".into()
}
fn default_platform_csv() -> PathBuf {
    "platform.csv".into()
}
fn default_registry_store() -> PathBuf {
    "registry_store.csv".into()
}
fn default_platform_store() -> PathBuf {
    "platform_store.csv".into()
}
fn default_table_dir() -> PathBuf {
    "tables".into()
}
fn default_draw_store() -> PathBuf {
    "draws.csv".into()
}
fn default_output_dir() -> PathBuf {
    "out".into()
}

impl ProtocolConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::FileFormat(format!("config {}: {e}", path.display())))?;
        let mut config: ProtocolConfig = toml::from_str(&text)
            .map_err(|e| CliError::FileFormat(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        config.apply_env_overrides();
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.g < 2 {
            return Err(CliError::FileFormat(format!("g = {} must be at least 2", self.g)));
        }
        if let Some(m1) = self.m1 {
            if m1 < 1 {
                return Err(CliError::FileFormat("m1 must be at least 1".into()));
            }
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy < 1.0) {
            return Err(CliError::FileFormat(format!(
                "target_accuracy = {} outside (0, 1)",
                self.target_accuracy
            )));
        }
        if let Some(p) = self.turnout_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::FileFormat(format!("turnout_p = {p} outside (0, 1)")));
            }
        }
        if let Some(mm) = self.match_rate {
            if !(mm > 0.0 && mm <= 1.0) {
                return Err(CliError::FileFormat(format!("match_rate = {mm} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Environment variables override file paths only.
    fn apply_env_overrides(&mut self) {
        let overrides: [(&str, &mut PathBuf); 7] = [
            ("GROUPLINK_REGISTRY_CSV", &mut self.registry_csv),
            ("GROUPLINK_PLATFORM_CSV", &mut self.platform_csv),
            ("GROUPLINK_REGISTRY_STORE", &mut self.registry_store),
            ("GROUPLINK_PLATFORM_STORE", &mut self.platform_store),
            ("GROUPLINK_TABLE_DIR", &mut self.table_dir),
            ("GROUPLINK_DRAW_STORE", &mut self.draw_store),
            ("GROUPLINK_OUTPUT_DIR", &mut self.output_dir),
        ];
        for (key, path) in overrides {
            if let Ok(value) = std::env::var(key) {
                *path = PathBuf::from(value);
            }
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        for path in [
            &mut self.registry_csv,
            &mut self.platform_csv,
            &mut self.registry_store,
            &mut self.platform_store,
            &mut self.table_dir,
            &mut self.draw_store,
            &mut self.output_dir,
        ] {
            if path.is_relative() {
                *path = base.join(&path);
            }
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed.unwrap_or(self.master_seed)
    }

    pub fn table_path(&self, round: u32) -> PathBuf {
        self.table_dir.join(format!("round_{round:06}.csv"))
    }
}
