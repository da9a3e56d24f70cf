//! Layered configuration: command-line flag > environment > TOML file > defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uiloop_core::synth::PipelineConfig;
use uiloop_core::{EvalConfig, RewardConfig, SimilarityBackend};

pub const ENV_SIM_URL: &str = "UILOOP_SIM_URL";
pub const ENV_DETECT_URL: &str = "UILOOP_DETECT_URL";
pub const ENV_SELECT_URL: &str = "UILOOP_SELECT_URL";
pub const ENV_PORT: &str = "UILOOP_PORT";

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSettings {
    pub group_size: usize,
    pub std_floor: f64,
}

impl Default for GroupSettings {
    fn default() -> Self {
        Self {
            group_size: 5,
            std_floor: 1e-8,
        }
    }
}

/// Shape of the TOML file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub port: Option<u16>,
    pub bind: Option<String>,
    pub sim_url: Option<String>,
    pub detect_url: Option<String>,
    pub select_url: Option<String>,
    /// Upper bound on concurrently scored requests.
    pub max_parallel: Option<usize>,
    /// Timeout for calls to external backends, in seconds.
    pub client_timeout_secs: Option<u64>,
    /// Directory that `/evaluate` paths are resolved against and confined to.
    pub data_root: Option<PathBuf>,
    pub reward: Option<RewardConfig>,
    pub gr_radius: Option<f64>,
    pub grpo: Option<GroupSettings>,
    pub pipeline: Option<PipelineConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub port: Option<u16>,
    pub bind: Option<String>,
    pub sim_url: Option<String>,
    pub detect_url: Option<String>,
    pub select_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceConfig {
    pub port: u16,
    pub bind: String,
    pub sim_url: Option<String>,
    pub detect_url: Option<String>,
    pub select_url: Option<String>,
    pub max_parallel: usize,
    pub client_timeout_secs: u64,
    pub data_root: PathBuf,
    pub eval: EvalConfig,
    pub grpo: GroupSettings,
    pub pipeline: PipelineConfig,
}

impl ServiceConfig {
    pub fn resolve(
        file: FileConfig,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<Self, ConfigError> {
        let pick = |flag: &Option<String>, var: &str, file: Option<String>| {
            flag.clone().or_else(|| env(var).filter(|v| !v.is_empty())).or(file)
        };
        let env_port = match env(ENV_PORT).filter(|v| !v.is_empty()) {
            Some(v) => Some(
                v.parse::<u16>()
                    .map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={v} is not a port number")))?,
            ),
            None => None,
        };
        let mut eval = EvalConfig {
            reward: file.reward.unwrap_or_default(),
            ..Default::default()
        };
        if let Some(r) = file.gr_radius {
            eval.gr_radius = r;
        }
        let cfg = Self {
            port: flags.port.or(env_port).or(file.port).unwrap_or(DEFAULT_PORT),
            bind: flags.bind.clone().or(file.bind).unwrap_or_else(|| "127.0.0.1".into()),
            sim_url: pick(&flags.sim_url, ENV_SIM_URL, file.sim_url),
            detect_url: pick(&flags.detect_url, ENV_DETECT_URL, file.detect_url),
            select_url: pick(&flags.select_url, ENV_SELECT_URL, file.select_url),
            max_parallel: file
                .max_parallel
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(4, |n| n.get())),
            client_timeout_secs: file.client_timeout_secs.unwrap_or(30),
            data_root: file.data_root.unwrap_or_else(|| PathBuf::from(".")),
            eval,
            grpo: file.grpo.unwrap_or_default(),
            pipeline: file.pipeline.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults plus the process environment.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::resolve(FileConfig::default(), |k| std::env::var(k).ok(), &Overrides::default())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.eval
            .reward
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.eval.gr_radius >= 0.0 && self.eval.gr_radius.is_finite()) {
            return Err(ConfigError::Invalid(format!("gr_radius must be >= 0, got {}", self.eval.gr_radius)));
        }
        if self.grpo.group_size < 2 {
            return Err(ConfigError::Invalid(format!(
                "grpo.group_size must be >= 2, got {}",
                self.grpo.group_size
            )));
        }
        if self.grpo.std_floor.is_nan() || self.grpo.std_floor < 0.0 {
            return Err(ConfigError::Invalid("grpo.std_floor must be >= 0".into()));
        }
        if self.max_parallel == 0 {
            return Err(ConfigError::Invalid("max_parallel must be at least 1".into()));
        }
        if self.eval.reward.similarity_backend == SimilarityBackend::External && self.sim_url.is_none() {
            return Err(ConfigError::Invalid(format!(
                "similarity_backend = \"external\" needs a URL ({ENV_SIM_URL} or --sim-url)"
            )));
        }
        Ok(())
    }
}
