//! Run configuration: one flat `key=value` file driving every pipeline
//! stage, with strict key checking. Command-line overrides are applied
//! through the same key/value path, so precedence is flags > file >
//! defaults. Secrets never live here: the remote oracle API key is read
//! from the `CORAL_API_KEY` environment variable only.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ddpg::TrainConfig;
use crate::eval::Arm;

/// Environment variable holding the remote oracle API key.
pub const API_KEY_ENV: &str = "CORAL_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: expected key=value")]
    BadLine(usize),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("bad value for '{key}': {reason}")]
    BadValue { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Simulated,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackboneKind {
    Mf,
    WideDeep,
    /// random table, no pretraining (the ablation arm)
    None,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// master seed for single-run stages
    pub seed: u64,
    /// seeds for multi-seed comparisons
    pub seeds: Vec<u64>,
    pub encoder_seed: u64,
    pub y_thresh: u8,
    pub m_max: usize,
    pub kcore: usize,
    pub reviews_path: Option<PathBuf>,
    pub meta_path: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub world_path: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub oracle_backend: OracleKind,
    pub remote_endpoint: Option<String>,
    pub remote_model: Option<String>,
    pub oracle_retries: u32,
    pub backbone: BackboneKind,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
    pub arms: Vec<Arm>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            seed: 0,
            seeds: vec![0, 1, 2],
            encoder_seed: 0,
            y_thresh: 4,
            m_max: 20,
            kcore: 5,
            reviews_path: None,
            meta_path: None,
            manifest_path: None,
            embeddings_path: None,
            checkpoint_path: None,
            world_path: None,
            cache_path: None,
            out_dir: PathBuf::from("out"),
            oracle_backend: OracleKind::Simulated,
            remote_endpoint: None,
            remote_model: None,
            oracle_retries: 2,
            backbone: BackboneKind::Mf,
            pretrain_epochs: 30,
            pretrain_lr: 0.05,
            pretrain_batch: 256,
            arms: vec![Arm::NoRetrieval, Arm::RandomRetrieval, Arm::TrainedWarm],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| bad(key, format!("{e}")))
}

impl RunConfig {
    /// Apply one key/value pair; used both by the file parser and by
    /// command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "gamma" => self.train.gamma = parse_num(key, value)?,
            "tau" => self.train.tau = parse_num(key, value)?,
            "batch" => self.train.batch = parse_num(key, value)?,
            "buffer" => self.train.buffer = parse_num(key, value)?,
            "lr" => self.train.lr = parse_num(key, value)?,
            "actor_lr" => self.train.actor_lr = parse_num(key, value)?,
            "episodes" => self.train.episodes = parse_num(key, value)?,
            "horizon" => self.train.horizon = parse_num(key, value)?,
            "warmup_episodes" => self.train.warmup_episodes = parse_num(key, value)?,
            "dim" => self.train.dim = parse_num(key, value)?,
            "early_stop" => self.train.early_stop = parse_num(key, value)?,
            "eval_rounds" => self.train.eval_rounds = parse_num(key, value)?,
            "hidden" => self.train.hidden = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "encoder_seed" => self.encoder_seed = parse_num(key, value)?,
            "seeds" => {
                let seeds: Result<Vec<u64>, _> =
                    value.split(',').map(|s| parse_num(key, s.trim())).collect();
                self.seeds = seeds?;
                if self.seeds.is_empty() {
                    return Err(bad(key, "empty seed list"));
                }
            }
            "y_thresh" => self.y_thresh = parse_num(key, value)?,
            "m_max" => self.m_max = parse_num(key, value)?,
            "kcore" => self.kcore = parse_num(key, value)?,
            "reviews_path" => self.reviews_path = Some(PathBuf::from(value)),
            "meta_path" => self.meta_path = Some(PathBuf::from(value)),
            "manifest_path" => self.manifest_path = Some(PathBuf::from(value)),
            "embeddings_path" => self.embeddings_path = Some(PathBuf::from(value)),
            "checkpoint_path" => self.checkpoint_path = Some(PathBuf::from(value)),
            "world_path" => self.world_path = Some(PathBuf::from(value)),
            "cache_path" => self.cache_path = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "oracle_backend" => {
                self.oracle_backend = match value {
                    "simulated" => OracleKind::Simulated,
                    "remote" => OracleKind::Remote,
                    other => return Err(bad(key, format!("unknown backend '{other}'"))),
                }
            }
            "remote_endpoint" => self.remote_endpoint = Some(value.to_string()),
            "remote_model" => self.remote_model = Some(value.to_string()),
            "oracle_retries" => self.oracle_retries = parse_num(key, value)?,
            "backbone" => {
                self.backbone = match value {
                    "mf" => BackboneKind::Mf,
                    "widedeep" => BackboneKind::WideDeep,
                    "none" => BackboneKind::None,
                    other => return Err(bad(key, format!("unknown backbone '{other}'"))),
                }
            }
            "pretrain_epochs" => self.pretrain_epochs = parse_num(key, value)?,
            "pretrain_lr" => self.pretrain_lr = parse_num(key, value)?,
            "pretrain_batch" => self.pretrain_batch = parse_num(key, value)?,
            "arms" => {
                let arms: Result<Vec<Arm>, ConfigError> = value
                    .split(',')
                    .map(|s| {
                        Arm::parse(s.trim()).ok_or_else(|| bad(key, format!("unknown arm '{s}'")))
                    })
                    .collect();
                self.arms = arms?;
                if self.arms.is_empty() {
                    return Err(bad(key, "empty arm list"));
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a flat key=value file over the defaults. Blank lines and
    /// `#` comments are allowed; duplicate and unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse_str(&fs::read_to_string(path)?)
    }

    /// The text form behind [`RunConfig::load`], split out so it can be
    /// exercised without touching the filesystem.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine(lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.y_thresh == 0 || self.y_thresh > 5 {
            return Err(ConfigError::Invalid("y_thresh must be in 1..=5".into()));
        }
        if self.m_max == 0 {
            return Err(ConfigError::Invalid("m_max must be positive".into()));
        }
        if self.kcore == 0 {
            return Err(ConfigError::Invalid("kcore must be positive".into()));
        }
        if self.oracle_backend == OracleKind::Remote
            && (self.remote_endpoint.is_none() || self.remote_model.is_none())
        {
            return Err(ConfigError::Invalid(
                "remote oracle requires remote_endpoint and remote_model".into(),
            ));
        }
        Ok(())
    }
}
