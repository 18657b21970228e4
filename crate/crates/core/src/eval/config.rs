use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvSchema, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::Bucket;
use crate::model::ModelSpec;
use crate::optim::TrainConfig;

fn default_schema() -> CsvSchema {
    CsvSchema::beijing()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "default_schema")]
    pub schema: CsvSchema,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_chunk() -> usize {
    256
}

/// Everything one experiment needs; the seed lives in `train.seed` and is
/// mandatory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    /// Defaults follow the horizon: see [`default_buckets`].
    #[serde(default)]
    pub buckets: Option<Vec<Bucket>>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Windows per evaluation work unit.
    #[serde(default = "default_eval_chunk")]
    pub eval_chunk: usize,
}

/// `{h1}` for single-step, `{h1~h6}` for six steps, the four-way split for
/// 24 steps, and the full range otherwise.
pub fn default_buckets(horizon: usize) -> Vec<Bucket> {
    match horizon {
        24 => vec![Bucket::new(1, 3), Bucket::new(4, 6), Bucket::new(7, 12), Bucket::new(13, 24)],
        h => vec![Bucket::new(1, h)],
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn buckets(&self) -> Vec<Bucket> {
        self.buckets
            .clone()
            .unwrap_or_else(|| default_buckets(self.model.horizon()))
    }

    pub fn validate(&self) -> Result<()> {
        self.data.schema.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.eval_chunk == 0 {
            return Err(Error::config("eval_chunk", "must be >= 1"));
        }
        let h = self.model.horizon();
        for b in self.buckets() {
            if b.from == 0 || b.from > b.to || b.to > h {
                return Err(Error::config("buckets", format!("{} does not fit horizon {h}", b.label())));
            }
        }
        Ok(())
    }

    /// Reads and validates a JSON config. Relative data and output paths
    /// resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.data.path.is_relative() {
            cfg.data.path = base.join(&cfg.data.path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON used for digests and provenance.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}
