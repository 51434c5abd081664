//! Declarative pipeline configuration (TOML, one table per stage).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::error::{Error, IoContext, Result};
use crate::features::EmbeddingKind;
use crate::inference::InferenceConfig;
use crate::preprocess::{DEFAULT_MIN_COUNT, PROCESSED_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorChoice {
    /// In-process deterministic patch-statistics extractor.
    Toy,
    /// Pre-computed `EMB1` shards from an out-of-process extractor.
    External,
}

impl fmt::Display for ExtractorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractorChoice::Toy => "toy",
            ExtractorChoice::External => "external",
        })
    }
}

impl FromStr for ExtractorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(ExtractorChoice::Toy),
            "external" => Ok(ExtractorChoice::External),
            other => Err(Error::invalid(format!("unknown extractor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// PNG tree or `IMG1` shards of labeled single-species images.
    pub train_images: PathBuf,
    /// Plot images to predict (PNG tree or `IMG1` shards).
    pub plots: PathBuf,
    /// Ground truth; the evaluate stage runs only when set.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    /// `EMB1` shards used when `embed.extractor = "external"`.
    #[serde(default)]
    pub external_embeddings: Option<PathBuf>,
    pub work_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub side: u32,
    pub min_count: u64,
    /// Records per output `IMG1` shard.
    pub shard_size: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            side: PROCESSED_SIDE,
            min_count: DEFAULT_MIN_COUNT,
            shard_size: 512,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if self.side != PROCESSED_SIDE {
            return Err(Error::invalid(format!(
                "side must be {PROCESSED_SIDE} (the extractor input size), got {}",
                self.side
            )));
        }
        if self.shard_size == 0 {
            return Err(Error::invalid("shard_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedParams {
    pub kind: EmbeddingKind,
    pub extractor: ExtractorChoice,
    pub seed: u64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            kind: EmbeddingKind::Cls768,
            extractor: ExtractorChoice::Toy,
            seed: 7,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_classifier_input() {
            return Err(Error::invalid(format!(
                "embedding kind must be dct64 or cls768, got {}",
                self.kind
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubmitParams {
    /// Maximum species per submitted plot.
    pub cap: usize,
}

impl Default for SubmitParams {
    fn default() -> Self {
        SubmitParams { cap: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Worker threads; `PLOTGRID_WORKERS` overrides, default is all cores.
    #[serde(default)]
    pub workers: Option<usize>,
    pub paths: PathsConfig,
    #[serde(default)]
    pub preprocess: PreprocessParams,
    #[serde(default)]
    pub embed: EmbedParams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub infer: InferenceConfig,
    #[serde(default)]
    pub submit: SubmitParams,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.train_images, &mut p.plots, &mut p.work_dir] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        for path in [&mut p.truth, &mut p.external_embeddings]
            .into_iter()
            .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Checks every parameter and input path before anything runs.
    pub fn validate(&self) -> Result<()> {
        let stage =
            |name: &str, r: Result<()>| r.map_err(|e| Error::Config(format!("[{name}] {e}")));
        stage("preprocess", self.preprocess.validate())?;
        stage("embed", self.embed.validate())?;
        stage("train", self.train.validate())?;
        // The class count is unknown until preprocessing; check what we can.
        stage("infer", self.infer.validate(usize::MAX))?;
        if self.submit.cap == 0 {
            return Err(Error::Config("[submit] cap must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        let p = &self.paths;
        let mut inputs = vec![("train_images", &p.train_images), ("plots", &p.plots)];
        if let Some(truth) = &p.truth {
            inputs.push(("truth", truth));
        }
        match (self.embed.extractor, &p.external_embeddings) {
            (ExtractorChoice::External, Some(ext)) => inputs.push(("external_embeddings", ext)),
            (ExtractorChoice::External, None) => {
                return Err(Error::Config(
                    "[paths] external_embeddings is required with the external extractor".into(),
                ))
            }
            _ => {}
        }
        for (name, path) in inputs {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "[paths] {name} does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}
