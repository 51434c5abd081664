//! Sequential stage orchestration with content-hash skipping.
//!
//! Each stage has a key: SHA-256 over its name, its parameters (as JSON) and
//! the bytes of every input file. After a successful run the key and a hash
//! of the outputs are stored under `<work_dir>/.stamps/<stage>.json`. A
//! stage is skipped when its key matches and its outputs still hash to the
//! recorded value.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExtractorChoice, PipelineConfig};
use super::stages::{
    embed_stage, evaluate_stage, infer_stage, preprocess_stage, remove_path, submit_stage,
    train_stage, CATALOG_FILE,
};
use super::workers::{resolve_workers, with_workers};
use crate::error::{Error, IoContext, Result};
use crate::metrics::MetricsReport;

const STAMP_DIR: &str = ".stamps";

/// Artifact locations inside the work directory.
#[derive(Debug, Clone)]
pub struct WorkLayout {
    pub images: PathBuf,
    pub catalog: PathBuf,
    pub embeddings: PathBuf,
    pub model: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
    pub submission: PathBuf,
    pub stamps: PathBuf,
}

impl WorkLayout {
    pub fn new(work_dir: &Path) -> Self {
        let images = work_dir.join("images");
        WorkLayout {
            catalog: images.join(CATALOG_FILE),
            images,
            embeddings: work_dir.join("embeddings"),
            model: work_dir.join("model.lin1"),
            predictions: work_dir.join("predictions.jsonl"),
            report: work_dir.join("report.json"),
            submission: work_dir.join("submission.csv"),
            stamps: work_dir.join(STAMP_DIR),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub stages: Vec<(&'static str, StageStatus)>,
    pub metrics: Option<MetricsReport>,
}

impl PipelineOutcome {
    pub fn status(&self, stage: &str) -> Option<StageStatus> {
        self.stages
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|&(_, st)| st)
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Stamp {
    key: String,
    outputs: String,
}

/// Hashes file paths (relative to each root) and contents, in sorted order.
fn hash_tree(hasher: &mut Sha256, root: &Path) -> Result<()> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io {
            context: format!("walking {}", root.display()),
            source: e.into(),
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    for file in files {
        let rel = file.strip_prefix(root).unwrap_or(&file);
        let bytes = std::fs::read(&file).io_context(|| format!("hashing {}", file.display()))?;
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(())
}

fn fingerprint(parts: &[&[u8]], paths: &[&Path]) -> Result<String> {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    for path in paths {
        hasher.update(b"\x01");
        hash_tree(&mut hasher, path)?;
    }
    Ok(hex::encode(hasher.finalize()))
}

struct StageRunner<'a> {
    stamps: &'a Path,
    statuses: Vec<(&'static str, StageStatus)>,
}

impl StageRunner<'_> {
    fn run<P: Serialize>(
        &mut self,
        name: &'static str,
        params: &P,
        inputs: &[&Path],
        outputs: &[&Path],
        body: impl FnOnce() -> Result<()>,
    ) -> Result<StageStatus> {
        let wrap = |e: Error| Error::Stage {
            stage: name,
            source: Box::new(e),
        };
        let params = serde_json::to_vec(params).map_err(|e| wrap(e.into()))?;
        let key = fingerprint(&[name.as_bytes(), &params], inputs).map_err(wrap)?;
        let stamp_path = self.stamps.join(format!("{name}.json"));

        if outputs.iter().all(|p| p.exists()) {
            if let Ok(text) = std::fs::read_to_string(&stamp_path) {
                if let Ok(stamp) = serde_json::from_str::<Stamp>(&text) {
                    let current = fingerprint(&[], outputs).map_err(wrap)?;
                    if stamp.key == key && stamp.outputs == current {
                        info!("{name}: up to date, skipped");
                        self.statuses.push((name, StageStatus::Skipped));
                        return Ok(StageStatus::Skipped);
                    }
                }
            }
        }

        info!("{name}: running");
        let _ = std::fs::remove_file(&stamp_path);
        if let Err(e) = body() {
            for out in outputs {
                let _ = remove_path(out);
            }
            return Err(wrap(e));
        }
        let stamp = Stamp {
            key,
            outputs: fingerprint(&[], outputs).map_err(wrap)?,
        };
        std::fs::create_dir_all(self.stamps)
            .io_context(|| format!("creating {}", self.stamps.display()))
            .map_err(wrap)?;
        let json = serde_json::to_vec_pretty(&stamp).map_err(|e| wrap(e.into()))?;
        std::fs::write(&stamp_path, json)
            .io_context(|| format!("writing {}", stamp_path.display()))
            .map_err(wrap)?;
        self.statuses.push((name, StageStatus::Ran));
        Ok(StageStatus::Ran)
    }
}

/// Runs preprocess → embed → train → infer → evaluate → submit.
///
/// `evaluate` runs only when a truth file is configured. With the external
/// extractor the pipeline stops after `train`: plot inference needs an
/// in-process extractor to embed tiles.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let workers = resolve_workers(cfg.workers)?;
    info!("running pipeline with {workers} workers");
    with_workers(workers, || run_stages(cfg))?
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let paths = &cfg.paths;
    let work = WorkLayout::new(&paths.work_dir);
    std::fs::create_dir_all(&paths.work_dir)
        .io_context(|| format!("creating {}", paths.work_dir.display()))?;
    let mut runner = StageRunner {
        stamps: &work.stamps,
        statuses: Vec::new(),
    };

    runner.run(
        "preprocess",
        &cfg.preprocess,
        &[&paths.train_images],
        &[&work.images],
        || preprocess_stage(&paths.train_images, &work.images, &cfg.preprocess).map(drop),
    )?;

    let embed_input = match cfg.embed.extractor {
        ExtractorChoice::Toy => work.images.clone(),
        ExtractorChoice::External => paths
            .external_embeddings
            .clone()
            .ok_or_else(|| Error::Config("external_embeddings is not set".into()))?,
    };
    runner.run(
        "embed",
        &cfg.embed,
        &[&embed_input],
        &[&work.embeddings],
        || embed_stage(&embed_input, &work.embeddings, &cfg.embed).map(drop),
    )?;

    runner.run(
        "train",
        &cfg.train,
        &[&work.embeddings, &work.catalog],
        &[&work.model],
        || train_stage(&work.embeddings, &work.catalog, &work.model, &cfg.train).map(drop),
    )?;

    if cfg.embed.extractor == ExtractorChoice::External {
        info!("external extractor: stopping after train");
        return Ok(PipelineOutcome {
            stages: runner.statuses,
            metrics: None,
        });
    }

    runner.run(
        "infer",
        &(&cfg.infer, cfg.embed.seed),
        &[&work.model, &paths.plots],
        &[&work.predictions],
        || {
            infer_stage(
                &work.model,
                &paths.plots,
                &cfg.infer,
                cfg.embed.seed,
                &work.predictions,
            )
            .map(drop)
        },
    )?;

    let mut metrics = None;
    if let Some(truth) = &paths.truth {
        runner.run(
            "evaluate",
            &(),
            &[&work.predictions, truth],
            &[&work.report],
            || evaluate_stage(&work.predictions, truth, &work.report).map(drop),
        )?;
        let text = std::fs::read_to_string(&work.report)
            .io_context(|| format!("reading {}", work.report.display()))?;
        metrics = Some(serde_json::from_str(&text)?);
    }

    runner.run(
        "submit",
        &cfg.submit,
        &[&work.predictions],
        &[&work.submission],
        || submit_stage(&work.predictions, cfg.submit.cap, &work.submission).map(drop),
    )?;

    Ok(PipelineOutcome {
        stages: runner.statuses,
        metrics,
    })
}
