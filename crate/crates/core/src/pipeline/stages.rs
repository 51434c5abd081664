//! Individual stages. Each reads its inputs from disk and writes its
//! outputs atomically: directories are built under `<dir>.partial` and
//! swapped in, files go through a temp sibling.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{EmbedParams, ExtractorChoice, PreprocessParams};
use super::submission::write_submission;
use crate::binio;
use crate::catalog::{build_catalog, SpeciesCatalog};
use crate::classifier::{accuracy, train, Dataset, LinearModel, TrainConfig};
use crate::error::{Error, IoContext, Result};
use crate::features::{
    load_embeddings, Embedder, EmbeddingKind, EmbeddingRecord, EmbeddingShard, ToyExtractor,
    EMBEDDING_SHARD_EXT,
};
use crate::inference::{predict_plots, read_predictions, write_predictions, InferenceConfig};
use crate::metrics::{evaluate, read_truth, MetricsReport};
use crate::preprocess::{
    filter_min_images, load_images, load_shard, normalize_image, pack_shard, ProcessedImage,
    IMAGE_SHARD_EXT, PROCESSED_SIDE,
};

pub const CATALOG_FILE: &str = "catalog.csv";

/// Files in `input` (or `input` itself) with extension `ext`, sorted.
pub fn shard_paths(input: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(input).io_context(|| format!("listing {}", input.display()))? {
        let path = entry
            .io_context(|| format!("listing {}", input.display()))?
            .path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Builds a directory under a staging name and swaps it into `dir`.
/// On failure the staging directory is removed and `dir` is untouched.
fn replace_dir<T>(dir: &Path, build: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let mut staging = dir.as_os_str().to_owned();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    remove_path(&staging)?;
    std::fs::create_dir_all(&staging).io_context(|| format!("creating {}", staging.display()))?;
    match build(&staging) {
        Ok(value) => {
            remove_path(dir)?;
            std::fs::rename(&staging, dir)
                .io_context(|| format!("renaming into {}", dir.display()))?;
            Ok(value)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Removes a file or directory tree if present.
pub(crate) fn remove_path(path: &Path) -> Result<()> {
    let result = if path.is_dir() {
        std::fs::remove_dir_all(path)
    } else if path.exists() {
        std::fs::remove_file(path)
    } else {
        return Ok(());
    };
    result.io_context(|| format!("removing {}", path.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).io_context(|| format!("creating {}", p.display()))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub loaded: usize,
    pub kept: usize,
    pub species: usize,
    pub shards: usize,
}

/// Loads labeled images, drops species with fewer than `min_count` images,
/// normalizes the rest and writes `IMG1` shards plus `catalog.csv`.
///
/// If no species survives, the catalog is written empty and no shards are
/// produced; training on it fails later with "empty catalog".
pub fn preprocess_stage(
    input: &Path,
    output: &Path,
    params: &PreprocessParams,
) -> Result<PreprocessSummary> {
    params.validate()?;
    let records = load_images(input)?;
    let catalog = filter_min_images(&build_catalog(&records)?, params.min_count);
    if catalog.is_empty() {
        warn!(
            "no species has at least {} images; catalog is empty",
            params.min_count
        );
    }
    let kept: Vec<_> = records
        .iter()
        .filter(|r| r.species.is_some_and(|s| catalog.contains(s)))
        .collect();
    let processed = kept
        .par_iter()
        .map(|r| normalize_image(r, params.side).map(ProcessedImage::into_record))
        .collect::<Result<Vec<_>>>()?;
    create_parent(output)?;
    let shards = replace_dir(output, |dir| {
        let chunks: Vec<_> = processed.chunks(params.shard_size).collect();
        for (i, chunk) in chunks.iter().enumerate() {
            pack_shard(chunk, &dir.join(format!("shard-{i:05}.{IMAGE_SHARD_EXT}")))?;
        }
        catalog.write(&dir.join(CATALOG_FILE))?;
        Ok(chunks.len())
    })?;
    let summary = PreprocessSummary {
        loaded: records.len(),
        kept: processed.len(),
        species: catalog.len(),
        shards,
    };
    info!("preprocess: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedSummary {
    pub records: usize,
    pub shards: usize,
}

fn embed_toy_shard(
    path: &Path,
    embedder: &Embedder,
    extractor: &ToyExtractor,
) -> Result<Vec<EmbeddingRecord>> {
    load_shard(path)?
        .into_par_iter()
        .map(|r| {
            let img = ProcessedImage::from_record(r, PROCESSED_SIDE)?;
            embedder.embed_image(extractor, &img)
        })
        .collect()
}

fn convert_external_shard(path: &Path, embedder: &Embedder) -> Result<Vec<EmbeddingRecord>> {
    let shard = load_embeddings(path)?;
    let target = embedder.kind();
    if shard.kind == target {
        return Ok(shard.records);
    }
    if shard.kind != EmbeddingKind::RawTokens || target != EmbeddingKind::Dct64 {
        return Err(Error::invalid(format!(
            "{}: cannot turn {} embeddings into {target}",
            path.display(),
            shard.kind
        )));
    }
    shard
        .records
        .into_par_iter()
        .map(|r| {
            let vector = embedder.embed_raw(&r.vector)?;
            EmbeddingRecord::new(r.image_id, r.species, target, vector)
        })
        .collect()
}

/// Writes one `EMB1` shard of `params.kind` per input shard.
///
/// With the toy extractor `input` holds preprocessed `IMG1` shards; with the
/// external extractor it holds `EMB1` shards of the same kind, or raw-token
/// shards which are reduced to `dct64`.
pub fn embed_stage(input: &Path, output: &Path, params: &EmbedParams) -> Result<EmbedSummary> {
    params.validate()?;
    let embedder = Embedder::new(params.kind)?;
    let ext = match params.extractor {
        ExtractorChoice::Toy => IMAGE_SHARD_EXT,
        ExtractorChoice::External => EMBEDDING_SHARD_EXT,
    };
    let inputs = shard_paths(input, ext)?;
    let extractor = ToyExtractor::new(params.seed);
    create_parent(output)?;
    let records = replace_dir(output, |dir| {
        let mut total = 0;
        for path in &inputs {
            let records = match params.extractor {
                ExtractorChoice::Toy => embed_toy_shard(path, &embedder, &extractor)?,
                ExtractorChoice::External => convert_external_shard(path, &embedder)?,
            };
            total += records.len();
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            EmbeddingShard {
                kind: params.kind,
                records,
            }
            .write(&dir.join(format!("{stem}.{EMBEDDING_SHARD_EXT}")))?;
        }
        Ok(total)
    })?;
    let summary = EmbedSummary {
        records,
        shards: inputs.len(),
    };
    info!("embed: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub records: usize,
    pub classes: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

/// Fits the classifier on every embedding whose species is in the catalog.
pub fn train_stage(
    embeddings: &Path,
    catalog_path: &Path,
    out: &Path,
    cfg: &TrainConfig,
) -> Result<TrainSummary> {
    cfg.validate()?;
    let catalog = SpeciesCatalog::read(catalog_path)?;
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut records = Vec::new();
    for path in shard_paths(embeddings, EMBEDDING_SHARD_EXT)? {
        records.extend(
            load_embeddings(&path)?
                .records
                .into_iter()
                .filter(|r| r.species.is_some_and(|s| catalog.contains(s))),
        );
    }
    let data = Dataset::from_records(&records, &catalog)?;
    let outcome = train(&data, &catalog, cfg)?;
    create_parent(out)?;
    outcome.model.save(out)?;
    let summary = TrainSummary {
        records: data.len(),
        classes: catalog.len(),
        initial_loss: outcome.initial_loss(),
        final_loss: outcome.final_loss(),
        train_accuracy: accuracy(&outcome.model, &data)?,
    };
    info!("train: {summary:?}");
    Ok(summary)
}

/// Predicts every plot image and writes the JSON-lines prediction file.
pub fn infer_stage(
    model_path: &Path,
    images: &Path,
    cfg: &InferenceConfig,
    extractor_seed: u64,
    out: &Path,
) -> Result<usize> {
    let model = LinearModel::load(model_path)?;
    cfg.validate(model.classes())?;
    let plots = load_images(images)?;
    let preds = predict_plots(&model, &plots, &ToyExtractor::new(extractor_seed), cfg)?;
    create_parent(out)?;
    write_predictions(&preds, out)?;
    info!("infer: {} plots ({})", preds.len(), cfg.mode);
    Ok(preds.len())
}

/// Scores predictions against the truth CSV and writes a JSON report.
pub fn evaluate_stage(predictions: &Path, truth: &Path, report: &Path) -> Result<MetricsReport> {
    let preds = read_predictions(predictions)?;
    let truths = read_truth(truth)?;
    let metrics = evaluate(&preds, &truths)?;
    create_parent(report)?;
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    binio::write_atomic(report, json.as_bytes())?;
    info!(
        "evaluate: micro F1 {:.4}, macro per plot {:.4}, macro per species {:.4}",
        metrics.micro_f1, metrics.macro_f1_per_plot, metrics.macro_f1_per_species
    );
    Ok(metrics)
}

/// Writes the submission CSV, keeping at most `cap` species per plot.
pub fn submit_stage(predictions: &Path, cap: usize, out: &Path) -> Result<usize> {
    let preds = read_predictions(predictions)?;
    create_parent(out)?;
    write_submission(&preds, cap, out)?;
    Ok(preds.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_build_leaves_old_dir() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("out");
        std::fs::create_dir(&dir).unwrap();
        std::fs::write(dir.join("old"), "x").unwrap();
        let r: Result<()> = replace_dir(&dir, |staging| {
            std::fs::write(staging.join("new"), "y").unwrap();
            Err(Error::invalid("boom"))
        });
        assert!(r.is_err());
        assert!(dir.join("old").exists());
        assert!(!root.path().join("out.partial").exists());

        replace_dir(&dir, |staging| {
            std::fs::write(staging.join("new"), "y").unwrap();
            Ok(())
        })
        .unwrap();
        assert!(!dir.join("old").exists());
        assert!(dir.join("new").exists());
    }
}
