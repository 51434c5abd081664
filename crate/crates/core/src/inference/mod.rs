//! Full-image and grid-tile multi-label prediction.

mod aggregate;
mod predictions;
mod tiles;

pub use aggregate::{
    aggregate_argmax, aggregate_topk, dedup_preserve_order, rank_top, top_k_column,
    topk_candidates, PredictionSet, TileProbabilityMatrix, TopLScope,
};
pub use predictions::{format_predictions, parse_predictions, read_predictions, write_predictions};
pub use tiles::{assemble_grid, cell_span, tile_grid};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::LinearModel;
use crate::error::{Error, Result};
use crate::features::{Embedder, FeatureExtractor};
use crate::preprocess::{normalize_image, PROCESSED_SIDE};
use crate::record::ImageRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InferenceMode {
    #[serde(rename = "full")]
    FullImage,
    #[serde(rename = "grid-argmax")]
    GridArgmax,
    #[serde(rename = "grid-topk")]
    GridTopK,
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceMode::FullImage => "full",
            InferenceMode::GridArgmax => "grid-argmax",
            InferenceMode::GridTopK => "grid-topk",
        })
    }
}

impl FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(InferenceMode::FullImage),
            "grid-argmax" => Ok(InferenceMode::GridArgmax),
            "grid-topk" => Ok(InferenceMode::GridTopK),
            other => Err(Error::invalid(format!("unknown inference mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub mode: InferenceMode,
    /// Grid side N; a plot is cut into N² tiles.
    pub grid_n: u32,
    pub top_k: usize,
    /// Species kept per tile (grid-topk) or per image (full).
    pub top_l: usize,
    pub top_l_scope: TopLScope,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            mode: InferenceMode::GridArgmax,
            grid_n: 3,
            top_k: 10,
            top_l: 5,
            top_l_scope: TopLScope::PerTile,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.grid_n == 0 {
            return Err(Error::invalid("grid must be at least 1x1"));
        }
        match self.mode {
            InferenceMode::GridArgmax => Ok(()),
            InferenceMode::GridTopK => {
                if self.top_l == 0 || self.top_l > self.top_k || self.top_k > classes {
                    return Err(Error::invalid(format!(
                        "need 1 <= top_l ({}) <= top_k ({}) <= classes ({classes})",
                        self.top_l, self.top_k
                    )));
                }
                Ok(())
            }
            InferenceMode::FullImage => {
                if self.top_l == 0 || self.top_l > classes {
                    return Err(Error::invalid(format!(
                        "top_l ({}) must be in 1..={classes}",
                        self.top_l
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Probability vector of one image under `model`.
fn image_probabilities(
    model: &LinearModel,
    embedder: &Embedder,
    extractor: &dyn FeatureExtractor,
    img: &ImageRecord,
) -> Result<Vec<f64>> {
    let processed = normalize_image(img, PROCESSED_SIDE)?;
    let record = embedder.embed_image(extractor, &processed)?;
    Ok(model
        .predict_log_probs(&record.vector)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Scores every tile; column `j` holds the class probabilities of tile `j`.
///
/// Tiles are normalized (center crop, resize) exactly like training images.
pub fn score_tiles(
    model: &LinearModel,
    tiles: &[ImageRecord],
    extractor: &dyn FeatureExtractor,
) -> Result<TileProbabilityMatrix> {
    if tiles.is_empty() {
        return Err(Error::invalid("no tiles to score"));
    }
    let embedder = Embedder::new(model.input_kind)?;
    let columns = tiles
        .par_iter()
        .map(|tile| image_probabilities(model, &embedder, extractor, tile))
        .collect::<Result<Vec<_>>>()?;
    TileProbabilityMatrix::from_columns(columns)
}

/// Ranks species for the whole image as one input.
pub fn predict_full_image(
    model: &LinearModel,
    img: &ImageRecord,
    extractor: &dyn FeatureExtractor,
    top_l: usize,
) -> Result<PredictionSet> {
    let embedder = Embedder::new(model.input_kind)?;
    let probs = image_probabilities(model, &embedder, extractor, img)?;
    rank_top(&img.image_id, &probs, top_l, &model.catalog)
}

/// Predicts one plot image according to `cfg.mode`.
pub fn predict_plot(
    model: &LinearModel,
    img: &ImageRecord,
    extractor: &dyn FeatureExtractor,
    cfg: &InferenceConfig,
) -> Result<PredictionSet> {
    cfg.validate(model.classes())?;
    match cfg.mode {
        InferenceMode::FullImage => predict_full_image(model, img, extractor, cfg.top_l),
        InferenceMode::GridArgmax | InferenceMode::GridTopK => {
            let tiles = tile_grid(img, cfg.grid_n)?;
            let probs = score_tiles(model, &tiles, extractor)?;
            if cfg.mode == InferenceMode::GridArgmax {
                aggregate_argmax(&img.image_id, &probs, &model.catalog)
            } else {
                aggregate_topk(
                    &img.image_id,
                    &probs,
                    cfg.top_k,
                    cfg.top_l,
                    cfg.top_l_scope,
                    &model.catalog,
                )
            }
        }
    }
}

/// Predicts every plot; output order follows input order.
pub fn predict_plots(
    model: &LinearModel,
    plots: &[ImageRecord],
    extractor: &dyn FeatureExtractor,
    cfg: &InferenceConfig,
) -> Result<Vec<PredictionSet>> {
    cfg.validate(model.classes())?;
    plots
        .par_iter()
        .map(|img| predict_plot(model, img, extractor, cfg))
        .collect()
}
