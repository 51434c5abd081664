//! Merging per-tile class probabilities into one ranked species list.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{SpeciesCatalog, SpeciesId};
use crate::error::{Error, Result};

const COLUMN_SUM_TOLERANCE: f64 = 1e-5;

/// `P[i, j]`: probability of class `i` in tile `j`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct TileProbabilityMatrix {
    classes: usize,
    tiles: usize,
    probs: Vec<f64>,
}

impl TileProbabilityMatrix {
    /// Builds the matrix from one probability vector per tile.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let tiles = columns.len();
        let classes = columns.first().map_or(0, Vec::len);
        if tiles == 0 || classes == 0 {
            return Err(Error::invalid(
                "probability matrix needs at least one tile and class",
            ));
        }
        let mut probs = Vec::with_capacity(classes * tiles);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != classes {
                return Err(Error::DimensionMismatch {
                    expected: classes,
                    actual: col.len(),
                });
            }
            if col.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!(
                    "tile {j} has a probability outside [0, 1]"
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "tile {j} probabilities sum to {sum}"
                )));
            }
            probs.extend(col);
        }
        Ok(TileProbabilityMatrix {
            classes,
            tiles,
            probs,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn tiles(&self) -> usize {
        self.tiles
    }

    pub fn get(&self, class: usize, tile: usize) -> f64 {
        self.probs[tile * self.classes + class]
    }

    pub fn column(&self, tile: usize) -> &[f64] {
        &self.probs[tile * self.classes..(tile + 1) * self.classes]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.probs.chunks_exact(self.classes)
    }
}

/// Ranked, duplicate-free species predictions for one plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub plot_id: String,
    pub ranked: Vec<(SpeciesId, f64)>,
}

impl PredictionSet {
    pub fn species(&self) -> impl Iterator<Item = SpeciesId> + '_ {
        self.ranked.iter().map(|&(s, _)| s)
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }
}

/// Where the top-L cut is applied by [`aggregate_topk`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopLScope {
    /// Keep the L best of each tile's top K, then merge (M·L candidates).
    #[default]
    PerTile,
    /// Merge every tile's top K, then keep the L best species overall.
    Global,
}

/// Higher score first; equal scores go to the lower class index.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// The `k` best `(class, probability)` pairs of one column.
pub fn top_k_column(column: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = column.iter().copied().enumerate().collect();
    let k = k.min(ranked.len());
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k, rank_order);
        ranked.truncate(k);
    }
    ranked.sort_by(rank_order);
    ranked
}

/// Keeps the first occurrence of each species. Input must be score-sorted.
pub fn dedup_preserve_order(pairs: &[(SpeciesId, f64)]) -> Result<Vec<(SpeciesId, f64)>> {
    if let Some(i) = pairs.windows(2).position(|w| w[1].1 > w[0].1) {
        return Err(Error::invalid(format!(
            "scores must be non-increasing (position {} has {} after {})",
            i + 1,
            pairs[i + 1].1,
            pairs[i].1
        )));
    }
    let mut seen = HashSet::with_capacity(pairs.len());
    Ok(pairs
        .iter()
        .copied()
        .filter(|(s, _)| seen.insert(*s))
        .collect())
}

fn check_catalog(p: &TileProbabilityMatrix, catalog: &SpeciesCatalog) -> Result<()> {
    if p.classes() != catalog.len() {
        return Err(Error::DimensionMismatch {
            expected: catalog.len(),
            actual: p.classes(),
        });
    }
    Ok(())
}

/// Sorts class-indexed candidates, maps them to species and deduplicates.
fn finish(
    plot_id: &str,
    mut candidates: Vec<(usize, f64)>,
    catalog: &SpeciesCatalog,
) -> Result<PredictionSet> {
    candidates.sort_by(rank_order);
    let pairs = candidates
        .into_iter()
        .map(|(class, score)| Ok((catalog.decode(class)?, score)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionSet {
        plot_id: plot_id.to_string(),
        ranked: dedup_preserve_order(&pairs)?,
    })
}

/// One winner per tile (its most probable class), merged by score.
pub fn aggregate_argmax(
    plot_id: &str,
    p: &TileProbabilityMatrix,
    catalog: &SpeciesCatalog,
) -> Result<PredictionSet> {
    check_catalog(p, catalog)?;
    let winners = p.columns().map(|col| top_k_column(col, 1)[0]).collect();
    finish(plot_id, winners, catalog)
}

fn check_topk(classes: usize, top_k: usize, top_l: usize) -> Result<()> {
    if top_l == 0 || top_l > top_k || top_k > classes {
        return Err(Error::invalid(format!(
            "need 1 <= top_l ({top_l}) <= top_k ({top_k}) <= classes ({classes})"
        )));
    }
    Ok(())
}

/// Pre-deduplication candidates of [`aggregate_topk`], as `(class, score)`
/// in tile order.
pub fn topk_candidates(
    p: &TileProbabilityMatrix,
    top_k: usize,
    top_l: usize,
    scope: TopLScope,
) -> Result<Vec<(usize, f64)>> {
    check_topk(p.classes(), top_k, top_l)?;
    let per_tile = match scope {
        TopLScope::PerTile => top_l,
        TopLScope::Global => top_k,
    };
    Ok(p.columns()
        .flat_map(|col| {
            let mut best = top_k_column(col, top_k);
            best.truncate(per_tile);
            best
        })
        .collect())
}

/// Top-K per tile, limited to top-L, merged across tiles, sorted, deduplicated.
pub fn aggregate_topk(
    plot_id: &str,
    p: &TileProbabilityMatrix,
    top_k: usize,
    top_l: usize,
    scope: TopLScope,
    catalog: &SpeciesCatalog,
) -> Result<PredictionSet> {
    check_catalog(p, catalog)?;
    let candidates = topk_candidates(p, top_k, top_l, scope)?;
    let mut set = finish(plot_id, candidates, catalog)?;
    if scope == TopLScope::Global {
        set.ranked.truncate(top_l);
    }
    Ok(set)
}

/// The `top_l` most probable species of a single probability vector.
pub fn rank_top(
    plot_id: &str,
    probs: &[f64],
    top_l: usize,
    catalog: &SpeciesCatalog,
) -> Result<PredictionSet> {
    if probs.len() != catalog.len() {
        return Err(Error::DimensionMismatch {
            expected: catalog.len(),
            actual: probs.len(),
        });
    }
    if top_l == 0 || top_l > catalog.len() {
        return Err(Error::invalid(format!(
            "top_l {top_l} must be in 1..={}",
            catalog.len()
        )));
    }
    finish(plot_id, top_k_column(probs, top_l), catalog)
}
