//! JSON-lines prediction files: `{"plot_id": .., "species": [..], "scores": [..]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::binio;
use crate::catalog::SpeciesId;
use crate::error::{Error, IoContext, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    plot_id: String,
    species: Vec<SpeciesId>,
    scores: Vec<f64>,
}

pub fn format_predictions(preds: &[PredictionSet]) -> Result<String> {
    let mut out = String::new();
    for p in preds {
        let line = PredictionLine {
            plot_id: p.plot_id.clone(),
            species: p.species().collect(),
            scores: p.ranked.iter().map(|&(_, s)| s).collect(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses a prediction file; errors carry the 1-based line number.
pub fn parse_predictions(text: &str, origin: &Path) -> Result<Vec<PredictionSet>> {
    let mut preds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            reason,
        };
        let parsed: PredictionLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if parsed.species.len() != parsed.scores.len() {
            return Err(err(format!(
                "{} species but {} scores",
                parsed.species.len(),
                parsed.scores.len()
            )));
        }
        preds.push(PredictionSet {
            plot_id: parsed.plot_id,
            ranked: parsed.species.into_iter().zip(parsed.scores).collect(),
        });
    }
    Ok(preds)
}

pub fn write_predictions(preds: &[PredictionSet], path: &Path) -> Result<()> {
    binio::write_atomic(path, format_predictions(preds)?.as_bytes())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionSet>> {
    let text =
        std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
    parse_predictions(&text, path)
}
