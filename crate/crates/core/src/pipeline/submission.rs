//! Submission CSV: header `plot_id;species_ids`, rows `p1;[7, 3]`.
//!
//! The column layout lives only in [`format_row`] and [`parse_submission`].

use std::path::Path;

use crate::binio;
use crate::catalog::SpeciesId;
use crate::error::{Error, IoContext, Result};
use crate::inference::PredictionSet;

pub const SUBMISSION_HEADER: &str = "plot_id;species_ids";

/// One submitted plot: at most `cap` species in ranked order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionRow {
    pub plot_id: String,
    pub species: Vec<SpeciesId>,
}

fn format_row(row: &SubmissionRow) -> String {
    let ids: Vec<String> = row.species.iter().map(|s| s.to_string()).collect();
    format!("{};[{}]\n", row.plot_id, ids.join(", "))
}

/// Truncates every prediction set to `cap` species, keeping rank order.
pub fn submission_rows(preds: &[PredictionSet], cap: usize) -> Vec<SubmissionRow> {
    preds
        .iter()
        .map(|p| SubmissionRow {
            plot_id: p.plot_id.clone(),
            species: p.species().take(cap).collect(),
        })
        .collect()
}

pub fn format_submission(preds: &[PredictionSet], cap: usize) -> String {
    let mut out = format!("{SUBMISSION_HEADER}\n");
    for row in submission_rows(preds, cap) {
        out.push_str(&format_row(&row));
    }
    out
}

pub fn parse_submission(text: &str, origin: &Path) -> Result<Vec<SubmissionRow>> {
    let err = |line: usize, reason: &str| Error::Parse {
        path: origin.to_path_buf(),
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, SUBMISSION_HEADER)) => {}
        _ => return Err(err(1, &format!("expected header `{SUBMISSION_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (plot_id, list) = line
            .split_once(';')
            .ok_or_else(|| err(i + 1, "expected `plot_id;[ids]`"))?;
        let inner = list
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| err(i + 1, "species list must be bracketed"))?;
        let species = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|s| s.trim().parse::<u64>().map(SpeciesId))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err(i + 1, "species ids must be integers"))?
        };
        rows.push(SubmissionRow {
            plot_id: plot_id.to_string(),
            species,
        });
    }
    Ok(rows)
}

pub fn write_submission(preds: &[PredictionSet], cap: usize, path: &Path) -> Result<()> {
    binio::write_atomic(path, format_submission(preds, cap).as_bytes())
}

pub fn read_submission(path: &Path) -> Result<Vec<SubmissionRow>> {
    let text =
        std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
    parse_submission(&text, path)
}
