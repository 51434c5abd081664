//! Ground-truth CSV: header `plot_id;species_ids`, then `plot;id id id`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::catalog::SpeciesId;
use crate::error::{Error, IoContext, Result};
use crate::record::PlotLabelSet;

pub const TRUTH_HEADER: &str = "plot_id;species_ids";

pub fn format_truth(truths: &[PlotLabelSet]) -> String {
    let mut out = format!("{TRUTH_HEADER}\n");
    for t in truths {
        let ids: Vec<String> = t.species.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("{};{}\n", t.plot_id, ids.join(" ")));
    }
    out
}

pub fn parse_truth(text: &str, origin: &Path) -> Result<Vec<PlotLabelSet>> {
    let err = |line: usize, reason: &str| Error::Parse {
        path: origin.to_path_buf(),
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == TRUTH_HEADER => {}
        _ => return Err(err(1, &format!("expected header `{TRUTH_HEADER}`"))),
    }
    let mut truths = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (plot_id, ids) = line
            .split_once(';')
            .ok_or_else(|| err(i + 1, "expected `plot_id;species_ids`"))?;
        let species = ids
            .split_whitespace()
            .map(|s| s.parse::<u64>().map(SpeciesId))
            .collect::<std::result::Result<BTreeSet<_>, _>>()
            .map_err(|_| err(i + 1, "species ids must be integers"))?;
        if species.is_empty() {
            return Err(err(i + 1, "ground-truth species set is empty"));
        }
        truths.push(PlotLabelSet {
            plot_id: plot_id.to_string(),
            species,
        });
    }
    Ok(truths)
}

pub fn read_truth(path: &Path) -> Result<Vec<PlotLabelSet>> {
    let text =
        std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
    parse_truth(&text, path)
}

pub fn write_truth(truths: &[PlotLabelSet], path: &Path) -> Result<()> {
    std::fs::write(path, format_truth(truths)).io_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let truths = vec![
            PlotLabelSet {
                plot_id: "p1".into(),
                species: [3, 1].into_iter().map(SpeciesId).collect(),
            },
            PlotLabelSet {
                plot_id: "p2".into(),
                species: [7].into_iter().map(SpeciesId).collect(),
            },
        ];
        let text = format_truth(&truths);
        assert_eq!(text, "plot_id;species_ids\np1;1 3\np2;7\n");
        assert_eq!(parse_truth(&text, Path::new("t")).unwrap(), truths);
    }

    #[test]
    fn errors() {
        assert!(parse_truth("plot;ids\n", Path::new("t")).is_err());
        assert!(matches!(
            parse_truth("plot_id;species_ids\np1;1 x\n", Path::new("t")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_truth("plot_id;species_ids\np1;\n", Path::new("t")).is_err());
        assert!(parse_truth("plot_id;species_ids\np1\n", Path::new("t")).is_err());
    }
}
