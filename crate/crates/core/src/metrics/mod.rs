//! F1 scores over predicted vs. true species sets.
//!
//! * per plot: mean over plots of the set F1 of each plot,
//! * per species: mean over species of the F1 from that species' TP/FP/FN,
//! * micro: `2ΣTP / (2ΣTP + ΣFP + ΣFN)` over all species and plots.
//!
//! Every 0/0 ratio is taken as 0.

mod truth;

pub use truth::{format_truth, parse_truth, read_truth, write_truth, TRUTH_HEADER};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::catalog::SpeciesId;
use crate::error::{Error, Result};
use crate::inference::PredictionSet;
use crate::record::PlotLabelSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn is_zero(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Set-level confusion counts of one plot.
pub fn set_counts(pred: &BTreeSet<SpeciesId>, truth: &BTreeSet<SpeciesId>) -> Counts {
    let tp = pred.intersection(truth).count() as u64;
    Counts {
        tp,
        fp: pred.len() as u64 - tp,
        fn_: truth.len() as u64 - tp,
    }
}

/// Harmonic mean of precision and recall of `pred` against `truth`.
pub fn set_f1(pred: &BTreeSet<SpeciesId>, truth: &BTreeSet<SpeciesId>) -> f64 {
    let c = set_counts(pred, truth);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-species TP/FP/FN accumulated over plots. Merging is plain addition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_species: BTreeMap<SpeciesId, Counts>,
}

impl ConfusionCounts {
    pub fn add_plot(&mut self, pred: &BTreeSet<SpeciesId>, truth: &BTreeSet<SpeciesId>) {
        for s in pred.union(truth) {
            let entry = self.per_species.entry(*s).or_default();
            match (pred.contains(s), truth.contains(s)) {
                (true, true) => entry.tp += 1,
                (true, false) => entry.fp += 1,
                (false, true) => entry.fn_ += 1,
                (false, false) => unreachable!(),
            }
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (s, c) in &other.per_species {
            *self.per_species.entry(*s).or_default() += *c;
        }
    }

    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.per_species.values() {
            t += *c;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotScore {
    pub plot_id: String,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesScore {
    pub species: SpeciesId,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub macro_f1_per_plot: f64,
    pub macro_f1_per_species: f64,
    pub micro_f1: f64,
    /// In truth-file order.
    pub per_plot: Vec<PlotScore>,
    /// Species with any TP/FP/FN, ascending id.
    pub per_species: Vec<SpeciesScore>,
    pub totals: Counts,
}

/// Pairs predictions with truths by exact plot id.
pub fn match_plots<'a>(
    preds: &'a [PredictionSet],
    truths: &'a [PlotLabelSet],
) -> Result<Vec<(BTreeSet<SpeciesId>, &'a PlotLabelSet)>> {
    let mut by_id: HashMap<&str, &PredictionSet> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.plot_id.as_str(), p).is_some() {
            return Err(Error::invalid(format!(
                "duplicate prediction for plot `{}`",
                p.plot_id
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(truths.len());
    for t in truths {
        if !seen.insert(t.plot_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate truth for plot `{}`",
                t.plot_id
            )));
        }
        match by_id.get(t.plot_id.as_str()) {
            Some(p) => pairs.push((p.species().collect(), t)),
            None => missing.push(t.plot_id.clone()),
        }
    }
    let mut extra: Vec<String> = preds
        .iter()
        .filter(|p| !seen.contains(p.plot_id.as_str()))
        .map(|p| p.plot_id.clone())
        .collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::PlotMismatch { missing, extra });
    }
    Ok(pairs)
}

pub fn evaluate(preds: &[PredictionSet], truths: &[PlotLabelSet]) -> Result<MetricsReport> {
    let pairs = match_plots(preds, truths)?;
    let mut confusion = ConfusionCounts::default();
    let per_plot: Vec<PlotScore> = pairs
        .iter()
        .map(|(pred, truth)| {
            confusion.add_plot(pred, &truth.species);
            PlotScore {
                plot_id: truth.plot_id.clone(),
                f1: set_f1(pred, &truth.species),
                counts: set_counts(pred, &truth.species),
            }
        })
        .collect();
    let per_species: Vec<SpeciesScore> = confusion
        .per_species
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(&species, &counts)| SpeciesScore {
            species,
            f1: counts.f1(),
            counts,
        })
        .collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| {
        if n == 0 {
            0.0
        } else {
            xs.sum::<f64>() / n as f64
        }
    };
    let totals = confusion.total();
    Ok(MetricsReport {
        macro_f1_per_plot: mean(&mut per_plot.iter().map(|p| p.f1), per_plot.len()),
        macro_f1_per_species: mean(&mut per_species.iter().map(|s| s.f1), per_species.len()),
        micro_f1: totals.f1(),
        per_plot,
        per_species,
        totals,
    })
}

pub fn macro_f1_per_plot(preds: &[PredictionSet], truths: &[PlotLabelSet]) -> Result<f64> {
    Ok(evaluate(preds, truths)?.macro_f1_per_plot)
}

pub fn macro_f1_per_species(preds: &[PredictionSet], truths: &[PlotLabelSet]) -> Result<f64> {
    Ok(evaluate(preds, truths)?.macro_f1_per_species)
}

pub fn micro_f1(preds: &[PredictionSet], truths: &[PlotLabelSet]) -> Result<f64> {
    Ok(evaluate(preds, truths)?.micro_f1)
}
