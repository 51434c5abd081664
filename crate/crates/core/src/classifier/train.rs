use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{LinearModel, LinearParams};
use super::softmax::argmax;
use crate::catalog::SpeciesCatalog;
use crate::error::{Error, Result};
use crate::features::{EmbeddingKind, EmbeddingRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 64,
            epochs: 50,
            seed: 7,
            weight_init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch_size and epochs must be positive"));
        }
        if !(self.weight_init_scale > 0.0 && self.weight_init_scale.is_finite()) {
            return Err(Error::invalid("weight_init_scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Full-dataset mean NLL before training, then after every epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace is never empty")
    }
}

/// Labeled examples ready for optimization: vectors plus class indices.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: EmbeddingKind,
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    /// Encodes labels against `catalog`. Every record must be labeled, of one
    /// classifier-input kind, and in the catalog.
    pub fn from_records(records: &[EmbeddingRecord], catalog: &SpeciesCatalog) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::invalid("no training embeddings"))?;
        let kind = first.kind;
        if !kind.is_classifier_input() {
            return Err(Error::invalid(format!("cannot train on {kind} embeddings")));
        }
        let mut inputs = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            if r.kind != kind {
                return Err(Error::invalid(format!(
                    "mixed embedding kinds: {kind} and {} (record `{}`)",
                    r.kind, r.image_id
                )));
            }
            let species = r
                .species
                .ok_or_else(|| Error::MissingLabel(r.image_id.clone()))?;
            labels.push(catalog.encode(species)?);
            inputs.push(r.vector.clone());
        }
        Ok(Dataset {
            kind,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn pairs(&self) -> Vec<(&[f32], usize)> {
        self.inputs
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
            .collect()
    }
}

/// Fraction of samples whose argmax class equals the label.
pub fn accuracy(model: &LinearModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        if argmax(&model.predict_log_probs(x)?) == Some(y) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch SGD with momentum on the mean NLL.
///
/// Initialization and per-epoch shuffling draw from one ChaCha stream seeded
/// by `cfg.seed`, so a fixed config reproduces parameters bit-exactly.
pub fn train(data: &Dataset, catalog: &SpeciesCatalog, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if data.is_empty() {
        return Err(Error::invalid("no training embeddings"));
    }
    let (classes, dim) = (catalog.len(), data.kind.dim());
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= classes) {
        return Err(Error::ClassOutOfRange {
            index: bad,
            classes,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = (cfg.weight_init_scale / (dim as f64).sqrt()) as f32;
    let weights = (0..classes * dim)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    let mut params = LinearParams::new(classes, dim, weights, vec![0.0f32; classes])?;

    let all = data.pairs();
    let mut velocity_w = vec![0.0f32; params.weights.len()];
    let mut velocity_b = vec![0.0f32; classes];
    let (lr, mu) = (cfg.learning_rate as f32, cfg.momentum as f32);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs + 1);
    loss_trace.push(params.mean_loss(&all)?);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f32], usize)> = idx.iter().map(|&i| all[i]).collect();
            let grad = params.gradient(&batch)?;
            for ((p, v), g) in params
                .weights
                .iter_mut()
                .zip(&mut velocity_w)
                .zip(&grad.weights)
            {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
            for ((p, v), g) in params.bias.iter_mut().zip(&mut velocity_b).zip(&grad.bias) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
        let loss = params.mean_loss(&all)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss (diverged)"));
        }
        debug!("epoch {epoch}: loss {loss:.6}");
        loss_trace.push(loss);
    }

    let model = LinearModel::new(params, catalog.clone(), data.kind)?;
    Ok(TrainOutcome { model, loss_trace })
}
