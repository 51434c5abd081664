use std::path::Path;

use num_traits::Float;
use rayon::prelude::*;

use super::softmax::{log_softmax, nll_loss};
use crate::binio::{self, put_f32s, put_u32, Reader};
use crate::catalog::SpeciesCatalog;
use crate::error::{Error, IoContext, Result};
use crate::features::EmbeddingKind;

pub const MODEL_MAGIC: &[u8; 4] = b"LIN1";
const FORMAT: &str = "LIN1";

/// Samples summed serially per reduction leaf.
const GRADIENT_CHUNK: usize = 16;

/// Weights (`classes`×`dim`, row-major) and bias of a linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<T> {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Mean-NLL gradient of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    /// Mean loss, reduced in 64-bit.
    pub loss: f64,
}

impl<T: Float + Send + Sync> LinearParams<T> {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearParams {
            classes,
            dim,
            weights: vec![T::zero(); classes * dim],
            bias: vec![T::zero(); classes],
        }
    }

    pub fn new(classes: usize, dim: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != classes * dim {
            return Err(Error::DimensionMismatch {
                expected: classes * dim,
                actual: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(LinearParams {
            classes,
            dim,
            weights,
            bias,
        })
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect())
    }

    pub fn log_probs(&self, x: &[T]) -> Result<Vec<T>> {
        log_softmax(&self.logits(x)?)
    }

    /// Adds one sample's NLL gradient into `acc`; returns its loss.
    fn accumulate(&self, x: &[T], label: usize, acc: &mut Gradient<T>) -> Result<f64> {
        let log_probs = self.log_probs(x)?;
        let loss = nll_loss(&log_probs, label)?;
        for (c, lp) in log_probs.iter().enumerate() {
            let mut delta = lp.exp();
            if c == label {
                delta = delta - T::one();
            }
            acc.bias[c] = acc.bias[c] + delta;
            let row = &mut acc.weights[c * self.dim..(c + 1) * self.dim];
            for (g, &v) in row.iter_mut().zip(x) {
                *g = *g + delta * v;
            }
        }
        Ok(loss.to_f64().unwrap_or(f64::INFINITY))
    }

    fn empty_gradient(&self) -> Gradient<T> {
        Gradient {
            weights: vec![T::zero(); self.weights.len()],
            bias: vec![T::zero(); self.classes],
            loss: 0.0,
        }
    }

    /// Gradient of the mean NLL over `batch`.
    ///
    /// Samples are summed in fixed chunks that may run on any worker; chunk
    /// sums are then added in chunk order, so the result does not depend on
    /// the thread count.
    pub fn gradient(&self, batch: &[(&[T], usize)]) -> Result<Gradient<T>> {
        if batch.is_empty() {
            return Err(Error::invalid("gradient of an empty batch"));
        }
        for (x, label) in batch {
            self.check_input(x)?;
            if *label >= self.classes {
                return Err(Error::ClassOutOfRange {
                    index: *label,
                    classes: self.classes,
                });
            }
        }
        let partials: Vec<Gradient<T>> = batch
            .par_chunks(GRADIENT_CHUNK)
            .map(|chunk| {
                let mut acc = self.empty_gradient();
                for (x, label) in chunk {
                    acc.loss += self.accumulate(x, *label, &mut acc)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = self.empty_gradient();
        for part in partials {
            for (t, p) in total.weights.iter_mut().zip(&part.weights) {
                *t = *t + *p;
            }
            for (t, p) in total.bias.iter_mut().zip(&part.bias) {
                *t = *t + *p;
            }
            total.loss += part.loss;
        }
        let n = T::from(batch.len()).expect("batch size fits the float type");
        total.weights.iter_mut().for_each(|g| *g = *g / n);
        total.bias.iter_mut().for_each(|g| *g = *g / n);
        total.loss /= batch.len() as f64;
        Ok(total)
    }

    /// Mean NLL over `batch` in 64-bit.
    pub fn mean_loss(&self, batch: &[(&[T], usize)]) -> Result<f64> {
        let mut total = 0.0;
        for (x, label) in batch {
            let lp = self.log_probs(x)?;
            total += nll_loss(&lp, *label)?.to_f64().unwrap_or(f64::INFINITY);
        }
        Ok(total / batch.len().max(1) as f64)
    }
}

/// A trained single-layer softmax classifier over one embedding kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub params: LinearParams<f32>,
    pub catalog: SpeciesCatalog,
    pub input_kind: EmbeddingKind,
}

impl LinearModel {
    pub fn new(
        params: LinearParams<f32>,
        catalog: SpeciesCatalog,
        input_kind: EmbeddingKind,
    ) -> Result<Self> {
        if !input_kind.is_classifier_input() {
            return Err(Error::invalid(format!(
                "{input_kind} is not a classifier input"
            )));
        }
        if params.dim != input_kind.dim() {
            return Err(Error::DimensionMismatch {
                expected: input_kind.dim(),
                actual: params.dim,
            });
        }
        if params.classes != catalog.len() {
            return Err(Error::DimensionMismatch {
                expected: catalog.len(),
                actual: params.classes,
            });
        }
        Ok(LinearModel {
            params,
            catalog,
            input_kind,
        })
    }

    pub fn classes(&self) -> usize {
        self.params.classes
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    /// `log_softmax(W v + b)`, accumulated in 64-bit.
    pub fn predict_log_probs(&self, v: &[f32]) -> Result<Vec<f64>> {
        self.params.check_input(v)?;
        let logits: Vec<f64> = self
            .params
            .weights
            .chunks_exact(self.dim())
            .zip(&self.params.bias)
            .map(|(row, &b)| {
                row.iter()
                    .zip(v)
                    .fold(b as f64, |acc, (&w, &x)| acc + w as f64 * x as f64)
            })
            .collect();
        log_softmax(&logits)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let csv = self.catalog.to_csv();
        let mut out = Vec::with_capacity(
            13 + 4 * (self.params.weights.len() + self.classes()) + 4 + csv.len(),
        );
        out.extend_from_slice(MODEL_MAGIC);
        put_u32(&mut out, self.classes() as u32);
        put_u32(&mut out, self.dim() as u32);
        out.push(self.input_kind.code());
        put_f32s(&mut out, &self.params.weights);
        put_f32s(&mut out, &self.params.bias);
        put_u32(&mut out, csv.len() as u32);
        out.extend_from_slice(csv.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, FORMAT);
        r.magic(MODEL_MAGIC)?;
        let classes = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let kind = EmbeddingKind::from_code(r.u8()?)?;
        let weights = r.f32s(classes * dim)?;
        let bias = r.f32s(classes)?;
        let csv_len = r.u32()? as usize;
        let csv = std::str::from_utf8(r.take(csv_len)?)
            .map_err(|_| Error::format(FORMAT, "catalog blob is not UTF-8"))?;
        r.finish()?;
        let catalog = SpeciesCatalog::from_csv(csv, Path::new("<embedded catalog>"))?;
        let params = LinearParams::new(classes, dim, weights, bias)?;
        Self::new(params, catalog, kind)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).io_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::SpeciesId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, classes: usize, dim: usize) -> LinearParams<f64> {
        LinearParams::new(
            classes,
            dim,
            (0..classes * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn random_batch(
        rng: &mut ChaCha8Rng,
        n: usize,
        classes: usize,
        dim: usize,
    ) -> Vec<(Vec<f64>, usize)> {
        (0..n)
            .map(|_| {
                (
                    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    rng.random_range(0..classes),
                )
            })
            .collect()
    }

    fn as_refs(batch: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
        batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn hand_computed_two_class_case() {
        let params = LinearParams::<f64>::zeros(2, 1);
        let g = params.gradient(&[(&[1.0], 0)]).unwrap();
        assert_eq!(g.bias, vec![-0.5, 0.5]);
        assert_eq!(g.weights, vec![-0.5, 0.5]);
        assert!((g.loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_certainty() {
        let params = LinearParams::new(3, 2, vec![0.0; 6], vec![200.0, -200.0, -200.0]).unwrap();
        let g = params.gradient(&[(&[0.3, -0.1], 0)]).unwrap();
        assert!(g.weights.iter().chain(&g.bias).all(|v| v.abs() < 1e-12));
        assert!(g.loss < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (classes, dim) = (5, 8);
        let params = random_params(&mut rng, classes, dim);
        let batch = random_batch(&mut rng, 7, classes, dim);
        let refs = as_refs(&batch);
        let g = params.gradient(&refs).unwrap();
        let h = 1e-5;
        let loss_at = |p: &LinearParams<f64>| p.mean_loss(&refs).unwrap();
        for i in 0..params.weights.len() {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.weights[i] += h;
            down.weights[i] -= h;
            let fd = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
            assert!((fd - g.weights[i]).abs() <= 1e-6 * fd.abs().max(g.weights[i].abs()).max(1e-3));
        }
        for c in 0..classes {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.bias[c] += h;
            down.bias[c] -= h;
            let fd = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
            assert!((fd - g.bias[c]).abs() <= 1e-6 * fd.abs().max(g.bias[c].abs()).max(1e-3));
        }
    }

    #[test]
    fn gradient_is_independent_of_worker_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = random_params(&mut rng, 6, 12);
        let batch = random_batch(&mut rng, 200, 6, 12);
        let refs = as_refs(&batch);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| params.gradient(&refs).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn gradient_errors() {
        let params = LinearParams::<f64>::zeros(2, 3);
        assert!(params.gradient(&[]).is_err());
        assert!(params.gradient(&[(&[1.0, 2.0], 0)]).is_err());
        assert!(params.gradient(&[(&[1.0, 2.0, 3.0], 2)]).is_err());
    }

    fn catalog(n: u64) -> SpeciesCatalog {
        SpeciesCatalog::from_counts((0..n).map(|i| (SpeciesId(10 + i), 1)))
    }

    fn random_model(rng: &mut ChaCha8Rng, classes: usize) -> LinearModel {
        let dim = 64;
        let params = LinearParams::new(
            classes,
            dim,
            (0..classes * dim)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect(),
            (0..classes)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect(),
        )
        .unwrap();
        LinearModel::new(params, catalog(classes as u64), EmbeddingKind::Dct64).unwrap()
    }

    #[test]
    fn zero_model_is_uniform() {
        let model =
            LinearModel::new(LinearParams::zeros(4, 64), catalog(4), EmbeddingKind::Dct64).unwrap();
        for lp in model.predict_log_probs(&[0.7; 64]).unwrap() {
            assert!((lp + 4f64.ln()).abs() < 1e-12);
        }
        assert!(model.predict_log_probs(&[0.0; 63]).is_err());
    }

    #[test]
    fn predict_matches_manual_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let model = random_model(&mut rng, 9);
            let v: Vec<f32> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
            let got = model.predict_log_probs(&v).unwrap();
            // Per-class dot products with pairwise (compensated) summation.
            let logits: Vec<f64> = (0..9)
                .map(|c| {
                    let mut terms: Vec<f64> = (0..64)
                        .map(|d| model.params.weights[c * 64 + d] as f64 * v[d] as f64)
                        .collect();
                    terms.push(model.params.bias[c] as f64);
                    terms.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
                    terms.iter().sum()
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            for (g, l) in got.iter().zip(&logits) {
                assert!((g - (l - max - z.ln())).abs() < 1e-9);
            }
            let raw_argmax = super::super::softmax::argmax(&logits);
            assert_eq!(super::super::softmax::argmax(&got), raw_argmax);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng, 3);
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"LIN1");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &64u32.to_le_bytes());
        assert_eq!(bytes[12], 0);
        let csv = model.catalog.to_csv();
        assert_eq!(bytes.len(), 13 + 4 * (3 * 64 + 3) + 4 + csv.len());
        assert!(bytes.ends_with(csv.as_bytes()));
        assert_eq!(LinearModel::from_bytes(&bytes).unwrap(), model);
        assert!(LinearModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn model_validates_shapes() {
        assert!(
            LinearModel::new(LinearParams::zeros(2, 64), catalog(3), EmbeddingKind::Dct64).is_err()
        );
        assert!(LinearModel::new(
            LinearParams::zeros(2, 64),
            catalog(2),
            EmbeddingKind::Cls768
        )
        .is_err());
        assert!(LinearParams::new(1, 1, vec![f32::NAN], vec![0.0]).is_err());
    }
}
