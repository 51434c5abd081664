#![allow(dead_code)]

use plotgrid::classifier::Dataset;
use plotgrid::features::EmbeddingKind;
use plotgrid::{SpeciesCatalog, SpeciesId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Isotropic Gaussian blobs: class `c` is centered at `separation * e_c`
/// with unit variance. Returns the dataset plus its catalog (species ids
/// 100, 101, ...).
pub fn gaussian_blobs(
    classes: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> (Dataset, SpeciesCatalog) {
    let dim = EmbeddingKind::Dct64.dim();
    assert!(classes <= dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for _ in 0..per_class {
            let x: Vec<f32> = (0..dim)
                .map(|d| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    let center = if d == c { separation } else { 0.0 };
                    (center + noise) as f32
                })
                .collect();
            inputs.push(x);
            labels.push(c);
        }
    }
    let catalog = SpeciesCatalog::from_counts(
        (0..classes).map(|c| (SpeciesId(100 + c as u64), per_class as u64)),
    );
    let data = Dataset {
        kind: EmbeddingKind::Dct64,
        inputs,
        labels,
    };
    (data, catalog)
}

/// Training-set accuracy of the nearest-class-mean rule.
pub fn nearest_centroid_accuracy(data: &Dataset, classes: usize) -> f64 {
    let dim = data.inputs[0].len();
    let mut sums = vec![vec![0.0f64; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        counts[y] += 1;
        for (s, &v) in sums[y].iter_mut().zip(x) {
            *s += v as f64;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect();
    let correct = data
        .inputs
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| {
            let dist = |c: &Vec<f64>| -> f64 {
                c.iter()
                    .zip(x.iter())
                    .map(|(a, &b)| (a - b as f64).powi(2))
                    .sum()
            };
            let best = (0..classes)
                .min_by(|&a, &b| {
                    dist(&centroids[a])
                        .partial_cmp(&dist(&centroids[b]))
                        .unwrap()
                })
                .unwrap();
            best == y
        })
        .count();
    correct as f64 / data.inputs.len() as f64
}
