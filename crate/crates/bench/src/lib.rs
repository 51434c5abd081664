//! Deterministic fixtures shared by the benchmarks.

use image::RgbImage;
use ndarray::Array2;
use plotgrid::inference::TileProbabilityMatrix;
use plotgrid::preprocess::ProcessedImage;
use plotgrid::{ImageRecord, SpeciesCatalog, SpeciesId};

/// Smooth pseudo-random matrix; no RNG needed for reproducible timings.
pub fn wave_matrix(rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        ((r * 31 + c * 17) as f64 * 0.37).sin()
    })
}

pub fn textured_image(side: u32) -> ProcessedImage {
    let pixels = RgbImage::from_fn(side, side, |x, y| {
        image::Rgb([(x * 7 + y) as u8, (x ^ y) as u8, (x * y) as u8])
    });
    ProcessedImage::from_record(ImageRecord::new("bench", None, pixels), side)
        .expect("square image")
}

pub fn catalog(classes: usize) -> SpeciesCatalog {
    SpeciesCatalog::from_counts((0..classes as u64).map(|c| (SpeciesId(c), 1)))
}

/// `tiles` columns of `classes` probabilities.
pub fn probability_matrix(classes: usize, tiles: usize) -> TileProbabilityMatrix {
    let columns = (0..tiles)
        .map(|t| {
            let raw: Vec<f64> = (0..classes)
                .map(|c| 1.0 + ((c * 13 + t * 7) as f64 * 0.91).sin())
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    TileProbabilityMatrix::from_columns(columns).expect("normalized columns")
}
