//! Deterministic stand-in for a vision transformer backbone.
//!
//! The 128×128 image is cut into a 16×16 grid of 8×8 patches. Each patch is
//! summarized by its per-channel mean and standard deviation (pixel values
//! scaled to [0, 1]) and that 6-vector is mapped to 768 dimensions by a fixed
//! seeded Gaussian projection. The [CLS] vector is the mean patch token.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureExtractor, PatchTokenMatrix, EMBED_DIM, NUM_PATCHES};
use crate::error::{Error, Result};
use crate::preprocess::{ProcessedImage, PROCESSED_SIDE};

const PATCH_SIDE: u32 = 8;
const GRID_SIDE: u32 = PROCESSED_SIDE / PATCH_SIDE;
const STATS: usize = 6;

#[derive(Debug, Clone)]
pub struct ToyExtractor {
    seed: u64,
    /// STATS × EMBED_DIM
    projection: Array2<f64>,
}

impl ToyExtractor {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection =
            Array2::from_shape_simple_fn((STATS, EMBED_DIM), || StandardNormal.sample(&mut rng));
        ToyExtractor { seed, projection }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-patch (mean R, G, B, std R, G, B), one row per patch in row-major grid order.
    pub fn patch_statistics(img: &ProcessedImage) -> Result<Array2<f64>> {
        let pixels = img.pixels();
        if pixels.width() != PROCESSED_SIDE || pixels.height() != PROCESSED_SIDE {
            return Err(Error::InvalidImage {
                id: img.image_id().to_string(),
                reason: format!(
                    "toy extractor needs {PROCESSED_SIDE}x{PROCESSED_SIDE}, got {}x{}",
                    pixels.height(),
                    pixels.width()
                ),
            });
        }
        let n = (PATCH_SIDE * PATCH_SIDE) as f64;
        let mut stats = Array2::zeros((NUM_PATCHES, STATS));
        for pr in 0..GRID_SIDE {
            for pc in 0..GRID_SIDE {
                let mut sum = [0.0f64; 3];
                let mut sq = [0.0f64; 3];
                for y in pr * PATCH_SIDE..(pr + 1) * PATCH_SIDE {
                    for x in pc * PATCH_SIDE..(pc + 1) * PATCH_SIDE {
                        let p = pixels.get_pixel(x, y).0;
                        for c in 0..3 {
                            let v = p[c] as f64 / 255.0;
                            sum[c] += v;
                            sq[c] += v * v;
                        }
                    }
                }
                let mut row = stats.row_mut((pr * GRID_SIDE + pc) as usize);
                for c in 0..3 {
                    let mean = sum[c] / n;
                    row[c] = mean;
                    row[3 + c] = (sq[c] / n - mean * mean).max(0.0).sqrt();
                }
            }
        }
        Ok(stats)
    }
}

impl FeatureExtractor for ToyExtractor {
    fn extract(&self, img: &ProcessedImage) -> Result<PatchTokenMatrix> {
        let tokens = Self::patch_statistics(img)?.dot(&self.projection);
        let cls: Array1<f64> = tokens.mean_axis(Axis(0)).expect("token matrix has rows");
        PatchTokenMatrix::new(tokens, cls)
    }
}
