//! Image normalization (center square crop, bilinear resize) and
//! class-imbalance filtering.

mod shard;
mod source;

pub use shard::{load_shard, pack_shard, read_shard, record_size, write_shard, IMAGE_SHARD_MAGIC};
pub use source::{load_images, load_png, IMAGE_SHARD_EXT};

use image::RgbImage;

use crate::catalog::{SpeciesCatalog, SpeciesId};
use crate::error::{Error, Result};
use crate::record::ImageRecord;

/// Side length every training image is normalized to.
pub const PROCESSED_SIDE: u32 = 128;

/// Minimum images per species retained for training.
pub const DEFAULT_MIN_COUNT: u64 = 100;

/// A center-cropped, resized square image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedImage(ImageRecord);

impl ProcessedImage {
    /// Wraps an already normalized record, checking it is `side`×`side`.
    pub fn from_record(record: ImageRecord, side: u32) -> Result<Self> {
        if record.height() != side || record.width() != side {
            let reason = format!(
                "expected {side}x{side}, got {}x{}",
                record.height(),
                record.width()
            );
            return Err(Error::InvalidImage {
                id: record.image_id,
                reason,
            });
        }
        Ok(ProcessedImage(record))
    }

    pub fn image_id(&self) -> &str {
        &self.0.image_id
    }

    pub fn species(&self) -> Option<SpeciesId> {
        self.0.species
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.0.pixels
    }

    pub fn side(&self) -> u32 {
        self.0.pixels.width()
    }

    pub fn as_record(&self) -> &ImageRecord {
        &self.0
    }

    pub fn into_record(self) -> ImageRecord {
        self.0
    }
}

fn check_nonempty(img: &ImageRecord) -> Result<()> {
    if img.height() == 0 || img.width() == 0 {
        return Err(Error::InvalidImage {
            id: img.image_id.clone(),
            reason: "image has zero extent".into(),
        });
    }
    Ok(())
}

/// Crops the largest centered square. Odd remainders round the offset down.
pub fn center_square_crop(img: &ImageRecord) -> Result<ImageRecord> {
    check_nonempty(img)?;
    let (h, w) = (img.height(), img.width());
    let side = h.min(w);
    let (top, left) = ((h - side) / 2, (w - side) / 2);
    let pixels = image::imageops::crop_imm(&img.pixels, left, top, side, side).to_image();
    Ok(ImageRecord::new(img.image_id.clone(), img.species, pixels))
}

/// Bilinear resize of a square image to `side`×`side`.
///
/// Sample positions use half-pixel centers: output pixel `y` reads source
/// coordinate `(y + 0.5) * in / out - 0.5`, clamped to the image. Results are
/// rounded to the nearest integer per channel.
pub fn resize_bilinear(img: &ImageRecord, side: u32) -> Result<ImageRecord> {
    check_nonempty(img)?;
    if img.height() != img.width() {
        return Err(Error::InvalidImage {
            id: img.image_id.clone(),
            reason: format!(
                "resize expects a square image, got {}x{}",
                img.height(),
                img.width()
            ),
        });
    }
    if side == 0 {
        return Err(Error::invalid("resize side must be at least 1"));
    }
    let src = &img.pixels;
    let in_side = src.width();
    if in_side == side {
        return Ok(img.clone());
    }
    let taps = sample_taps(in_side, side);
    let mut out = RgbImage::new(side, side);
    for (y, &(y0, y1, fy)) in taps.iter().enumerate() {
        for (x, &(x0, x1, fx)) in taps.iter().enumerate() {
            let p00 = src.get_pixel(x0, y0).0;
            let p01 = src.get_pixel(x1, y0).0;
            let p10 = src.get_pixel(x0, y1).0;
            let p11 = src.get_pixel(x1, y1).0;
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = lerp(p00[c] as f64, p01[c] as f64, fx);
                let bottom = lerp(p10[c] as f64, p11[c] as f64, fx);
                px[c] = lerp(top, bottom, fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    Ok(ImageRecord::new(img.image_id.clone(), img.species, out))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Per output coordinate: (lower source index, upper source index, weight of upper).
fn sample_taps(in_side: u32, out_side: u32) -> Vec<(u32, u32, f64)> {
    let scale = in_side as f64 / out_side as f64;
    let last = (in_side - 1) as f64;
    (0..out_side)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor();
            let hi = (lo + 1.0).min(last);
            (lo as u32, hi as u32, s - lo)
        })
        .collect()
}

/// Center crop followed by resize to `side`.
pub fn normalize_image(img: &ImageRecord, side: u32) -> Result<ProcessedImage> {
    let cropped = center_square_crop(img)?;
    ProcessedImage::from_record(resize_bilinear(&cropped, side)?, side)
}

/// Keeps species with at least `min_count` training images.
pub fn filter_min_images(catalog: &SpeciesCatalog, min_count: u64) -> SpeciesCatalog {
    catalog.retain(|_, count| count >= min_count)
}
