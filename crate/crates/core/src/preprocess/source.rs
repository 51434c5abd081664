//! Input discovery: PNG trees and `IMG1` shards.

use std::path::{Path, PathBuf};

use crate::catalog::SpeciesId;
use crate::error::{Error, IoContext, Result};
use crate::record::ImageRecord;

pub const IMAGE_SHARD_EXT: &str = "img1";

/// Decodes a PNG as 8-bit RGB.
pub fn load_png(path: &Path) -> Result<image::RgbImage> {
    let reader = image::ImageReader::open(path)
        .io_context(|| format!("opening {}", path.display()))?
        .with_guessed_format()
        .io_context(|| format!("reading {}", path.display()))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(Error::InvalidImage {
            id: path.display().to_string(),
            reason: "only PNG input is supported".into(),
        });
    }
    Ok(reader.decode()?.into_rgb8())
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Loads every image under `input`, in sorted path order.
///
/// `input` may be a single `.img1` shard, or a directory holding `.img1`
/// shards and/or `.png` files. A PNG whose parent directory (below `input`)
/// is named by an integer is labeled with that species id; the record id is
/// the file stem.
pub fn load_images(input: &Path) -> Result<Vec<ImageRecord>> {
    if input.is_file() {
        return super::load_shard(input);
    }
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io {
            context: format!("walking {}", input.display()),
            source: e.into(),
        })?;
        let path = entry.path();
        if entry.file_type().is_file() && (has_ext(path, "png") || has_ext(path, IMAGE_SHARD_EXT)) {
            paths.push(path.to_path_buf());
        }
    }
    let mut records = Vec::new();
    for path in paths {
        if has_ext(&path, IMAGE_SHARD_EXT) {
            records.extend(super::load_shard(&path)?);
            continue;
        }
        let species = path
            .parent()
            .filter(|p| *p != input)
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse::<u64>().ok())
            .map(SpeciesId);
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidImage {
                id: path.display().to_string(),
                reason: "file name is not UTF-8".into(),
            })?
            .to_string();
        records.push(ImageRecord::new(id, species, load_png(&path)?));
    }
    Ok(records)
}
