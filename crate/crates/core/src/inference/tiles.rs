use image::RgbImage;

use crate::error::{Error, Result};
use crate::record::ImageRecord;

/// Half-open pixel span `[start, end)` of grid cell `i` of `n` over `len` pixels.
pub fn cell_span(len: u32, n: u32, i: u32) -> (u32, u32) {
    let at = |k: u32| ((k as u64 * len as u64) / n as u64) as u32;
    (at(i), at(i + 1))
}

/// Cuts an image into an `n`×`n` grid, row-major.
///
/// Cell `(r, c)` covers rows `[floor(rH/n), floor((r+1)H/n))` and the analogous
/// columns, so the tiles partition the image exactly and remainder pixels fall
/// into later tiles. Tile ids are `<image_id>/<r>_<c>`.
pub fn tile_grid(img: &ImageRecord, n: u32) -> Result<Vec<ImageRecord>> {
    if n == 0 {
        return Err(Error::invalid("grid size must be at least 1"));
    }
    let (h, w) = (img.height(), img.width());
    if h < n || w < n {
        return Err(Error::InvalidImage {
            id: img.image_id.clone(),
            reason: format!("{h}x{w} image is smaller than a {n}x{n} grid"),
        });
    }
    let mut tiles = Vec::with_capacity((n * n) as usize);
    for r in 0..n {
        let (top, bottom) = cell_span(h, n, r);
        for c in 0..n {
            let (left, right) = cell_span(w, n, c);
            let pixels =
                image::imageops::crop_imm(&img.pixels, left, top, right - left, bottom - top)
                    .to_image();
            tiles.push(ImageRecord::new(
                format!("{}/{r}_{c}", img.image_id),
                img.species,
                pixels,
            ));
        }
    }
    Ok(tiles)
}

/// Inverse of [`tile_grid`]: pastes row-major tiles back together.
pub fn assemble_grid(tiles: &[ImageRecord], n: u32) -> Result<RgbImage> {
    if n == 0 || tiles.len() != (n * n) as usize {
        return Err(Error::invalid(format!(
            "expected {} tiles, got {}",
            n * n,
            tiles.len()
        )));
    }
    let n = n as usize;
    let width: u32 = tiles[..n].iter().map(|t| t.width()).sum();
    let height: u32 = tiles.iter().step_by(n).map(|t| t.height()).sum();
    let mut out = RgbImage::new(width, height);
    let mut top = 0;
    for row in tiles.chunks(n) {
        let mut left = 0;
        for tile in row {
            image::imageops::replace(&mut out, &tile.pixels, left as i64, top as i64);
            left += tile.width();
        }
        top += row[0].height();
    }
    Ok(out)
}
