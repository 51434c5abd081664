//! `IMG1` image shard: a self-describing little-endian record container.
//!
//! ```text
//! "IMG1" | u32 record_count | record*
//! record := u16 id_len | id bytes | u8 has_label | [u64 species] | u16 height | u16 width | RGB bytes
//! ```

use std::path::Path;

use image::RgbImage;

use crate::binio::{self, put_id, put_label, put_u16, put_u32, Reader};
use crate::error::{Error, IoContext, Result};
use crate::record::ImageRecord;

pub const IMAGE_SHARD_MAGIC: &[u8; 4] = b"IMG1";
const FORMAT: &str = "IMG1";

/// Encoded size of one record in bytes.
pub fn record_size(record: &ImageRecord) -> usize {
    2 + record.image_id.len()
        + 1
        + if record.species.is_some() { 8 } else { 0 }
        + 4
        + record.pixels.as_raw().len()
}

/// Serializes records into shard bytes.
pub fn write_shard(items: &[ImageRecord]) -> Result<Vec<u8>> {
    if items.is_empty() {
        return Err(Error::invalid("cannot pack an empty shard"));
    }
    let count = u32::try_from(items.len())
        .map_err(|_| Error::format(FORMAT, "too many records for one shard"))?;
    let mut out = Vec::with_capacity(8 + items.iter().map(record_size).sum::<usize>());
    out.extend_from_slice(IMAGE_SHARD_MAGIC);
    put_u32(&mut out, count);
    for record in items {
        let (h, w) = (record.height(), record.width());
        let (h16, w16) = match (u16::try_from(h), u16::try_from(w)) {
            (Ok(h), Ok(w)) if h > 0 && w > 0 => (h, w),
            _ => {
                return Err(Error::format(
                    FORMAT,
                    format!("record `{}` has unsupported size {h}x{w}", record.image_id),
                ))
            }
        };
        put_id(&mut out, FORMAT, &record.image_id)?;
        put_label(&mut out, record.species);
        put_u16(&mut out, h16);
        put_u16(&mut out, w16);
        out.extend_from_slice(record.pixels.as_raw());
    }
    Ok(out)
}

/// Parses shard bytes.
pub fn read_shard(bytes: &[u8]) -> Result<Vec<ImageRecord>> {
    let mut r = Reader::new(bytes, FORMAT);
    r.magic(IMAGE_SHARD_MAGIC)?;
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let image_id = r.id()?;
        let species = r.label()?;
        let h = r.u16()? as u32;
        let w = r.u16()? as u32;
        if h == 0 || w == 0 {
            return Err(Error::format(
                FORMAT,
                format!("record `{image_id}` has zero extent"),
            ));
        }
        let raw = r.take(h as usize * w as usize * 3)?.to_vec();
        let pixels = RgbImage::from_raw(w, h, raw).expect("buffer length checked");
        records.push(ImageRecord::new(image_id, species, pixels));
    }
    r.finish()?;
    Ok(records)
}

/// Writes a shard file. Nothing is created when `items` is empty.
pub fn pack_shard(items: &[ImageRecord], path: &Path) -> Result<()> {
    let bytes = write_shard(items)?;
    binio::write_atomic(path, &bytes)
}

pub fn load_shard(path: &Path) -> Result<Vec<ImageRecord>> {
    let bytes = std::fs::read(path).io_context(|| format!("reading {}", path.display()))?;
    read_shard(&bytes).map_err(|e| match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}
