//! `EMB1` embedding shard.
//!
//! ```text
//! "EMB1" | u32 record_count | u32 dim | u8 kind | record*
//! record := u16 id_len | id bytes | u8 has_label | [u64 species] | dim × f32
//! ```
//! `kind` 0 = dct64 (dim 64), 1 = cls768 (dim 768), 2 = raw 256×768 tokens
//! (dim 196608, produced by external extractors only).

use std::path::Path;

use super::{EmbeddingKind, EmbeddingRecord};
use crate::binio::{self, put_f32s, put_id, put_label, put_u32, Reader};
use crate::error::{Error, IoContext, Result};

pub const EMBEDDING_SHARD_MAGIC: &[u8; 4] = b"EMB1";
pub const EMBEDDING_SHARD_EXT: &str = "emb1";
const FORMAT: &str = "EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingShard {
    pub kind: EmbeddingKind,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingShard {
    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &write_embeddings(self.kind, &self.records)?)
    }
}

pub fn write_embeddings(kind: EmbeddingKind, records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let dim = kind.dim();
    let count = u32::try_from(records.len())
        .map_err(|_| Error::format(FORMAT, "too many records for one shard"))?;
    let mut out = Vec::with_capacity(13 + records.len() * (16 + 4 * dim));
    out.extend_from_slice(EMBEDDING_SHARD_MAGIC);
    put_u32(&mut out, count);
    put_u32(&mut out, dim as u32);
    out.push(kind.code());
    for record in records {
        if record.kind != kind || record.vector.len() != dim {
            return Err(Error::format(
                FORMAT,
                format!(
                    "record `{}` is {} with {} values, shard is {kind}",
                    record.image_id,
                    record.kind,
                    record.vector.len()
                ),
            ));
        }
        put_id(&mut out, FORMAT, &record.image_id)?;
        put_label(&mut out, record.species);
        put_f32s(&mut out, &record.vector);
    }
    Ok(out)
}

/// Parses and validates shard bytes.
pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingShard> {
    let mut r = Reader::new(bytes, FORMAT);
    r.magic(EMBEDDING_SHARD_MAGIC)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let kind = EmbeddingKind::from_code(r.u8()?)?;
    if dim != kind.dim() {
        return Err(Error::format(
            FORMAT,
            format!(
                "dim {dim} does not match kind {kind} (expected {})",
                kind.dim()
            ),
        ));
    }
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let image_id = r.id()?;
        let species = r.label()?;
        let vector = r.f32s(dim)?;
        let record = EmbeddingRecord::new(image_id, species, kind, vector)
            .map_err(|e| Error::format(FORMAT, e.to_string()))?;
        records.push(record);
    }
    r.finish()?;
    Ok(EmbeddingShard { kind, records })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingShard> {
    let bytes = std::fs::read(path).io_context(|| format!("reading {}", path.display()))?;
    read_embeddings(&bytes).map_err(|e| match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}
