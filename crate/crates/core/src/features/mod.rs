//! Embedding features: DCT coefficients and [CLS] vectors from patch tokens.

pub mod dct;
mod shard;
mod toy;

pub use dct::{dct2_orthonormal, idct2_orthonormal, DctPlan};
pub use shard::{
    load_embeddings, read_embeddings, write_embeddings, EmbeddingShard, EMBEDDING_SHARD_EXT,
    EMBEDDING_SHARD_MAGIC,
};
pub use toy::ToyExtractor;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::catalog::SpeciesId;
use crate::error::{Error, Result};
use crate::preprocess::ProcessedImage;

/// Patch tokens per image (a 16×16 patch grid).
pub const NUM_PATCHES: usize = 256;
/// Token width of the backbone.
pub const EMBED_DIM: usize = 768;
/// Side of the retained low-frequency DCT block.
pub const DCT_FILTER_SIZE: usize = 8;

/// Final-layer patch tokens and the [CLS] vector of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTokenMatrix {
    tokens: Array2<f64>,
    cls: Array1<f64>,
}

impl PatchTokenMatrix {
    pub fn new(tokens: Array2<f64>, cls: Array1<f64>) -> Result<Self> {
        if tokens.dim() != (NUM_PATCHES, EMBED_DIM) {
            return Err(Error::invalid(format!(
                "patch tokens must be {NUM_PATCHES}x{EMBED_DIM}, got {}x{}",
                tokens.nrows(),
                tokens.ncols()
            )));
        }
        if cls.len() != EMBED_DIM {
            return Err(Error::DimensionMismatch {
                expected: EMBED_DIM,
                actual: cls.len(),
            });
        }
        if tokens.iter().chain(cls.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("patch tokens"));
        }
        Ok(PatchTokenMatrix { tokens, cls })
    }

    pub fn tokens(&self) -> &Array2<f64> {
        &self.tokens
    }

    pub fn cls(&self) -> &Array1<f64> {
        &self.cls
    }
}

/// Which embedding a record carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Dct64,
    Cls768,
    /// Raw 256×768 patch tokens, as exported by an external extractor.
    RawTokens,
}

impl EmbeddingKind {
    pub fn dim(self) -> usize {
        match self {
            EmbeddingKind::Dct64 => DCT_FILTER_SIZE * DCT_FILTER_SIZE,
            EmbeddingKind::Cls768 => EMBED_DIM,
            EmbeddingKind::RawTokens => NUM_PATCHES * EMBED_DIM,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            EmbeddingKind::Dct64 => 0,
            EmbeddingKind::Cls768 => 1,
            EmbeddingKind::RawTokens => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(EmbeddingKind::Dct64),
            1 => Ok(EmbeddingKind::Cls768),
            2 => Ok(EmbeddingKind::RawTokens),
            other => Err(Error::format("EMB1", format!("unknown kind byte {other}"))),
        }
    }

    /// Kinds a classifier can be trained on.
    pub fn is_classifier_input(self) -> bool {
        !matches!(self, EmbeddingKind::RawTokens)
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Dct64 => "dct64",
            EmbeddingKind::Cls768 => "cls768",
            EmbeddingKind::RawTokens => "tokens",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dct64" => Ok(EmbeddingKind::Dct64),
            "cls768" => Ok(EmbeddingKind::Cls768),
            "tokens" => Ok(EmbeddingKind::RawTokens),
            other => Err(Error::invalid(format!("unknown embedding kind `{other}`"))),
        }
    }
}

/// One image's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub image_id: String,
    pub species: Option<SpeciesId>,
    pub kind: EmbeddingKind,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(
        image_id: impl Into<String>,
        species: Option<SpeciesId>,
        kind: EmbeddingKind,
        vector: Vec<f32>,
    ) -> Result<Self> {
        if vector.len() != kind.dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.dim(),
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        Ok(EmbeddingRecord {
            image_id: image_id.into(),
            species,
            kind,
            vector,
        })
    }
}

/// Produces patch tokens for a normalized image.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, img: &ProcessedImage) -> Result<PatchTokenMatrix>;
}

/// Low-frequency `filter_size`² DCT block of the token matrix, row-major.
pub fn dct_coefficients(p: &PatchTokenMatrix, filter_size: usize) -> Result<Vec<f64>> {
    dct::low_frequency_block(p.tokens.view(), filter_size)
}

pub fn cls_embedding(p: &PatchTokenMatrix) -> Array1<f64> {
    p.cls.clone()
}

/// Turns token matrices into classifier inputs of one kind.
///
/// Holds the truncated DCT basis so it is built once per run.
#[derive(Debug, Clone)]
pub struct Embedder {
    kind: EmbeddingKind,
    plan: Option<DctPlan>,
}

impl Embedder {
    pub fn new(kind: EmbeddingKind) -> Result<Self> {
        let plan = match kind {
            EmbeddingKind::Dct64 => Some(DctPlan::low_frequency(
                NUM_PATCHES,
                EMBED_DIM,
                DCT_FILTER_SIZE,
                DCT_FILTER_SIZE,
            )),
            EmbeddingKind::Cls768 => None,
            EmbeddingKind::RawTokens => {
                return Err(Error::invalid("raw tokens are not a classifier input"))
            }
        };
        Ok(Embedder { kind, plan })
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn embed_tokens(&self, p: &PatchTokenMatrix) -> Result<Vec<f32>> {
        let values: Vec<f64> = match &self.plan {
            Some(plan) => plan.forward(p.tokens.view())?.iter().copied().collect(),
            None => p.cls.to_vec(),
        };
        Ok(values.into_iter().map(|v| v as f32).collect())
    }

    /// Converts an externally exported raw-token vector (row-major 256×768).
    pub fn embed_raw(&self, raw: &[f32]) -> Result<Vec<f32>> {
        if self.kind != EmbeddingKind::Dct64 {
            return Err(Error::invalid("raw tokens only convert to dct64"));
        }
        if raw.len() != NUM_PATCHES * EMBED_DIM {
            return Err(Error::DimensionMismatch {
                expected: NUM_PATCHES * EMBED_DIM,
                actual: raw.len(),
            });
        }
        let tokens = Array2::from_shape_fn((NUM_PATCHES, EMBED_DIM), |(r, c)| {
            raw[r * EMBED_DIM + c] as f64
        });
        let plan = self.plan.as_ref().expect("dct64 embedder has a plan");
        Ok(plan
            .forward(tokens.view())?
            .iter()
            .map(|&v| v as f32)
            .collect())
    }

    pub fn embed_image(
        &self,
        extractor: &dyn FeatureExtractor,
        img: &ProcessedImage,
    ) -> Result<EmbeddingRecord> {
        let tokens = extractor.extract(img)?;
        EmbeddingRecord::new(
            img.image_id(),
            img.species(),
            self.kind,
            self.embed_tokens(&tokens)?,
        )
    }
}
