//! Embedding-based multi-label plot classification.
//!
//! Single-species training images are normalized ([`preprocess`]), turned
//! into fixed-size embeddings ([`features`]) and used to fit a linear
//! softmax classifier ([`classifier`]). Multi-species plot images are cut
//! into a grid, each tile is scored, and tile predictions are merged into
//! one ranked species list ([`inference`]) that is evaluated with the
//! per-plot, per-species and micro F1 scores ([`metrics`]).

mod binio;
pub mod catalog;
pub mod classifier;
pub mod error;
pub mod features;
pub mod inference;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod record;

pub use catalog::{build_catalog, SpeciesCatalog, SpeciesId};
pub use error::{Error, Result};
pub use record::{ImageRecord, PlotLabelSet};
