use std::collections::BTreeSet;

use image::RgbImage;

use crate::catalog::SpeciesId;

/// One decoded RGB image, labeled when it belongs to the training split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: String,
    pub species: Option<SpeciesId>,
    pub pixels: RgbImage,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, species: Option<SpeciesId>, pixels: RgbImage) -> Self {
        ImageRecord {
            image_id: image_id.into(),
            species,
            pixels,
        }
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }
}

/// Ground-truth species set for one plot image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotLabelSet {
    pub plot_id: String,
    pub species: BTreeSet<SpeciesId>,
}
