//! Synthetic single-label / multi-label benchmark.
//!
//! Every species gets a procedural texture: a base color plus an oriented
//! sinusoidal grating with species-specific frequency and amplitude. Each
//! rendered instance adds its own phase, brightness jitter and pixel noise.
//! Training images are single-species tiles; each test plot is a mosaic of
//! tiles drawn from a few species.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::SpeciesId;
use crate::error::{Error, IoContext, Result};
use crate::metrics::write_truth;
use crate::preprocess::{pack_shard, PROCESSED_SIDE};
use crate::record::{ImageRecord, PlotLabelSet};

const TRAIN_SHARD_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollageSpec {
    pub num_species: usize,
    pub images_per_species: usize,
    pub plots: usize,
    pub grid_n: u32,
    pub species_per_plot: usize,
    pub seed: u64,
}

impl CollageSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_species == 0 || self.images_per_species == 0 || self.plots == 0 {
            return Err(Error::invalid("collage needs species, images and plots"));
        }
        if self.grid_n == 0 {
            return Err(Error::invalid("collage grid must be at least 1x1"));
        }
        let tiles = (self.grid_n * self.grid_n) as usize;
        if self.species_per_plot == 0 || self.species_per_plot > tiles {
            return Err(Error::invalid(format!(
                "species_per_plot must be in 1..={tiles} for a {0}x{0} grid",
                self.grid_n
            )));
        }
        if self.species_per_plot > self.num_species {
            return Err(Error::invalid("species_per_plot exceeds num_species"));
        }
        Ok(())
    }
}

/// Rendering parameters of one species.
#[derive(Debug, Clone)]
pub struct Texture {
    pub species: SpeciesId,
    base: [f64; 3],
    /// Per-channel grating gain.
    gain: [f64; 3],
    frequency: f64,
    angle: f64,
    amplitude: f64,
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

impl Texture {
    /// Hues are evenly spaced around the color wheel so base colors stay
    /// distinct; everything else is drawn from `rng`.
    fn generate(index: usize, count: usize, species: SpeciesId, rng: &mut ChaCha8Rng) -> Self {
        let hue = (index as f64 + rng.random_range(-0.15..0.15)) / count as f64;
        let sat = rng.random_range(0.45..0.9);
        let val = rng.random_range(0.45..0.9);
        Texture {
            species,
            base: hsv_to_rgb(hue, sat, val),
            gain: [
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
            ],
            frequency: rng.random_range(0.04..0.35),
            angle: rng.random_range(0.0..PI),
            amplitude: rng.random_range(8.0..45.0),
        }
    }

    /// Renders one `side`×`side` instance.
    pub fn render(&self, side: u32, rng: &mut ChaCha8Rng) -> RgbImage {
        let phase = rng.random_range(0.0..2.0 * PI);
        let jitter = rng.random_range(-8.0..8.0);
        let (dx, dy) = (self.angle.cos(), self.angle.sin());
        RgbImage::from_fn(side, side, |x, y| {
            let wave = (2.0 * PI * self.frequency * (x as f64 * dx + y as f64 * dy) + phase).sin();
            let mut px = [0u8; 3];
            for ((out, base), gain) in px.iter_mut().zip(self.base).zip(self.gain) {
                let noise = rng.random_range(-6.0..6.0);
                let v = base + jitter + self.amplitude * gain * wave + noise;
                *out = v.round().clamp(0.0, 255.0) as u8;
            }
            image::Rgb(px)
        })
    }
}

/// Species ids and textures of a collage spec.
pub fn collage_textures(spec: &CollageSpec) -> Vec<Texture> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ids = BTreeSet::new();
    while ids.len() < spec.num_species {
        ids.insert(rng.random_range(1_000..1_000_000u64));
    }
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| Texture::generate(i, spec.num_species, SpeciesId(id), &mut rng))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CollageDataset {
    pub train: Vec<ImageRecord>,
    pub plots: Vec<ImageRecord>,
    pub truth: Vec<PlotLabelSet>,
}

/// Generates the dataset in memory.
pub fn generate_collage(spec: &CollageSpec) -> Result<CollageDataset> {
    spec.validate()?;
    let textures = collage_textures(spec);
    let side = PROCESSED_SIDE;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));

    let mut train = Vec::with_capacity(spec.num_species * spec.images_per_species);
    for tex in &textures {
        for i in 0..spec.images_per_species {
            train.push(ImageRecord::new(
                format!("s{}_{i:04}", tex.species),
                Some(tex.species),
                tex.render(side, &mut rng),
            ));
        }
    }

    let n = spec.grid_n;
    let tiles = (n * n) as usize;
    let mut plots = Vec::with_capacity(spec.plots);
    let mut truth = Vec::with_capacity(spec.plots);
    for p in 0..spec.plots {
        let chosen: Vec<&Texture> = textures
            .choose_multiple(&mut rng, spec.species_per_plot)
            .collect();
        // Every chosen species appears at least once.
        let mut layout: Vec<&Texture> = chosen.clone();
        while layout.len() < tiles {
            layout.push(chosen.choose(&mut rng).expect("non-empty"));
        }
        layout.shuffle(&mut rng);
        let mut mosaic = RgbImage::new(side * n, side * n);
        for (t, tex) in layout.iter().enumerate() {
            let (r, c) = (t as u32 / n, t as u32 % n);
            let tile = tex.render(side, &mut rng);
            image::imageops::replace(&mut mosaic, &tile, (c * side) as i64, (r * side) as i64);
        }
        let plot_id = format!("plot_{p:04}");
        truth.push(PlotLabelSet {
            plot_id: plot_id.clone(),
            species: chosen.iter().map(|t| t.species).collect(),
        });
        plots.push(ImageRecord::new(plot_id, None, mosaic));
    }
    Ok(CollageDataset {
        train,
        plots,
        truth,
    })
}

/// Paths written by [`make_collage_dataset`].
#[derive(Debug, Clone)]
pub struct CollagePaths {
    /// Directory of `IMG1` training shards.
    pub train: PathBuf,
    /// Directory of plot PNGs named `<plot_id>.png`.
    pub plots: PathBuf,
    pub truth: PathBuf,
}

impl CollagePaths {
    pub fn under(root: &Path) -> Self {
        CollagePaths {
            train: root.join("train"),
            plots: root.join("plots"),
            truth: root.join("truth.csv"),
        }
    }
}

/// Writes the collage dataset below `root`.
pub fn make_collage_dataset(spec: &CollageSpec, root: &Path) -> Result<CollagePaths> {
    let data = generate_collage(spec)?;
    let paths = CollagePaths::under(root);
    for dir in [&paths.train, &paths.plots] {
        std::fs::create_dir_all(dir).io_context(|| format!("creating {}", dir.display()))?;
    }
    for (i, chunk) in data.train.chunks(TRAIN_SHARD_SIZE).enumerate() {
        pack_shard(chunk, &paths.train.join(format!("train-{i:05}.img1")))?;
    }
    for plot in &data.plots {
        let path = paths.plots.join(format!("{}.png", plot.image_id));
        plot.pixels.save(&path)?;
    }
    write_truth(&data.truth, &paths.truth)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CollageSpec {
        CollageSpec {
            num_species: 10,
            images_per_species: 5,
            plots: 20,
            grid_n: 3,
            species_per_plot: 4,
            seed: 7,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_collage(&spec()).unwrap();
        let b = generate_collage(&spec()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.plots, b.plots);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn files_are_byte_identical() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        make_collage_dataset(&spec(), d1.path()).unwrap();
        make_collage_dataset(&spec(), d2.path()).unwrap();
        let files = |root: &Path| -> Vec<(PathBuf, Vec<u8>)> {
            walkdir::WalkDir::new(root)
                .sort_by_file_name()
                .into_iter()
                .map(|e| e.unwrap())
                .filter(|e| e.file_type().is_file())
                .map(|e| {
                    (
                        e.path().strip_prefix(root).unwrap().to_path_buf(),
                        std::fs::read(e.path()).unwrap(),
                    )
                })
                .collect()
        };
        let (f1, f2) = (files(d1.path()), files(d2.path()));
        assert_eq!(f1.len(), 1 + 1 + 20);
        assert_eq!(f1, f2);
    }

    #[test]
    fn plot_contents() {
        let data = generate_collage(&spec()).unwrap();
        let all: BTreeSet<SpeciesId> = collage_textures(&spec())
            .iter()
            .map(|t| t.species)
            .collect();
        assert_eq!(all.len(), 10);
        assert_eq!(data.train.len(), 50);
        for (plot, truth) in data.plots.iter().zip(&data.truth) {
            assert_eq!(plot.image_id, truth.plot_id);
            assert_eq!((plot.height(), plot.width()), (384, 384));
            assert_eq!(truth.species.len(), 4);
            assert!(truth.species.is_subset(&all));
        }
        assert!(data
            .train
            .iter()
            .all(|r| r.height() == 128 && r.species.is_some()));
    }

    #[test]
    fn one_species_per_plot() {
        let data = generate_collage(&CollageSpec {
            species_per_plot: 1,
            ..spec()
        })
        .unwrap();
        assert!(data.truth.iter().all(|t| t.species.len() == 1));
    }

    #[test]
    fn spec_validation() {
        assert!(CollageSpec {
            species_per_plot: 10,
            ..spec()
        }
        .validate()
        .is_err());
        assert!(CollageSpec {
            species_per_plot: 11,
            num_species: 20,
            grid_n: 3,
            ..spec()
        }
        .validate()
        .is_err());
        assert!(CollageSpec {
            grid_n: 0,
            ..spec()
        }
        .validate()
        .is_err());
        assert!(CollageSpec { plots: 0, ..spec() }.validate().is_err());
    }
}
