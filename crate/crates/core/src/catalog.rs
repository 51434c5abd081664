//! Species catalog and label encoding.
//!
//! Class indices are assigned in ascending [`SpeciesId`] order, so every
//! artifact derived from a catalog can be reproduced from the catalog CSV
//! alone.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::record::ImageRecord;

/// Numeric species identifier as used by the competition metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesId(pub u64);

impl fmt::Display for SpeciesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for SpeciesId {
    fn from(id: u64) -> Self {
        SpeciesId(id)
    }
}

pub const CATALOG_HEADER: &str = "species_id,image_count";

/// Ordered set of species with their training image counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpeciesCatalog {
    entries: Vec<(SpeciesId, u64)>,
    index: HashMap<SpeciesId, usize>,
}

impl SpeciesCatalog {
    /// Builds a catalog from `(species, count)` pairs. Duplicate species are
    /// merged by summing their counts.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (SpeciesId, u64)>,
    {
        let mut merged = BTreeMap::new();
        for (species, count) in counts {
            *merged.entry(species).or_insert(0u64) += count;
        }
        let entries: Vec<_> = merged.into_iter().collect();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, &(species, _))| (species, i))
            .collect();
        SpeciesCatalog { entries, index }
    }

    /// Number of classes `C`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(species, image_count)` in class-index order.
    pub fn entries(&self) -> &[(SpeciesId, u64)] {
        &self.entries
    }

    pub fn species(&self) -> impl ExactSizeIterator<Item = SpeciesId> + '_ {
        self.entries.iter().map(|&(s, _)| s)
    }

    pub fn contains(&self, species: SpeciesId) -> bool {
        self.index.contains_key(&species)
    }

    pub fn image_count(&self, species: SpeciesId) -> Option<u64> {
        self.index.get(&species).map(|&i| self.entries[i].1)
    }

    pub fn encode(&self, species: SpeciesId) -> Result<usize> {
        self.index
            .get(&species)
            .copied()
            .ok_or(Error::UnknownSpecies(species))
    }

    pub fn decode(&self, class: usize) -> Result<SpeciesId> {
        self.entries
            .get(class)
            .map(|&(s, _)| s)
            .ok_or(Error::ClassOutOfRange {
                index: class,
                classes: self.len(),
            })
    }

    /// Keeps the species accepted by `keep`; indices are re-compacted.
    pub fn retain(&self, mut keep: impl FnMut(SpeciesId, u64) -> bool) -> Self {
        Self::from_counts(self.entries.iter().copied().filter(|&(s, n)| keep(s, n)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.len() + 1));
        out.push_str(CATALOG_HEADER);
        out.push('\n');
        for (species, count) in &self.entries {
            out.push_str(&format!("{species},{count}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end_matches('\r') == CATALOG_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: 1,
                    reason: format!("expected header `{CATALOG_HEADER}`"),
                })
            }
        }
        let mut counts = Vec::new();
        for (i, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: &str| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                reason: reason.to_string(),
            };
            let (id, count) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected two columns"))?;
            let id = id
                .trim()
                .parse()
                .map_err(|_| parse_err("invalid species_id"))?;
            let count = count
                .trim()
                .parse()
                .map_err(|_| parse_err("invalid image_count"))?;
            counts.push((SpeciesId(id), count));
        }
        Ok(Self::from_counts(counts))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).io_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
        Self::from_csv(&text, path)
    }
}

/// Counts labeled records per species. Fails on the first unlabeled record.
pub fn build_catalog<'a, I>(records: I) -> Result<SpeciesCatalog>
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    let mut counts: BTreeMap<SpeciesId, u64> = BTreeMap::new();
    for record in records {
        let species = record
            .species
            .ok_or_else(|| Error::MissingLabel(record.image_id.clone()))?;
        *counts.entry(species).or_default() += 1;
    }
    Ok(SpeciesCatalog::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labeled(id: &str, species: u64) -> ImageRecord {
        ImageRecord::new(id, Some(SpeciesId(species)), image::RgbImage::new(1, 1))
    }

    #[test]
    fn counts_and_indices() {
        let records = [labeled("a", 5), labeled("b", 9), labeled("c", 5)];
        let catalog = build_catalog(&records).unwrap();
        assert_eq!(catalog.entries(), &[(SpeciesId(5), 2), (SpeciesId(9), 1)]);
        assert_eq!(catalog.encode(SpeciesId(5)).unwrap(), 0);
        assert_eq!(catalog.encode(SpeciesId(9)).unwrap(), 1);
    }

    #[test]
    fn empty_stream() {
        let catalog = build_catalog(std::iter::empty()).unwrap();
        assert_eq!(catalog.len(), 0);
        assert!(catalog.is_empty());
    }

    #[test]
    fn unlabeled_record_is_rejected_by_id() {
        let records = [
            labeled("a", 1),
            ImageRecord::new("plot-7", None, image::RgbImage::new(1, 1)),
        ];
        match build_catalog(&records) {
            Err(Error::MissingLabel(id)) => assert_eq!(id, "plot-7"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn synthetic_counts_match_hash_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<_> = (0..1000)
            .map(|i| labeled(&i.to_string(), rng.random_range(0..10) * 13))
            .collect();
        let mut oracle: HashMap<u64, u64> = HashMap::new();
        for r in &records {
            *oracle.entry(r.species.unwrap().0).or_default() += 1;
        }
        let catalog = build_catalog(&records).unwrap();
        assert_eq!(catalog.entries().iter().map(|e| e.1).sum::<u64>(), 1000);
        for &(s, n) in catalog.entries() {
            assert_eq!(oracle[&s.0], n);
        }
        assert_eq!(catalog.len(), oracle.len());
    }

    #[test]
    fn encode_unknown_names_id() {
        let catalog = SpeciesCatalog::from_counts([(SpeciesId(5), 1), (SpeciesId(9), 1)]);
        assert_eq!(catalog.encode(SpeciesId(9)).unwrap(), 1);
        let err = catalog.encode(SpeciesId(4)).unwrap_err();
        assert!(err.to_string().contains('4'));
        assert!(catalog.decode(2).is_err());
    }

    #[test]
    fn permuted_inserts_yield_ascending_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ids: Vec<u64> = (0..50).map(|_| rng.random_range(0..10_000)).collect();
        ids.shuffle(&mut rng);
        let catalog = SpeciesCatalog::from_counts(ids.iter().map(|&i| (SpeciesId(i), 1)));
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let got: Vec<u64> = catalog.species().map(|s| s.0).collect();
        assert_eq!(got, sorted);
    }

    #[test]
    fn csv_layout() {
        let catalog = SpeciesCatalog::from_counts([(SpeciesId(9), 1), (SpeciesId(5), 2)]);
        assert_eq!(catalog.to_csv(), "species_id,image_count\n5,2\n9,1\n");
        let back = SpeciesCatalog::from_csv(&catalog.to_csv(), Path::new("x")).unwrap();
        assert_eq!(back, catalog);
        assert!(SpeciesCatalog::from_csv("id,count\n", Path::new("x")).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_bijection(ids in proptest::collection::vec(0u64..500, 0..60)) {
            let catalog = SpeciesCatalog::from_counts(ids.iter().map(|&i| (SpeciesId(i), 1)));
            for class in 0..catalog.len() {
                let s = catalog.decode(class).unwrap();
                prop_assert_eq!(catalog.encode(s).unwrap(), class);
            }
            for &i in &ids {
                let class = catalog.encode(SpeciesId(i)).unwrap();
                prop_assert_eq!(catalog.decode(class).unwrap(), SpeciesId(i));
            }
        }

        #[test]
        fn build_is_order_insensitive(ids in proptest::collection::vec(0u64..30, 0..80), seed: u64) {
            let records: Vec<_> = ids.iter().enumerate().map(|(n, &s)| labeled(&n.to_string(), s)).collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build_catalog(&records).unwrap(), build_catalog(&shuffled).unwrap());
        }
    }
}
