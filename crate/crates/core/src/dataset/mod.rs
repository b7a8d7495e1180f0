//! Procedural labelled-cuboid dataset: chair/table/lamp analogues with
//! deterministic generation, occupancy supervision, normalization stats,
//! coarse codebooks, and a line-oriented on-disk format.

mod build;
mod io;
mod occupancy;
mod text;

pub use build::{generate_object, StyleParams};
pub use io::{load_dataset, save_dataset, DATASET_FORMAT_VERSION};
pub use occupancy::{balanced_batch, make_occupancy_pairs, OccupancyPoint, OccupancySet};
pub use text::text_description;

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{fit_kmeans, ClusterCodebook};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Part};
use crate::rng::{self, stream};

/// Object categories produced by the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Chair,
    Table,
    Lamp,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Chair, Category::Table, Category::Lamp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Chair => "chair",
            Category::Table => "table",
            Category::Lamp => "lamp",
        }
    }

    pub fn parse(s: &str) -> Result<Category> {
        match s {
            "chair" => Ok(Category::Chair),
            "table" => Ok(Category::Table),
            "lamp" => Ok(Category::Lamp),
            other => Err(Error::InvalidArgument(format!(
                "unknown category '{other}' (expected chair, table or lamp)"
            ))),
        }
    }

    fn index(&self) -> u64 {
        match self {
            Category::Chair => 0,
            Category::Table => 1,
            Category::Lamp => 2,
        }
    }
}

/// Fixed label vocabulary, id = position. The final entry is the reserved
/// end-of-sequence symbol.
pub const LABELS: [&str; 12] = [
    "arm",
    "back",
    "base",
    "drawer",
    "leg",
    "pedestal",
    "pole",
    "seat",
    "shade",
    "stretcher",
    "top",
    "<end>",
];

pub const LABEL_ARM: usize = 0;
pub const LABEL_BACK: usize = 1;
pub const LABEL_BASE: usize = 2;
pub const LABEL_DRAWER: usize = 3;
pub const LABEL_LEG: usize = 4;
pub const LABEL_PEDESTAL: usize = 5;
pub const LABEL_POLE: usize = 6;
pub const LABEL_SEAT: usize = 7;
pub const LABEL_SHADE: usize = 8;
pub const LABEL_STRETCHER: usize = 9;
pub const LABEL_TOP: usize = 10;

/// Vocabulary size including the end symbol.
pub fn vocab_size() -> usize {
    LABELS.len()
}

/// The reserved end symbol id (always the last vocabulary entry).
pub fn end_label() -> usize {
    LABELS.len() - 1
}

/// One training object: a bounding box plus an unordered part list.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRecord {
    pub id: String,
    pub category: Category,
    pub bbox: BoundingBox,
    pub parts: Vec<Part>,
    pub description: String,
    /// Set on generated records that hit the part cap before the end symbol.
    pub truncated: bool,
}

impl ObjectRecord {
    pub fn validate(&self, max_parts: usize) -> Result<()> {
        if self.parts.is_empty() || self.parts.len() > max_parts {
            return Err(Error::InvalidArgument(format!(
                "record {}: part count {} outside [1, {max_parts}]",
                self.id,
                self.parts.len()
            )));
        }
        self.bbox.validate()?;
        for part in &self.parts {
            part.validate(vocab_size())?;
            for corner in part.corners()? {
                if !self.bbox.contains_with_slack(corner, 1e-6)? {
                    return Err(Error::InvalidArgument(format!(
                        "record {}: part corner {corner:?} escapes the bounding box",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-dimension min/max computed on the train split; attributes are mapped
/// affinely to [-1,1]. Constant dimensions map to 0 and back to their
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl AttrStats {
    pub fn fit(values: impl Iterator<Item = Vec<f64>>, dim: usize) -> AttrStats {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for v in values {
            for k in 0..dim {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        AttrStats { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    2.0 * (v - self.min[k]) / span - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    self.min[k] + (v + 1.0) * span / 2.0
                } else {
                    self.min[k]
                }
            })
            .collect()
    }
}

/// Normalization stats for part and bounding-box attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub part_translation: AttrStats,
    pub part_size: AttrStats,
    pub part_rotation6d: AttrStats,
    pub bbox_translation: AttrStats,
    pub bbox_size: AttrStats,
    pub bbox_rotation6d: AttrStats,
}

/// Coarse-prediction codebooks, fitted on normalized train attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebooks {
    pub translation: ClusterCodebook,
    pub size: ClusterCodebook,
    pub rotation6d: ClusterCodebook,
}

/// Everything the models need to interpret records: vocabulary,
/// normalization, codebooks, and the split membership lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub max_parts: usize,
    pub vocabulary: Vec<String>,
    pub stats: NormStats,
    pub codebooks: Codebooks,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl Manifest {
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn end_label(&self) -> usize {
        self.vocabulary.len() - 1
    }

    pub fn split_ids(&self, split: &str) -> Result<&[String]> {
        match split {
            "train" => Ok(&self.train_ids),
            "val" => Ok(&self.val_ids),
            "test" => Ok(&self.test_ids),
            other => Err(Error::InvalidArgument(format!(
                "unknown split '{other}' (expected train, val or test)"
            ))),
        }
    }
}

/// A loaded dataset: manifest plus records, with an id index.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub records: Vec<ObjectRecord>,
    /// SHA-256 of the serialized manifest, used to bind checkpoints to the
    /// exact codebooks/stats they were trained with.
    pub manifest_hash: String,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(manifest: Manifest, records: Vec<ObjectRecord>) -> Result<Dataset> {
        let manifest_hash = io::manifest_hash(&manifest);
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate record id {}",
                    r.id
                )));
            }
        }
        for split in ["train", "val", "test"] {
            for id in manifest.split_ids(split)? {
                if !index.contains_key(id) {
                    return Err(Error::InvalidArgument(format!(
                        "split {split} references missing record {id}"
                    )));
                }
            }
        }
        Ok(Dataset {
            manifest,
            records,
            manifest_hash,
            index,
        })
    }

    pub fn record(&self, id: &str) -> Option<&ObjectRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn split(&self, name: &str) -> Result<Vec<&ObjectRecord>> {
        Ok(self
            .manifest
            .split_ids(name)?
            .iter()
            .map(|id| self.record(id).expect("validated at construction"))
            .collect())
    }
}

/// Dataset construction settings. Defaults give the desk-scale corpus of
/// 2000/200/200 records per category.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub seed: u64,
    pub categories: Vec<Category>,
    pub train_per_category: usize,
    pub val_per_category: usize,
    pub test_per_category: usize,
    pub max_parts: usize,
    pub clusters: usize,
    pub style: StyleParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            categories: Category::ALL.to_vec(),
            train_per_category: 2000,
            val_per_category: 200,
            test_per_category: 200,
            max_parts: 24,
            clusters: 20,
            style: StyleParams::default(),
        }
    }
}

/// Generate the full dataset: records, splits, stats and codebooks. Fully
/// determined by the config (records are generated from per-record derived
/// seeds, so parallelism cannot reorder randomness).
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset> {
    if config.categories.is_empty() {
        return Err(Error::InvalidConfig("no categories configured".into()));
    }
    let per_cat = config.train_per_category + config.val_per_category + config.test_per_category;
    if per_cat == 0 {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }

    let mut records: Vec<ObjectRecord> = Vec::with_capacity(per_cat * config.categories.len());
    for &category in &config.categories {
        let mut batch: Vec<ObjectRecord> = (0..per_cat)
            .into_par_iter()
            .map(|i| {
                let id = format!("{}-{:06}", category.as_str(), i);
                let mut rec_rng = rng::rng_from(
                    config.seed,
                    &[stream::DATASET_RECORD, category.index(), i as u64],
                );
                generate_object(category, &config.style, id, &mut rec_rng)
            })
            .collect();
        records.append(&mut batch);
    }
    for r in &records {
        r.validate(config.max_parts)?;
    }

    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    let mut test_ids = Vec::new();
    for (c, &_category) in config.categories.iter().enumerate() {
        let base = c * per_cat;
        for i in 0..per_cat {
            let id = records[base + i].id.clone();
            if i < config.train_per_category {
                train_ids.push(id);
            } else if i < config.train_per_category + config.val_per_category {
                val_ids.push(id);
            } else {
                test_ids.push(id);
            }
        }
    }

    let train_set: std::collections::HashSet<&String> = train_ids.iter().collect();
    let train_records: Vec<&ObjectRecord> = records
        .iter()
        .filter(|r| train_set.contains(&r.id))
        .collect();
    let stats = fit_stats(&train_records)?;
    let codebooks = fit_codebooks(&train_records, &stats, config.clusters, config.seed)?;

    let manifest = Manifest {
        version: DATASET_FORMAT_VERSION,
        seed: config.seed,
        max_parts: config.max_parts,
        vocabulary: LABELS.iter().map(|s| s.to_string()).collect(),
        stats,
        codebooks,
        train_ids,
        val_ids,
        test_ids,
    };
    Dataset::new(manifest, records)
}

fn fit_stats(train: &[&ObjectRecord]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot fit normalization stats on an empty train split".into(),
        ));
    }
    let parts = || train.iter().flat_map(|r| r.parts.iter());
    Ok(NormStats {
        part_translation: AttrStats::fit(parts().map(|p| p.translation.to_vec()), 3),
        part_size: AttrStats::fit(parts().map(|p| p.size.to_vec()), 3),
        part_rotation6d: AttrStats::fit(parts().map(|p| p.rotation.0.to_vec()), 6),
        bbox_translation: AttrStats::fit(train.iter().map(|r| r.bbox.translation.to_vec()), 3),
        bbox_size: AttrStats::fit(train.iter().map(|r| r.bbox.size.to_vec()), 3),
        bbox_rotation6d: AttrStats::fit(train.iter().map(|r| r.bbox.rotation.0.to_vec()), 6),
    })
}

fn fit_codebooks(
    train: &[&ObjectRecord],
    stats: &NormStats,
    clusters: usize,
    seed: u64,
) -> Result<Codebooks> {
    let collect = |dim: usize, f: &dyn Fn(&Part) -> Vec<f64>| -> Array2<f64> {
        let rows: Vec<Vec<f64>> = train
            .iter()
            .flat_map(|r| r.parts.iter())
            .map(f)
            .collect();
        let mut arr = Array2::zeros((rows.len(), dim));
        for (i, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                arr[(i, k)] = v;
            }
        }
        arr
    };

    let translations = collect(3, &|p| stats.part_translation.normalize(&p.translation));
    let sizes = collect(3, &|p| stats.part_size.normalize(&p.size));
    let rotations = collect(6, &|p| stats.part_rotation6d.normalize(&p.rotation.0));

    Ok(Codebooks {
        translation: fit_kmeans(
            translations.view(),
            clusters,
            "translation",
            &mut rng::rng_from(seed, &[stream::KMEANS, 0]),
        )?,
        size: fit_kmeans(
            sizes.view(),
            clusters,
            "size",
            &mut rng::rng_from(seed, &[stream::KMEANS, 1]),
        )?,
        rotation6d: fit_kmeans(
            rotations.view(),
            clusters,
            "rotation6d",
            &mut rng::rng_from(seed, &[stream::KMEANS, 2]),
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> DatasetConfig {
        DatasetConfig {
            seed: 7,
            categories: Category::ALL.to_vec(),
            train_per_category: 30,
            val_per_category: 5,
            test_per_category: 5,
            clusters: 8,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn build_is_deterministic_and_valid() {
        let a = build_dataset(&tiny_config()).unwrap();
        let b = build_dataset(&tiny_config()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.manifest_hash, b.manifest_hash);
        for r in &a.records {
            r.validate(a.manifest.max_parts).unwrap();
        }
    }

    #[test]
    fn splits_are_disjoint_by_id() {
        let ds = build_dataset(&tiny_config()).unwrap();
        let train: std::collections::HashSet<_> = ds.manifest.train_ids.iter().collect();
        let test: std::collections::HashSet<_> = ds.manifest.test_ids.iter().collect();
        let val: std::collections::HashSet<_> = ds.manifest.val_ids.iter().collect();
        assert!(train.is_disjoint(&test));
        assert!(train.is_disjoint(&val));
        assert!(val.is_disjoint(&test));
        assert_eq!(ds.manifest.train_ids.len(), 90);
        assert_eq!(ds.manifest.test_ids.len(), 15);
    }

    #[test]
    fn vocabulary_reserves_end_as_last_id() {
        assert_eq!(LABELS[end_label()], "<end>");
        let ds = build_dataset(&tiny_config()).unwrap();
        assert_eq!(ds.manifest.end_label(), LABELS.len() - 1);
        for r in &ds.records {
            for p in &r.parts {
                assert!(p.label < end_label(), "end label leaked into a record");
            }
        }
    }

    #[test]
    fn normalization_round_trips_train_attributes() {
        let ds = build_dataset(&tiny_config()).unwrap();
        let stats = &ds.manifest.stats;
        for r in ds.split("train").unwrap() {
            for p in &r.parts {
                let n = stats.part_translation.normalize(&p.translation);
                assert!(n.iter().all(|v| (-1.0..=1.0).contains(v)));
                let back = stats.part_translation.denormalize(&n);
                for k in 0..3 {
                    assert!((back[k] - p.translation[k]).abs() < 1e-9);
                }
            }
        }
    }
}
