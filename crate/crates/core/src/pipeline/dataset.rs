//! Dataset ingestion from a metadata CSV and stratified hold-out splits.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::csv_error;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub image_id: String,
    pub path: PathBuf,
    pub class_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetIndex {
    records: Vec<DatasetRecord>,
    class_counts: BTreeMap<String, usize>,
}

impl DatasetIndex {
    /// Builds an index, rejecting duplicate image ids.
    pub fn from_records(records: Vec<DatasetRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut class_counts = BTreeMap::new();
        for r in &records {
            if !seen.insert(r.image_id.as_str()) {
                return Err(Error::Config(format!("duplicate image id `{}`", r.image_id)));
            }
            *class_counts.entry(r.class_label.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            records,
            class_counts,
        })
    }

    pub fn records(&self) -> &[DatasetRecord] {
        &self.records
    }

    pub fn class_counts(&self) -> &BTreeMap<String, usize> {
        &self.class_counts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Members of one class, sorted by image id.
    pub fn class_members(&self, class_label: &str) -> Vec<&DatasetRecord> {
        let mut members: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.class_label == class_label)
            .collect();
        members.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        members
    }

    /// Class counts, largest first; equal counts in label order.
    pub fn counts_descending(&self) -> Vec<(&str, usize)> {
        let mut rows: Vec<_> = self.class_counts.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows
    }
}

/// Result of [`ingest_dataset`]: the index plus ids whose image file was
/// not found.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub index: DatasetIndex,
    pub missing: Vec<String>,
}

/// Reads a metadata CSV with `image_id` and `dx` columns (other columns are
/// ignored) and resolves each id to `<image_dir>/<id>.jpg` or `.png`.
pub fn ingest_dataset(image_dir: impl AsRef<Path>, metadata_csv: impl AsRef<Path>) -> Result<Ingested> {
    let image_dir = image_dir.as_ref();
    let csv_path = metadata_csv.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(csv_path)
        .map_err(|e| csv_error(csv_path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(csv_path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::NoRecords);
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::csv(csv_path, format!("missing column `{name}`")))
    };
    let id_col = column("image_id")?;
    let dx_col = column("dx")?;

    let mut records = Vec::new();
    let mut missing = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(csv_path, e))?;
        let field = |i: usize| {
            record
                .get(i)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::csv(csv_path, format!("short or empty row: {record:?}")))
        };
        let image_id = field(id_col)?.to_string();
        let class_label = field(dx_col)?.to_string();
        let found = ["jpg", "png"]
            .iter()
            .map(|ext| image_dir.join(format!("{image_id}.{ext}")))
            .find(|p| p.is_file());
        match found {
            Some(path) => records.push(DatasetRecord {
                image_id,
                path,
                class_label,
            }),
            None => missing.push(image_id),
        }
    }
    if !missing.is_empty() {
        log::warn!("{} metadata rows have no image file and were excluded", missing.len());
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(Ingested {
        index: DatasetIndex::from_records(records)?,
        missing,
    })
}

/// Holds out exactly `per_class` records of every class, chosen by a seeded
/// shuffle. Returns `(train, test)`; both keep the input record order.
pub fn stratified_holdout(
    index: &DatasetIndex,
    per_class: usize,
    rng_seed: u64,
) -> Result<(DatasetIndex, DatasetIndex)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut held = HashSet::new();
    for (class, &count) in index.class_counts() {
        if count < per_class {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                available: count,
                requested: per_class,
            });
        }
        let mut members = index.class_members(class);
        members.shuffle(&mut rng);
        held.extend(members.into_iter().take(per_class).map(|r| r.image_id.clone()));
    }
    let (test, train): (Vec<_>, Vec<_>) = index
        .records
        .iter()
        .cloned()
        .partition(|r| held.contains(&r.image_id));
    Ok((DatasetIndex::from_records(train)?, DatasetIndex::from_records(test)?))
}
