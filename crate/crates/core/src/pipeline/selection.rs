//! Per-seed candidate selection and the versioned JSON manifest.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Weights;
use crate::pipeline::config::{MetricMode, PipelineConfig, FID_ESTIMATOR};
use crate::pipeline::scoring::ScoreRow;

pub const MANIFEST_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSelection {
    pub seed_id: String,
    pub candidates: Vec<String>,
}

/// Which generated images join the training set, and under what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionManifest {
    pub schema_version: u64,
    pub config_fingerprint: String,
    pub metric_mode: MetricMode,
    pub weights: Weights,
    pub fid_estimator: String,
    pub per_seed_select: usize,
    pub selections: Vec<SeedSelection>,
    pub total_selected: usize,
}

/// Picks `cfg.per_seed_select` candidates per seed cohort according to
/// `cfg.metric_mode`. Skipped rows are never eligible; FID modes also drop
/// rows without a Fréchet value. Cohorts are processed in seed-id order.
pub fn select_candidates(rows: &[ScoreRow], cfg: &PipelineConfig) -> Result<SelectionManifest> {
    let k = cfg.per_seed_select;
    if k == 0 {
        return Err(Error::Config("per_seed_select must be at least 1".into()));
    }
    let mut cohorts: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    for r in rows {
        let entry = cohorts.entry(r.seed_id.as_str()).or_default();
        let eligible = !r.is_skipped()
            && match cfg.metric_mode {
                MetricMode::ContentSpace => r.combined.is_some(),
                MetricMode::FidBottom | MetricMode::FidTop => r.fid.is_some(),
                MetricMode::Random => true,
            };
        if eligible {
            entry.push(r);
        }
    }
    if cohorts.is_empty() {
        return Err(Error::NoRecords);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut selections = Vec::with_capacity(cohorts.len());
    for (seed_id, mut pool) in cohorts {
        if pool.len() < k {
            return Err(Error::CohortTooSmall {
                seed_id: seed_id.to_string(),
                available: pool.len(),
                requested: k,
            });
        }
        let by_id = |a: &&ScoreRow, b: &&ScoreRow| a.candidate_id.cmp(&b.candidate_id);
        let key = |r: &ScoreRow, v: Option<f64>| v.unwrap_or_else(|| panic!("{} has no score", r.candidate_id));
        match cfg.metric_mode {
            MetricMode::ContentSpace => pool.sort_by(|a, b| {
                key(a, a.combined)
                    .total_cmp(&key(b, b.combined))
                    .then_with(|| by_id(a, b))
            }),
            MetricMode::FidBottom => {
                pool.sort_by(|a, b| key(a, a.fid).total_cmp(&key(b, b.fid)).then_with(|| by_id(a, b)))
            }
            MetricMode::FidTop => {
                pool.sort_by(|a, b| key(b, b.fid).total_cmp(&key(a, a.fid)).then_with(|| by_id(a, b)))
            }
            MetricMode::Random => {
                pool.sort_by(by_id);
                let picks = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
                pool = picks.into_iter().map(|i| pool[i]).collect();
            }
        }
        let candidates: Vec<String> = pool.iter().take(k).map(|r| r.candidate_id.clone()).collect();
        let mut distinct = candidates.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != candidates.len() {
            return Err(Error::Invariant(format!("duplicate candidate ids in cohort {seed_id}")));
        }
        selections.push(SeedSelection {
            seed_id: seed_id.to_string(),
            candidates,
        });
    }
    let total_selected = selections.iter().map(|s| s.candidates.len()).sum();
    Ok(SelectionManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config_fingerprint: cfg.fingerprint(),
        metric_mode: cfg.metric_mode,
        weights: cfg.weights,
        fid_estimator: FID_ESTIMATOR.to_string(),
        per_seed_select: k,
        selections,
        total_selected,
    })
}

impl SelectionManifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Config("manifest has no numeric schema_version".into()))?;
        if found != MANIFEST_SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch {
                found,
                expected: MANIFEST_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

pub fn emit_manifest(manifest: &SelectionManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SelectionManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SelectionManifest::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: &str, id: &str, combined: f64, fid: f64) -> ScoreRow {
        ScoreRow {
            seed_id: seed.into(),
            candidate_id: id.into(),
            c_raw: Some(combined),
            s_raw: Some(combined),
            c_norm: Some(combined),
            s_norm: Some(combined),
            combined: Some(combined),
            fid: Some(fid),
            rank: None,
            skipped_reason: None,
        }
    }

    fn cohort(seed: &str, n: usize) -> Vec<ScoreRow> {
        (0..n)
            .map(|i| row(seed, &format!("c{i:02}"), i as f64 / n as f64, ((i * 7) % n) as f64))
            .collect()
    }

    fn cfg(mode: MetricMode, k: usize) -> PipelineConfig {
        PipelineConfig {
            metric_mode: mode,
            per_seed_select: k,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn lowest_combined_selected() {
        let m = select_candidates(&cohort("s", 5), &cfg(MetricMode::ContentSpace, 2)).unwrap();
        assert_eq!(m.selections[0].candidates, vec!["c00", "c01"]);
        assert_eq!(m.total_selected, 2);
    }

    #[test]
    fn whole_cohort_selected() {
        let m = select_candidates(&cohort("s", 4), &cfg(MetricMode::Random, 4)).unwrap();
        let mut got = m.selections[0].candidates.clone();
        got.sort();
        assert_eq!(got, vec!["c00", "c01", "c02", "c03"]);
    }

    #[test]
    fn fid_top_and_bottom_disjoint() {
        let rows = cohort("s", 10);
        let top = select_candidates(&rows, &cfg(MetricMode::FidTop, 5)).unwrap();
        let bottom = select_candidates(&rows, &cfg(MetricMode::FidBottom, 5)).unwrap();
        let t = &top.selections[0].candidates;
        assert!(bottom.selections[0].candidates.iter().all(|c| !t.contains(c)));
    }

    #[test]
    fn skipped_rows_never_selected() {
        let mut rows = cohort("s", 3);
        rows[0].skipped_reason = Some("segmentation-failed".into());
        rows[0].combined = None;
        let m = select_candidates(&rows, &cfg(MetricMode::Random, 2)).unwrap();
        assert!(!m.selections[0].candidates.contains(&"c00".to_string()));
        assert!(matches!(
            select_candidates(&rows, &cfg(MetricMode::ContentSpace, 3)),
            Err(Error::CohortTooSmall { available: 2, .. })
        ));
    }

    #[test]
    fn manifest_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut rows = cohort("b", 4);
        rows.extend(cohort("a", 4));
        let m = select_candidates(&rows, &cfg(MetricMode::ContentSpace, 2)).unwrap();
        assert_eq!(m.selections[0].seed_id, "a");
        emit_manifest(&m, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), m);
        emit_manifest(&load_manifest(&path).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);

        let tampered = String::from_utf8(first).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            SelectionManifest::from_json(&tampered),
            Err(Error::SchemaVersionMismatch { found: 2, .. })
        ));
    }
}
