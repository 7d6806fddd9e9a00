//! Per-seed scoring of generated candidates and the score table format.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::embeddings::csv_error;
use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::metrics::{
    content_distance_with, fid_between_rows, min_max_normalize, spatial_score, spatial_stats,
    SpatialStats, Weights,
};
use crate::pipeline::config::{NormalizationCohort, PipelineConfig};
use crate::segmentation::{segment_lesion_detailed, SegmentationConfig};

/// Side of the square tiles used by the per-candidate Fréchet estimator.
pub const PATCH_SIDE: usize = 16;

pub const SKIP_SEGMENTATION: &str = "segmentation-failed";
pub const SKIP_DIMENSIONS: &str = "dimension-mismatch";

pub const SCORE_CSV_HEADER: [&str; 10] = [
    "seed_id",
    "candidate_id",
    "c_raw",
    "s_raw",
    "c_norm",
    "s_norm",
    "combined",
    "fid",
    "rank",
    "skipped_reason",
];

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub image: RasterImage,
}

impl Candidate {
    pub fn new(id: impl Into<String>, image: RasterImage) -> Self {
        Self {
            id: id.into(),
            image,
        }
    }
}

/// One scored (or skipped) candidate.
///
/// Skipped rows carry no scores and no rank. `s_raw`/`s_norm` are also
/// absent, without a skip, when the spatial branch has zero weight and
/// segmentation was not possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub seed_id: String,
    pub candidate_id: String,
    pub c_raw: Option<f64>,
    pub s_raw: Option<f64>,
    pub c_norm: Option<f64>,
    pub s_norm: Option<f64>,
    pub combined: Option<f64>,
    pub fid: Option<f64>,
    pub rank: Option<u32>,
    pub skipped_reason: Option<String>,
}

impl ScoreRow {
    pub fn is_skipped(&self) -> bool {
        self.skipped_reason.is_some()
    }

    fn skipped(seed_id: &str, candidate_id: &str, reason: &str) -> Self {
        Self {
            seed_id: seed_id.to_string(),
            candidate_id: candidate_id.to_string(),
            c_raw: None,
            s_raw: None,
            c_norm: None,
            s_norm: None,
            combined: None,
            fid: None,
            rank: None,
            skipped_reason: Some(reason.to_string()),
        }
    }
}

/// Per-tile colour descriptor: mean and standard deviation of R, G and B
/// over each full `PATCH_SIDE` tile, scaled to [0, 1]. Partial tiles at the
/// right and bottom edges are dropped.
pub fn patch_embeddings(img: &RasterImage) -> Vec<Vec<f64>> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let n = (PATCH_SIDE * PATCH_SIDE) as u64;
    let mut rows = Vec::new();
    for ty in 0..h / PATCH_SIDE {
        for tx in 0..w / PATCH_SIDE {
            let mut sum = [0u64; 3];
            let mut sq = [0u64; 3];
            for y in ty * PATCH_SIDE..(ty + 1) * PATCH_SIDE {
                for x in tx * PATCH_SIDE..(tx + 1) * PATCH_SIDE {
                    let px = img.pixel(x, y);
                    for c in 0..3 {
                        let v = px[if ch == 3 { c } else { 0 }] as u64;
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                }
            }
            // Integer moments keep constant tiles at exactly zero spread.
            let scale = n as f64 * 255.0;
            let mut row = Vec::with_capacity(6);
            row.extend(sum.iter().map(|&s| s as f64 / scale));
            row.extend(
                sum.iter()
                    .zip(&sq)
                    .map(|(&s, &q)| ((n * q - s * s) as f64).sqrt() / scale),
            );
            rows.push(row);
        }
    }
    rows
}

struct SeedProfile {
    stats: Option<SpatialStats>,
    dims: (usize, usize),
    patches: Vec<Vec<f64>>,
}

fn spatial_of(img: &RasterImage, cfg: &SegmentationConfig) -> Result<SpatialStats> {
    let seg = segment_lesion_detailed(img, cfg)?;
    spatial_stats(&seg.roi, &seg.plane)
}

fn profile_seed(seed: &RasterImage, cfg: &PipelineConfig) -> Result<SeedProfile> {
    let stats = match spatial_of(seed, &cfg.segmentation) {
        Ok(s) => Some(s),
        Err(e) if cfg.weights.w2 > 0.0 => return Err(Error::SeedSegmentationFailed(Box::new(e))),
        Err(e) => {
            log::warn!("seed segmentation failed ({e}); spatial scores omitted");
            None
        }
    };
    Ok(SeedProfile {
        stats,
        dims: (seed.width(), seed.height()),
        patches: patch_embeddings(seed),
    })
}

fn raw_row(
    seed_id: &str,
    seed: &RasterImage,
    profile: &SeedProfile,
    cand: &Candidate,
    cfg: &PipelineConfig,
) -> Result<ScoreRow> {
    let spatial_needed = cfg.weights.w2 > 0.0;
    let mut s_raw = None;
    if let Some(seed_stats) = &profile.stats {
        if (cand.image.width(), cand.image.height()) != profile.dims {
            if spatial_needed {
                return Ok(ScoreRow::skipped(seed_id, &cand.id, SKIP_DIMENSIONS));
            }
        } else {
            match spatial_of(&cand.image, &cfg.segmentation) {
                Ok(stats) => s_raw = Some(spatial_score(seed_stats, &stats)),
                Err(e) if spatial_needed => {
                    log::debug!("{seed_id}/{}: {e}", cand.id);
                    return Ok(ScoreRow::skipped(seed_id, &cand.id, SKIP_SEGMENTATION));
                }
                Err(_) => {}
            }
        }
    }
    let c_raw = content_distance_with(seed, &cand.image, cfg.bc_form)?;
    let fid = fid_between_rows(&profile.patches, &patch_embeddings(&cand.image))
        .ok()
        .map(|f| f.value);
    Ok(ScoreRow {
        seed_id: seed_id.to_string(),
        candidate_id: cand.id.clone(),
        c_raw: Some(c_raw),
        s_raw,
        c_norm: None,
        s_norm: None,
        combined: None,
        fid,
        rank: None,
        skipped_reason: None,
    })
}

/// Raw content, spatial and Fréchet scores for one seed's candidates, in
/// input order. Normalisation and ranking happen in [`finalize_scores`].
pub fn raw_scores(
    seed_id: &str,
    seed: &RasterImage,
    candidates: &[Candidate],
    cfg: &PipelineConfig,
) -> Result<Vec<ScoreRow>> {
    if candidates.is_empty() {
        return Err(Error::CohortTooSmall {
            seed_id: seed_id.to_string(),
            available: 0,
            requested: 1,
        });
    }
    let profile = profile_seed(seed, cfg)?;
    candidates
        .par_iter()
        .map(|c| raw_row(seed_id, seed, &profile, c, cfg))
        .collect()
}

/// Scores and ranks one seed's cohort.
pub fn score_candidates(
    seed_id: &str,
    seed: &RasterImage,
    candidates: &[Candidate],
    cfg: &PipelineConfig,
) -> Result<Vec<ScoreRow>> {
    cfg.validate()?;
    let mut rows = raw_scores(seed_id, seed, candidates, cfg)?;
    finalize_scores(&mut rows, &cfg.weights, NormalizationCohort::PerSeed)?;
    Ok(rows)
}

fn normalize_column(
    rows: &mut [ScoreRow],
    members: &[usize],
    get: impl Fn(&ScoreRow) -> Option<f64>,
    mut set: impl FnMut(&mut ScoreRow, f64),
) -> Result<()> {
    let present: Vec<usize> = members.iter().copied().filter(|&i| get(&rows[i]).is_some()).collect();
    if present.is_empty() {
        return Ok(());
    }
    let values: Vec<f64> = present.iter().map(|&i| get(&rows[i]).unwrap()).collect();
    for (i, v) in present.into_iter().zip(min_max_normalize(&values)?) {
        set(&mut rows[i], v);
    }
    Ok(())
}

/// Min-max normalises `c_raw` and `s_raw`, combines them with `weights`,
/// normalises the combination, and ranks each seed's cohort. Rows are then
/// sorted by seed id, rank, and candidate id (skipped rows last).
pub fn finalize_scores(
    rows: &mut [ScoreRow],
    weights: &Weights,
    cohort: NormalizationCohort,
) -> Result<()> {
    weights.validate()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.is_skipped() {
            continue;
        }
        let key = match cohort {
            NormalizationCohort::PerSeed => r.seed_id.as_str(),
            NormalizationCohort::Global => "",
        };
        groups.entry(key).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();

    for members in &groups {
        normalize_column(rows, members, |r| r.c_raw, |r, v| r.c_norm = Some(v))?;
        normalize_column(rows, members, |r| r.s_raw, |r, v| r.s_norm = Some(v))?;
        for &i in members {
            let r = &mut rows[i];
            let c = r.c_norm.ok_or_else(|| Error::Invariant("scored row without c_raw".into()))?;
            let s = match r.s_norm {
                Some(s) => s,
                None if weights.w2 == 0.0 => 0.0,
                None => return Err(Error::Invariant("spatial score missing with w2 > 0".into())),
            };
            r.combined = Some(weights.w1 * c + weights.w2 * s);
        }
        normalize_column(rows, members, |r| r.combined, |r, v| r.combined = Some(v))?;
    }

    let mut by_seed: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if !r.is_skipped() {
            by_seed.entry(r.seed_id.clone()).or_default().push(i);
        }
    }
    for members in by_seed.values_mut() {
        members.sort_by(|&a, &b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            ra.combined
                .partial_cmp(&rb.combined)
                .expect("combined scores are finite")
                .then_with(|| ra.candidate_id.cmp(&rb.candidate_id))
        });
        for (rank, &i) in members.iter().enumerate() {
            rows[i].rank = Some(rank as u32 + 1);
        }
    }

    rows.sort_by(|a, b| {
        a.seed_id
            .cmp(&b.seed_id)
            .then(a.is_skipped().cmp(&b.is_skipped()))
            .then(a.rank.cmp(&b.rank))
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_score_csv(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(SCORE_CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.seed_id.clone(),
            r.candidate_id.clone(),
            fmt_opt(r.c_raw),
            fmt_opt(r.s_raw),
            fmt_opt(r.c_norm),
            fmt_opt(r.s_norm),
            fmt_opt(r.combined),
            fmt_opt(r.fid),
            r.rank.map(|x| x.to_string()).unwrap_or_default(),
            r.skipped_reason.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(SCORE_CSV_HEADER) {
        return Err(Error::csv(path, format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::csv(path, format!("row {}: bad {what}", line + 2));
        let num = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(SCORE_CSV_HEADER[i])),
            }
        };
        let text = |i: usize| (!rec[i].is_empty()).then(|| rec[i].to_string());
        rows.push(ScoreRow {
            seed_id: rec[0].to_string(),
            candidate_id: rec[1].to_string(),
            c_raw: num(2)?,
            s_raw: num(3)?,
            c_norm: num(4)?,
            s_norm: num(5)?,
            combined: num(6)?,
            fid: num(7)?,
            rank: match &rec[8] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("rank"))?),
            },
            skipped_reason: text(9),
        });
    }
    Ok(rows)
}
