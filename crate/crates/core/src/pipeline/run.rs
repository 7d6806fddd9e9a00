use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{load_image, RasterImage};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::scoring::{finalize_scores, raw_scores, Candidate, ScoreRow};
use crate::pipeline::selection::{select_candidates, SelectionManifest};

/// A seed image together with the candidates generated from it.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub seed_id: String,
    pub seed: RasterImage,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub rows: Vec<ScoreRow>,
    pub manifest: SelectionManifest,
}

/// Runs `f` on a dedicated pool of `jobs` worker threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Scores every cohort, normalises and ranks, then selects.
///
/// The output depends only on the cohorts and `cfg`, never on `jobs`.
pub fn run_pipeline(cohorts: &[Cohort], cfg: &PipelineConfig, jobs: usize) -> Result<PipelineOutput> {
    cfg.validate()?;
    let per_cohort = with_jobs(jobs, || {
        cohorts
            .par_iter()
            .map(|c| {
                let rows = raw_scores(&c.seed_id, &c.seed, &c.candidates, cfg)?;
                let skipped = rows.iter().filter(|r| r.is_skipped()).count();
                log::info!("cohort {}: {} candidates, {skipped} skipped", c.seed_id, rows.len());
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut rows: Vec<ScoreRow> = per_cohort.into_iter().flatten().collect();
    finalize_scores(&mut rows, &cfg.weights, cfg.normalization)?;
    let manifest = select_candidates(&rows, cfg)?;
    Ok(PipelineOutput { rows, manifest })
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// PNG/JPEG files directly inside `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// File stem used as image id.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads every image in `dir` as a candidate, id = file stem.
pub fn load_candidates(dir: impl AsRef<Path>) -> Result<Vec<Candidate>> {
    list_images(dir)?
        .into_iter()
        .map(|p| Ok(Candidate::new(image_id(&p), load_image(&p)?)))
        .collect()
}

/// Loads cohorts from `seeds_dir/<seed_id>.{png,jpg}` and
/// `generated_dir/<seed_id>/*`. Seeds without a candidate directory are
/// an error.
pub fn load_cohorts(seeds_dir: impl AsRef<Path>, generated_dir: impl AsRef<Path>) -> Result<Vec<Cohort>> {
    let generated_dir = generated_dir.as_ref();
    let mut cohorts = BTreeMap::new();
    for seed_path in list_images(seeds_dir)? {
        let seed_id = image_id(&seed_path);
        let cand_dir = generated_dir.join(&seed_id);
        if !cand_dir.is_dir() {
            return Err(Error::io(
                &cand_dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no candidate directory for seed"),
            ));
        }
        let cohort = Cohort {
            seed: load_image(&seed_path)?,
            candidates: load_candidates(&cand_dir)?,
            seed_id: seed_id.clone(),
        };
        cohorts.insert(seed_id, cohort);
    }
    if cohorts.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(cohorts.into_values().collect())
}
