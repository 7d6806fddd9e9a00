//! End-to-end curation: dataset ingestion, seed picking, candidate scoring,
//! ranked selection and manifest output.

pub mod config;
pub mod dataset;
pub mod run;
pub mod scoring;
pub mod seeds;
pub mod selection;

pub use config::{MetricMode, NormalizationCohort, PipelineConfig, SeedMode, FID_ESTIMATOR};
pub use dataset::{ingest_dataset, stratified_holdout, DatasetIndex, DatasetRecord, Ingested};
pub use run::{image_id, list_images, load_candidates, load_cohorts, run_pipeline, with_jobs, Cohort, PipelineOutput};
pub use scoring::{
    finalize_scores, patch_embeddings, raw_scores, read_score_csv, score_candidates, write_score_csv, Candidate,
    ScoreRow, SKIP_DIMENSIONS, SKIP_SEGMENTATION,
};
pub use seeds::{pick_seeds, FeatureSource};
pub use selection::{emit_manifest, load_manifest, select_candidates, SeedSelection, SelectionManifest};
