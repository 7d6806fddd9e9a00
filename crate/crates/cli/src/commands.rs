use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tailcurate::diversity::image_feature;
use tailcurate::image::load_image;
use tailcurate::metrics::{fid_between_rows, spatial_stats, Weights};
use tailcurate::pipeline::{
    emit_manifest, finalize_scores, ingest_dataset, load_candidates, load_cohorts, pick_seeds, read_score_csv,
    run_pipeline, score_candidates, select_candidates, stratified_holdout, with_jobs, write_score_csv,
    FeatureSource, PipelineConfig, SKIP_SEGMENTATION,
};
use tailcurate::segmentation::segment_lesion_detailed;
use tailcurate::EmbeddingMatrix;

use crate::{config, Cli, Command, WeightArgs};

fn apply_weights(cfg: &mut PipelineConfig, w: &WeightArgs) -> tailcurate::Result<()> {
    let w1 = w.w1.unwrap_or(cfg.weights.w1);
    let w2 = w.w2.unwrap_or(cfg.weights.w2);
    cfg.weights = Weights::new(w1, w2)?;
    Ok(())
}

/// Applies subcommand flags on top of the file/default configuration.
fn resolve(cli: &Cli) -> tailcurate::Result<PipelineConfig> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    match &cli.command {
        Command::Seeds { k, mode, feature_side, .. } => {
            cfg.seed_count = k.unwrap_or(cfg.seed_count);
            cfg.seed_mode = mode.unwrap_or(cfg.seed_mode);
            cfg.feature_side = feature_side.unwrap_or(cfg.feature_side);
        }
        Command::Score { weights, .. } => apply_weights(&mut cfg, weights)?,
        Command::Select { mode, k, weights, .. } | Command::Run { mode, k, weights, .. } => {
            cfg.metric_mode = mode.unwrap_or(cfg.metric_mode);
            cfg.per_seed_select = k.unwrap_or(cfg.per_seed_select);
            apply_weights(&mut cfg, weights)?;
        }
        Command::Fid { feature_side, .. } => cfg.feature_side = feature_side.unwrap_or(cfg.feature_side),
        Command::Stats { .. } | Command::Segment { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| tailcurate::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn jobs(cli: &Cli) -> usize {
    match cli.jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    eprintln!("config fingerprint: {}", cfg.fingerprint());
    eprintln!("config: {}", cfg.canonical_json());
    let jobs = jobs(&cli);

    match &cli.command {
        Command::Stats { metadata, images } => {
            let ingested = ingest_dataset(images, metadata)?;
            for (label, count) in ingested.index.counts_descending() {
                println!("{label}\t{count}");
            }
        }
        Command::Seeds {
            metadata,
            images,
            class,
            embeddings,
            holdout,
            out,
            ..
        } => {
            let mut index = ingest_dataset(images, metadata)?.index;
            if let Some(per_class) = holdout {
                index = stratified_holdout(&index, *per_class, cfg.rng_seed)?.0;
            }
            let table = embeddings.as_ref().map(EmbeddingMatrix::read_csv).transpose()?;
            let source = match &table {
                Some(t) => FeatureSource::Embeddings(t),
                None => FeatureSource::Images { side: cfg.feature_side },
            };
            let seeds = with_jobs(jobs, || {
                pick_seeds(&index, class, cfg.seed_count, cfg.seed_mode, source, cfg.rng_seed)
            })??;
            let mut text = seeds.join("\n");
            text.push('\n');
            print!("{text}");
            if let Some(path) = out {
                write_file(path, &text)?;
            }
        }
        Command::Score {
            seed_image,
            candidates_dir,
            out,
            ..
        } => {
            let seed = load_image(seed_image)?;
            let seed_id = tailcurate::pipeline::image_id(seed_image);
            let candidates = load_candidates(candidates_dir)?;
            let rows = with_jobs(jobs, || score_candidates(&seed_id, &seed, &candidates, &cfg))??;
            for r in rows.iter().filter(|r| r.is_skipped()) {
                eprintln!(
                    "skipped {}: {}",
                    r.candidate_id,
                    r.skipped_reason.as_deref().unwrap_or_default()
                );
            }
            write_score_csv(&rows, out)?;
        }
        Command::Select { scores, out, .. } => {
            let mut rows = read_score_csv(scores)?;
            // Re-rank from the raw columns so the manifest weights are the
            // ones actually used.
            for r in rows.iter_mut() {
                if !r.is_skipped() && r.s_raw.is_none() && cfg.weights.w2 > 0.0 {
                    *r = tailcurate::pipeline::ScoreRow {
                        skipped_reason: Some(SKIP_SEGMENTATION.to_string()),
                        c_raw: None,
                        fid: None,
                        ..r.clone()
                    };
                }
                r.c_norm = None;
                r.s_norm = None;
                r.combined = None;
                r.rank = None;
            }
            finalize_scores(&mut rows, &cfg.weights, cfg.normalization)?;
            let manifest = select_candidates(&rows, &cfg)?;
            emit_manifest(&manifest, out)?;
            println!("{}", manifest.total_selected);
        }
        Command::Fid {
            real_embeddings,
            gen_embeddings,
            real_dir,
            gen_dir,
            ..
        } => {
            let (real, generated) = match (real_embeddings, gen_embeddings, real_dir, gen_dir) {
                (Some(r), Some(g), _, _) => (
                    EmbeddingMatrix::read_csv(r)?.rows().to_vec(),
                    EmbeddingMatrix::read_csv(g)?.rows().to_vec(),
                ),
                (_, _, Some(r), Some(g)) => (
                    dir_features(r, cfg.feature_side)?,
                    dir_features(g, cfg.feature_side)?,
                ),
                _ => anyhow::bail!(tailcurate::Error::Config("give two embedding files or two directories".into())),
            };
            let estimate = fid_between_rows(&real, &generated)?;
            println!("{:.6}", estimate.value);
        }
        Command::Segment {
            image,
            out_prefix,
            debug,
        } => {
            let img = load_image(image)?;
            let seg = segment_lesion_detailed(&img, &cfg.segmentation)?;
            let stats = spatial_stats(&seg.roi, &seg.plane)?;
            let with_suffix = |suffix: &str| {
                let mut name = out_prefix.as_os_str().to_owned();
                name.push(suffix);
                PathBuf::from(name)
            };
            seg.mask.to_plane().save_png(with_suffix(".mask.png"))?;
            seg.roi.mask.to_plane().save_png(with_suffix(".roi.png"))?;
            if *debug {
                seg.denoised.save_png(with_suffix(".denoised.png"))?;
                seg.plane.save_png(with_suffix(".channel.png"))?;
                eprintln!("threshold {}", seg.threshold);
            }
            println!(
                "{}\t{}\t{}\t{}",
                stats.x_centroid, stats.y_centroid, stats.centroid_scalar, stats.sigma
            );
        }
        Command::Run {
            seeds_dir,
            generated_dir,
            out_dir,
            ..
        } => {
            let cohorts = load_cohorts(seeds_dir, generated_dir)?;
            let output = run_pipeline(&cohorts, &cfg, jobs)?;
            std::fs::create_dir_all(out_dir).map_err(|source| tailcurate::Error::Io {
                path: out_dir.clone(),
                source,
            })?;
            write_score_csv(&output.rows, out_dir.join("scores.csv"))?;
            emit_manifest(&output.manifest, out_dir.join("manifest.json"))?;
            println!("{}", output.manifest.total_selected);
        }
    }
    Ok(())
}

fn dir_features(dir: &Path, side: usize) -> Result<Vec<Vec<f64>>> {
    tailcurate::pipeline::list_images(dir)?
        .iter()
        .map(|p| {
            let img = load_image(p)?;
            Ok(image_feature(&img, side)
                .with_context(|| format!("features of {}", p.display()))?
                .values()
                .to_vec())
        })
        .collect()
}
