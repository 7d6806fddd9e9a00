mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailcurate::pipeline::{MetricMode, SeedMode};
use tailcurate::ErrorKind;

/// Seed selection, scoring and curation of generated images for
/// long-tailed image datasets.
#[derive(Debug, Parser)]
#[command(name = "tailcurate", version)]
struct Cli {
    /// TOML file with pipeline settings; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every randomised step [default: 0, or the config file value]
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for scoring; 0 uses all available cores.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct WeightArgs {
    /// Content weight [default: config value]
    #[arg(long)]
    w1: Option<f64>,
    /// Spatial weight [default: config value]
    #[arg(long)]
    w2: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the class distribution of a metadata file, largest class first.
    Stats {
        #[arg(long, value_name = "CSV")]
        metadata: PathBuf,
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
    },
    /// Pick diverse seed images from one class.
    Seeds {
        #[arg(long, value_name = "CSV")]
        metadata: PathBuf,
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
        /// Class label, e.g. `df`.
        #[arg(long)]
        class: String,
        /// Number of seeds [default: config seed_count]
        #[arg(long)]
        k: Option<usize>,
        /// diverse-exact, diverse-greedy or random [default: config seed_mode]
        #[arg(long)]
        mode: Option<SeedMode>,
        /// Embedding CSV (`filename,v1..vd`) used instead of built-in image features.
        #[arg(long, value_name = "CSV")]
        embeddings: Option<PathBuf>,
        /// Side of the built-in grayscale feature grid [default: config feature_side]
        #[arg(long)]
        feature_side: Option<usize>,
        /// Hold out this many images per class before picking seeds.
        #[arg(long, value_name = "N")]
        holdout: Option<usize>,
        /// Also write the ids to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score every candidate in a directory against one seed image.
    Score {
        #[arg(long, value_name = "IMAGE")]
        seed_image: PathBuf,
        #[arg(long, value_name = "DIR")]
        candidates_dir: PathBuf,
        #[command(flatten)]
        weights: WeightArgs,
        /// Score CSV to write.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Select candidates per seed from a score CSV and write a manifest.
    Select {
        /// Score CSV written by `score` or `run`.
        #[arg(long, value_name = "CSV")]
        scores: PathBuf,
        /// content-space, fid-bottom, fid-top or random [default: config metric_mode]
        #[arg(long)]
        mode: Option<MetricMode>,
        /// Candidates per seed [default: config per_seed_select]
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        weights: WeightArgs,
        /// Manifest JSON to write.
        #[arg(long, value_name = "JSON")]
        out: PathBuf,
    },
    /// Fréchet distance between two embedding sets or two image directories.
    Fid {
        #[arg(long, value_name = "CSV", requires = "gen_embeddings", conflicts_with_all = ["real_dir", "gen_dir"])]
        real_embeddings: Option<PathBuf>,
        #[arg(long, value_name = "CSV", requires = "real_embeddings")]
        gen_embeddings: Option<PathBuf>,
        #[arg(long, value_name = "DIR", requires = "gen_dir", required_unless_present = "real_embeddings")]
        real_dir: Option<PathBuf>,
        #[arg(long, value_name = "DIR", requires = "real_dir")]
        gen_dir: Option<PathBuf>,
        /// Side of the built-in grayscale feature grid [default: config feature_side]
        #[arg(long)]
        feature_side: Option<usize>,
    },
    /// Segment one image and print `centroid_x centroid_y centroid sigma`.
    Segment {
        #[arg(long, value_name = "IMAGE")]
        image: PathBuf,
        /// Outputs go to `<prefix>.mask.png` and `<prefix>.roi.png`.
        #[arg(long, value_name = "PREFIX")]
        out_prefix: PathBuf,
        /// Also write the denoised image and the thresholded channel.
        #[arg(long)]
        debug: bool,
    },
    /// Score and select over `seeds-dir/<id>.png` and `generated-dir/<id>/*`.
    Run {
        #[arg(long, value_name = "DIR")]
        seeds_dir: PathBuf,
        #[arg(long, value_name = "DIR")]
        generated_dir: PathBuf,
        /// content-space, fid-bottom, fid-top or random [default: config metric_mode]
        #[arg(long)]
        mode: Option<MetricMode>,
        /// Candidates per seed [default: config per_seed_select]
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        weights: WeightArgs,
        /// Receives `scores.csv` and `manifest.json`.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<tailcurate::Error>().map(tailcurate::Error::kind) {
        Some(ErrorKind::Input) => 2,
        Some(ErrorKind::Domain) => 3,
        Some(ErrorKind::Internal) | None => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
