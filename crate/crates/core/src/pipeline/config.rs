use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{BcForm, Weights};
use crate::segmentation::SegmentationConfig;

/// How candidates are ranked for selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    /// Lowest weighted content/spatial score.
    #[default]
    ContentSpace,
    /// Lowest Fréchet distance to the seed.
    FidBottom,
    /// Highest Fréchet distance to the seed.
    FidTop,
    /// Seeded uniform sample.
    Random,
}

impl MetricMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricMode::ContentSpace => "content-space",
            MetricMode::FidBottom => "fid-bottom",
            MetricMode::FidTop => "fid-top",
            MetricMode::Random => "random",
        }
    }
}

impl std::str::FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "content-space" => Ok(MetricMode::ContentSpace),
            "fid-bottom" => Ok(MetricMode::FidBottom),
            "fid-top" => Ok(MetricMode::FidTop),
            "random" => Ok(MetricMode::Random),
            other => Err(Error::Config(format!("unknown metric mode `{other}`"))),
        }
    }
}

/// Scope of the min-max normalisation applied to score columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationCohort {
    #[default]
    PerSeed,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    DiverseExact,
    #[default]
    DiverseGreedy,
    Random,
}

impl std::str::FromStr for SeedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diverse-exact" => Ok(SeedMode::DiverseExact),
            "diverse-greedy" => Ok(SeedMode::DiverseGreedy),
            "random" => Ok(SeedMode::Random),
            other => Err(Error::Config(format!("unknown seed mode `{other}`"))),
        }
    }
}

/// Name recorded in manifests for the per-candidate Fréchet estimator.
pub const FID_ESTIMATOR: &str = "patch16";

/// Fully resolved run configuration. Field order is part of the
/// fingerprint, so do not reorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed_count: usize,
    pub seed_mode: SeedMode,
    pub per_seed_select: usize,
    pub weights: Weights,
    pub metric_mode: MetricMode,
    pub segmentation: SegmentationConfig,
    pub normalization: NormalizationCohort,
    pub bc_form: BcForm,
    pub feature_side: usize,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed_count: 10,
            seed_mode: SeedMode::default(),
            per_seed_select: 10,
            weights: Weights::default(),
            metric_mode: MetricMode::default(),
            segmentation: SegmentationConfig::default(),
            normalization: NormalizationCohort::default(),
            bc_form: BcForm::default(),
            feature_side: 32,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.seed_count == 0 {
            return Err(Error::Config("seed_count must be at least 1".into()));
        }
        if self.per_seed_select == 0 {
            return Err(Error::Config("per_seed_select must be at least 1".into()));
        }
        if self.feature_side == 0 {
            return Err(Error::Config("feature_side must be at least 1".into()));
        }
        if self.segmentation.denoise.interpolation_factor == 0 {
            return Err(Error::Config("interpolation_factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical JSON form used for fingerprinting and echoing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
