use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diversity::{
    image_feature, pairwise_distances, select_diverse_exact, select_diverse_greedy, FeatureVector,
};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::image::load_image;
use crate::pipeline::config::SeedMode;
use crate::pipeline::dataset::DatasetIndex;

/// Where seed-selection features come from.
#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a> {
    /// Built-in downsampled grayscale features of the given side length.
    Images { side: usize },
    /// Rows of an embedding table, matched by image id or file stem.
    Embeddings(&'a EmbeddingMatrix),
}

/// Picks `k` seed image ids from one class.
///
/// Members are ordered by image id before selection, so the result depends
/// only on the index contents, `mode` and `rng_seed`.
pub fn pick_seeds(
    train: &DatasetIndex,
    class_label: &str,
    k: usize,
    mode: SeedMode,
    features: FeatureSource<'_>,
    rng_seed: u64,
) -> Result<Vec<String>> {
    let members = train.class_members(class_label);
    if k == 0 {
        return Err(Error::Config("seed count must be at least 1".into()));
    }
    if members.len() < k {
        return Err(Error::ClassTooSmall {
            class: class_label.to_string(),
            available: members.len(),
            requested: k,
        });
    }
    let ids: Vec<&str> = members.iter().map(|r| r.image_id.as_str()).collect();
    let chosen: Vec<usize> = match mode {
        SeedMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rand::seq::index::sample(&mut rng, ids.len(), k).into_vec()
        }
        SeedMode::DiverseExact | SeedMode::DiverseGreedy => {
            if ids.len() == 1 {
                vec![0]
            } else {
                let feats = members
                    .iter()
                    .map(|r| match features {
                        FeatureSource::Images { side } => image_feature(&load_image(&r.path)?, side),
                        FeatureSource::Embeddings(table) => table
                            .find(&r.image_id)
                            .ok_or_else(|| Error::MissingEmbedding(r.image_id.clone()))
                            .and_then(|row| FeatureVector::new(row.to_vec())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let d = pairwise_distances(&feats)?;
                let selection = if mode == SeedMode::DiverseExact {
                    select_diverse_exact(&d, k)?
                } else {
                    select_diverse_greedy(&d, k)?
                };
                selection.indices
            }
        }
    };
    Ok(chosen.into_iter().map(|i| ids[i].to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RasterImage;
    use crate::pipeline::dataset::DatasetRecord;

    fn index_with_images(dir: &std::path::Path, shades: &[(&str, u8)]) -> DatasetIndex {
        let records = shades
            .iter()
            .map(|&(id, v)| {
                let path = dir.join(format!("{id}.png"));
                RasterImage::filled_rgb(8, 8, [v, v, v]).unwrap().save_png(&path).unwrap();
                DatasetRecord {
                    image_id: id.to_string(),
                    path,
                    class_label: "df".into(),
                }
            })
            .collect();
        DatasetIndex::from_records(records).unwrap()
    }

    #[test]
    fn diverse_exact_picks_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let index = index_with_images(dir.path(), &[("black", 0), ("mid", 128), ("white", 255)]);
        let mut seeds = pick_seeds(
            &index,
            "df",
            2,
            SeedMode::DiverseExact,
            FeatureSource::Images { side: 4 },
            0,
        )
        .unwrap();
        seeds.sort();
        assert_eq!(seeds, vec!["black", "white"]);
    }

    #[test]
    fn whole_class_and_random_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let index = index_with_images(dir.path(), &[("a", 10), ("b", 90), ("c", 200), ("d", 40)]);
        let mut all = pick_seeds(&index, "df", 4, SeedMode::DiverseGreedy, FeatureSource::Images { side: 2 }, 0)
            .unwrap();
        all.sort();
        assert_eq!(all, vec!["a", "b", "c", "d"]);
        let r1 = pick_seeds(&index, "df", 2, SeedMode::Random, FeatureSource::Images { side: 2 }, 7).unwrap();
        let r2 = pick_seeds(&index, "df", 2, SeedMode::Random, FeatureSource::Images { side: 2 }, 7).unwrap();
        assert_eq!(r1, r2);
        assert!(matches!(
            pick_seeds(&index, "df", 5, SeedMode::Random, FeatureSource::Images { side: 2 }, 0),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn embeddings_source() {
        let dir = tempfile::tempdir().unwrap();
        let index = index_with_images(dir.path(), &[("a", 0), ("b", 0), ("c", 0)]);
        let table = EmbeddingMatrix::new(
            vec!["a.jpg".into(), "b.jpg".into(), "c.jpg".into()],
            vec![vec![0.0], vec![1.0], vec![10.0]],
        )
        .unwrap();
        let seeds = pick_seeds(&index, "df", 2, SeedMode::DiverseExact, FeatureSource::Embeddings(&table), 0)
            .unwrap();
        assert_eq!(seeds, vec!["a", "c"]);
        let partial = EmbeddingMatrix::new(vec!["a".into(), "b".into()], vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            pick_seeds(&index, "df", 2, SeedMode::DiverseGreedy, FeatureSource::Embeddings(&partial), 0),
            Err(Error::MissingEmbedding(_))
        ));
    }
}
