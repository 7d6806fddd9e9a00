use std::path::Path;

use tailcurate::pipeline::PipelineConfig;
use tailcurate::{Error, Result};

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(base), toml::Value::Table(overlay)) => {
            for (key, value) in overlay {
                match base.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Built-in defaults overlaid with the (possibly partial) TOML file.
/// Unknown keys are rejected.
pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut value = toml::Value::try_from(PipelineConfig::default())
        .map_err(|e| Error::Invariant(format!("default config does not serialise: {e}")))?;
    merge(&mut value, file);
    value
        .try_into()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let f = write("per_seed_select = 4\n[weights]\nw1 = 0.5\n[segmentation]\npolarity = \"brighter\"\n");
        let cfg = load(Some(f.path())).unwrap();
        assert_eq!(cfg.per_seed_select, 4);
        assert_eq!((cfg.weights.w1, cfg.weights.w2), (0.5, 1.0));
        assert_eq!(cfg.seed_count, PipelineConfig::default().seed_count);
        assert_eq!(cfg.segmentation.polarity, tailcurate::segmentation::Polarity::Brighter);
    }

    #[test]
    fn unknown_key_rejected() {
        let f = write("per_seed_selct = 4\n");
        assert!(matches!(load(Some(f.path())), Err(Error::Config(_))));
    }

    #[test]
    fn no_file_means_defaults() {
        assert_eq!(load(None).unwrap(), PipelineConfig::default());
    }
}
