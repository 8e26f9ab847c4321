use std::path::{Path, PathBuf};

use serde::Deserialize;

use kdm_helio_core::kdm::TrainConfig;
use kdm_helio_core::{Error, Result};

/// Optional JSON run configuration. Every field has a matching command
/// flag, and flags win over the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub parameters: Vec<String>,
    /// Bin edges as "start:stop:step", e.g. "0:1:0.1".
    pub bins: Option<String>,
    pub svg: Option<bool>,
    pub train: Option<TrainConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::NotFound(format!("config not found at {}", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("invalid config {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_path_gives_defaults() {
        let cfg = FileConfig::load(None).unwrap();
        assert!(cfg.store.is_none());
        assert!(cfg.parameters.is_empty());
    }

    #[test]
    fn partial_train_section_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"store": "/data/store", "train": {"n_components": 800}}"#,
        )
        .unwrap();
        let cfg = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.store.as_deref(), Some(Path::new("/data/store")));
        let train = cfg.train.unwrap();
        assert_eq!(train.n_components, 800);
        assert_eq!(train.epochs, TrainConfig::default().epochs);
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"stroe": "/data/store"}"#).unwrap();
        assert!(matches!(
            FileConfig::load(Some(&path)),
            Err(Error::Schema(_))
        ));
    }
}
