use std::fs;
use std::path::{Path, PathBuf};

use kdm_helio_core::stats::BinSpec;
use kdm_helio_core::store::Store;
use kdm_helio_core::{Error, Result};

/// Marks an output directory as busy while a command writes into it.
/// The file disappears when the guard drops; a leftover lock from a
/// killed process blocks later runs until removed by hand.
pub struct OutLock {
    path: PathBuf,
}

impl OutLock {
    pub fn acquire(dir: &Path) -> Result<OutLock> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(OutLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn open_store(path: Option<&Path>) -> Result<Store> {
    let path = path.ok_or_else(|| {
        Error::InvalidArgument("a store path is required (--store or config)".into())
    })?;
    Store::open(path)
}

pub fn out_dir(path: Option<&Path>) -> Result<&Path> {
    path.ok_or_else(|| {
        Error::InvalidArgument("an output directory is required (--out or config)".into())
    })
}

/// Parses a bin spec string, falling back to the standard 0.1 AU bins.
pub fn bin_spec(text: Option<&str>) -> Result<BinSpec> {
    match text {
        Some(text) => BinSpec::parse(text),
        None => Ok(BinSpec::default_au()),
    }
}

/// Resolves a bin label like "0.2-0.3" or "0.2-0.3AU" to its index and
/// canonical label.
pub fn resolve_bin(spec: &BinSpec, text: &str) -> Result<(usize, String)> {
    let canonical = if text.ends_with("AU") {
        text.to_string()
    } else {
        format!("{text}AU")
    };
    for b in 0..spec.n_bins() {
        if spec.label(b) == canonical {
            return Ok((b, canonical));
        }
    }
    Err(Error::InvalidArgument(format!(
        "bin {text} is not one of the configured bins ({} .. {})",
        spec.label(0),
        spec.label(spec.n_bins() - 1)
    )))
}

/// File stem shared by every artifact derived from one fitted model.
pub fn model_stem(parameters: &[String], bin_label: &str) -> String {
    format!("{}_{bin_label}", parameters.join("__"))
}

pub fn write_artifact(path: &Path, content: &str, detail: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    println!("wrote {} ({detail})", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_labels_resolve_with_and_without_suffix() {
        let spec = BinSpec::default_au();
        assert_eq!(resolve_bin(&spec, "0.2-0.3").unwrap().0, 2);
        assert_eq!(resolve_bin(&spec, "0.9-1AU").unwrap().0, 9);
        assert_eq!(resolve_bin(&spec, "0.2-0.3").unwrap().1, "0.2-0.3AU");
        assert!(resolve_bin(&spec, "0.25-0.3").is_err());
    }

    #[test]
    fn model_stems_join_parameters() {
        assert_eq!(model_stem(&["vp_fit".into()], "0.2-0.3AU"), "vp_fit_0.2-0.3AU");
        assert_eq!(
            model_stem(&["vp_fit".into(), "np_fit".into()], "0.9-1AU"),
            "vp_fit__np_fit_0.9-1AU"
        );
    }

    #[test]
    fn out_lock_excludes_second_writer() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            OutLock::acquire(dir.path()),
            Err(Error::Locked(_))
        ));
        drop(lock);
        OutLock::acquire(dir.path()).unwrap();
    }
}
