use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::mask::ValidityMask;

use super::{
    ColumnMeta, StoreMeta, DEFAULT_CHUNK_ROWS, DEFAULT_FILL_SENTINEL, LOCK_FILE, META_FILE,
    RADIAL_COLUMN, SENTINEL_RELATIVE_TOLERANCE, STORE_FORMAT_VERSION,
};

/// Settings for [`convert`].
#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub chunk_rows: u32,
    /// Fill sentinels applied to every column unless overridden.
    pub default_sentinels: Vec<f64>,
    /// Per-column sentinel overrides, replacing the defaults.
    pub column_sentinels: BTreeMap<String, Vec<f64>>,
    /// Unit labels recorded in the metadata, purely descriptive.
    pub units: BTreeMap<String, String>,
}

impl Default for ConvertOptions {
    fn default() -> ConvertOptions {
        ConvertOptions {
            chunk_rows: DEFAULT_CHUNK_ROWS,
            default_sentinels: vec![DEFAULT_FILL_SENTINEL],
            column_sentinels: BTreeMap::new(),
            units: BTreeMap::new(),
        }
    }
}

/// Removes the lock file when a conversion ends, successfully or not.
/// A killed process leaves the lock behind, which keeps readers away
/// from the half-written directory until it is rebuilt.
struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

struct ColumnBuffer {
    values: Vec<f64>,
    mask: ValidityMask,
    sentinels: Vec<f64>,
}

impl ColumnBuffer {
    fn push(&mut self, value: Option<f64>) {
        match value {
            None => {
                self.values.push(f64::NAN);
                self.mask.push(false);
            }
            Some(v) => {
                let is_sentinel = self
                    .sentinels
                    .iter()
                    .any(|s| (v - s).abs() <= SENTINEL_RELATIVE_TOLERANCE * s.abs());
                self.values.push(v);
                self.mask.push(v.is_finite() && !is_sentinel);
            }
        }
    }

    fn clear(&mut self) {
        self.values.clear();
        self.mask.clear();
    }
}

/// Converts a CSV archive into a chunked columnar store directory.
///
/// The input must have a `radial_distance_au` column and at least one
/// parameter column. Empty cells, non-finite values, and fill-sentinel
/// matches become invalid positions in the chunk masks. The directory
/// is locked for the duration, any previous contents are replaced, and
/// `meta.json` appears last via an atomic rename, so a reader never
/// sees a partially written store. Converting identical input with
/// identical options reproduces the store byte for byte.
pub fn convert(input: &Path, store_path: &Path, options: &ConvertOptions) -> Result<StoreMeta> {
    if options.chunk_rows == 0 {
        return Err(Error::InvalidArgument(
            "chunk_rows must be at least 1".into(),
        ));
    }
    let input_meta = fs::metadata(input).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(format!("input file not found at {}", input.display()))
        } else {
            e.into()
        }
    })?;
    let modified: DateTime<Utc> = input_meta
        .modified()
        .map_err(Error::from)?
        .into();
    let created_utc = modified.to_rfc3339_opts(SecondsFormat::Secs, true);

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(input)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", input.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("bad CSV header: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if !headers.iter().any(|h| h == RADIAL_COLUMN) {
        return Err(Error::Schema(format!(
            "missing required column: {RADIAL_COLUMN}"
        )));
    }
    if headers.len() < 2 {
        return Err(Error::Schema(format!(
            "input needs at least one parameter column besides {RADIAL_COLUMN}"
        )));
    }
    for (i, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::Schema(format!("column {i} has an empty name")));
        }
        if headers[..i].iter().any(|o| o == h) {
            return Err(Error::Schema(format!("duplicate column name {h}")));
        }
    }

    fs::create_dir_all(store_path)?;
    let lock_path = store_path.join(LOCK_FILE);
    match fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&lock_path)
    {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            return Err(Error::Locked(store_path.to_path_buf()));
        }
        Err(e) => return Err(e.into()),
    }
    let _lock = LockGuard {
        path: lock_path.clone(),
    };

    // Clear out whatever a previous conversion left, metadata first so
    // no reader can pair old metadata with new chunks.
    let old_meta = store_path.join(META_FILE);
    if old_meta.exists() {
        fs::remove_file(&old_meta)?;
    }
    for entry in fs::read_dir(store_path)? {
        let entry = entry?;
        if entry.file_name() == LOCK_FILE {
            continue;
        }
        let path = entry.path();
        if path.is_dir() {
            fs::remove_dir_all(&path)?;
        } else {
            fs::remove_file(&path)?;
        }
    }

    let mut buffers: Vec<ColumnBuffer> = headers
        .iter()
        .map(|name| ColumnBuffer {
            values: Vec::with_capacity(options.chunk_rows as usize),
            mask: ValidityMask::new_all_invalid(0),
            sentinels: options
                .column_sentinels
                .get(name)
                .cloned()
                .unwrap_or_else(|| options.default_sentinels.clone()),
        })
        .collect();
    for name in &headers {
        fs::create_dir_all(store_path.join(name))?;
    }

    let mut row_count: u64 = 0;
    let mut chunk_index: u64 = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
                row,
                column: "-".into(),
                detail: format!("expected {expected_len} fields, got {len}"),
            },
            _ => Error::Parse {
                row,
                column: "-".into(),
                detail: e.to_string(),
            },
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: "-".into(),
                detail: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        for (j, raw) in record.iter().enumerate() {
            if raw.is_empty() {
                buffers[j].push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    detail: format!("\"{raw}\" is not a number"),
                })?;
                buffers[j].push(Some(v));
            }
        }
        row_count += 1;
        if buffers[0].values.len() as u32 == options.chunk_rows {
            write_chunk(store_path, &headers, &mut buffers, chunk_index)?;
            chunk_index += 1;
        }
    }
    if !buffers[0].values.is_empty() {
        write_chunk(store_path, &headers, &mut buffers, chunk_index)?;
    }

    let meta = StoreMeta {
        version: STORE_FORMAT_VERSION,
        row_count,
        chunk_rows: options.chunk_rows,
        created_utc,
        columns: headers
            .iter()
            .map(|name| ColumnMeta {
                name: name.clone(),
                units: options.units.get(name).cloned().unwrap_or_default(),
                fill_sentinels: options
                    .column_sentinels
                    .get(name)
                    .cloned()
                    .unwrap_or_else(|| options.default_sentinels.clone()),
            })
            .collect(),
    };
    let mut meta_text = serde_json::to_string_pretty(&meta)?;
    meta_text.push('\n');
    let tmp = store_path.join("meta.json.tmp");
    fs::write(&tmp, meta_text)?;
    fs::rename(&tmp, store_path.join(META_FILE))?;
    Ok(meta)
}

fn write_chunk(
    store_path: &Path,
    headers: &[String],
    buffers: &mut [ColumnBuffer],
    chunk_index: u64,
) -> Result<()> {
    for (name, buf) in headers.iter().zip(buffers.iter_mut()) {
        let dir = store_path.join(name);
        let mut values = BufWriter::new(fs::File::create(
            dir.join(format!("c{chunk_index}.f64")),
        )?);
        for v in &buf.values {
            values.write_all(&v.to_le_bytes())?;
        }
        values.flush()?;
        fs::write(dir.join(format!("c{chunk_index}.mask")), buf.mask.as_bytes())?;
        buf.clear();
    }
    Ok(())
}
