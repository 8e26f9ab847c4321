//! Chunked columnar store for solar-wind time series.
//!
//! A store is a directory: `meta.json` describes the columns and row
//! count, and each column keeps its values in fixed-size chunks of
//! little-endian `f64` (`<column>/c<k>.f64`) with a packed validity
//! bitmap alongside (`<column>/c<k>.mask`, LSB first, 1 = valid).
//! `meta.json` is written last and atomically, so a directory with
//! chunk files but no metadata is an aborted write and is rejected.

mod convert;

pub use convert::{convert, ConvertOptions};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ValidityMask;
use crate::matrix::Matrix;
use crate::stats::BinSpec;

/// Column every store must have: heliocentric distance in AU, used to
/// route rows into radial bins.
pub const RADIAL_COLUMN: &str = "radial_distance_au";

pub const DEFAULT_CHUNK_ROWS: u32 = 1_048_576;

/// Fill value most instrument archives use for missing samples.
pub const DEFAULT_FILL_SENTINEL: f64 = -1.0e31;

/// A value within this relative distance of a fill sentinel is treated
/// as that sentinel.
pub const SENTINEL_RELATIVE_TOLERANCE: f64 = 1e-6;

pub const STORE_FORMAT_VERSION: u32 = 1;

pub(crate) const META_FILE: &str = "meta.json";
pub(crate) const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(default)]
    pub units: String,
    pub fill_sentinels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub version: u32,
    pub row_count: u64,
    pub chunk_rows: u32,
    /// Modification time of the source file the store was converted
    /// from, RFC 3339. Derived from the input rather than the wall
    /// clock so re-converting unchanged data reproduces the store byte
    /// for byte.
    pub created_utc: String,
    pub columns: Vec<ColumnMeta>,
}

/// Read handle on a converted store.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    meta: StoreMeta,
}

/// Row accounting from one streaming pass: rows handed to the callback,
/// rows whose radius fell outside the bins, and rows dropped because a
/// requested value was invalid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamTallies {
    pub yielded: u64,
    pub rejected: u64,
    pub invalid: u64,
}

impl Store {
    /// Opens a store directory, verifying the metadata and that every
    /// chunk file exists with the exact expected size.
    pub fn open(path: &Path) -> Result<Store> {
        let root = path.to_path_buf();
        if root.join(LOCK_FILE).exists() {
            return Err(Error::Locked(root));
        }
        let meta_text = match fs::read_to_string(root.join(META_FILE)) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingData(format!(
                    "store at {} has no {}; conversion never completed",
                    root.display(),
                    META_FILE
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let meta: StoreMeta = serde_json::from_str(&meta_text)?;
        if meta.version != STORE_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported store version {}, this build reads version {}",
                meta.version, STORE_FORMAT_VERSION
            )));
        }
        if meta.chunk_rows == 0 {
            return Err(Error::Schema("store chunk_rows must be positive".into()));
        }
        if meta.columns.is_empty() {
            return Err(Error::Schema("store has no columns".into()));
        }
        for (i, c) in meta.columns.iter().enumerate() {
            if meta.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column name {}", c.name)));
            }
        }
        let store = Store { root, meta };
        for column in &store.meta.columns {
            for k in 0..store.n_chunks() {
                let len = store.chunk_len(k);
                store.check_file(&store.value_path(&column.name, k), len as u64 * 8)?;
                store.check_file(&store.mask_path(&column.name, k), len.div_ceil(8) as u64)?;
            }
        }
        Ok(store)
    }

    fn check_file(&self, path: &Path, expected: u64) -> Result<()> {
        match fs::metadata(path) {
            Ok(m) if m.len() == expected => Ok(()),
            Ok(m) => Err(Error::Schema(format!(
                "chunk file {} has {} bytes, expected {}",
                path.display(),
                m.len(),
                expected
            ))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingData(
                format!("chunk file {} is missing", path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn n_chunks(&self) -> u64 {
        self.meta.row_count.div_ceil(self.meta.chunk_rows as u64)
    }

    /// Rows in chunk `k`; all chunks are full except possibly the last.
    pub fn chunk_len(&self, k: u64) -> usize {
        let start = k * self.meta.chunk_rows as u64;
        (self.meta.row_count - start).min(self.meta.chunk_rows as u64) as usize
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.meta.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&ColumnMeta> {
        self.meta
            .columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::NotFound(format!("column {name} not found in store")))
    }

    /// Parameter columns, i.e. everything but the radial distance.
    pub fn parameter_names(&self) -> Vec<String> {
        self.meta
            .columns
            .iter()
            .filter(|c| c.name != RADIAL_COLUMN)
            .map(|c| c.name.clone())
            .collect()
    }

    fn value_path(&self, column: &str, k: u64) -> PathBuf {
        self.root.join(column).join(format!("c{k}.f64"))
    }

    fn mask_path(&self, column: &str, k: u64) -> PathBuf {
        self.root.join(column).join(format!("c{k}.mask"))
    }

    /// Reads one chunk of one column. Invalid positions are quiet NaN
    /// in the returned values no matter what bytes are stored; the mask
    /// is returned alongside.
    pub fn read_column(&self, name: &str, k: u64) -> Result<(Vec<f64>, ValidityMask)> {
        self.column(name)?;
        if k >= self.n_chunks() {
            return Err(Error::NotFound(format!(
                "chunk {k} of column {name} is out of range, store has {} chunks",
                self.n_chunks()
            )));
        }
        let len = self.chunk_len(k);
        let value_path = self.value_path(name, k);
        let bytes = fs::read(&value_path)?;
        if bytes.len() != len * 8 {
            return Err(Error::Schema(format!(
                "chunk file {} has {} bytes, expected {}",
                value_path.display(),
                bytes.len(),
                len * 8
            )));
        }
        let mut values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let mask_bytes = fs::read(self.mask_path(name, k))?;
        let mask = ValidityMask::from_bytes(mask_bytes, len)
            .map_err(|e| Error::Schema(format!("bad mask for column {name} chunk {k}: {e}")))?;
        for (i, v) in values.iter_mut().enumerate() {
            if !mask.get(i) {
                *v = f64::NAN;
            }
        }
        Ok((values, mask))
    }

    /// Streams rows of the requested columns through `row_fn` as
    /// `(bin index, values)`, chunk by chunk in order.
    ///
    /// A row is rejected when its radius does not map to a bin
    /// (including an invalid radius) and dropped as invalid when any
    /// requested value is invalid; only clean rows reach the callback.
    pub fn stream_binned<F>(
        &self,
        columns: &[String],
        spec: &BinSpec,
        mut row_fn: F,
    ) -> Result<StreamTallies>
    where
        F: FnMut(usize, &[f64]),
    {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("no columns requested".into()));
        }
        for name in columns {
            self.column(name)?;
        }
        let mut tallies = StreamTallies::default();
        let mut row = vec![0.0f64; columns.len()];
        for k in 0..self.n_chunks() {
            let (radius, _) = self.read_column(RADIAL_COLUMN, k)?;
            let mut chunk_columns = Vec::with_capacity(columns.len());
            for name in columns {
                chunk_columns.push(self.read_column(name, k)?.0);
            }
            for i in 0..radius.len() {
                let Some(bin) = spec.index_of(radius[i]) else {
                    tallies.rejected += 1;
                    continue;
                };
                let mut ok = true;
                for (j, col) in chunk_columns.iter().enumerate() {
                    let v = col[i];
                    if v.is_finite() {
                        row[j] = v;
                    } else {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    row_fn(bin, &row);
                    tallies.yielded += 1;
                } else {
                    tallies.invalid += 1;
                }
            }
        }
        Ok(tallies)
    }

    /// Gathers all clean rows of one bin into a matrix, columns in the
    /// requested order.
    pub fn collect_bin(&self, columns: &[String], spec: &BinSpec, bin: usize) -> Result<Matrix> {
        if bin >= spec.n_bins() {
            return Err(Error::InvalidArgument(format!(
                "bin index {bin} out of range, spec has {} bins",
                spec.n_bins()
            )));
        }
        let mut data = Vec::new();
        let mut rows = 0usize;
        self.stream_binned(columns, spec, |b, values| {
            if b == bin {
                data.extend_from_slice(values);
                rows += 1;
            }
        })?;
        Matrix::from_flat(rows, columns.len(), data)
    }
}
