use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::store::{convert, ConvertOptions, Store};
use kdm_helio_core::Result;

use crate::config::FileConfig;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV export with a header row; empty cells are missing values
    #[arg(long)]
    pub input: PathBuf,

    /// Store directory to create or rebuild
    #[arg(long)]
    pub store: Option<PathBuf>,

    /// Rows per chunk file
    #[arg(long)]
    pub chunk_rows: Option<u32>,

    /// Fill sentinel flagged as invalid; repeat for several
    #[arg(long = "sentinel")]
    pub sentinels: Vec<f64>,

    /// JSON run configuration; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let store_path = args.store.or(cfg.store).ok_or_else(|| {
        kdm_helio_core::Error::InvalidArgument(
            "a store path is required (--store or config)".into(),
        )
    })?;

    let mut options = ConvertOptions::default();
    if let Some(rows) = args.chunk_rows {
        options.chunk_rows = rows;
    }
    if !args.sentinels.is_empty() {
        options.default_sentinels = args.sentinels;
    }
    convert(&args.input, &store_path, &options)?;

    let store = Store::open(&store_path)?;
    let meta = store.meta();
    println!(
        "wrote {} ({} rows, {} chunks, {} columns)",
        store_path.display(),
        meta.row_count,
        store.n_chunks(),
        meta.columns.len()
    );
    Ok(())
}
