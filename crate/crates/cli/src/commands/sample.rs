use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::KdmModel;
use kdm_helio_core::Result;

use crate::config::FileConfig;
use crate::util::{self, OutLock};

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Fitted model file
    #[arg(long)]
    pub model: PathBuf,

    /// Number of draws
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: SampleArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let model = KdmModel::load_json(&args.model)?;
    let stem = args
        .model
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let _lock = OutLock::acquire(&out)?;

    let draws = model.sample(args.count, args.seed)?;
    let mut csv = model.column_names().join(",");
    csv.push('\n');
    for row in draws.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                csv.push(',');
            }
            write!(csv, "{v}").expect("writing to a string cannot fail");
        }
        csv.push('\n');
    }
    util::write_artifact(
        &out.join(format!("samples_{stem}.csv")),
        &csv,
        &format!("{} draws, seed {}", args.count, args.seed),
    )
}
