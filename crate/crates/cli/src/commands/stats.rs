use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::stats::report_from_store;
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::svg;
use crate::util::{self, OutLock};

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,

    /// Columns to summarize, comma separated
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,

    /// Bin edges as start:stop:step (default 0:1:0.1)
    #[arg(long)]
    pub bins: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also render one boxplot SVG per parameter
    #[arg(long)]
    pub svg: bool,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: StatsArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let store = util::open_store(args.store.as_deref().or(cfg.store.as_deref()))?;
    let params = if args.params.is_empty() {
        cfg.parameters.clone()
    } else {
        args.params.clone()
    };
    let params = if params.is_empty() {
        store.parameter_names()
    } else {
        params
    };
    if params.is_empty() {
        return Err(Error::InvalidArgument(
            "the store has no parameter columns to summarize".into(),
        ));
    }
    let spec = util::bin_spec(args.bins.as_deref().or(cfg.bins.as_deref()))?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let want_svg = args.svg || cfg.svg.unwrap_or(false);
    let _lock = OutLock::acquire(&out)?;

    let report = report_from_store(&store, &params, &spec)?;
    let n_bins: usize = report.parameters.values().map(|p| p.bins.len()).sum();
    util::write_artifact(
        &out.join("stats.json"),
        &report.to_json_string()?,
        &format!("{} parameters, {} non-empty bins", params.len(), n_bins),
    )?;
    util::write_artifact(
        &out.join("stats.csv"),
        &report.to_csv_string(),
        &format!("{n_bins} rows"),
    )?;

    if want_svg {
        for (name, param) in &report.parameters {
            if param.bins.is_empty() {
                println!("skipping boxplot for {name}: no non-empty bins");
                continue;
            }
            let entries: Vec<_> = (0..spec.n_bins())
                .filter_map(|b| {
                    let label = spec.label(b);
                    param
                        .bins
                        .get(&label)
                        .map(|entry| (label, entry.stats.clone()))
                })
                .collect();
            let chart = svg::boxplot(name, &entries);
            util::write_artifact(
                &out.join(format!("boxplot_{name}.svg")),
                &chart,
                &format!("{} boxes", entries.len()),
            )?;
        }
    }
    Ok(())
}
