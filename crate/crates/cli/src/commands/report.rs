use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::fit;
use kdm_helio_core::stats::report_from_store;
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::svg;
use crate::util::{self, OutLock};

use super::anomaly::parse_mode;
use super::curves;
use super::fit::TrainFlags;

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,

    /// Columns to analyze, comma separated (default: all parameters)
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,

    #[arg(long)]
    pub bins: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Tail mass for anomaly thresholds
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// Threshold mode: "quantile" or "low-density"
    #[arg(long, default_value = "quantile")]
    pub mode: String,

    /// Evaluation points per distribution curve
    #[arg(long, default_value_t = curves::DEFAULT_POINTS)]
    pub points: usize,

    #[arg(long)]
    pub svg: bool,

    #[command(flatten)]
    pub train: TrainFlags,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs the whole desk pipeline: binned statistics, one density model
/// per parameter and non-empty bin, distribution curves, and anomaly
/// thresholds. Bins with fewer valid rows than mixture components are
/// reported in the statistics but not modeled.
pub fn run(args: ReportArgs) -> Result<()> {
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
            "the store has no parameter columns to analyze".into(),
        ));
    }
    let spec = util::bin_spec(args.bins.as_deref().or(cfg.bins.as_deref()))?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let train = args.train.apply(cfg.train.clone().unwrap_or_default())?;
    let mode = parse_mode(&args.mode)?;
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

    for name in &params {
        let param_report = &report.parameters[name];
        if want_svg && !param_report.bins.is_empty() {
            let entries: Vec<_> = (0..spec.n_bins())
                .filter_map(|b| {
                    let label = spec.label(b);
                    param_report
                        .bins
                        .get(&label)
                        .map(|e| (label, e.stats.clone()))
                })
                .collect();
            util::write_artifact(
                &out.join(format!("boxplot_{name}.svg")),
                &svg::boxplot(name, &entries),
                &format!("{} boxes", entries.len()),
            )?;
        }

        for b in 0..spec.n_bins() {
            let label = spec.label(b);
            let count = param_report
                .bins
                .get(&label)
                .map(|e| e.stats.count)
                .unwrap_or(0);
            if count == 0 {
                println!("skipping {name} {label}: no valid rows");
                continue;
            }
            if count < train.n_components as u64 {
                println!(
                    "skipping {name} {label}: {count} rows is fewer than {} components",
                    train.n_components
                );
                continue;
            }

            let columns = vec![name.clone()];
            let data = store.collect_bin(&columns, &spec, b)?;
            let model = fit(&data, &train)?.with_column_names(columns.clone())?;
            let stem = util::model_stem(&columns, &label);
            let model_path = out.join("models").join(format!("{stem}.json"));
            if let Some(parent) = model_path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            model.save_json(&model_path)?;
            println!(
                "wrote {} ({} rows, final log-likelihood {:.6})",
                model_path.display(),
                data.rows(),
                model.final_log_likelihood().unwrap_or(f64::NAN)
            );

            curves::emit(&model, &stem, &out, args.points, None, want_svg)?;

            // Freshly fitted models carry their training-point
            // densities, so low-density mode needs no extra pass here.
            let thresholds = model.anomaly_thresholds(args.alpha, mode)?;
            let mut text = serde_json::to_string_pretty(&thresholds)?;
            text.push('\n');
            util::write_artifact(
                &out.join(format!("anomaly_{stem}.json")),
                &text,
                &format!("alpha {}", args.alpha),
            )?;
        }
    }
    Ok(())
}
