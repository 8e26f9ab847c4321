use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::{KdmModel, ThresholdMode};
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::util::{self, OutLock};

#[derive(Debug, Args)]
pub struct AnomalyArgs {
    /// Fitted model file
    #[arg(long)]
    pub model: PathBuf,

    /// Tail mass treated as anomalous
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// "quantile" for two-sided value thresholds, "low-density" for a
    /// density floor
    #[arg(long, default_value = "quantile")]
    pub mode: String,

    /// Store the model was fitted from; required by low-density mode to
    /// recompute training-point densities
    #[arg(long)]
    pub store: Option<PathBuf>,

    /// Radial bin the model was fitted on, for low-density mode
    #[arg(long)]
    pub bin: Option<String>,

    #[arg(long)]
    pub bins: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_mode(text: &str) -> Result<ThresholdMode> {
    match text {
        "quantile" => Ok(ThresholdMode::ParameterQuantile),
        "low-density" | "low_density" => Ok(ThresholdMode::LowDensity),
        other => Err(Error::InvalidArgument(format!(
            "mode must be \"quantile\" or \"low-density\", got \"{other}\""
        ))),
    }
}

pub fn run(args: AnomalyArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let mut model = KdmModel::load_json(&args.model)?;
    let mode = parse_mode(&args.mode)?;
    let stem = args
        .model
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();

    if mode == ThresholdMode::LowDensity {
        // The model file does not carry training-point densities, so
        // re-read the rows the model was fitted on and evaluate them.
        let store = util::open_store(args.store.as_deref().or(cfg.store.as_deref()))
            .map_err(|_| {
                Error::MissingData(
                    "low-density mode needs --store and --bin to recompute \
                     training-point densities"
                        .into(),
                )
            })?;
        let bin = args.bin.as_deref().ok_or_else(|| {
            Error::MissingData(
                "low-density mode needs --bin to recompute training-point densities".into(),
            )
        })?;
        let spec = util::bin_spec(args.bins.as_deref().or(cfg.bins.as_deref()))?;
        let (bin_idx, _) = util::resolve_bin(&spec, bin)?;
        let data = store.collect_bin(model.column_names(), &spec, bin_idx)?;
        model.attach_train_densities(&data)?;
    }

    let thresholds = model.anomaly_thresholds(args.alpha, mode)?;
    let mut text = serde_json::to_string_pretty(&thresholds)?;
    text.push('\n');
    let _lock = OutLock::acquire(&out)?;
    util::write_artifact(
        &out.join(format!("anomaly_{stem}.json")),
        &text,
        &format!("alpha {}", args.alpha),
    )
}
