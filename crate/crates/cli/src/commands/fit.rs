use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::{fit, BatchSize, InitStrategy, TrainConfig};
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::util::{self, OutLock};

/// Training overrides shared by `fit` and `report`. Anything not given
/// falls back to the config file, then to built-in defaults.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Mixture components, for example 400, 800, or 1600
    #[arg(long)]
    pub components: Option<usize>,

    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,

    /// Starting kernel bandwidth in standardized units
    #[arg(long)]
    pub sigma_init: Option<f64>,

    #[arg(long)]
    pub epochs: Option<usize>,

    /// Rows per optimizer step: "auto", "full", or a row count
    #[arg(long)]
    pub batch: Option<String>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Component initialization: "subsample" or "kmeans"
    #[arg(long)]
    pub init: Option<String>,

    /// Early-stop threshold on relative log-likelihood improvement
    #[arg(long)]
    pub min_rel_improvement: Option<f64>,

    /// Fit raw values instead of z-scored ones
    #[arg(long)]
    pub no_standardize: bool,
}

impl TrainFlags {
    pub fn apply(&self, mut config: TrainConfig) -> Result<TrainConfig> {
        if let Some(m) = self.components {
            config.n_components = m;
        }
        if let Some(lr) = self.lr {
            config.learning_rate = lr;
        }
        if let Some(s) = self.sigma_init {
            config.sigma_init = s;
        }
        if let Some(e) = self.epochs {
            config.epochs = e;
        }
        if let Some(text) = &self.batch {
            config.batch_size = match text.as_str() {
                "auto" => BatchSize::Auto,
                "full" => BatchSize::Full,
                n => BatchSize::Fixed(n.parse().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "batch must be \"auto\", \"full\", or a row count, got \"{text}\""
                    ))
                })?),
            };
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(init) = &self.init {
            config.init = match init.as_str() {
                "subsample" => InitStrategy::SubsampleData,
                "kmeans" => InitStrategy::KMeansLike,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "init must be \"subsample\" or \"kmeans\", got \"{other}\""
                    )))
                }
            };
        }
        if let Some(v) = self.min_rel_improvement {
            config.min_rel_improvement = v;
        }
        if self.no_standardize {
            config.standardize = false;
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,

    /// Column to model
    #[arg(long)]
    pub param: String,

    /// Second column for a bivariate model
    #[arg(long)]
    pub param2: Option<String>,

    /// Radial bin, e.g. "0.2-0.3" or "0.2-0.3AU"
    #[arg(long)]
    pub bin: String,

    #[arg(long)]
    pub bins: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub train: TrainFlags,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: FitArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let store = util::open_store(args.store.as_deref().or(cfg.store.as_deref()))?;
    let spec = util::bin_spec(args.bins.as_deref().or(cfg.bins.as_deref()))?;
    let (bin_idx, bin_label) = util::resolve_bin(&spec, &args.bin)?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let train = args.train.apply(cfg.train.unwrap_or_default())?;

    let mut columns = vec![args.param.clone()];
    if let Some(p2) = &args.param2 {
        columns.push(p2.clone());
    }
    let data = store.collect_bin(&columns, &spec, bin_idx)?;
    if data.rows() == 0 {
        return Err(Error::EmptyBin(format!(
            "bin {bin_label} has no valid rows for {}",
            columns.join(", ")
        )));
    }

    let _lock = OutLock::acquire(&out)?;
    let model = fit(&data, &train)?.with_column_names(columns.clone())?;
    let stem = util::model_stem(&columns, &bin_label);
    let path = out.join("models").join(format!("{stem}.json"));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    model.save_json(&path)?;
    println!(
        "wrote {} ({} rows, {} components, final log-likelihood {:.6})",
        path.display(),
        data.rows(),
        model.n_components(),
        model.final_log_likelihood().unwrap_or(f64::NAN)
    );
    Ok(())
}
