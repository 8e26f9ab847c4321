use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::{write_curve_csv, KdmModel};
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::svg;
use crate::util::{self, OutLock};

pub const DEFAULT_POINTS: usize = 257;

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Fitted model file; or give --param and --bin to find it under
    /// <out>/models
    #[arg(long)]
    pub model: Option<PathBuf>,

    #[arg(long)]
    pub param: Option<String>,

    #[arg(long)]
    pub bin: Option<String>,

    #[arg(long)]
    pub bins: Option<String>,

    /// Number of evaluation points
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    pub points: usize,

    /// Evaluation range "lo:hi" in data units (default: central 99.9%)
    #[arg(long)]
    pub range: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub svg: bool,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Finds the model file either directly or by parameter and bin under
/// the output directory's models/ folder.
pub fn locate_model(
    explicit: Option<&PathBuf>,
    out: &std::path::Path,
    param: Option<&str>,
    bin: Option<&str>,
    bins: Option<&str>,
) -> Result<PathBuf> {
    if let Some(path) = explicit {
        return Ok(path.clone());
    }
    let (Some(param), Some(bin)) = (param, bin) else {
        return Err(Error::InvalidArgument(
            "give --model, or --param and --bin to locate one".into(),
        ));
    };
    let spec = util::bin_spec(bins)?;
    let (_, label) = util::resolve_bin(&spec, bin)?;
    let stem = util::model_stem(&[param.to_string()], &label);
    Ok(out.join("models").join(format!("{stem}.json")))
}

pub fn probe_range(model: &KdmModel, range: Option<&str>) -> Result<(f64, f64)> {
    match range {
        Some(text) => {
            let parts: Vec<&str> = text.split(':').collect();
            let parsed: Option<(f64, f64)> = match parts.as_slice() {
                [lo, hi] => lo.parse().ok().zip(hi.parse().ok()),
                _ => None,
            };
            match parsed {
                Some((lo, hi)) if lo < hi => Ok((lo, hi)),
                _ => Err(Error::InvalidArgument(format!(
                    "range must be \"lo:hi\" with lo < hi, got \"{text}\""
                ))),
            }
        }
        None => Ok((model.quantile(0.0005)?, model.quantile(0.9995)?)),
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Writes the curve CSV (and SVG when asked) for an already loaded
/// model. Shared with `report`.
pub fn emit(
    model: &KdmModel,
    stem: &str,
    out: &std::path::Path,
    points: usize,
    range: Option<&str>,
    want_svg: bool,
) -> Result<()> {
    if points < 2 {
        return Err(Error::InvalidArgument(
            "curves need at least 2 evaluation points".into(),
        ));
    }
    let (lo, hi) = probe_range(model, range)?;
    let xs = linspace(lo, hi, points);
    let mut csv = Vec::new();
    write_curve_csv(model, &xs, &mut csv)?;
    let csv = String::from_utf8(csv).expect("curve rows are ASCII");
    util::write_artifact(
        &out.join(format!("curves_{stem}.csv")),
        &csv,
        &format!("{points} points in [{lo:.6}, {hi:.6}]"),
    )?;

    if want_svg {
        let pdf: Vec<f64> = xs
            .iter()
            .map(|&x| model.log_density(&[x]).map(f64::exp))
            .collect::<Result<_>>()?;
        let cdf: Vec<f64> = xs
            .iter()
            .map(|&x| model.cdf_eval(x))
            .collect::<Result<_>>()?;
        let chart = svg::curves(&model.column_names()[0], &xs, &pdf, &cdf);
        util::write_artifact(
            &out.join(format!("curves_{stem}.svg")),
            &chart,
            "pdf and cdf",
        )?;
    }
    Ok(())
}

pub fn run(args: CurvesArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let model_path = locate_model(
        args.model.as_ref(),
        &out,
        args.param.as_deref(),
        args.bin.as_deref(),
        args.bins.as_deref().or(cfg.bins.as_deref()),
    )?;
    let model = KdmModel::load_json(&model_path)?;
    let stem = model_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let want_svg = args.svg || cfg.svg.unwrap_or(false);
    let _lock = OutLock::acquire(&out)?;
    emit(&model, &stem, &out, args.points, args.range.as_deref(), want_svg)
}
