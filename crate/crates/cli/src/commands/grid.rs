use std::path::PathBuf;

use clap::Args;

use kdm_helio_core::kdm::{write_grid_csv, GridBounds, KdmModel};
use kdm_helio_core::{Error, Result};

use crate::config::FileConfig;
use crate::svg;
use crate::util::{self, OutLock};

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Fitted bivariate model file
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long, default_value_t = 256)]
    pub nx: usize,

    #[arg(long, default_value_t = 256)]
    pub ny: usize,

    /// Evaluation window "x0:x1:y0:y1" (default: component bounding box
    /// padded by five kernel widths)
    #[arg(long)]
    pub bounds: Option<String>,

    /// Decades below the peak shown on the heatmap color scale
    #[arg(long, default_value_t = 4.0)]
    pub decades: f64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub svg: bool,

    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_bounds(text: &str) -> Result<GridBounds> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            Error::InvalidArgument(format!("bounds must be \"x0:x1:y0:y1\", got \"{text}\""))
        })?;
    let [x0, x1, y0, y1] = parts.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "bounds must be \"x0:x1:y0:y1\", got \"{text}\""
        )));
    };
    Ok(GridBounds {
        x: (*x0, *x1),
        y: (*y0, *y1),
    })
}

pub fn run(args: GridArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = util::out_dir(args.out.as_deref().or(cfg.out.as_deref()))?.to_path_buf();
    let model = KdmModel::load_json(&args.model)?;
    let bounds = args.bounds.as_deref().map(parse_bounds).transpose()?;
    let stem = args
        .model
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let want_svg = args.svg || cfg.svg.unwrap_or(false);
    let _lock = OutLock::acquire(&out)?;

    let grid = model.density_grid(args.nx, args.ny, bounds)?;
    let mut csv = Vec::new();
    write_grid_csv(&grid, &mut csv)?;
    let csv = String::from_utf8(csv).expect("grid rows are ASCII");
    util::write_artifact(
        &out.join(format!("grid_{stem}.csv")),
        &csv,
        &format!("{}x{} nodes, mass {:.4}", grid.nx(), grid.ny(), grid.riemann_sum()),
    )?;

    if want_svg {
        let names = model.column_names();
        let chart = svg::heatmap(&names[0], &names[1], &grid, args.decades);
        util::write_artifact(
            &out.join(format!("grid_{stem}.svg")),
            &chart,
            &format!("{}x{} cells", grid.nx(), grid.ny()),
        )?;
    }
    Ok(())
}
