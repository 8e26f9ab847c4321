use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::stats::exact_quantile;

use super::model::{Evaluator, KdmModel};

/// Inclusive evaluation window for a two-dimensional density grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// Density values on a regular grid. `values` is row-major with the x
/// index outermost: `values[ix * ny + iy]`.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.len() + iy]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Plain Riemann sum of the grid, node values times cell area. Close
    /// to 1 when the grid covers the mass of a density.
    pub fn riemann_sum(&self) -> f64 {
        let dx = (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64;
        let dy = (self.y[self.y.len() - 1] - self.y[0]) / (self.y.len() - 1) as f64;
        self.values.iter().sum::<f64>() * dx * dy
    }
}

/// How anomaly thresholds are derived from a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Two-sided parameter-value thresholds at the `alpha` and
    /// `1 - alpha` quantiles of the model.
    ParameterQuantile,
    /// A density floor at the `alpha` quantile of the training-point
    /// densities; points in low-density regions are anomalous
    /// regardless of which tail they sit in.
    LowDensity,
}

/// Thresholds produced by [`KdmModel::anomaly_thresholds`]. `lower` and
/// `upper` are set in parameter-quantile mode, `density_floor` in
/// low-density mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyThresholds {
    pub mode: ThresholdMode,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_floor: Option<f64>,
}

impl KdmModel {
    /// Evaluates the density of a two-dimensional model on an `nx x ny`
    /// grid.
    ///
    /// Without explicit bounds the grid covers the component bounding
    /// box padded by five component standard deviations per axis, which
    /// holds all but a vanishing fraction of the mass.
    pub fn density_grid(
        &self,
        nx: usize,
        ny: usize,
        bounds: Option<GridBounds>,
    ) -> Result<DensityGrid> {
        if self.dim != 2 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(
                "grid must have at least 2 nodes per axis".into(),
            ));
        }
        let bounds = match bounds {
            Some(b) => {
                if !(b.x.0.is_finite() && b.x.1.is_finite() && b.x.0 < b.x.1)
                    || !(b.y.0.is_finite() && b.y.1.is_finite() && b.y.0 < b.y.1)
                {
                    return Err(Error::InvalidArgument(
                        "grid bounds must be finite and ordered".into(),
                    ));
                }
                b
            }
            None => self.default_bounds(),
        };
        let x = linspace(bounds.x.0, bounds.x.1, nx);
        let y = linspace(bounds.y.0, bounds.y.1, ny);
        let eval = Evaluator::new(self);
        let values = parallel::fold_blocks(
            nx,
            |range| {
                let mut block = Vec::with_capacity(range.len() * ny);
                for ix in range {
                    for yv in &y {
                        block.push(eval.log_density(&[x[ix], *yv]).exp());
                    }
                }
                block
            },
            Vec::with_capacity(nx * ny),
            |mut acc, block| {
                acc.extend(block);
                acc
            },
        );
        Ok(DensityGrid { x, y, values })
    }

    fn default_bounds(&self) -> GridBounds {
        let pad = 5.0 * self.kernel_std();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for i in 0..self.n_components() {
            for j in 0..2 {
                let c = self.components[i * 2 + j];
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        let orig = |z: f64, j: usize| z * self.standardize_scale[j] + self.standardize_mean[j];
        GridBounds {
            x: (orig(lo[0] - pad, 0), orig(hi[0] + pad, 0)),
            y: (orig(lo[1] - pad, 1), orig(hi[1] + pad, 1)),
        }
    }

    /// Derives anomaly thresholds at miss rate `alpha`.
    ///
    /// Parameter-quantile mode flags values outside the central
    /// `1 - 2 alpha` mass of a univariate model. Low-density mode flags
    /// points whose density falls below the `alpha` quantile of the
    /// training-point densities, which requires a model that still
    /// carries them (fresh from `fit`, or after
    /// [`KdmModel::attach_train_densities`]).
    pub fn anomaly_thresholds(&self, alpha: f64, mode: ThresholdMode) -> Result<AnomalyThresholds> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be strictly between 0 and 0.5, got {alpha}"
            )));
        }
        match mode {
            ThresholdMode::ParameterQuantile => {
                let lower = self.quantile(alpha)?;
                let upper = self.quantile(1.0 - alpha)?;
                Ok(AnomalyThresholds {
                    mode,
                    alpha,
                    lower: Some(lower),
                    upper: Some(upper),
                    density_floor: None,
                })
            }
            ThresholdMode::LowDensity => {
                let densities = self.train_densities.as_ref().ok_or_else(|| {
                    Error::MissingData(
                        "low-density thresholds need training densities; fit the model in this \
                         process or call attach_train_densities with the training data"
                            .into(),
                    )
                })?;
                let mut sorted = densities.clone();
                sorted.sort_by(f64::total_cmp);
                let floor = exact_quantile(&sorted, alpha)?;
                Ok(AnomalyThresholds {
                    mode,
                    alpha,
                    lower: None,
                    upper: None,
                    density_floor: Some(floor),
                })
            }
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * step })
        .collect()
}

/// Shortest exact decimal, switching to scientific notation below
/// 1e-4 so deep-tail densities do not expand into long zero runs.
/// Both forms parse back to the identical f64.
fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `x,pdf,cdf` rows for a univariate model at the given probe
/// points. Numbers use an exact roundtrip form, so identical model and
/// probes give identical bytes.
pub fn write_curve_csv<W: Write>(model: &KdmModel, xs: &[f64], mut out: W) -> Result<()> {
    if model.dim() != 1 {
        return Err(Error::UnsupportedDimension(model.dim()));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument("no probe points given".into()));
    }
    writeln!(out, "x,pdf,cdf")?;
    for &x in xs {
        let pdf = model.log_density(&[x])?.exp();
        let cdf = model.cdf_eval(x)?;
        writeln!(out, "{x},{},{}", fmt_value(pdf), fmt_value(cdf))?;
    }
    Ok(())
}

/// Writes `x,y,density` rows for a grid, x-major to match the grid
/// layout.
pub fn write_grid_csv<W: Write>(grid: &DensityGrid, mut out: W) -> Result<()> {
    writeln!(out, "x,y,density")?;
    for (ix, x) in grid.x.iter().enumerate() {
        for (iy, y) in grid.y.iter().enumerate() {
            writeln!(out, "{x},{y},{}", fmt_value(grid.value(ix, iy)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bivariate_model() -> KdmModel {
        KdmModel::from_parts(
            2,
            vec![-1.0, 0.0, 1.0, 0.5, 0.0, -0.8],
            &[0.3, 0.4, 0.3],
            0.6,
            vec![0.0, 10.0],
            vec![1.0, 2.0],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn grid_mass_is_close_to_one() {
        let model = bivariate_model();
        let grid = model.density_grid(160, 160, None).unwrap();
        let mass = grid.riemann_sum();
        assert!((0.99..1.01).contains(&mass), "mass {mass}");
    }

    #[test]
    fn grid_respects_explicit_bounds() {
        let model = bivariate_model();
        let bounds = GridBounds {
            x: (-3.0, 3.0),
            y: (4.0, 16.0),
        };
        let grid = model.density_grid(8, 5, Some(bounds)).unwrap();
        assert_eq!(grid.x[0], -3.0);
        assert_eq!(*grid.x.last().unwrap(), 3.0);
        assert_eq!(grid.y[0], 4.0);
        assert_eq!(*grid.y.last().unwrap(), 16.0);
        assert_eq!(grid.values().len(), 40);
        assert!(grid.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn grid_rejects_univariate_models_and_bad_shapes() {
        let uni =
            KdmModel::from_parts(1, vec![0.0], &[1.0], 0.1, vec![0.0], vec![1.0], vec![]).unwrap();
        assert!(matches!(
            uni.density_grid(4, 4, None),
            Err(Error::UnsupportedDimension(1))
        ));
        let model = bivariate_model();
        assert!(model.density_grid(1, 4, None).is_err());
        assert!(model
            .density_grid(
                4,
                4,
                Some(GridBounds {
                    x: (1.0, 1.0),
                    y: (0.0, 1.0)
                })
            )
            .is_err());
    }

    #[test]
    fn quantile_thresholds_tighten_toward_the_median() {
        let model = KdmModel::from_parts(
            1,
            vec![-1.0, 1.0],
            &[0.5, 0.5],
            0.4,
            vec![0.0],
            vec![1.0],
            vec![],
        )
        .unwrap();
        let wide = model
            .anomaly_thresholds(0.01, ThresholdMode::ParameterQuantile)
            .unwrap();
        let narrow = model
            .anomaly_thresholds(0.2, ThresholdMode::ParameterQuantile)
            .unwrap();
        assert!(wide.lower.unwrap() < narrow.lower.unwrap());
        assert!(wide.upper.unwrap() > narrow.upper.unwrap());
        assert!(narrow.lower.unwrap() < narrow.upper.unwrap());

        // As alpha approaches one half both thresholds collapse onto
        // the median. The density between the modes is a few 1e-6, so
        // a 1e-9 offset in probability still moves the quantile by
        // roughly 1e-4.
        let tight = model
            .anomaly_thresholds(0.5 - 1e-9, ThresholdMode::ParameterQuantile)
            .unwrap();
        let median = model.quantile(0.5).unwrap();
        assert!(tight.lower.unwrap() <= median);
        assert!(tight.upper.unwrap() >= median);
        assert!((tight.lower.unwrap() - median).abs() < 1e-3);
        assert!((tight.upper.unwrap() - median).abs() < 1e-3);
    }

    #[test]
    fn anomaly_alpha_is_validated() {
        let model =
            KdmModel::from_parts(1, vec![0.0], &[1.0], 0.1, vec![0.0], vec![1.0], vec![]).unwrap();
        for alpha in [0.0, 0.5, 0.7, f64::NAN] {
            assert!(model
                .anomaly_thresholds(alpha, ThresholdMode::ParameterQuantile)
                .is_err());
        }
    }

    #[test]
    fn low_density_mode_needs_train_densities() {
        let model =
            KdmModel::from_parts(1, vec![0.0], &[1.0], 0.1, vec![0.0], vec![1.0], vec![]).unwrap();
        assert!(matches!(
            model.anomaly_thresholds(0.05, ThresholdMode::LowDensity),
            Err(Error::MissingData(_))
        ));

        let mut model = model;
        let data = crate::matrix::Matrix::from_column(vec![-0.1, -0.05, 0.0, 0.05, 2.0]);
        model.attach_train_densities(&data).unwrap();
        let t = model
            .anomaly_thresholds(0.25, ThresholdMode::LowDensity)
            .unwrap();
        let floor = t.density_floor.unwrap();
        // The straggler at 2.0 has by far the lowest density, so a 25%
        // floor must sit above it and below the cluster densities.
        let low = model.log_density(&[2.0]).unwrap().exp();
        let high = model.log_density(&[0.0]).unwrap().exp();
        assert!(floor > low && floor < high);
    }

    #[test]
    fn curve_csv_has_expected_shape() {
        let model =
            KdmModel::from_parts(1, vec![0.0], &[1.0], 0.2, vec![0.0], vec![1.0], vec![]).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&model, &[-0.3, 0.0, 0.3], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "x,pdf,cdf");
        let mid: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(mid[0], "0");
        // Peak density of a std-0.1 Gaussian.
        let pdf: f64 = mid[1].parse().unwrap();
        assert!((pdf - 3.989422804014327).abs() < 1e-9);
        let cdf: f64 = mid[2].parse().unwrap();
        assert!((cdf - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_csv_is_x_major(){
        let model = bivariate_model();
        let grid = model
            .density_grid(
                3,
                2,
                Some(GridBounds {
                    x: (0.0, 1.0),
                    y: (0.0, 1.0),
                }),
            )
            .unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,density");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[2].starts_with("0,1,"));
        assert!(lines[3].starts_with("0.5,0,"));
    }

    #[test]
    fn csv_values_stay_compact_and_roundtrip() {
        for v in [0.0, 1.0, 0.25, 3.2e-5, 6.2e-151, -4.1e-9, 1234.5] {
            let text = fmt_value(v);
            assert!(text.len() < 26, "{v} printed as {text}");
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} reparsed as {back}");
        }
        assert_eq!(fmt_value(0.0), "0");
        assert_eq!(fmt_value(6.2e-151), "6.2e-151");
    }
}
