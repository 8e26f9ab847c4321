//! Trainable mixture density models built from a Gaussian kernel.
//!
//! A model is a set of component locations with softmax weights and one
//! shared bandwidth, fit by gradient ascent on the log-likelihood.
//! Univariate models additionally expose the CDF, quantiles, sampling,
//! and anomaly thresholds; bivariate models expose density grids.

mod model;
mod products;
mod serialize;
mod train;

pub use model::{kernel_eval, KdmModel};
pub use products::{
    write_curve_csv, write_grid_csv, AnomalyThresholds, DensityGrid, GridBounds, ThresholdMode,
};
pub use serialize::MODEL_FORMAT_VERSION;
pub use train::{
    fit, gradients, BatchSize, Gradients, InitStrategy, TrainConfig, AUTO_BATCH_ROWS,
    EARLY_STOP_WINDOW, FULL_BATCH_LIMIT,
};
