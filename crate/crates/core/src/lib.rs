//! Density modeling and chunked statistics for solar-wind time series.
//!
//! The crate has three layers:
//!
//! * [`store`] converts mission CSV exports into a chunked columnar
//!   store that streams without loading whole archives into memory.
//! * [`stats`] computes mergeable summary statistics over that store,
//!   grouped by radial-distance bin, with exact quantiles for small
//!   bins and t-digest estimates for large ones.
//! * [`kdm`] fits shared-bandwidth Gaussian mixture density models to
//!   binned measurements and evaluates densities, distribution
//!   functions, samples, and anomaly thresholds from them.
//!
//! Everything numeric is deterministic for a fixed seed, independent
//! of thread count; see [`parallel`].

pub mod error;
pub mod kdm;
pub mod mask;
pub mod matrix;
pub mod parallel;
pub mod stats;
pub mod store;

pub use error::{Error, ErrorCategory, Result};
pub use mask::ValidityMask;
pub use matrix::Matrix;
