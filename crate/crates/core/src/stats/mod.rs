//! Out-of-core summary statistics.
//!
//! The pieces compose bottom-up: [`PartialSummary`] accumulates
//! mergeable moments plus a [`QuantileSketch`] over one chunk of
//! values, [`BinnedSummaries`] keys those by radial bin, and
//! [`report_from_store`] drives the whole thing over a converted
//! store to produce a [`StatsReport`]. Bins small enough to fit in
//! memory get exact quantiles on a second pass; larger bins fall back
//! to sketch estimates.

mod bins;
mod report;
mod sketch;
mod summary;

pub use bins::{group_by_bin, BinSpec, BinnedSummaries};
pub use report::{
    binned_parameter_summaries, report_from_store, BinReport, ParameterReport,
    StatsReport, EXACT_QUANTILE_LIMIT,
};
pub use sketch::{QuantileSketch, DEFAULT_SKETCH_CAPACITY};
pub use summary::{
    chunk_summary, exact_quantile, exact_summary, merge_summaries, PartialSummary,
    QuantileMethod, SummaryStats,
};
