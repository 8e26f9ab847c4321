use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Store, RADIAL_COLUMN};

use super::bins::{group_by_bin, BinSpec, BinnedSummaries};
use super::summary::{exact_summary, QuantileMethod, SummaryStats};

/// Largest bin that is re-read into memory for exact quantiles; bigger
/// bins report sketch quantiles.
pub const EXACT_QUANTILE_LIMIT: u64 = 10_000_000;

/// Statistics for one non-empty bin, plus the invalid-value tally for
/// that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    #[serde(flatten)]
    pub stats: SummaryStats,
    pub invalid: u64,
}

/// All bins of one parameter. `rejected` counts rows whose radius fell
/// outside the bins; `invalid` totals invalid values across all bins,
/// including bins that were empty of valid values and therefore have no
/// entry in `bins`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub bins: BTreeMap<String, BinReport>,
    pub rejected: u64,
    pub invalid: u64,
}

/// Binned summary statistics for a set of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub parameters: BTreeMap<String, ParameterReport>,
}

impl StatsReport {
    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<StatsReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat table with one row per (parameter, bin).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "parameter,bin,count,invalid,min,max,mean,std,q1,median,q3,whisker_low,whisker_high,n_outliers,quantile_method\n",
        );
        for (parameter, report) in &self.parameters {
            for (bin, entry) in &report.bins {
                let s = &entry.stats;
                let method = match s.quantile_method {
                    QuantileMethod::Exact => "exact",
                    QuantileMethod::Sketch => "sketch",
                };
                writeln!(
                    out,
                    "{parameter},{bin},{},{},{},{},{},{},{},{},{},{},{},{},{method}",
                    s.count,
                    entry.invalid,
                    s.min,
                    s.max,
                    s.mean,
                    s.std,
                    s.q1,
                    s.median,
                    s.q3,
                    s.whisker_low,
                    s.whisker_high,
                    s.n_outliers
                )
                .expect("writing to a string cannot fail");
            }
        }
        out
    }
}

/// Builds per-bin summaries for one parameter by streaming the store
/// chunk by chunk and merging the per-chunk summaries in chunk order.
pub fn binned_parameter_summaries(
    store: &Store,
    parameter: &str,
    spec: &BinSpec,
) -> Result<BinnedSummaries> {
    store.column(parameter)?;
    let mut totals = BinnedSummaries::new(spec);
    for k in 0..store.n_chunks() {
        let (radius, _) = store.read_column(RADIAL_COLUMN, k)?;
        let (values, _) = store.read_column(parameter, k)?;
        let chunk = group_by_bin(radius.into_iter().zip(values), spec);
        totals.merge_from(&chunk);
    }
    Ok(totals)
}

/// What the second pass over a parameter has to do for one bin.
enum SecondPass {
    Skip,
    /// Small bin: gather the values for exact statistics.
    Collect(Vec<f64>),
    /// Large bin: count values outside the precomputed whiskers.
    CountOutliers { low: f64, high: f64, outliers: u64 },
}

/// Builds the full report for the given parameters.
///
/// Each parameter takes two passes over the store: one to accumulate
/// mergeable summaries, and one that either gathers small bins in
/// memory for exact quantiles (at most [`EXACT_QUANTILE_LIMIT`] values)
/// or counts whisker outliers for large bins. Bins with no valid
/// values get no entry, though their invalid values still count toward
/// the parameter's `invalid` total.
pub fn report_from_store(
    store: &Store,
    parameters: &[String],
    spec: &BinSpec,
) -> Result<StatsReport> {
    let mut out = BTreeMap::new();
    for name in parameters {
        if out.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "parameter {name} requested twice"
            )));
        }
        let binned = binned_parameter_summaries(store, name, spec)?;
        let mut passes: Vec<SecondPass> = binned
            .summaries
            .iter()
            .map(|partial| {
                if partial.count() == 0 {
                    SecondPass::Skip
                } else if partial.count() <= EXACT_QUANTILE_LIMIT {
                    SecondPass::Collect(Vec::with_capacity(partial.count() as usize))
                } else {
                    let (low, high) = partial.tukey_fences().unwrap();
                    SecondPass::CountOutliers {
                        low,
                        high,
                        outliers: 0,
                    }
                }
            })
            .collect();

        for k in 0..store.n_chunks() {
            let (radius, _) = store.read_column(RADIAL_COLUMN, k)?;
            let (values, _) = store.read_column(name, k)?;
            for (r, v) in radius.into_iter().zip(values) {
                let Some(b) = spec.index_of(r) else { continue };
                match &mut passes[b] {
                    SecondPass::Skip => {}
                    SecondPass::Collect(values) => {
                        if v.is_finite() {
                            values.push(v);
                        }
                    }
                    SecondPass::CountOutliers {
                        low,
                        high,
                        outliers,
                    } => {
                        if v < *low || v > *high {
                            *outliers += 1;
                        }
                    }
                }
            }
        }

        let mut bins = BTreeMap::new();
        let mut invalid_total = 0;
        for (b, pass) in passes.into_iter().enumerate() {
            let partial = &binned.summaries[b];
            invalid_total += partial.invalid();
            let stats = match pass {
                SecondPass::Skip => continue,
                SecondPass::Collect(values) => exact_summary(&values)?,
                SecondPass::CountOutliers { outliers, .. } => {
                    partial.finalize(|_, _| outliers)?
                }
            };
            bins.insert(
                spec.label(b),
                BinReport {
                    stats,
                    invalid: partial.invalid(),
                },
            );
        }
        out.insert(
            name.clone(),
            ParameterReport {
                bins,
                rejected: binned.rejected,
                invalid: invalid_total,
            },
        );
    }
    Ok(StatsReport { parameters: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{convert, ConvertOptions};

    fn build_store(dir: &std::path::Path, chunk_rows: u32) -> Store {
        let mut text = String::from("radial_distance_au,vp_fit\n");
        // 40 rows in bin 2, values 1..=40; 10 rows in bin 5, values
        // 101..=110; a few rejects and invalids.
        for i in 1..=40 {
            writeln!(text, "0.25,{i}").unwrap();
        }
        for i in 101..=110 {
            writeln!(text, "0.55,{i}").unwrap();
        }
        text.push_str("1.75,7\n");
        text.push_str("0.25,\n");
        text.push_str("0.85,-1.0e31\n");
        let input = dir.join("in.csv");
        std::fs::write(&input, text).unwrap();
        let store_dir = dir.join("store");
        let options = ConvertOptions {
            chunk_rows,
            ..ConvertOptions::default()
        };
        convert(&input, &store_dir, &options).unwrap();
        Store::open(&store_dir).unwrap()
    }

    #[test]
    fn report_has_exact_stats_for_small_bins() {
        let dir = tempfile::tempdir().unwrap();
        let store = build_store(dir.path(), 7);
        let spec = BinSpec::default_au();
        let report =
            report_from_store(&store, &["vp_fit".to_string()], &spec).unwrap();
        let param = &report.parameters["vp_fit"];
        assert_eq!(param.rejected, 1);
        assert_eq!(param.invalid, 2);

        let bin2 = &param.bins["0.2-0.3AU"];
        assert_eq!(bin2.stats.count, 40);
        assert_eq!(bin2.stats.min, 1.0);
        assert_eq!(bin2.stats.max, 40.0);
        assert_eq!(bin2.stats.mean, 20.5);
        assert_eq!(bin2.stats.median, 20.5);
        assert_eq!(bin2.stats.quantile_method, QuantileMethod::Exact);
        assert_eq!(bin2.invalid, 1);

        let bin5 = &param.bins["0.5-0.6AU"];
        assert_eq!(bin5.stats.count, 10);
        assert_eq!(bin5.stats.median, 105.5);

        // The all-invalid bin has no entry but its tally is in the
        // parameter total.
        assert!(!param.bins.contains_key("0.8-0.9AU"));
        assert_eq!(param.bins.len(), 2);
    }

    #[test]
    fn report_is_independent_of_chunking() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let spec = BinSpec::default_au();
        let a = report_from_store(
            &build_store(dir_a.path(), 3),
            &["vp_fit".to_string()],
            &spec,
        )
        .unwrap();
        let b = report_from_store(
            &build_store(dir_b.path(), 1000),
            &["vp_fit".to_string()],
            &spec,
        )
        .unwrap();
        assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
    }

    #[test]
    fn csv_table_lists_each_bin() {
        let dir = tempfile::tempdir().unwrap();
        let store = build_store(dir.path(), 7);
        let spec = BinSpec::default_au();
        let report =
            report_from_store(&store, &["vp_fit".to_string()], &spec).unwrap();
        let csv = report.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("parameter,bin,count,invalid,min,max,mean"));
        assert!(lines[1].starts_with("vp_fit,0.2-0.3AU,40,1,1,40,20.5,"));
        assert!(lines[1].ends_with(",exact"));
        assert!(lines[2].starts_with("vp_fit,0.5-0.6AU,10,"));
    }

    #[test]
    fn json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = build_store(dir.path(), 7);
        let spec = BinSpec::default_au();
        let report =
            report_from_store(&store, &["vp_fit".to_string()], &spec).unwrap();
        let text = report.to_json_string().unwrap();
        let back = StatsReport::from_json_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn unknown_parameter_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = build_store(dir.path(), 7);
        let spec = BinSpec::default_au();
        assert!(matches!(
            report_from_store(&store, &["wp_fit".to_string()], &spec),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn duplicate_parameter_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = build_store(dir.path(), 7);
        let spec = BinSpec::default_au();
        assert!(matches!(
            report_from_store(
                &store,
                &["vp_fit".to_string(), "vp_fit".to_string()],
                &spec
            ),
            Err(Error::InvalidArgument(_))
        ));
    }
}
