use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ValidityMask;

use super::sketch::QuantileSketch;

/// How the quantile fields of a [`SummaryStats`] were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileMethod {
    /// Sorted in memory, R-7 interpolation.
    Exact,
    /// Estimated from the mergeable sketch.
    Sketch,
}

/// Mergeable running summary of one value stream: exact count, extrema,
/// mean and squared deviations (Welford), a quantile sketch, and a tally
/// of invalid values that were offered but excluded.
#[derive(Debug, Clone)]
pub struct PartialSummary {
    count: u64,
    invalid: u64,
    min: f64,
    max: f64,
    mean: f64,
    m2: f64,
    sketch: QuantileSketch,
}

impl Default for PartialSummary {
    fn default() -> PartialSummary {
        PartialSummary::new()
    }
}

impl PartialSummary {
    pub fn new() -> PartialSummary {
        PartialSummary {
            count: 0,
            invalid: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            m2: 0.0,
            sketch: QuantileSketch::default(),
        }
    }

    /// Adds one value; non-finite values go to the invalid tally.
    pub fn add(&mut self, value: f64) {
        if !value.is_finite() {
            self.invalid += 1;
            return;
        }
        self.count += 1;
        if value < self.min {
            self.min = value;
        }
        if value > self.max {
            self.max = value;
        }
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
        self.sketch.add(value);
    }

    pub fn add_invalid(&mut self) {
        self.invalid += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn invalid(&self) -> u64 {
        self.invalid
    }

    pub fn min(&self) -> Option<f64> {
        (self.count > 0).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Sample standard deviation; zero for a single value.
    pub fn std(&self) -> Option<f64> {
        match self.count {
            0 => None,
            1 => Some(0.0),
            n => Some((self.m2.max(0.0) / (n - 1) as f64).sqrt()),
        }
    }

    /// Absorbs another summary. Merging is associative and commutative
    /// up to floating-point rounding, so any chunking of a stream gives
    /// the same result to high precision.
    pub fn merge_from(&mut self, other: &PartialSummary) {
        self.invalid += other.invalid;
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.min = other.min;
            self.max = other.max;
            self.mean = other.mean;
            self.m2 = other.m2;
            self.sketch = other.sketch.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let total = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * (nb / total);
        self.m2 += other.m2 + delta * delta * (na * nb / total);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.count += other.count;
        self.sketch.merge_from(&other.sketch);
    }

    /// Sketch-estimated quartiles, forced monotone. `None` when empty.
    fn quartiles(&self) -> Option<(f64, f64, f64)> {
        if self.count == 0 {
            return None;
        }
        let q1 = self.sketch.quantile(0.25).unwrap();
        let median = self.sketch.quantile(0.5).unwrap().max(q1);
        let q3 = self.sketch.quantile(0.75).unwrap().max(median);
        Some((q1, median, q3))
    }

    /// Tukey fences at `1.5 IQR` from the sketch quartiles, clamped to
    /// the observed range. These are the whiskers `finalize` reports.
    /// `None` when empty.
    pub fn tukey_fences(&self) -> Option<(f64, f64)> {
        let (q1, _, q3) = self.quartiles()?;
        let iqr = q3 - q1;
        let low = (q1 - 1.5 * iqr).max(self.min);
        let high = (q3 + 1.5 * iqr).min(self.max);
        Some((low, high))
    }

    /// Closes the summary into reportable statistics.
    ///
    /// Quantiles come from the sketch. The whiskers are the Tukey
    /// fences at `1.5 IQR`, clamped to the observed range;
    /// `count_outside(low, high)` must report how many of the
    /// summarized values fall strictly outside them, which takes a
    /// second pass over data this summary no longer holds.
    pub fn finalize<F>(&self, count_outside: F) -> Result<SummaryStats>
    where
        F: FnOnce(f64, f64) -> u64,
    {
        if self.count == 0 {
            return Err(Error::EmptyBin("no valid values to summarize".into()));
        }
        let (q1, median, q3) = self.quartiles().unwrap();
        let (whisker_low, whisker_high) = self.tukey_fences().unwrap();
        let n_outliers = count_outside(whisker_low, whisker_high);
        Ok(SummaryStats {
            count: self.count,
            min: self.min,
            max: self.max,
            mean: self.mean,
            std: self.std().unwrap(),
            q1,
            median,
            q3,
            whisker_low,
            whisker_high,
            n_outliers,
            quantile_method: QuantileMethod::Sketch,
        })
    }
}

/// Summarizes one slice of values, optionally masked. Masked-off
/// positions count as invalid, as do non-finite values.
pub fn chunk_summary(values: &[f64], mask: Option<&ValidityMask>) -> PartialSummary {
    let mut summary = PartialSummary::new();
    match mask {
        None => {
            for &v in values {
                summary.add(v);
            }
        }
        Some(mask) => {
            debug_assert_eq!(mask.len(), values.len());
            for (i, &v) in values.iter().enumerate() {
                if mask.get(i) {
                    summary.add(v);
                } else {
                    summary.add_invalid();
                }
            }
        }
    }
    summary
}

/// Merges two summaries into a new one.
pub fn merge_summaries(a: &PartialSummary, b: &PartialSummary) -> PartialSummary {
    let mut out = a.clone();
    out.merge_from(b);
    out
}

/// Closed summary of one bin of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub n_outliers: u64,
    pub quantile_method: QuantileMethod,
}

/// R-7 quantile of pre-sorted values: linear interpolation at rank
/// `(n - 1) q`, the spreadsheet and NumPy default.
pub fn exact_quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot take a quantile of no values".into(),
        ));
    }
    if !(q.is_finite() && (0.0..=1.0).contains(&q)) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must be in [0, 1], got {q}"
        )));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Summarizes values held in memory: exact two-pass moments, exact R-7
/// quantiles, and an exact outlier count. Non-finite values are
/// excluded and are not tallied here; the caller tracks invalid counts.
pub fn exact_summary(values: &[f64]) -> Result<SummaryStats> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(Error::EmptyBin("no valid values to summarize".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let m2: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = if n == 1 {
        0.0
    } else {
        (m2 / (n - 1) as f64).sqrt()
    };
    let q1 = exact_quantile(&sorted, 0.25)?;
    let median = exact_quantile(&sorted, 0.5)?;
    let q3 = exact_quantile(&sorted, 0.75)?;
    let iqr = q3 - q1;
    let whisker_low = (q1 - 1.5 * iqr).max(sorted[0]);
    let whisker_high = (q3 + 1.5 * iqr).min(sorted[n - 1]);
    let n_outliers = sorted
        .iter()
        .filter(|v| **v < whisker_low || **v > whisker_high)
        .count() as u64;
    Ok(SummaryStats {
        count: n as u64,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        std,
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        n_outliers,
        quantile_method: QuantileMethod::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn r7_quantiles_on_1_to_101() {
        let values: Vec<f64> = (1..=101).map(|v| v as f64).collect();
        assert_eq!(exact_quantile(&values, 0.25).unwrap(), 26.0);
        assert_eq!(exact_quantile(&values, 0.5).unwrap(), 51.0);
        assert_eq!(exact_quantile(&values, 0.75).unwrap(), 76.0);
        assert_eq!(exact_quantile(&values, 0.0).unwrap(), 1.0);
        assert_eq!(exact_quantile(&values, 1.0).unwrap(), 101.0);
    }

    #[test]
    fn r7_interpolates_between_order_statistics() {
        let values = vec![10.0, 20.0, 30.0, 40.0];
        // h = 3 * 0.5 = 1.5, halfway between 20 and 30.
        assert_eq!(exact_quantile(&values, 0.5).unwrap(), 25.0);
        assert!(exact_quantile(&values, 1.5).is_err());
        assert!(exact_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn running_moments_match_two_pass() {
        let values: Vec<f64> = (0..2000).map(|i| ((i * 37) % 501) as f64 * 0.25 - 31.0).collect();
        let mut p = PartialSummary::new();
        for &v in &values {
            p.add(v);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let m2: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (m2 / (values.len() - 1) as f64).sqrt();
        assert_relative_eq!(p.mean().unwrap(), mean, max_relative = 1e-12);
        assert_relative_eq!(p.std().unwrap(), std, max_relative = 1e-12);
        assert_eq!(p.count(), 2000);
    }

    #[test]
    fn merge_matches_single_stream() {
        let values: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.7).sin() * 100.0).collect();
        let mut whole = PartialSummary::new();
        for &v in &values {
            whole.add(v);
        }
        let mut merged = PartialSummary::new();
        for chunk in values.chunks(613) {
            merged.merge_from(&chunk_summary(chunk, None));
        }
        assert_eq!(merged.count(), whole.count());
        assert_eq!(merged.min(), whole.min());
        assert_eq!(merged.max(), whole.max());
        assert_relative_eq!(
            merged.mean().unwrap(),
            whole.mean().unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            merged.std().unwrap(),
            whole.std().unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn merge_handles_empty_sides() {
        let mut a = PartialSummary::new();
        a.add_invalid();
        let mut b = PartialSummary::new();
        b.add(3.0);
        b.add(5.0);
        let ab = merge_summaries(&a, &b);
        assert_eq!(ab.count(), 2);
        assert_eq!(ab.invalid(), 1);
        assert_eq!(ab.min(), Some(3.0));
        let ba = merge_summaries(&b, &a);
        assert_eq!(ba.count(), 2);
        assert_eq!(ba.invalid(), 1);
        assert_eq!(ba.mean(), ab.mean());
    }

    #[test]
    fn invalid_values_are_tallied_not_summarized() {
        let values = [1.0, f64::NAN, 2.0, f64::INFINITY, 3.0];
        let p = chunk_summary(&values, None);
        assert_eq!(p.count(), 3);
        assert_eq!(p.invalid(), 2);
        assert_eq!(p.mean(), Some(2.0));
    }

    #[test]
    fn mask_marks_positions_invalid() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let mut mask = ValidityMask::new_all_valid(4);
        mask.set(1, false);
        mask.set(3, false);
        let p = chunk_summary(&values, Some(&mask));
        assert_eq!(p.count(), 2);
        assert_eq!(p.invalid(), 2);
        assert_eq!(p.mean(), Some(2.0));
    }

    #[test]
    fn finalize_orders_fields_and_counts_outliers() {
        let mut values: Vec<f64> = (1..=101).map(|v| v as f64).collect();
        values.push(1000.0);
        let p = chunk_summary(&values, None);
        let stats = p
            .finalize(|lo, hi| values.iter().filter(|v| **v < lo || **v > hi).count() as u64)
            .unwrap();
        assert_eq!(stats.count, 102);
        assert!(stats.min <= stats.whisker_low);
        assert!(stats.whisker_low <= stats.q1);
        assert!(stats.q1 <= stats.median);
        assert!(stats.median <= stats.q3);
        assert!(stats.q3 <= stats.whisker_high);
        assert!(stats.whisker_high <= stats.max);
        assert_eq!(stats.n_outliers, 1);
        assert_eq!(stats.quantile_method, QuantileMethod::Sketch);
    }

    #[test]
    fn finalize_of_empty_bin_fails() {
        let p = PartialSummary::new();
        assert!(matches!(
            p.finalize(|_, _| 0),
            Err(Error::EmptyBin(_))
        ));
    }

    #[test]
    fn single_value_summary_is_degenerate_but_ordered() {
        let mut p = PartialSummary::new();
        p.add(7.0);
        let stats = p.finalize(|_, _| 0).unwrap();
        assert_eq!(stats.count, 1);
        assert_eq!(stats.min, 7.0);
        assert_eq!(stats.max, 7.0);
        assert_eq!(stats.median, 7.0);
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.n_outliers, 0);
    }

    #[test]
    fn exact_summary_matches_hand_values() {
        let values: Vec<f64> = (1..=101).map(|v| v as f64).collect();
        let stats = exact_summary(&values).unwrap();
        assert_eq!(stats.q1, 26.0);
        assert_eq!(stats.median, 51.0);
        assert_eq!(stats.q3, 76.0);
        assert_eq!(stats.mean, 51.0);
        assert_eq!(stats.n_outliers, 0);
        assert_eq!(stats.quantile_method, QuantileMethod::Exact);
        assert!(exact_summary(&[f64::NAN]).is_err());
    }
}
