use crate::error::{Error, Result};

use super::summary::PartialSummary;

/// Radial distance bins over which statistics and models are grouped.
///
/// `n` edges define `n - 1` half-open bins `[e_i, e_{i+1})`; the last
/// bin additionally includes its right edge, so the full range
/// `[first, last]` is covered without gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    edges: Vec<f64>,
}

impl Default for BinSpec {
    fn default() -> BinSpec {
        BinSpec::default_au()
    }
}

impl BinSpec {
    pub fn new(edges: Vec<f64>) -> Result<BinSpec> {
        if edges.len() < 2 {
            return Err(Error::InvalidArgument(
                "bin spec needs at least two edges".into(),
            ));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("bin edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly increasing".into(),
            ));
        }
        Ok(BinSpec { edges })
    }

    /// The standard layout: 0 to 1 AU in steps of 0.1 AU.
    pub fn default_au() -> BinSpec {
        BinSpec {
            edges: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }

    /// Parses `start:stop:step`, e.g. `0:1:0.1`. The step must divide
    /// the range to within one part in 10^9. Edges are snapped to 12
    /// decimal places so accumulated float error does not leak into
    /// labels.
    pub fn parse(text: &str) -> Result<BinSpec> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "bin spec must look like start:stop:step, got \"{text}\""
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("bin spec field \"{p}\" is not a number"))
                })
            })
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step.is_finite() && step > 0.0) || !start.is_finite() || !stop.is_finite() || stop <= start
        {
            return Err(Error::InvalidArgument(format!(
                "bin spec \"{text}\" must have stop > start and step > 0"
            )));
        }
        let n = ((stop - start) / step).round();
        if n < 1.0 || ((stop - start) / step - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "bin step {step} does not evenly divide [{start}, {stop}]"
            )));
        }
        let n = n as usize;
        let snap = |v: f64| (v * 1e12).round() / 1e12;
        let edges = (0..=n)
            .map(|i| {
                if i == n {
                    snap(stop)
                } else {
                    snap(start + i as f64 * step)
                }
            })
            .collect();
        BinSpec::new(edges)
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin index for a radius, `None` when it falls outside the edges
    /// or is not finite. The right edge of the last bin is included.
    pub fn index_of(&self, radius: f64) -> Option<usize> {
        if !radius.is_finite() {
            return None;
        }
        let first = self.edges[0];
        let last = self.edges[self.edges.len() - 1];
        if radius < first || radius > last {
            return None;
        }
        if radius == last {
            return Some(self.n_bins() - 1);
        }
        Some(self.edges.partition_point(|e| *e <= radius) - 1)
    }

    /// Human-readable label, e.g. `0.2-0.3AU`.
    pub fn label(&self, bin: usize) -> String {
        format!("{}-{}AU", self.edges[bin], self.edges[bin + 1])
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_bins()).map(|b| self.label(b)).collect()
    }
}

/// Per-bin summaries of a `(radius, value)` stream plus the count of
/// records whose radius fell outside the bins.
#[derive(Debug, Clone)]
pub struct BinnedSummaries {
    pub summaries: Vec<PartialSummary>,
    pub rejected: u64,
}

impl BinnedSummaries {
    pub fn new(spec: &BinSpec) -> BinnedSummaries {
        BinnedSummaries {
            summaries: (0..spec.n_bins()).map(|_| PartialSummary::new()).collect(),
            rejected: 0,
        }
    }

    pub fn merge_from(&mut self, other: &BinnedSummaries) {
        debug_assert_eq!(self.summaries.len(), other.summaries.len());
        for (a, b) in self.summaries.iter_mut().zip(&other.summaries) {
            a.merge_from(b);
        }
        self.rejected += other.rejected;
    }
}

/// Routes `(radius, value)` records into per-bin summaries. Radii
/// outside the bins (including non-finite radii) are rejected; invalid
/// values at a valid radius are tallied in their bin's summary.
pub fn group_by_bin(
    records: impl IntoIterator<Item = (f64, f64)>,
    spec: &BinSpec,
) -> BinnedSummaries {
    let mut out = BinnedSummaries::new(spec);
    for (radius, value) in records {
        match spec.index_of(radius) {
            Some(b) => out.summaries[b].add(value),
            None => out.rejected += 1,
        }
    }
    out
}
