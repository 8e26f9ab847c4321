/// Default compression parameter. Roughly the number of centroids kept;
/// the rank error of a quantile estimate is a small multiple of `1/δ`.
pub const DEFAULT_SKETCH_CAPACITY: usize = 500;

/// Incoming values buffered before a merge pass, as a multiple of the
/// capacity.
const BUFFER_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Centroid {
    mean: f64,
    weight: f64,
}

/// Mergeable t-digest quantile sketch.
///
/// Values are buffered and periodically merged into a bounded list of
/// weighted centroids. Centroids near the tails stay small, so extreme
/// quantiles are sharp while the middle of the distribution is
/// compressed. Merging two sketches merges their centroid lists and
/// recompresses, which keeps the rank-error guarantee of a single-pass
/// build up to a small constant.
#[derive(Debug, Clone)]
pub struct QuantileSketch {
    capacity: usize,
    centroids: Vec<Centroid>,
    /// Total weight of `centroids`; buffered values are not included.
    weight: f64,
    buffer: Vec<f64>,
    min: f64,
    max: f64,
}

impl Default for QuantileSketch {
    fn default() -> QuantileSketch {
        QuantileSketch::new(DEFAULT_SKETCH_CAPACITY)
    }
}

impl QuantileSketch {
    pub fn new(capacity: usize) -> QuantileSketch {
        QuantileSketch {
            capacity: capacity.max(8),
            centroids: Vec::new(),
            weight: 0.0,
            buffer: Vec::new(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    /// Inserts one value. Non-finite values must be filtered by the
    /// caller.
    pub fn add(&mut self, value: f64) {
        debug_assert!(value.is_finite());
        if value < self.min {
            self.min = value;
        }
        if value > self.max {
            self.max = value;
        }
        self.buffer.push(value);
        if self.buffer.len() >= self.capacity * BUFFER_FACTOR {
            self.flush();
        }
    }

    pub fn count(&self) -> u64 {
        self.weight as u64 + self.buffer.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Folds buffered values into the centroid list.
    pub fn flush(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let buffered = std::mem::take(&mut self.buffer);
        let extra: Vec<Centroid> = buffered
            .into_iter()
            .map(|v| Centroid {
                mean: v,
                weight: 1.0,
            })
            .collect();
        self.rebuild(extra);
    }

    /// Absorbs another sketch. Both operands' buffers are included, and
    /// the result is recompressed once.
    pub fn merge_from(&mut self, other: &QuantileSketch) {
        if other.count() == 0 {
            return;
        }
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        let mut extra: Vec<Centroid> =
            Vec::with_capacity(other.centroids.len() + other.buffer.len() + self.buffer.len());
        extra.extend_from_slice(&other.centroids);
        extra.extend(other.buffer.iter().map(|v| Centroid {
            mean: *v,
            weight: 1.0,
        }));
        let buffered = std::mem::take(&mut self.buffer);
        extra.extend(buffered.into_iter().map(|v| Centroid {
            mean: v,
            weight: 1.0,
        }));
        self.rebuild(extra);
    }

    fn rebuild(&mut self, mut extra: Vec<Centroid>) {
        extra.extend_from_slice(&self.centroids);
        extra.sort_by(|a, b| a.mean.total_cmp(&b.mean));
        let total: f64 = extra.iter().map(|c| c.weight).sum();
        self.centroids = compress(extra, total, self.capacity);
        self.weight = total;
    }

    /// Estimated `q`-quantile, `None` when the sketch is empty.
    ///
    /// Piecewise-linear interpolation over centroid centers with the
    /// exact minimum and maximum as endpoints; monotone in `q` and
    /// always within the observed range.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.count() == 0 {
            return None;
        }
        if !self.buffer.is_empty() {
            let mut flushed = self.clone();
            flushed.flush();
            return flushed.quantile(q);
        }
        if q <= 0.0 {
            return Some(self.min);
        }
        if q >= 1.0 {
            return Some(self.max);
        }
        let target = q * self.weight;
        let mut prev_rank = 0.0;
        let mut prev_value = self.min;
        let mut cumulative = 0.0;
        for c in &self.centroids {
            let rank = cumulative + c.weight / 2.0;
            if target < rank {
                let t = (target - prev_rank) / (rank - prev_rank);
                let v = prev_value + t * (c.mean - prev_value);
                return Some(v.clamp(self.min, self.max));
            }
            prev_rank = rank;
            prev_value = c.mean;
            cumulative += c.weight;
        }
        let t = (target - prev_rank) / (self.weight - prev_rank);
        let v = prev_value + t * (self.max - prev_value);
        Some(v.clamp(self.min, self.max))
    }

    pub fn min(&self) -> Option<f64> {
        if self.count() == 0 {
            None
        } else {
            Some(self.min)
        }
    }

    pub fn max(&self) -> Option<f64> {
        if self.count() == 0 {
            None
        } else {
            Some(self.max)
        }
    }
}

/// Scale function boundary: maps a centroid index to the cumulative
/// rank fraction it may extend to. Quadratic near both tails, so tail
/// centroids stay near weight 1.
fn k_to_q(k: f64, capacity: f64) -> f64 {
    let fraction = k / capacity;
    if fraction >= 0.5 {
        let base = 1.0 - fraction;
        1.0 - 2.0 * base * base
    } else {
        2.0 * fraction * fraction
    }
}

/// Greedy left-to-right recompression of a sorted centroid list.
fn compress(sorted: Vec<Centroid>, total: f64, capacity: usize) -> Vec<Centroid> {
    let mut iter = sorted.into_iter();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let cap = capacity as f64;
    let mut out = Vec::with_capacity(capacity + 1);
    let mut k = 1.0;
    let mut q_limit = k_to_q(k, cap) * total;
    k += 1.0;
    let mut current = first;
    let mut weight_so_far = current.weight;
    let mut merge_sum = 0.0;
    let mut merge_weight = 0.0;
    for c in iter {
        weight_so_far += c.weight;
        if weight_so_far <= q_limit {
            merge_sum += c.mean * c.weight;
            merge_weight += c.weight;
        } else {
            out.push(fold(current, merge_sum, merge_weight));
            q_limit = k_to_q(k, cap) * total;
            k += 1.0;
            current = c;
            merge_sum = 0.0;
            merge_weight = 0.0;
        }
    }
    out.push(fold(current, merge_sum, merge_weight));
    out
}

fn fold(current: Centroid, merge_sum: f64, merge_weight: f64) -> Centroid {
    if merge_weight == 0.0 {
        current
    } else {
        let weight = current.weight + merge_weight;
        Centroid {
            mean: (current.mean * current.weight + merge_sum) / weight,
            weight,
        }
    }
}
