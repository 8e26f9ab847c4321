use rayon::prelude::*;

/// Environment variable that caps the worker pool size.
pub const THREADS_ENV: &str = "KDM_HELIO_THREADS";

/// Rows per work unit for data-parallel reductions. Results are folded
/// in block order, so the outcome is independent of how blocks are
/// scheduled across threads.
pub const BLOCK_ROWS: usize = 4096;

/// Configures the global worker pool from `KDM_HELIO_THREADS`.
///
/// A missing or unparsable value leaves the default pool size alone.
/// Calling this more than once is harmless; only the first call can
/// take effect.
pub fn configure_threads() {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Maps fixed-size index blocks in parallel, then folds the block
/// results sequentially in index order.
///
/// Because every block covers a fixed range and the fold order is
/// fixed, the result is bitwise identical for any thread count.
pub fn fold_blocks<T, M, F>(n: usize, map: M, init: T, fold: F) -> T
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync,
    F: FnMut(T, T) -> T,
{
    let block_results: Vec<T> = (0..n.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_ROWS;
            let end = (start + BLOCK_ROWS).min(n);
            map(start..end)
        })
        .collect();
    block_results.into_iter().fold(init, fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_preserves_block_order() {
        let order = fold_blocks(
            BLOCK_ROWS * 3 + 17,
            |range| vec![range.start],
            Vec::new(),
            |mut acc, v| {
                acc.extend(v);
                acc
            },
        );
        assert_eq!(order, vec![0, BLOCK_ROWS, 2 * BLOCK_ROWS, 3 * BLOCK_ROWS]);
    }

    #[test]
    fn fold_matches_sequential_sum() {
        let n = 10_501;
        let expected: f64 = (0..n).map(|i| (i as f64).sin()).sum();
        let got = fold_blocks(
            n,
            |range| range.map(|i| (i as f64).sin()).sum::<f64>(),
            0.0,
            |a, b| a + b,
        );
        // Identical block layout gives identical rounding, so the two
        // sums agree exactly when both fold the same block partials.
        let seq_blocks = (0..n.div_ceil(BLOCK_ROWS))
            .map(|b| {
                let start = b * BLOCK_ROWS;
                let end = (start + BLOCK_ROWS).min(n);
                (start..end).map(|i| (i as f64).sin()).sum::<f64>()
            })
            .fold(0.0, |a: f64, b| a + b);
        assert_eq!(got, seq_blocks);
        assert!((got - expected).abs() < 1e-9);
    }
}
