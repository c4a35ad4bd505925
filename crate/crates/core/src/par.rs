//! Thin parallel layer. With the `parallel` feature the helpers fan out over
//! rayon's pool; without it they run the same closures sequentially.
//!
//! Every helper returns results in index order and partitions work into
//! chunks whose boundaries depend only on the input length, never on the
//! thread count, so reductions built on top are bitwise reproducible.

/// Chunk length used by [`chunked_sum`]; fixed so partial sums do not depend
/// on the number of workers.
pub const REDUCTION_CHUNK: usize = 64;

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Evaluates `f(0), ..., f(n-1)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    imp::map_indexed(n, f)
}

/// Calls `f(chunk_index, chunk)` for consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    imp::for_each_chunk_mut(data, chunk.max(1), f)
}

/// Sums `f(i)` over `0..n`. Terms are grouped into fixed chunks that are
/// summed in ascending order, then the chunk totals are added in ascending
/// order, so the result is identical with or without the parallel feature.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCTION_CHUNK);
    let partial = map_indexed(chunks, |c| {
        let lo = c * REDUCTION_CHUNK;
        let hi = (lo + REDUCTION_CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunked_sum_matches_manual_grouping() {
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let n: usize = 1000;
        let mut total = 0.0;
        for c in 0..n.div_ceil(REDUCTION_CHUNK) {
            let lo = c * REDUCTION_CHUNK;
            let hi = (lo + REDUCTION_CHUNK).min(n);
            total += (lo..hi).map(f).sum::<f64>();
        }
        assert_eq!(chunked_sum(n, f).to_bits(), total.to_bits());
    }

    #[test]
    fn chunk_mut_visits_everything() {
        let mut v = vec![0usize; 37];
        for_each_chunk_mut(&mut v, 5, |c, s| {
            for (k, x) in s.iter_mut().enumerate() {
                *x = c * 5 + k;
            }
        });
        assert!(v.iter().enumerate().all(|(i, &x)| x == i));
    }
}
