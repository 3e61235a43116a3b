//! Chunked data-parallel map with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose results come back in chunk
//! order, so reductions over them do not depend on the thread count.

use std::ops::Range;

fn chunks(n_items: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n_items)
        .step_by(chunk)
        .map(|start| start..(start + chunk).min(n_items))
        .collect()
}

/// Applies `f` to consecutive index ranges of length `chunk` and returns the
/// results in range order. `threads = Some(1)` runs on the calling thread;
/// `None` uses the global pool.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, F>(n_items: usize, chunk: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let ranges = chunks(n_items, chunk);
    match threads {
        Some(1) => ranges.into_iter().map(f).collect(),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| ranges.into_par_iter().map(&f).collect()),
            Err(_) => ranges.into_iter().map(f).collect(),
        },
        None => ranges.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, F>(n_items: usize, chunk: usize, _threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    chunks(n_items, chunk).into_iter().map(f).collect()
}

/// Applies `f` to every item in place; items are independent, so the result
/// does not depend on scheduling.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T, F>(items: &mut [T], parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    } else {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F>(items: &mut [T], _parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Sequential reference used by benches and tests.
pub fn map_chunks_sequential<T, F>(n_items: usize, chunk: usize, f: F) -> Vec<T>
where
    F: Fn(Range<usize>) -> T,
{
    chunks(n_items, chunk).into_iter().map(f).collect()
}

/// Whether the crate was built with the `parallel` feature.
pub const ENABLED: bool = cfg!(feature = "parallel");

/// Threads available to [`map_chunks`] with `threads = None`.
pub fn available_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_items_in_order() {
        assert_eq!(chunks(10, 4), vec![0..4, 4..8, 8..10]);
        assert!(chunks(0, 4).is_empty());
        let sums = map_chunks(10, 3, Some(2), |r| r.sum::<usize>());
        assert_eq!(sums, map_chunks_sequential(10, 3, |r| r.sum::<usize>()));
        assert_eq!(sums.iter().sum::<usize>(), 45);
        let mut xs = vec![0usize; 5];
        for_each_mut(&mut xs, true, |i, x| *x = i * i);
        assert_eq!(xs, vec![0, 1, 4, 9, 16]);
    }
}
