/// Splits `0..n` into at most `threads` contiguous chunks, runs `f` on each
/// (scoped threads when threads > 1), and returns the per-chunk results in
/// chunk order so report merging stays deterministic.
pub fn run_partitioned<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 {
        return vec![f(0..n)];
    }
    let chunk = n.div_ceil(threads);
    let ranges: Vec<std::ops::Range<usize>> = (0..threads)
        .map(|t| (t * chunk).min(n)..((t + 1) * chunk).min(n))
        .collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(move || f(r)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums() {
        for threads in [1, 2, 3, 8] {
            let parts = run_partitioned(100, threads, |r| r.sum::<usize>());
            assert_eq!(parts.iter().sum::<usize>(), 4950);
        }
    }
}
