//! Deterministic pairwise summation.
//!
//! The split points depend only on the length of the range, so results are
//! bit-identical whether the halves run on one thread or on several.

const LEAF: usize = 64;
const PARALLEL_CUTOFF: usize = 1 << 13;

/// Sums `f(i)` for `i` in `0..n`, accumulating `K` independent quantities at once.
pub fn pairwise_sum_with<const K: usize, F>(n: usize, f: &F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    sum_range(0, n, f)
}

fn sum_range<const K: usize, F>(start: usize, end: usize, f: &F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    let len = end - start;
    if len <= LEAF {
        let mut acc = [0.0; K];
        for i in start..end {
            let v = f(i);
            for k in 0..K {
                acc[k] += v[k];
            }
        }
        return acc;
    }
    let mid = start + len / 2;
    let (left, right) = if len >= PARALLEL_CUTOFF {
        rayon::join(|| sum_range(start, mid, f), || sum_range(mid, end, f))
    } else {
        (sum_range(start, mid, f), sum_range(mid, end, f))
    };
    let mut out = left;
    for k in 0..K {
        out[k] += right[k];
    }
    out
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_with(values.len(), &|i| [values[i]])[0]
}

/// Arithmetic mean with pairwise summation; `NaN` for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_integers() {
        let v: Vec<f64> = (1..=100_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 5_000_050_000.0);
    }

    #[test]
    fn empty_range_is_zero() {
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn multi_accumulator() {
        let [a, b] = pairwise_sum_with(1000, &|i| [1.0, i as f64]);
        assert_eq!(a, 1000.0);
        assert_eq!(b, 499_500.0);
    }

    #[test]
    fn less_rounding_than_sequential() {
        // 0.1 is not representable; the pairwise total drifts far less than a running sum.
        let v = vec![0.1; 1 << 20];
        let exact = 0.1 * (1 << 20) as f64;
        let seq: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - exact).abs() <= (seq - exact).abs());
    }
}
