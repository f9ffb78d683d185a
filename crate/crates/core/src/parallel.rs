//! Ordered per-item fan-out and deterministic reductions.
//!
//! Results are always collected in input order and summed pairwise in that
//! order, so outputs do not depend on how work is scheduled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Uses the ambient rayon pool when the `parallel` feature is enabled;
    /// identical to `Sequential` otherwise.
    #[default]
    Parallel,
}

/// `items.iter().enumerate().map(f)` collected in order.
pub fn map_ordered<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
    }
}

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Element-wise pairwise sum of equal-length vectors.
pub fn pairwise_sum_vecs(vs: &[Vec<f64>]) -> Vec<f64> {
    match vs.len() {
        0 => Vec::new(),
        1 => vs[0].clone(),
        n => {
            let (a, b) = (pairwise_sum_vecs(&vs[..n / 2]), pairwise_sum_vecs(&vs[n / 2..]));
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_map_matches_sequential() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_ordered(ExecMode::Parallel, &xs, |i, x| i as u64 * x);
        let b = map_ordered(ExecMode::Sequential, &xs, |i, x| i as u64 * x);
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_sums() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
        let vs = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        assert_eq!(pairwise_sum_vecs(&vs), vec![9.0, 12.0]);
    }
}
