//! Per-point evaluation and deterministic reductions.
//!
//! Every output block is written by exactly one closure invocation that reads
//! only immutable inputs, so the serial and parallel paths produce identical
//! bits. Sums always go through [`pairwise_sum`] over a point-ordered buffer.

/// Calls `f(point, block)` for each `block`-sized chunk of `data`.
pub(crate) fn fill_blocks<F>(data: &mut [f64], block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if block == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(block).enumerate().for_each(|(p, b)| f(p, b));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(block).enumerate().for_each(|(p, b)| f(p, b));
    }
}

/// Fixed-shape pairwise (tree) summation. The split points depend only on the
/// slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn pairwise_matches_exact_integer_sum() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn fill_blocks_visits_each_point_once() {
        let mut d = alloc::vec![0.0; 30];
        fill_blocks(&mut d, 3, |p, b| {
            for (c, x) in b.iter_mut().enumerate() {
                *x = (p * 3 + c) as f64;
            }
        });
        for (i, x) in d.iter().enumerate() {
            assert_eq!(*x, i as f64);
        }
    }
}
