//! Partition of a d-dimensional vector into n contiguous ring chunks.

use crate::error::{Error, Result};
use std::ops::Range;

/// Partition of `[0, d)` into `n` contiguous chunks whose sizes differ by at
/// most one. Chunk `i` is client `i`'s initial send in the ring schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    d: usize,
    n: usize,
    boundaries: Vec<usize>,
}

impl ChunkPlan {
    /// Split `[0, d)` into `n` chunks: the first `d mod n` chunks get
    /// `ceil(d/n)` entries, the rest `floor(d/n)`. Rejects `n > d`, which
    /// would leave some chunk empty.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput("chunk plan needs d >= 1 and n >= 1"));
        }
        if n > d {
            return Err(Error::MoreClientsThanDims { n, d });
        }
        let base = d / n;
        let extra = d % n;
        let mut boundaries = Vec::with_capacity(n + 1);
        let mut offset = 0;
        boundaries.push(0);
        for i in 0..n {
            offset += base + usize::from(i < extra);
            boundaries.push(offset);
        }
        debug_assert_eq!(offset, d);
        Ok(ChunkPlan { d, n, boundaries })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn chunk_count(&self) -> usize {
        self.n
    }

    /// Index range of chunk `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.boundaries[i]..self.boundaries[i + 1]
    }

    pub fn size(&self, i: usize) -> usize {
        self.boundaries[i + 1] - self.boundaries[i]
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_clients_three_dims() {
        let plan = ChunkPlan::new(3, 3).unwrap();
        assert_eq!(plan.boundaries(), &[0, 1, 2, 3]);
    }

    #[test]
    fn single_client_single_chunk() {
        let plan = ChunkPlan::new(7, 1).unwrap();
        assert_eq!(plan.boundaries(), &[0, 7]);
    }

    #[test]
    fn uneven_split() {
        let plan = ChunkPlan::new(10, 4).unwrap();
        assert_eq!(plan.boundaries(), &[0, 3, 6, 8, 10]);
    }

    #[test]
    fn rejects_more_clients_than_dims() {
        assert!(matches!(
            ChunkPlan::new(3, 5),
            Err(Error::MoreClientsThanDims { n: 5, d: 3 })
        ));
    }

    #[test]
    fn sizes_cover_and_balance() {
        for d in 1..40 {
            for n in 1..=d {
                let plan = ChunkPlan::new(d, n).unwrap();
                let sizes: Vec<usize> = (0..n).map(|i| plan.size(i)).collect();
                assert_eq!(sizes.iter().sum::<usize>(), d);
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                assert!(max - min <= 1, "d={d} n={n}");
                // Deterministic.
                assert_eq!(plan, ChunkPlan::new(d, n).unwrap());
            }
        }
    }
}
