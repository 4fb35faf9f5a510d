use std::ops::Range;

use crate::error::{Error, Result};
use crate::sequence::SequenceSpec;

/// Consecutive index blocks `I_j` of width `k`, counted from the sequence's
/// first index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockScheme {
    k: usize,
    start: u64,
}

impl BlockScheme {
    pub fn new(k: usize, start: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::precondition("block width must be at least 1"));
        }
        Ok(BlockScheme { k, start })
    }

    pub fn width(&self) -> usize {
        self.k
    }

    /// Sequence indices of block `j`.
    pub fn block(&self, j: usize) -> Range<u64> {
        let lo = self.start + (j * self.k) as u64;
        lo..lo + self.k as u64
    }

    pub fn block_of(&self, n: u64) -> usize {
        ((n - self.start) / self.k as u64) as usize
    }

    /// Index in block `j` where `|a_n|` is largest (first one on ties).
    pub fn argmax(&self, spec: &SequenceSpec, j: usize) -> u64 {
        let mut best = (self.block(j).start, f64::NEG_INFINITY);
        for n in self.block(j) {
            let v = crate::linalg::norm(&spec.term(n).unwrap());
            if v > best.1 {
                best = (n, v);
            }
        }
        best.0
    }
}
