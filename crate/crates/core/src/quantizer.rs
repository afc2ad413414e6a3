/// A fixed table of `len()` codewords in ℝ^block_dim with a nearest-codeword
/// rule. Implemented by vector codebooks and by scalar level tables.
pub trait BlockQuantizer: Sync {
    fn block_dim(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn codeword(&self, index: usize) -> &[f64];

    /// Exact argmin of ‖y − c‖², lowest index on ties.
    fn nearest(&self, y: &[f64]) -> usize;

    /// 64-bit identity digest checked by cache readers.
    fn content_hash(&self) -> u64;
}

impl<T: BlockQuantizer + ?Sized> BlockQuantizer for &T {
    fn block_dim(&self) -> usize {
        (**self).block_dim()
    }

    fn len(&self) -> usize {
        (**self).len()
    }

    fn codeword(&self, index: usize) -> &[f64] {
        (**self).codeword(index)
    }

    fn nearest(&self, y: &[f64]) -> usize {
        (**self).nearest(y)
    }

    fn content_hash(&self) -> u64 {
        (**self).content_hash()
    }
}
