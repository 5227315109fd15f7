use crate::error::{Error, Result};

/// A named, shaped view of one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamBlock<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

/// A fixed collection of parameter tensors with a canonical order.
///
/// The same type doubles as its own gradient container, so `to_flat` of a
/// gradient lines up index-for-index with `to_flat` of the parameters.
pub trait ParamSet {
    fn blocks(&self) -> Vec<ParamBlock<'_>>;

    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for b in self.blocks() {
            out.extend_from_slice(b.data);
        }
        out
    }

    fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.num_params();
        if flat.len() != expected {
            return Err(Error::shape("ParamSet::set_flat", expected, flat.len()));
        }
        let mut offset = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.data.iter().all(|v| v.is_finite()))
    }

    /// Name of the block holding flat index `index`, with its local offset.
    fn locate(&self, index: usize) -> Option<(String, usize)> {
        let mut offset = 0;
        for b in self.blocks() {
            if index < offset + b.data.len() {
                return Some((b.name, index - offset));
            }
            offset += b.data.len();
        }
        None
    }
}

/// Adds `other` into `acc` block by block. Both must come from the same
/// parameter layout.
pub fn accumulate<P: ParamSet>(acc: &mut P, other: &P) {
    let src = other.blocks();
    for (dst, src) in acc.blocks_mut().into_iter().zip(src) {
        debug_assert_eq!(dst.len(), src.data.len());
        for (d, s) in dst.iter_mut().zip(src.data) {
            *d += s;
        }
    }
}
