//! Named, shaped parameter blocks shared by every trainable model.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::autodiff::{Gradients, Tape, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId(usize);

impl BlockId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn from_index(i: usize) -> Self {
        Self(i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

/// Ordered parameter blocks; the order is also the flat coordinate order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<T> {
    blocks: Vec<Block<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: Vec<T>) -> BlockId {
        let name = name.into();
        assert_eq!(data.len(), rows * cols, "block {name}: data/shape mismatch");
        assert!(self.find(&name).is_none(), "duplicate block {name}");
        self.blocks.push(Block { name, rows, cols, data });
        BlockId(self.blocks.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> BlockId {
        self.push(name, rows, cols, vec![T::zero(); rows * cols])
    }

    /// Block drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> BlockId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..rows * cols).map(|_| T::lit(dist.sample(rng))).collect();
        self.push(name, rows, cols, data)
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block<T> {
        &self.blocks[id.0]
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut Block<T> {
        &mut self.blocks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Total scalar parameters.
    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    /// Maps a flat coordinate to `(block, offset)`.
    pub fn locate(&self, mut flat: usize) -> (BlockId, usize) {
        for (i, b) in self.blocks.iter().enumerate() {
            if flat < b.data.len() {
                return (BlockId(i), flat);
            }
            flat -= b.data.len();
        }
        panic!("flat coordinate out of range");
    }

    pub fn get_flat(&self, flat: usize) -> T {
        let (b, o) = self.locate(flat);
        self.blocks[b.0].data[o]
    }

    pub fn set_flat(&mut self, flat: usize, v: T) {
        let (b, o) = self.locate(flat);
        self.blocks[b.0].data[o] = v;
    }

    /// Records every block as a differentiable leaf, in block order.
    pub fn record(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.blocks
            .iter()
            .map(|b| tape.leaf(b.data.clone(), b.rows, b.cols))
            .collect()
    }

    /// Records every block as a constant.
    pub fn record_constant(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.blocks
            .iter()
            .map(|b| tape.constant(b.data.clone(), b.rows, b.cols))
            .collect()
    }

    /// Per-block gradients for the leaves returned by [`ParamSet::record`].
    pub fn collect_grads(&self, grads: &Gradients<T>, leaves: &[Var]) -> Vec<Vec<T>> {
        leaves.iter().map(|&v| grads.wrt(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_init_respects_bound() {
        let mut p = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let id = p.uniform("w", 10, 20, 25, &mut rng);
        assert!(p.block(id).data.iter().all(|v| v.abs() <= 0.2));
        assert_eq!(p.count(), 200);
    }

    #[test]
    fn flat_coordinates() {
        let mut p = ParamSet::<f64>::new();
        p.zeros("a", 2, 2);
        p.zeros("b", 1, 3);
        assert_eq!(p.locate(5), (BlockId(1), 1));
        p.set_flat(5, 7.0);
        assert_eq!(p.get_flat(5), 7.0);
        assert_eq!(p.block(BlockId(1)).data, vec![0.0, 7.0, 0.0]);
    }
}
