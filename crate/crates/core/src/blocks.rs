//! Labelled block decompositions of a direct-sum space.

use std::ops::Range;

use serde::Serialize;

use crate::numerics::{self, CMat, ONE};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEntry {
    /// Signed position: `0` is `H`, negative indices the chain side, positive the copies.
    pub index: i64,
    pub label: String,
    pub dim: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BlockIndex {
    entries: Vec<BlockEntry>,
}

impl BlockIndex {
    pub fn new() -> Self {
        BlockIndex::default()
    }

    /// Appends a block after the current ones.
    pub fn push(&mut self, index: i64, label: impl Into<String>, dim: usize) {
        let offset = self.dim();
        self.entries.push(BlockEntry {
            index,
            label: label.into(),
            dim,
            offset,
        });
    }

    pub fn entries(&self) -> &[BlockEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.dim)
    }

    pub fn entry(&self, index: i64) -> Option<&BlockEntry> {
        self.entries.iter().find(|e| e.index == index)
    }

    pub fn range(&self, index: i64) -> Range<usize> {
        let e = self.entry(index).expect("unknown block index");
        e.offset..e.offset + e.dim
    }

    /// Inclusion `ℂ^{dim block} → ℂ^{dim}`.
    pub fn inclusion(&self, index: i64) -> CMat {
        let r = self.range(index);
        let mut m = numerics::zeros(self.dim(), r.len());
        for (j, row) in r.enumerate() {
            m[(row, j)] = ONE;
        }
        m
    }

    /// Diagonal projection onto the blocks selected by `keep`.
    pub fn projector<F: Fn(i64) -> bool>(&self, keep: F) -> CMat {
        let mut p = numerics::zeros(self.dim(), self.dim());
        for e in &self.entries {
            if keep(e.index) {
                for j in e.offset..e.offset + e.dim {
                    p[(j, j)] = ONE;
                }
            }
        }
        p
    }

    /// Sub-matrix of `m` at block position `(row, col)`.
    pub fn block(&self, m: &CMat, row: i64, col: i64) -> CMat {
        let (r, c) = (self.range(row), self.range(col));
        m.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    pub fn set_block(&self, m: &mut CMat, row: i64, col: i64, value: &CMat) {
        let (r, c) = (self.range(row), self.range(col));
        assert_eq!(value.shape(), (r.len(), c.len()), "block shape");
        m.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_projectors() {
        let mut b = BlockIndex::new();
        b.push(0, "H", 2);
        b.push(-1, "D*", 3);
        b.push(1, "D", 1);
        assert_eq!(b.dim(), 6);
        assert_eq!(b.range(-1), 2..5);
        let p = b.projector(|i| i <= 0);
        assert_eq!(p.trace().re, 5.0);
        let inc = b.inclusion(1);
        assert_eq!(inc[(5, 0)], ONE);
        let mut m = numerics::zeros(6, 6);
        b.set_block(&mut m, 0, -1, &CMat::from_element(2, 3, ONE));
        assert_eq!(b.block(&m, 0, -1), CMat::from_element(2, 3, ONE));
        assert!(b.entry(7).is_none());
    }
}
