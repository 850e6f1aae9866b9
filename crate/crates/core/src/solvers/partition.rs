use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionKind {
    Pointwise,
    Columnwise,
    Custom,
}

impl PartitionKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            PartitionKind::Pointwise => "pt",
            PartitionKind::Columnwise => "col",
            PartitionKind::Custom => "custom",
        }
    }
}

/// Disjoint blocks covering every entry of an `rows x cols` residual matrix.
///
/// Stored as a block id per entry in column-major order, so block norms are a
/// single pass over the matrix whatever the block shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    kind: PartitionKind,
    rows: usize,
    cols: usize,
    block_of: Vec<usize>,
    n_blocks: usize,
}

impl Partition {
    pub fn pointwise(rows: usize, cols: usize) -> Self {
        Self {
            kind: PartitionKind::Pointwise,
            rows,
            cols,
            block_of: (0..rows * cols).collect(),
            n_blocks: rows * cols,
        }
    }

    pub fn columnwise(rows: usize, cols: usize) -> Self {
        Self {
            kind: PartitionKind::Columnwise,
            rows,
            cols,
            block_of: (0..rows * cols).map(|k| k / rows).collect(),
            n_blocks: cols,
        }
    }

    pub fn of_kind(kind: PartitionKind, rows: usize, cols: usize) -> Result<Self> {
        match kind {
            PartitionKind::Pointwise => Ok(Self::pointwise(rows, cols)),
            PartitionKind::Columnwise => Ok(Self::columnwise(rows, cols)),
            PartitionKind::Custom => Err(Error::input("custom partitions need explicit blocks")),
        }
    }

    /// Arbitrary partition from lists of `(row, col)` entries.
    pub fn custom(rows: usize, cols: usize, blocks: &[Vec<(usize, usize)>]) -> Result<Self> {
        let mut block_of = vec![usize::MAX; rows * cols];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::input(format!("partition block {b} is empty")));
            }
            for &(i, j) in block {
                if i >= rows || j >= cols {
                    return Err(Error::input(format!(
                        "partition block {b} holds ({i}, {j}) outside a {rows}x{cols} matrix"
                    )));
                }
                let k = j * rows + i;
                if block_of[k] != usize::MAX {
                    return Err(Error::input(format!("entry ({i}, {j}) appears in two blocks")));
                }
                block_of[k] = b;
            }
        }
        if let Some(k) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::input(format!(
                "partition does not cover entry ({}, {})",
                k % rows.max(1),
                k / rows.max(1)
            )));
        }
        Ok(Self {
            kind: PartitionKind::Custom,
            rows,
            cols,
            block_of,
            n_blocks: blocks.len(),
        })
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Block id of each entry, column-major.
    pub fn assignment(&self) -> &[usize] {
        &self.block_of
    }

    pub fn blocks(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.n_blocks];
        for (k, &b) in self.block_of.iter().enumerate() {
            out[b].push((k % self.rows, k / self.rows));
        }
        out
    }

    pub fn check_shape(&self, m: &CMatrix) -> Result<()> {
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::shape(format!(
                "partition covers {}x{} entries, matrix is {:?}",
                self.rows,
                self.cols,
                m.shape()
            )));
        }
        Ok(())
    }

    /// Frobenius norm of each block of `e`.
    pub fn block_norms(&self, e: &CMatrix) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_blocks];
        for (z, &b) in e.iter().zip(&self.block_of) {
            acc[b] += z.norm_sqr();
        }
        acc.iter_mut().for_each(|v| *v = v.sqrt());
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn builtin_partitions() {
        let p = Partition::pointwise(3, 2);
        assert_eq!(p.n_blocks(), 6);
        let q = Partition::columnwise(3, 2);
        assert_eq!(q.n_blocks(), 2);
        assert_eq!(q.blocks()[1], vec![(0, 1), (1, 1), (2, 1)]);
        let e = CMatrix::from_row_slice(
            3,
            2,
            &[
                c(3.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 4.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        assert_eq!(q.block_norms(&e), vec![5.0, 1.0]);
    }

    #[test]
    fn custom_validation() {
        assert!(Partition::custom(2, 1, &[vec![(0, 0)], vec![(1, 0)]]).is_ok());
        assert!(Partition::custom(2, 1, &[vec![(0, 0)]]).is_err());
        assert!(Partition::custom(2, 1, &[vec![(0, 0), (1, 0)], vec![(1, 0)]]).is_err());
        assert!(Partition::custom(2, 1, &[vec![(0, 0), (1, 0)], vec![]]).is_err());
        assert!(Partition::custom(2, 1, &[vec![(0, 0), (2, 0)]]).is_err());
    }
}
