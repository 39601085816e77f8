//! Closed-form `omega`-optimal preconditioners.
//!
//! Over diagonal scalings, `omega(D^(1/2) A D^(1/2))` is minimized exactly
//! by the Jacobi scaling `d = 1 ./ diag(A)` (any positive multiple works;
//! we fix the multiple to 1). Over block-diagonal congruences
//! `B' A B` with a fixed partition, the minimizer is
//! `B = blkdiag(A_1^(-1/2), ..., A_k^(-1/2))` built from the diagonal
//! blocks of `A`; the scaled matrix then has identity diagonal blocks.

use crate::dense::{sym_eig, DenseMatrix};
use crate::sparse::{BlockPartition, DiagScaling, SparseSymMatrix};
use crate::{Error, Result};

/// Largest diagonal block the dense inverse square root will accept.
pub const MAX_BLOCK_DIM: usize = 2048;

/// A symmetric block-diagonal factor `B = blkdiag(B_1, ..., B_k)`. As a
/// preconditioner it represents `M^-1 = B B` (each `B_i` is the inverse
/// square root of the matching diagonal block of the operator).
#[derive(Debug, Clone)]
pub struct BlockDiagFactor {
    partition: BlockPartition,
    blocks: Vec<DenseMatrix>,
}

impl BlockDiagFactor {
    /// Assembles a factor from explicit blocks, checking that sizes match
    /// the partition and each block is numerically symmetric. Positive
    /// definiteness is the caller's responsibility (the canonical
    /// constructor [`omega_block_optimal`] guarantees it).
    pub fn from_blocks(partition: BlockPartition, blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.len() != partition.num_blocks() {
            return Err(Error::InvalidInput(format!(
                "partition has {} blocks, got {} matrices",
                partition.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (size, block)) in partition.sizes().iter().zip(&blocks).enumerate() {
            if block.n() != *size {
                return Err(Error::InvalidInput(format!(
                    "block {} should be {}x{}, got {}x{}",
                    k,
                    size,
                    size,
                    block.n(),
                    block.n()
                )));
            }
            let asym = block.max_asymmetry();
            let scale = block.frobenius().max(1.0);
            if asym > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "block {k} is not symmetric (asymmetry {asym:e})"
                )));
            }
        }
        Ok(BlockDiagFactor { partition, blocks })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// `B r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n());
        let mut out = vec![0.0; r.len()];
        for (k, block) in self.blocks.iter().enumerate() {
            let range = self.partition.range(k);
            let y = block.matvec(&r[range.clone()]);
            out[range].copy_from_slice(&y);
        }
        out
    }

    /// The preconditioner action `M^-1 r = B (B r)`.
    pub fn apply_precond(&self, r: &[f64]) -> Vec<f64> {
        self.apply(&self.apply(r))
    }

    /// Dense assembly of `B` (test and small-instance use).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n());
        for (k, block) in self.blocks.iter().enumerate() {
            let range = self.partition.range(k);
            for i in 0..block.n() {
                for j in 0..block.n() {
                    out.set(range.start + i, range.start + j, block.get(i, j));
                }
            }
        }
        out
    }
}

/// The `omega`-optimal diagonal scaling `d = 1 ./ diag(A)`: the Jacobi
/// preconditioner. The scaled matrix has unit diagonal exactly.
pub fn jacobi_scaling(a: &SparseSymMatrix) -> DiagScaling {
    let d: Vec<f64> = a.diag().iter().map(|aii| 1.0 / aii).collect();
    DiagScaling::new(d).expect("SPD diagonal is strictly positive")
}

/// Inverse square root of a dense SPD block via its eigendecomposition:
/// `M = Q L Q'` gives `B = Q L^(-1/2) Q'`, the unique SPD solution of
/// `B M B = I`.
pub fn inv_sqrt_block(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.n();
    if n > MAX_BLOCK_DIM {
        return Err(Error::InvalidInput(format!(
            "block dimension {n} exceeds the supported maximum {MAX_BLOCK_DIM}"
        )));
    }
    let (vals, q) = sym_eig(m)?;
    if let Some(bad) = vals.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::NotSpd(format!(
            "block has nonpositive eigenvalue {bad:e}"
        )));
    }
    // B = Q diag(vals^{-1/2}) Q'
    let inv_roots: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut b = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = 0.0;
            for (k, ir) in inv_roots.iter().enumerate() {
                sum += q.get(i, k) * ir * q.get(j, k);
            }
            b.set(i, j, sum);
            b.set(j, i, sum);
        }
    }
    Ok(b)
}

/// The `omega`-optimal block-diagonal factor for `A` under `partition`:
/// `B_i = A_i^(-1/2)` for each diagonal block `A_i`.
pub fn omega_block_optimal(
    a: &SparseSymMatrix,
    partition: &BlockPartition,
) -> Result<BlockDiagFactor> {
    if partition.n() != a.n() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} rows, matrix dimension is {}",
            partition.n(),
            a.n()
        )));
    }
    let mut blocks = Vec::with_capacity(partition.num_blocks());
    for k in 0..partition.num_blocks() {
        let range = partition.range(k);
        let size = range.len();
        let mut dense = DenseMatrix::zeros(size);
        for i in range.clone() {
            let (cols, vals) = a.row(i);
            for (j, v) in cols.iter().zip(vals) {
                if range.contains(j) {
                    dense.set(i - range.start, j - range.start, *v);
                }
            }
        }
        let b = inv_sqrt_block(&dense).map_err(|e| match e {
            Error::NotSpd(msg) => Error::NotSpd(format!("diagonal block {k}: {msg}")),
            Error::InvalidInput(msg) => Error::InvalidInput(format!("diagonal block {k}: {msg}")),
            other => other,
        })?;
        blocks.push(b);
    }
    Ok(BlockDiagFactor {
        partition: partition.clone(),
        blocks,
    })
}
