//! Sparse Cholesky factorization in natural order.
//!
//! Up-looking row algorithm: row `i` of the factor solves
//! `L[0..i, 0..i] y = A[i, 0..i]` by forward substitution, walking the
//! pending nonzero positions in ascending column order through a small
//! binary heap and pulling updates from per-column lists of the already
//! finished rows. No fill-reducing ordering is applied; the matrices this
//! crate factorizes are desk scale, where natural order is fine.
//!
//! The factorization doubles as the SPD witness: a non-positive pivot is
//! exactly a failed leading principal minor.

use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Log-determinant of an SPD matrix via sparse Cholesky,
/// `logdet = 2 sum_i ln L_ii`. Fails with [`Error::NotSpd`] on breakdown.
pub fn logdet_spd(a: &SparseSymMatrix) -> Result<f64> {
    SparseCholesky::new(a).map(|f| f.logdet())
}

/// Sparse Cholesky factor `A = L L'` kept for repeated solves.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    /// strictly-lower entries of `L`, by column: (row, value), rows ascending
    cols: Vec<Vec<(usize, f64)>>,
    /// diagonal of `L`
    pivots: Vec<f64>,
    logdet: f64,
}

impl SparseCholesky {
    /// Factorizes an SPD matrix. Fails with [`Error::NotSpd`] when a pivot
    /// is not positive (a failed leading principal minor).
    pub fn new(a: &SparseSymMatrix) -> Result<SparseCholesky> {
        let n = a.n();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut pivots = vec![0.0f64; n];
        let mut x = vec![0.0f64; n];
        let mut stamp = vec![usize::MAX; n];
        let mut logdet = 0.0f64;
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
        let mut row_entries: Vec<(usize, f64)> = Vec::new();

        for i in 0..n {
            heap.clear();
            row_entries.clear();
            let (acols, avals) = a.row(i);
            let mut di = 0.0f64;
            for (&j, &v) in acols.iter().zip(avals) {
                if j < i {
                    x[j] = v;
                    stamp[j] = i;
                    heap.push(Reverse(j));
                } else if j == i {
                    di = v;
                }
            }
            while let Some(Reverse(j)) = heap.pop() {
                if stamp[j] != i {
                    continue; // already consumed (duplicate heap entry)
                }
                stamp[j] = usize::MAX;
                let yj = x[j] / pivots[j];
                x[j] = 0.0;
                if yj == 0.0 {
                    continue;
                }
                row_entries.push((j, yj));
                for &(r, v) in &cols[j] {
                    // every recorded row is < i here, and updates only move right
                    if stamp[r] == i {
                        x[r] -= yj * v;
                    } else {
                        x[r] = -yj * v;
                        stamp[r] = i;
                        heap.push(Reverse(r));
                    }
                }
            }
            for &(_, yj) in &row_entries {
                di -= yj * yj;
            }
            if !(di > 0.0) {
                return Err(Error::NotSpd(format!(
                    "Cholesky breakdown at pivot {i}: leading minor is not positive \
                     (pivot value {di:e})"
                )));
            }
            pivots[i] = di.sqrt();
            logdet += di.ln();
            for &(j, yj) in &row_entries {
                cols[j].push((i, yj));
            }
        }
        Ok(SparseCholesky {
            cols,
            pivots,
            logdet,
        })
    }

    pub fn n(&self) -> usize {
        self.pivots.len()
    }

    /// `ln det A` of the factorized matrix.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Solves `A x = b` by forward and back substitution.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        assert_eq!(x.len(), n, "solution length mismatch");
        x.copy_from_slice(b);
        // L y = b
        for j in 0..n {
            x[j] /= self.pivots[j];
            let yj = x[j];
            if yj != 0.0 {
                for &(i, v) in &self.cols[j] {
                    x[i] -= v * yj;
                }
            }
        }
        // L' x = y
        for j in (0..n).rev() {
            let mut s = x[j];
            for &(i, v) in &self.cols[j] {
                s -= v * x[i];
            }
            x[j] = s / self.pivots[j];
        }
    }
}
