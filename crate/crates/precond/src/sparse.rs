//! Sparse symmetric matrix storage and the scaled operator products used
//! throughout the crate.
//!
//! [`SparseSymMatrix`] stores a symmetric matrix in CSR form with **both**
//! triangles materialized, so a matrix-vector product is one contiguous
//! sweep over `row_ptr`/`col_idx`/`vals` with no branch on triangle
//! membership. Constructors take the lower triangle and mirror it.
//!
//! Diagonal scalings never materialize a scaled matrix inside solvers:
//! `apply_right_scaled` computes `A (d .* x)` and `apply_sym_scaled`
//! computes `sqrt(d) .* (A (sqrt(d) .* x))`, giving the action of
//! `A*Diag(d)` and `Diag(d)^(1/2) A Diag(d)^(1/2)` in `O(nnz)` each.

use crate::{Error, Result};

/// Symmetric sparse matrix in CSR form, both triangles stored.
///
/// Structural invariants enforced at construction: `n >= 2`, column indices
/// sorted and unique within each row, value symmetry (mirrored from the
/// lower triangle), and a strictly positive entry on every diagonal
/// position - the matrices this crate works with are SPD candidates, and a
/// missing or non-positive diagonal can be rejected cheaply up front.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from lower-triangle triplets `(i, j, v)` with `j <= i`.
    /// Off-diagonal entries are mirrored; exact zeros are dropped.
    pub fn from_lower_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix dimension must be at least 2, got {n}"
            )));
        }
        let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) out of range for dimension {n}"
                )));
            }
            if j > i {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) lies above the diagonal; pass the lower triangle"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite value at ({i}, {j})"
                )));
            }
            if v == 0.0 && i != j {
                continue;
            }
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_sorted_full(n, full)
    }

    /// Identity matrix (handy as a neutral instance in tests and generators).
    pub fn identity(n: usize) -> Result<Self> {
        let diag: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_lower_triplets(n, &diag)
    }

    fn from_sorted_full(n: usize, mut full: Vec<(usize, usize, f64)>) -> Result<Self> {
        full.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in full.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidInput(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(full.len());
        let mut vals = Vec::with_capacity(full.len());
        for &(i, j, v) in &full {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let a = SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        };
        for i in 0..n {
            match a.get(i, i) {
                Some(v) if v > 0.0 => {}
                Some(v) => {
                    return Err(Error::NotSpd(format!(
                        "diagonal entry ({i}, {i}) = {v:e} is not positive"
                    )))
                }
                None => {
                    return Err(Error::NotSpd(format!(
                        "diagonal entry ({i}, {i}) is missing"
                    )))
                }
            }
        }
        Ok(a)
    }

    /// Dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored nonzeros (both triangles count).
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `nnz / n^2` with both triangles counted.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n as f64 * self.n as f64)
    }

    /// Value at `(i, j)`, or `None` for a structural zero.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| self.vals[lo + k])
    }

    /// Row `i` as parallel slices of column indices and values.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    /// The diagonal as a dense vector.
    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.get(i, i).expect("diagonal present by construction"))
            .collect()
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        assert_eq!(y.len(), self.n, "matvec dimension mismatch");
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// `A x` as a fresh vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `A (d .* x)`: the action of the product `A * Diag(d)` without forming it.
    pub fn apply_right_scaled(&self, d: &DiagScaling, x: &[f64]) -> Vec<f64> {
        assert_eq!(d.len(), self.n, "scaling dimension mismatch");
        let dx: Vec<f64> = d.values().iter().zip(x).map(|(di, xi)| di * xi).collect();
        self.matvec(&dx)
    }

    /// `sqrt(d) .* (A (sqrt(d) .* x))`: the action of
    /// `Diag(d)^(1/2) A Diag(d)^(1/2)` without forming it.
    pub fn apply_sym_scaled(&self, d: &DiagScaling, x: &[f64]) -> Vec<f64> {
        assert_eq!(d.len(), self.n, "scaling dimension mismatch");
        let s: Vec<f64> = d.values().iter().map(|v| v.sqrt()).collect();
        let sx: Vec<f64> = s.iter().zip(x).map(|(si, xi)| si * xi).collect();
        let mut y = self.matvec(&sx);
        for (yi, si) in y.iter_mut().zip(&s) {
            *yi *= si;
        }
        y
    }

    /// Materializes `Diag(d)^(1/2) A Diag(d)^(1/2)` as a new sparse matrix.
    ///
    /// Solvers never need this (they use the implicit products above); it
    /// exists for instance construction and factorization, where the scaled
    /// matrix itself is the object of interest.
    pub fn sym_scaled(&self, d: &DiagScaling) -> Result<SparseSymMatrix> {
        if d.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "scaling has length {}, matrix dimension is {}",
                d.len(),
                self.n
            )));
        }
        let s: Vec<f64> = d.values().iter().map(|v| v.sqrt()).collect();
        let mut tri = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    tri.push((i, j, s[i] * v * s[j]));
                }
            }
        }
        SparseSymMatrix::from_lower_triplets(self.n, &tri)
    }

    /// Gershgorin upper bound on the largest eigenvalue of
    /// `Diag(d)^(1/2) A Diag(d)^(1/2)`: the maximum over rows of
    /// `s_ii + sum_{j != i} |s_ij|` for the scaled entries `s_ij`.
    ///
    /// Costs one sweep over the nonzeros and never factors anything, which
    /// is what makes it usable as a spectral shift inside the eigensolver.
    pub fn gershgorin_upper(&self, d: &DiagScaling) -> f64 {
        assert_eq!(d.len(), self.n, "scaling dimension mismatch");
        let s: Vec<f64> = d.values().iter().map(|v| v.sqrt()).collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                let sv = s[i] * v * s[j];
                // diagonal entries are positive, so summing |.| over the whole
                // row equals center + radius of the Gershgorin disc
                acc += sv.abs();
            }
            best = best.max(acc);
        }
        best
    }

    /// Lower-triangle triplets `(i, j, v)` with `j <= i`, row-major order.
    pub fn lower_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut tri = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    tri.push((i, j, v));
                }
            }
        }
        tri
    }
}

/// A strictly positive diagonal scaling `d` (the matrix `Diag(d)`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagScaling {
    d: Vec<f64>,
}

impl DiagScaling {
    /// Validates positivity and finiteness of every entry.
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "diagonal scaling must have length >= 2, got {}",
                d.len()
            )));
        }
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "scaling entry {i} = {v:e} is not strictly positive and finite"
                )));
            }
        }
        Ok(DiagScaling { d })
    }

    /// The all-ones scaling (leaves the matrix unchanged).
    pub fn ones(n: usize) -> Self {
        DiagScaling { d: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    pub fn into_values(self) -> Vec<f64> {
        self.d
    }
}

/// A partition of `{0, .., n-1}` into contiguous blocks, by block sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Builds from block sizes; every size must be positive.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidInput(
                "block partition needs at least one block".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for (k, &s) in sizes.iter().enumerate() {
            if s == 0 {
                return Err(Error::InvalidInput(format!("block {k} has size 0")));
            }
            acc += s;
            offsets.push(acc);
        }
        Ok(BlockPartition { sizes, offsets })
    }

    /// Total number of indices covered.
    pub fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Index range of block `k`.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Iterator over all block ranges.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_blocks()).map(|k| self.range(k))
    }
}

/// Euclidean norm, used everywhere.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Max-norm.
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
