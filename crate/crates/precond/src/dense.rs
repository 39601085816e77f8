//! Small dense matrices and the dense eigendecomposition oracle.
//!
//! Everything here is meant for modest dimensions (the oracle refuses
//! `n > 512`; other helpers are capped by their callers). The sparse path is
//! the product code; the dense path exists so tests can check the sparse
//! results against an independent full factorization.

use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Maximum dimension the dense eigendecomposition oracle accepts.
pub const DENSE_ORACLE_MAX_N: usize = 512;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from `n*n` entries in row-major order.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {n} x {n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute difference between `(i, j)` and `(j, i)` entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self * other`.
    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Densifies a sparse symmetric matrix.
    pub fn from_sparse(a: &SparseSymMatrix) -> DenseMatrix {
        let n = a.n();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        let n = m.nrows();
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// Full symmetric eigendecomposition: eigenvalues in descending order and
/// the matching orthonormal eigenvectors as the columns of the returned
/// matrix. Rejects matrices with asymmetry beyond `1e-12` (absolute,
/// against a unit floor) - silently symmetrizing would hide bugs upstream.
pub fn sym_eig(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let asym = m.max_asymmetry();
    let scale = 1.0f64.max(m.data.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    if asym > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric: max |m_ij - m_ji| = {asym:e}"
        )));
    }
    let se = m.to_nalgebra().symmetric_eigen();
    let n = m.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DenseMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, col, se.eigenvectors[(i, k)]);
        }
    }
    Ok((values, vectors))
}

/// The dense eigendecomposition oracle used to validate the sparse path.
///
/// On top of [`sym_eig`] this enforces the oracle's working range
/// (`n <= 512`) and verifies the reconstruction
/// `||M - Q L Q'||_F <= 1e-10 ||M||_F` before handing the result back, so a
/// silently broken factorization cannot masquerade as ground truth.
pub fn dense_eig_oracle(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if m.n() > DENSE_ORACLE_MAX_N {
        return Err(Error::InvalidInput(format!(
            "dense oracle is limited to n <= {DENSE_ORACLE_MAX_N}, got {}",
            m.n()
        )));
    }
    let (values, q) = sym_eig(m)?;
    let n = m.n();
    let mut recon = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += q.get(i, k) * values[k] * q.get(j, k);
            }
            recon.set(i, j, acc);
        }
    }
    let mut err = 0.0f64;
    for i in 0..n * n {
        let d = recon.data[i] - m.data[i];
        err += d * d;
    }
    let err = err.sqrt();
    let scale = m.frobenius();
    if err > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "dense eigendecomposition failed its reconstruction check: \
             ||M - QLQ'||_F = {err:e} vs ||M||_F = {scale:e}"
        )));
    }
    Ok((values, q))
}

/// Eigenvalues of a general (possibly nonsymmetric) dense matrix, returned
/// as real parts sorted descending together with the largest imaginary
/// magnitude encountered. Used by tests on product matrices `A*Diag(d)`,
/// whose spectra are real whenever `d > 0`.
pub fn general_eigenvalues(m: &DenseMatrix) -> (Vec<f64>, f64) {
    let eig = m.to_nalgebra().complex_eigenvalues();
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    let max_im = eig.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    re.sort_by(|a, b| b.total_cmp(a));
    (re, max_im)
}

/// Inverse and log-determinant of a dense SPD matrix via Cholesky.
pub fn spd_inverse_and_logdet(m: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    let chol = m
        .to_nalgebra()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("dense Cholesky factorization broke down".into()))?;
    let logdet = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let inv = chol.inverse();
    Ok((DenseMatrix::from_nalgebra(&inv), logdet))
}
