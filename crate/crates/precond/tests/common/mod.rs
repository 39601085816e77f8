//! Helpers shared by the integration suites: small dense reference
//! implementations written independently of the library code they check,
//! so a bug cannot cancel out of both sides of an assertion.

#![allow(dead_code)]

use precond::dense::{dense_eig_oracle, DenseMatrix};
use precond::sparse::{dot, norm2, SparseSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entries drawn log-uniformly from `[lo, hi]`, seeded.
pub fn log_uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|_| (a + (b - a) * rng.gen::<f64>()).exp())
        .collect()
}

/// Uniform entries in `[lo, hi]`, seeded.
pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect()
}

pub fn dense_of(a: &SparseSymMatrix) -> DenseMatrix {
    DenseMatrix::from_sparse(a)
}

/// `D^(1/2) A D^(1/2)` formed densely; requires `d > 0`.
pub fn sym_scaled_dense(a: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let n = a.n();
    assert_eq!(d.len(), n);
    let s: Vec<f64> = d.iter().map(|&v| v.sqrt()).collect();
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, s[i] * a.get(i, j) * s[j]);
        }
    }
    out
}

/// `A * Diag(d)` formed densely (not symmetric in general).
pub fn right_scaled_dense(a: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let n = a.n();
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, a.get(i, j) * d[j]);
        }
    }
    out
}

/// Condition number of a dense SPD matrix through the eigen oracle.
pub fn kappa_of_dense(m: &DenseMatrix) -> f64 {
    let (vals, _) = dense_eig_oracle(m).unwrap();
    vals[0] / vals[vals.len() - 1]
}

/// `kappa` of the scaled matrix `D^(1/2) A D^(1/2)`, densely.
pub fn kappa_dense_scaled(a: &SparseSymMatrix, d: &[f64]) -> f64 {
    kappa_of_dense(&sym_scaled_dense(&dense_of(a), d))
}

/// `omega` of a dense SPD matrix straight from its eigenvalues:
/// arithmetic over geometric mean.
pub fn omega_of_dense(m: &DenseMatrix) -> f64 {
    let (vals, _) = dense_eig_oracle(m).unwrap();
    let n = vals.len() as f64;
    let am = vals.iter().sum::<f64>() / n;
    let gm = (vals.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    am / gm
}

/// Symmetric square root of a dense SPD matrix via its eigendecomposition.
pub fn spd_sqrt(m: &DenseMatrix) -> DenseMatrix {
    let (vals, q) = dense_eig_oracle(m).unwrap();
    let n = m.n();
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += q.get(i, k) * vals[k].sqrt() * q.get(j, k);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// Reference conjugate gradients for the diagonally preconditioned system,
/// run as plain CG on the symmetrically scaled problem.
///
/// With `M^-1 = Diag(d)` the preconditioned iteration on `A x = b` is
/// algebraically identical to unpreconditioned CG on
/// `(D^(1/2) A D^(1/2)) xt = D^(1/2) b` with `x = D^(1/2) xt`, and its
/// residual maps back as `r = D^(-1/2) rt`. This reference therefore stops
/// on the *back-mapped* residual `||D^(-1/2) rt|| / ||b||`, counting an
/// iteration after each solution update, which mirrors the library loop.
/// Returns `(x, iterations, converged)` in the original variables.
pub fn cg_diag_reference(
    a: &DenseMatrix,
    d: &[f64],
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize, bool) {
    let n = a.n();
    let s: Vec<f64> = d.iter().map(|&v| v.sqrt()).collect();
    let at = sym_scaled_dense(a, d);
    let bt: Vec<f64> = b.iter().zip(&s).map(|(bi, si)| bi * si).collect();
    let mut xt: Vec<f64> = x0.iter().zip(&s).map(|(xi, si)| xi / si).collect();
    let b_norm = norm2(b);
    let ax = at.matvec(&xt);
    let mut rt: Vec<f64> = bt.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut p = rt.clone();
    let mut rr = dot(&rt, &rt);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let ap = at.matvec(&p);
        let pap = dot(&p, &ap);
        assert!(pap > 0.0, "reference CG hit nonpositive curvature");
        let alpha = rr / pap;
        for i in 0..n {
            xt[i] += alpha * p[i];
            rt[i] -= alpha * ap[i];
        }
        iterations += 1;
        let back: f64 = rt
            .iter()
            .zip(&s)
            .map(|(ri, si)| (ri / si) * (ri / si))
            .sum::<f64>()
            .sqrt();
        if back / b_norm <= rel_tol {
            converged = true;
            break;
        }
        let rr_next = dot(&rt, &rt);
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = rt[i] + beta * p[i];
        }
        rr = rr_next;
    }
    let x: Vec<f64> = xt.iter().zip(&s).map(|(xi, si)| xi * si).collect();
    (x, iterations, converged)
}

/// Euclidean projection onto `{ u : u_i >= l, sum u <= -l }` with
/// `l = sqrt(2) (delta - 1)`, by Dykstra's alternating scheme over the box
/// and the halfspace. Slow but independent of the closed form it checks.
pub fn dykstra_project_omega_hat(v: &[f64], delta_hat: f64, sweeps: usize) -> Vec<f64> {
    let l = std::f64::consts::SQRT_2 * (delta_hat - 1.0);
    let cap = -l;
    let m = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    for _ in 0..sweeps {
        // box
        let y: Vec<f64> = (0..m).map(|i| (x[i] + p[i]).max(l)).collect();
        for i in 0..m {
            p[i] = x[i] + p[i] - y[i];
        }
        // halfspace
        let shifted: Vec<f64> = (0..m).map(|i| y[i] + q[i]).collect();
        let excess = shifted.iter().sum::<f64>() - cap;
        let adj = if excess > 0.0 { excess / m as f64 } else { 0.0 };
        for i in 0..m {
            x[i] = shifted[i] - adj;
            q[i] = shifted[i] - x[i];
        }
    }
    x
}

/// Max absolute difference between two equally long slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
