//! Evaluation of the two conditioning measures and their derivatives.
//!
//! For an SPD matrix `A` and a positive diagonal `d`, write
//! `S(d) = Diag(d)^(1/2) A Diag(d)^(1/2)` (same spectrum as `A * Diag(d)`):
//!
//! * `kappa(d) = lambda_max(S) / lambda_min(S)` - evaluated with the sparse
//!   eigensolver; its gradient at points with simple extreme eigenvalues is
//!   `kappa * [ (x1 .* x1)/(x1' D x1) - (xn .* xn)/(xn' D xn) ]` where
//!   `x1, xn` are right eigenvectors of the product `A * Diag(d)` for the
//!   extreme eigenvalues. At non-smooth points the same expression is a
//!   quasi-subgradient, which is all the subgradient solvers need.
//! * `omega(d) = (trace(S)/n) / det(S)^(1/n)` - evaluated in the log domain
//!   with a sparse Cholesky log-determinant. `omega >= 1` always, with
//!   equality exactly at positive multiples of the identity.

use crate::chol::logdet_spd;
use crate::dense::{spd_inverse_and_logdet, DenseMatrix};
use crate::eigen::{extreme_eigs_warm, product_eigvecs, EigConfig, WarmStart};
use crate::kappa::apply_vt;
use crate::sparse::{norm_inf, DiagScaling, SparseSymMatrix};
use crate::{Error, Result};

/// Coordinates with absolute value at or below this threshold count as
/// zeros of an eigenvector when looking for non-uniqueness certificates.
pub const SUPPORT_EPS: f64 = 1e-12;

/// `kappa` at a scaling, together with the extreme pairs that produced it.
#[derive(Debug, Clone)]
pub struct KappaEval {
    pub kappa: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Unit eigenvector of `S(d)` for `lambda_max`.
    pub u_max: Vec<f64>,
    /// Unit eigenvector of `S(d)` for `lambda_min`.
    pub u_min: Vec<f64>,
    /// Matrix-vector products spent by the eigensolver.
    pub eig_iterations: usize,
}

/// `omega` at a scaling, with the two log-domain ingredients.
#[derive(Debug, Clone)]
pub struct OmegaEval {
    pub omega: f64,
    /// `trace(S)/n`.
    pub trace_term: f64,
    /// `log det S`.
    pub logdet: f64,
}

/// Evaluates `kappa(d)` from a cold eigensolver start.
pub fn kappa_eval(a: &SparseSymMatrix, d: &DiagScaling, cfg: &EigConfig) -> Result<KappaEval> {
    kappa_eval_warm(a, d, cfg, &WarmStart::default())
}

/// Evaluates `kappa(d)`, warm-starting the eigensolver from earlier vectors.
pub fn kappa_eval_warm(
    a: &SparseSymMatrix,
    d: &DiagScaling,
    cfg: &EigConfig,
    warm: &WarmStart,
) -> Result<KappaEval> {
    let pairs = extreme_eigs_warm(a, d, cfg, warm)?;
    if !(pairs.min.value > 0.0) {
        return Err(Error::NotSpd(format!(
            "smallest eigenvalue of the scaled matrix is {:e}",
            pairs.min.value
        )));
    }
    Ok(KappaEval {
        kappa: pairs.max.value / pairs.min.value,
        lambda_max: pairs.max.value,
        lambda_min: pairs.min.value,
        u_max: pairs.max.vector,
        u_min: pairs.min.vector,
        eig_iterations: pairs.iterations,
    })
}

/// [`kappa_eval_warm`] with the solvers' retry policy: on eigensolver
/// non-convergence the solve is retried once with a 10x looser tolerance
/// before the error is propagated.
pub fn kappa_eval_retry(
    a: &SparseSymMatrix,
    d: &DiagScaling,
    cfg: &EigConfig,
    warm: &WarmStart,
) -> Result<KappaEval> {
    match kappa_eval_warm(a, d, cfg, warm) {
        Err(Error::NonConvergence { .. }) => {
            let looser = EigConfig {
                tol: cfg.tol * 10.0,
                ..cfg.clone()
            };
            kappa_eval_warm(a, d, &looser, warm)
        }
        other => other,
    }
}

/// Evaluates `omega(d)` in the log domain. The log-determinant comes from a
/// sparse Cholesky of the scaled matrix, so this call is also an SPD check.
pub fn omega_eval(a: &SparseSymMatrix, d: &DiagScaling) -> Result<OmegaEval> {
    let n = a.n();
    if d.len() != n {
        return Err(Error::InvalidInput(format!(
            "scaling has length {}, matrix dimension is {}",
            d.len(),
            n
        )));
    }
    let diag = a.diag();
    let trace: f64 = diag.iter().zip(d.values()).map(|(aii, di)| aii * di).sum();
    let trace_term = trace / n as f64;
    let logdet = logdet_spd(&a.sym_scaled(d)?)?;
    let omega = (trace_term.ln() - logdet / n as f64).exp();
    Ok(OmegaEval {
        omega,
        trace_term,
        logdet,
    })
}

/// The two rank-one terms of the `kappa` derivatives,
/// `(x1 .* x1)/(x1' D x1)` and `(xn .* xn)/(xn' D xn)`, with `x1, xn` the
/// right eigenvectors of `A * Diag(d)` mapped from the unit eigenvectors
/// of `S(d)`.
fn bracket_terms(d: &DiagScaling, eval: &KappaEval) -> (Vec<f64>, Vec<f64>) {
    let dv = d.values();
    let (x1, _) = product_eigvecs(&eval.u_max, d);
    let (xn, _) = product_eigvecs(&eval.u_min, d);
    let t1: f64 = x1.iter().zip(dv).map(|(x, di)| x * di * x).sum();
    let tn: f64 = xn.iter().zip(dv).map(|(x, di)| x * di * x).sum();
    (
        x1.iter().map(|x| (x * x) / t1).collect(),
        xn.iter().map(|x| (x * x) / tn).collect(),
    )
}

fn gradient_bracket(d: &DiagScaling, eval: &KappaEval) -> Vec<f64> {
    let (t1, tn) = bracket_terms(d, eval);
    t1.iter().zip(&tn).map(|(a, b)| a - b).collect()
}

/// Gradient (or quasi-subgradient) of `kappa` in the diagonal coordinates.
pub fn kappa_gradient_d(d: &DiagScaling, eval: &KappaEval) -> Vec<f64> {
    let mut g = gradient_bracket(d, eval);
    for gi in g.iter_mut() {
        *gi *= eval.kappa;
    }
    g
}

/// The normalized-space direction used by the subgradient solvers,
/// `(lambda_max / lambda_min) * bracket`. Numerically identical to
/// [`kappa_gradient_d`]; both names exist because the solvers speak of
/// directions while the calculus speaks of gradients.
pub fn subgrad_direction_d(d: &DiagScaling, eval: &KappaEval) -> Vec<f64> {
    kappa_gradient_d(d, eval)
}

/// [`subgrad_direction_d`] together with the natural magnitude of its two
/// terms, `kappa * (||term1||_inf + ||termn||_inf)`. A direction whose norm
/// is a tiny multiple of this scale is numerically zero (the cancellation
/// of two same-sized terms), which the solvers treat as stationarity.
pub fn subgrad_direction_with_scale(d: &DiagScaling, eval: &KappaEval) -> (Vec<f64>, f64) {
    let (t1, tn) = bracket_terms(d, eval);
    let dir: Vec<f64> = t1
        .iter()
        .zip(&tn)
        .map(|(a, b)| eval.kappa * (a - b))
        .collect();
    let scale = eval.kappa * (norm_inf(&t1) + norm_inf(&tn));
    (dir, scale)
}

/// Gradient of `kappa` reduced to the trace-preserving coordinates
/// `v` with `d = e + V v` (see [`crate::kappa::apply_v`]).
pub fn kappa_gradient_v(d: &DiagScaling, eval: &KappaEval) -> Vec<f64> {
    apply_vt(&kappa_gradient_d(d, eval))
}

/// Gradient of `omega` as a matrix function at a dense SPD argument:
/// `(1/(n det(B)^(1/n))) (I - (trace(B)/n) B^(-1))`.
pub fn omega_gradient(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.n();
    let (inv, logdet) = spd_inverse_and_logdet(b)?;
    let trace: f64 = (0..n).map(|i| b.get(i, i)).sum();
    let det_root = (logdet / n as f64).exp();
    let scale = 1.0 / (n as f64 * det_root);
    let tn = trace / n as f64;
    let mut g = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            g.set(i, j, scale * (id - tn * inv.get(i, j)));
        }
    }
    Ok(g)
}

/// Stationarity residual of `omega` over diagonal scalings at `d`:
/// `|| diag(S) - (trace(S)/n) e ||_inf`. Zero exactly at the
/// `omega`-optimal (Jacobi) scaling.
pub fn omega_stationarity_residual(a: &SparseSymMatrix, d: &DiagScaling) -> f64 {
    let n = a.n();
    let diag_s: Vec<f64> = a
        .diag()
        .iter()
        .zip(d.values())
        .map(|(aii, di)| aii * di)
        .collect();
    let mean = diag_s.iter().sum::<f64>() / n as f64;
    diag_s
        .iter()
        .fold(0.0f64, |m, v| m.max((v - mean).abs()))
}

/// First-order `kappa`-optimality residual at `d`:
/// `|| u1 .* u1 - un .* un ||_inf` for the unit eigenvectors of `S(d)`.
/// Zero iff the first-order optimality condition holds (for simple extreme
/// eigenvalues).
pub fn kappa_optimality_residual_from(eval: &KappaEval) -> f64 {
    let sq: Vec<f64> = eval
        .u_max
        .iter()
        .zip(&eval.u_min)
        .map(|(a, b)| a * a - b * b)
        .collect();
    norm_inf(&sq)
}

/// [`kappa_optimality_residual_from`] with the eigensolve included.
pub fn kappa_optimality_residual(
    a: &SparseSymMatrix,
    d: &DiagScaling,
    cfg: &EigConfig,
) -> Result<f64> {
    Ok(kappa_optimality_residual_from(&kappa_eval(a, d, cfg)?))
}

/// Certificate that the `kappa`-optimal scaling cannot be unique: if the
/// extreme eigenvectors share at least two zero coordinates, any
/// reweighting supported there moves `d` without touching the extreme
/// pairs. Returns a direction `z` with `z = 0` on the union of the
/// supports and `e' z = 0` (so `z` lies in the trace-preserving subspace),
/// or `None` when no such direction exists at the [`SUPPORT_EPS`] threshold.
pub fn nonuniqueness_certificate(u_max: &[f64], u_min: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(u_max.len(), u_min.len());
    let zero_coords: Vec<usize> = (0..u_max.len())
        .filter(|&i| u_max[i].abs() <= SUPPORT_EPS && u_min[i].abs() <= SUPPORT_EPS)
        .collect();
    if zero_coords.len() < 2 {
        return None;
    }
    let mut z = vec![0.0; u_max.len()];
    z[zero_coords[0]] = 1.0;
    z[zero_coords[1]] = -1.0;
    Some(z)
}
