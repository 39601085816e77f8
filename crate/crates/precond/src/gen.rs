//! Deterministic test-instance generators.
//!
//! [`gen_kappa_optimal`] builds sparse SPD matrices that are *exactly*
//! `kappa`-optimally scaled at `d = e`: the extreme eigenvectors are
//! `x = (alpha; beta)` and `y = (alpha; -beta)` with `||alpha|| = ||beta||`
//! on a common support, so `x .* x = y .* y` and the first-order optimality
//! condition holds by construction. The support carries a dense block
//! (the two extreme eigenvalues plus some interior ones); every other
//! coordinate is a pure diagonal entry with an interior eigenvalue, which
//! keeps the matrix sparse with the eigenvalues laid out on an even grid.
//!
//! [`gen_random_spd`] draws eigenvalues log-uniformly in `[1, kappa]`
//! (endpoints pinned, so the condition number is hit exactly up to
//! rounding) and stirs the diagonal matrix with random Givens rotations -
//! an orthogonal similarity, so the spectrum is preserved - until a
//! target density is reached.
//!
//! Everything is a pure function of its seed; generators with different
//! roles mix distinct tags into the seed so their streams are unrelated.

use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const TAG_KAPPA_OPT: u64 = 0x6b61_7070_61;
const TAG_RANDOM_SPD: u64 = 0x7370_6430;
const TAG_RHS: u64 = 0x7268_7331;
const TAG_X0: u64 = 0x7830_5f32;

fn seeded(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tag)
}

/// One standard-normal sample (Box-Muller, cosine branch).
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| std_normal(rng)).collect()
}

/// A generated instance together with its planted extreme eigenpairs.
#[derive(Debug, Clone)]
pub struct KappaOptimalInstance {
    pub matrix: SparseSymMatrix,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Unit eigenvector for `lambda_max` (zero off the support).
    pub x_max: Vec<f64>,
    /// Unit eigenvector for `lambda_min`.
    pub x_min: Vec<f64>,
    /// Coordinates carrying the dense block.
    pub support: Vec<usize>,
}

/// Support size: roughly `0.097 n`, even, at least 4 (2 when `n < 4`),
/// at most `n`.
fn support_size(n: usize) -> usize {
    if n < 4 {
        return 2;
    }
    let s = 2 * ((0.097 * n as f64) / 2.0).round() as usize;
    s.clamp(4, n - (n % 2 == 1) as usize).min(n)
}

/// Sparse SPD matrix that is `kappa`-optimally diagonally scaled at
/// `d = e`, with extreme eigenvalues exactly `lambda1 > lambdan > 0` and
/// the remaining spectrum on an even grid strictly between them.
pub fn gen_kappa_optimal(
    n: usize,
    lambda1: f64,
    lambdan: f64,
    seed: u64,
) -> Result<SparseSymMatrix> {
    Ok(gen_kappa_optimal_detailed(n, lambda1, lambdan, seed)?.matrix)
}

/// [`gen_kappa_optimal`] keeping the planted eigenpairs and support.
pub fn gen_kappa_optimal_detailed(
    n: usize,
    lambda1: f64,
    lambdan: f64,
    seed: u64,
) -> Result<KappaOptimalInstance> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "constructed instances need n >= 3, got {n}"
        )));
    }
    if !(lambda1 > lambdan && lambdan > 0.0) || !lambda1.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need lambda1 > lambdan > 0, got {lambda1} and {lambdan}"
        )));
    }
    let mut rng = seeded(seed, TAG_KAPPA_OPT);
    let s = support_size(n);
    let half = s / 2;

    // x = (alpha; beta), y = (alpha; -beta) with ||alpha|| = ||beta|| = 1/sqrt(2)
    let mut alpha = normal_vec(&mut rng, half);
    let mut beta = normal_vec(&mut rng, half);
    for v in [&mut alpha, &mut beta] {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a zero draw has probability zero; guard by re-rolling the axis
        let norm = if norm > 0.0 {
            norm
        } else {
            v[0] = 1.0;
            1.0
        };
        let target = std::f64::consts::FRAC_1_SQRT_2;
        for x in v.iter_mut() {
            *x *= target / norm;
        }
    }
    let mut x_b = Vec::with_capacity(s);
    x_b.extend_from_slice(&alpha);
    x_b.extend_from_slice(&beta);
    let mut y_b = Vec::with_capacity(s);
    y_b.extend_from_slice(&alpha);
    y_b.extend(beta.iter().map(|b| -b));

    // complete {x_b, y_b} to an orthonormal basis of R^s by two-pass
    // Gram-Schmidt of the standard basis vectors.  This near-identity
    // completion keeps each remaining basis vector concentrated on its own
    // axis, so the block diagonal inherits the spread of the block spectrum;
    // a random completion would average it flat and Jacobi scaling would
    // degenerate to a uniform rescale.
    let mut basis: Vec<Vec<f64>> = vec![x_b.clone(), y_b.clone()];
    let mut next_axis = 0;
    while basis.len() < s {
        let mut cand = if next_axis < s {
            let mut e = vec![0.0; s];
            e[next_axis] = 1.0;
            next_axis += 1;
            e
        } else {
            // every axis was (numerically) inside the span already; finish
            // with random draws
            normal_vec(&mut rng, s)
        };
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = cand.iter().zip(q).map(|(c, qi)| c * qi).sum();
                for (c, qi) in cand.iter_mut().zip(q) {
                    *c -= proj * qi;
                }
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // degenerate candidate; move on to the next one
        }
        for c in cand.iter_mut() {
            *c /= norm;
        }
        basis.push(cand);
    }

    // interior eigenvalue grid: lambda1 - (lambda1-lambdan) * i/(n-1), i = 1..n-2
    let gap = lambda1 - lambdan;
    let interior: Vec<f64> = (1..=n - 2)
        .map(|i| lambda1 - gap * i as f64 / (n - 1) as f64)
        .collect();

    // block spectrum: the two extremes plus s-2 interior values on an even
    // stride across the grid, so the block covers the whole spectral range
    // (and its diagonal entries vary over it)
    let m = interior.len();
    let mut on_block = vec![false; m];
    for t in 0..s.saturating_sub(2) {
        on_block[t * (m - 1) / (s - 3).max(1)] = true;
    }
    let mut block_vals = Vec::with_capacity(s);
    block_vals.push(lambda1);
    block_vals.push(lambdan);
    block_vals.extend(interior.iter().zip(&on_block).filter(|(_, b)| **b).map(|(v, _)| *v));

    // A_b = sum_k lambda_k q_k q_k'
    let mut a_b = vec![0.0; s * s];
    for (lam, q) in block_vals.iter().zip(&basis) {
        for i in 0..s {
            let li = lam * q[i];
            for j in 0..=i {
                a_b[i * s + j] += li * q[j];
            }
        }
    }

    // scatter the block over a random subset of coordinates; the rest of
    // the diagonal takes the remaining interior eigenvalues
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let support = perm[..s].to_vec();
    let mut triplets = Vec::with_capacity(s * (s + 1) / 2 + (n - s));
    for i in 0..s {
        for j in 0..=i {
            let v = a_b[i * s + j];
            let (r, c) = (support[i].max(support[j]), support[i].min(support[j]));
            triplets.push((r, c, v));
        }
    }
    let tail_vals = interior.iter().zip(&on_block).filter(|(_, b)| !**b).map(|(v, _)| *v);
    for (t, lam) in perm[s..].iter().zip(tail_vals) {
        triplets.push((*t, *t, lam));
    }
    let matrix = SparseSymMatrix::from_lower_triplets(n, &triplets)?;

    let mut x_max = vec![0.0; n];
    let mut x_min = vec![0.0; n];
    for (b, g) in support.iter().enumerate() {
        x_max[*g] = x_b[b];
        x_min[*g] = y_b[b];
    }
    Ok(KappaOptimalInstance {
        matrix,
        lambda_max: lambda1,
        lambda_min: lambdan,
        x_max,
        x_min,
        support,
    })
}

/// Random SPD matrix with condition number `target_kappa` (exact up to
/// rounding: the extreme eigenvalues are pinned at `target_kappa` and 1)
/// and approximately the requested density.
pub fn gen_random_spd(
    n: usize,
    density: f64,
    target_kappa: f64,
    seed: u64,
) -> Result<SparseSymMatrix> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    if !(target_kappa >= 1.0) || !target_kappa.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target condition number must be >= 1, got {target_kappa}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if density < 1.0 / n as f64 {
        return Err(Error::InvalidInput(format!(
            "density {density} is below the diagonal's {:.3e}",
            1.0 / n as f64
        )));
    }
    if target_kappa == 1.0 {
        // every orthogonal similarity of the identity is the identity
        return SparseSymMatrix::identity(n);
    }

    let mut rng = seeded(seed, TAG_RANDOM_SPD);
    // eigenvalues log-uniform in [1, kappa], endpoints pinned
    let ln_k = target_kappa.ln();
    let mut lam = Vec::with_capacity(n);
    lam.push(target_kappa);
    for _ in 0..n - 2 {
        lam.push((rng.gen::<f64>() * ln_k).exp());
    }
    lam.push(1.0);

    // full symmetric storage (both triangles) keyed by (row, col)
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, l) in lam.iter().enumerate() {
        entries.insert((i, i), *l);
    }

    let target_nnz = (density * (n * n) as f64).ceil() as usize;
    let max_rotations = 200 * n;
    let mut rotations = 0;
    while entries.len() < target_nnz && rotations < max_rotations {
        rotations += 1;
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let (sin, cos) = theta.sin_cos();

        // columns touched by rows i and j
        let mut cols: Vec<usize> = entries
            .range((i, 0)..=(i, n - 1))
            .map(|((_, c), _)| *c)
            .chain(entries.range((j, 0)..=(j, n - 1)).map(|((_, c), _)| *c))
            .filter(|c| *c != i && *c != j)
            .collect();
        cols.sort_unstable();
        cols.dedup();

        for c in cols {
            let aic = entries.get(&(i, c)).copied().unwrap_or(0.0);
            let ajc = entries.get(&(j, c)).copied().unwrap_or(0.0);
            let new_i = cos * aic + sin * ajc;
            let new_j = -sin * aic + cos * ajc;
            for (key, val) in [((i, c), new_i), ((j, c), new_j)] {
                let mirrored = (key.1, key.0);
                if val == 0.0 {
                    entries.remove(&key);
                    entries.remove(&mirrored);
                } else {
                    entries.insert(key, val);
                    entries.insert(mirrored, val);
                }
            }
        }
        // the 2x2 block R [aii aij; aij ajj] R'
        let aii = entries.get(&(i, i)).copied().unwrap_or(0.0);
        let ajj = entries.get(&(j, j)).copied().unwrap_or(0.0);
        let aij = entries.get(&(i, j)).copied().unwrap_or(0.0);
        let new_ii = cos * cos * aii + 2.0 * sin * cos * aij + sin * sin * ajj;
        let new_jj = sin * sin * aii - 2.0 * sin * cos * aij + cos * cos * ajj;
        let new_ij = (cos * cos - sin * sin) * aij + sin * cos * (ajj - aii);
        entries.insert((i, i), new_ii);
        entries.insert((j, j), new_jj);
        if new_ij == 0.0 {
            entries.remove(&(i, j));
            entries.remove(&(j, i));
        } else {
            entries.insert((i, j), new_ij);
            entries.insert((j, i), new_ij);
        }
    }

    let triplets: Vec<(usize, usize, f64)> = entries
        .iter()
        .filter(|((r, c), _)| r >= c)
        .map(|((r, c), v)| (*r, *c, *v))
        .collect();
    SparseSymMatrix::from_lower_triplets(n, &triplets)
}

/// Standard-normal right-hand side, deterministic in the seed.
pub fn rhs_gen(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed, TAG_RHS);
    normal_vec(&mut rng, n)
}

/// `count` standard-normal starting points, deterministic in the seed.
pub fn x0_gen(n: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed, TAG_X0);
    (0..count).map(|_| normal_vec(&mut rng, n)).collect()
}
