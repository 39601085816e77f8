//! Acceptance gate: one test per shipping criterion. Each test ends by
//! printing a single `criterion N: PASS` line (visible under
//! `cargo test --test acceptance -- --nocapture`), so the suite doubles as a
//! sign-off checklist. Every quantity asserted here is checked against an
//! independent reference: dense eigendecompositions, from-scratch conjugate
//! gradients, finite differences, or byte-level file comparison.

mod common;

use std::time::Instant;

use common::*;
use precond::bench::{parse_manifest, run_bench, BenchOptions};
use precond::cond::{
    kappa_eval, kappa_gradient_d, kappa_gradient_v, kappa_optimality_residual, omega_eval,
    omega_stationarity_residual,
};
use precond::dense::{dense_eig_oracle, DenseMatrix};
use precond::eigen::{product_eigvecs, EigConfig};
use precond::gen::{gen_kappa_optimal, gen_random_spd, rhs_gen, x0_gen};
use precond::kappa::{
    solve_linesearch_from, solve_projected_subgrad_from, solve_simplex_subgrad_from,
    v_of_scaling, w_of_v, LineSearchConfig, SubgradConfig, FEASIBILITY_SLACK,
};
use precond::omega::{jacobi_scaling, omega_block_optimal};
use precond::pcg::{pcg_multi_start, pcg_solve, PcgConfig, Precond};
use precond::sparse::{norm2, BlockPartition, DiagScaling, SparseSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform_rng(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen::<f64>() * (hi.ln() - lo.ln()) + lo.ln()).exp()
}

// -------------------------------------------------------------- criterion 1

/// On constructed instances whose optimal diagonal scaling is the identity,
/// the identity must pass the first-order optimality test and all three
/// solvers, started from a random rescaling, must land within 5% of the
/// designed optimal condition number.
#[test]
fn criterion_1_solvers_recover_planted_optimum() {
    let t0 = Instant::now();
    let kappa_star = 1e3;
    let eig = EigConfig::default();
    let mut worst: f64 = 0.0;
    for n in [50usize, 200, 1000] {
        let a = gen_kappa_optimal(n, kappa_star, 1.0, 11).unwrap();
        let resid = kappa_optimality_residual(&a, &DiagScaling::ones(n), &eig).unwrap();
        assert!(
            resid <= 1e-8,
            "n = {n}: identity fails the optimality certificate, residual {resid:e}"
        );

        let d0 = DiagScaling::new(log_uniform(n, 0.8, 1.25, 100 + n as u64)).unwrap();
        let v0 = v_of_scaling(&d0);

        let cfg = SubgradConfig {
            max_iter: 2000,
            ..SubgradConfig::default()
        };
        let (_, tr_proj) = solve_projected_subgrad_from(&a, &d0, &cfg).unwrap();
        let cfg = SubgradConfig {
            max_iter: 2000,
            ..SubgradConfig::simplex_default()
        };
        let (_, tr_simplex) = solve_simplex_subgrad_from(&a, &v0, &cfg).unwrap();
        let cfg = LineSearchConfig {
            main_tol: 1e-12,
            ..LineSearchConfig::default()
        };
        let (_, tr_ls) = solve_linesearch_from(&a, &v0, &cfg).unwrap();

        for (solver, best) in [
            ("projected subgradient", tr_proj.best_kappa),
            ("simplex subgradient", tr_simplex.best_kappa),
            ("line search", tr_ls.best_kappa),
        ] {
            let ratio = best / kappa_star;
            worst = worst.max(ratio);
            assert!(
                ratio <= 1.05,
                "n = {n}: {solver} reached kappa = {best}, {ratio:.4}x the optimum"
            );
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "criterion 1 took {secs:.0} s");
    println!(
        "criterion 1: PASS — identity certified optimal (residual <= 1e-8) and all three \
         solvers reached <= {worst:.4}x the planted optimum at n = 50, 200, 1000 ({secs:.1} s)"
    );
}

// -------------------------------------------------------------- criterion 2

fn random_block_factor(partition: &BlockPartition, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = partition.n();
    let mut f = DenseMatrix::zeros(n);
    for k in 0..partition.num_blocks() {
        let range = partition.range(k);
        let m = range.len();
        // M M' + I/10 is SPD for any square M
        let entries: Vec<f64> = (0..m * m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        for i in 0..m {
            for j in 0..m {
                let mut sum = if i == j { 0.1 } else { 0.0 };
                for l in 0..m {
                    sum += entries[i * m + l] * entries[j * m + l];
                }
                f.set(range.start + i, range.start + j, sum);
            }
        }
    }
    f
}

/// The closed-form `omega` minimizers: the inverse-diagonal scaling must give
/// an exactly unit diagonal, satisfy stationarity to near round-off, and beat
/// 500 random diagonal scalings; the block analogue must turn every diagonal
/// block into the identity and beat 500 random SPD block factors with the
/// same partition.
#[test]
fn criterion_2_closed_form_omega_beats_random_scalings() {
    let t0 = Instant::now();

    let a = gen_random_spd(48, 0.12, 300.0, 202).unwrap();
    let d = jacobi_scaling(&a);
    for (i, (aii, di)) in a.diag().iter().zip(d.values()).enumerate() {
        assert!(
            (aii * di - 1.0).abs() <= f64::EPSILON,
            "scaled diagonal entry {i} is {:.17} rather than 1",
            aii * di
        );
    }
    let stat = omega_stationarity_residual(&a, &d);
    assert!(stat <= 1e-12, "stationarity residual {stat:e}");
    let omega_opt = omega_eval(&a, &d).unwrap().omega;
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    for case in 0..500 {
        let dv: Vec<f64> = (0..48).map(|_| log_uniform_rng(&mut rng, 0.1, 10.0)).collect();
        let o = omega_eval(&a, &DiagScaling::new(dv).unwrap()).unwrap().omega;
        assert!(
            omega_opt <= o * (1.0 + 1e-12),
            "case {case}: random diagonal reached omega = {o} below the closed form {omega_opt}"
        );
    }

    let ab = gen_random_spd(24, 0.3, 150.0, 203).unwrap();
    let partition = BlockPartition::new(vec![4, 6, 3, 7, 4]).unwrap();
    let factor = omega_block_optimal(&ab, &partition).unwrap();
    let f = factor.to_dense();
    let scaled = f.mul(&dense_of(&ab)).mul(&f);
    for k in 0..partition.num_blocks() {
        let range = partition.range(k);
        for i in range.clone() {
            for j in range.clone() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (scaled.get(i, j) - want).abs() <= 1e-10,
                    "block {k}: scaled diagonal block differs from identity at ({i}, {j})"
                );
            }
        }
    }
    let omega_block = omega_of_dense(&scaled);
    for case in 0..500 {
        let fr = random_block_factor(&partition, &mut rng);
        let o = omega_of_dense(&fr.mul(&dense_of(&ab)).mul(&fr));
        assert!(
            omega_block <= o * (1.0 + 1e-12),
            "case {case}: random block factor reached omega = {o} below the closed form \
             {omega_block}"
        );
    }

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 2 took {secs:.0} s");
    println!(
        "criterion 2: PASS — inverse-diagonal scaling (unit diagonal exact, stationarity \
         {stat:.1e}) and block closed form beat 500 random scalings each ({secs:.1} s)"
    );
}

// -------------------------------------------------------------- criterion 3

/// Analytic derivatives agree with central finite differences of an
/// independently computed (dense) condition number, in both the diagonal and
/// the normalized simplex coordinates, and the rank-one subgradient term is a
/// global underestimator of the largest product eigenvalue.
#[test]
fn criterion_3_gradients_match_finite_differences() {
    let n = 20;
    let eig = EigConfig::default();
    let mut accepted = 0u32;
    let mut attempt = 0u64;
    while accepted < 20 {
        attempt += 1;
        assert!(attempt <= 200, "gap filter rejected too many instances");
        let a = gen_random_spd(n, 0.3, 200.0, 3000 + attempt).unwrap();
        let raw = log_uniform(n, 0.5, 2.0, 4000 + attempt);
        // normalize onto the trace-n slice so the simplex coordinates of the
        // same point are exact
        let sum: f64 = raw.iter().sum();
        let dv: Vec<f64> = raw.iter().map(|v| v * n as f64 / sum).collect();

        // require simple extreme eigenvalues: central differences only see
        // the gradient where it exists
        let (vals, _) = dense_eig_oracle(&sym_scaled_dense(&dense_of(&a), &dv)).unwrap();
        let span = vals[0];
        if vals[0] - vals[1] < 1e-6 * span || vals[n - 2] - vals[n - 1] < 1e-6 * span {
            continue;
        }
        accepted += 1;

        let d = DiagScaling::new(dv.clone()).unwrap();
        let eval = kappa_eval(&a, &d, &eig).unwrap();

        let gd = kappa_gradient_d(&d, &eval);
        let mut fd = vec![0.0; n];
        for j in 0..n {
            let h = 1e-6 * (1.0 + dv[j].abs());
            let mut plus = dv.clone();
            let mut minus = dv.clone();
            plus[j] += h;
            minus[j] -= h;
            fd[j] = (kappa_dense_scaled(&a, &plus) - kappa_dense_scaled(&a, &minus)) / (2.0 * h);
        }
        let scale = gd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let diff = max_abs_diff(&gd, &fd);
        assert!(
            diff <= 1e-5 * scale,
            "attempt {attempt}: diagonal-coordinate gradient differs from finite \
             differences by {diff:e} against scale {scale:e}"
        );

        let gv = kappa_gradient_v(&d, &eval);
        let v0 = v_of_scaling(&d);
        let mut fdv = vec![0.0; n - 1];
        for j in 0..n - 1 {
            let h = 1e-6 * (1.0 + v0[j].abs());
            let mut plus = v0.clone();
            let mut minus = v0.clone();
            plus[j] += h;
            minus[j] -= h;
            fdv[j] = (kappa_dense_scaled(&a, &w_of_v(&plus))
                - kappa_dense_scaled(&a, &w_of_v(&minus)))
                / (2.0 * h);
        }
        let scale_v = gv.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let diff_v = max_abs_diff(&gv, &fdv);
        assert!(
            diff_v <= 1e-5 * scale_v,
            "attempt {attempt}: simplex-coordinate gradient differs from finite \
             differences by {diff_v:e} against scale {scale_v:e}"
        );
    }

    // global underestimator: for the largest eigenvalue of the product
    // family, the rank-one linearization at d never overshoots the true
    // value at any other point y
    let a = gen_random_spd(24, 0.25, 100.0, 55).unwrap();
    let dense = dense_of(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    for case in 0..200 {
        let dv: Vec<f64> = (0..24).map(|_| log_uniform_rng(&mut rng, 0.2, 5.0)).collect();
        let yv: Vec<f64> = (0..24).map(|_| log_uniform_rng(&mut rng, 0.2, 5.0)).collect();
        let d = DiagScaling::new(dv.clone()).unwrap();
        let eval = kappa_eval(&a, &d, &eig).unwrap();
        let (x1, _) = product_eigvecs(&eval.u_max, &d);
        let xdx: f64 = x1.iter().zip(&dv).map(|(x, di)| x * x * di).sum();
        let coeff = eval.lambda_max / xdx;
        let lhs: f64 = x1
            .iter()
            .zip(yv.iter().zip(&dv))
            .map(|(x, (y, di))| coeff * x * x * (y - di))
            .sum();
        let (vy, _) = dense_eig_oracle(&sym_scaled_dense(&dense, &yv)).unwrap();
        let (vd, _) = dense_eig_oracle(&sym_scaled_dense(&dense, &dv)).unwrap();
        let rhs = vy[0] - vd[0];
        assert!(
            lhs <= rhs + 1e-9 * vy[0].max(vd[0]),
            "case {case}: linearization overshoots: {lhs} > {rhs}"
        );
    }

    println!(
        "criterion 3: PASS — gradients match central differences to 1e-5 on 20 instances \
         in both coordinate systems; subgradient linearization stayed below the true \
         largest eigenvalue on 200 random pairs"
    );
}

// -------------------------------------------------------------- criterion 4

fn reduction_percent(a: &SparseSymMatrix) -> f64 {
    let n = a.n();
    let before = kappa_eval(a, &DiagScaling::ones(n), &EigConfig::default())
        .unwrap()
        .kappa;
    let (_, tr) =
        solve_simplex_subgrad_from(a, &vec![0.0; n - 1], &SubgradConfig::simplex_default())
            .unwrap();
    (before - tr.best_kappa) / before * 100.0
}

/// A badly row/column-scaled matrix must lose most of its condition number
/// to the simplex solver. Runs on the benchmark files when present; otherwise
/// on proxy instances of the same sizes with a planted diagonal ill-scaling.
#[test]
fn criterion_4_kappa_reduction_on_benchmark_instances() {
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/suitesparse");
    let files = [data.join("494_bus.mtx"), data.join("nos4.mtx")];
    if files.iter().all(|p| p.exists()) {
        let mut results = Vec::new();
        for (path, need) in files.iter().zip([80.0, 30.0]) {
            let t0 = Instant::now();
            let file = std::fs::File::open(path).unwrap();
            let a = precond::mm::read_matrix_market_from(std::io::BufReader::new(file)).unwrap();
            let red = reduction_percent(&a);
            let secs = t0.elapsed().as_secs_f64();
            assert!(
                red >= need,
                "{}: reduction {red:.1}% below the {need}% bar",
                path.display()
            );
            assert!(secs < 60.0, "{}: took {secs:.0} s", path.display());
            results.push(format!("{} {red:.1}% ({secs:.1} s)", path.display()));
        }
        println!("criterion 4: PASS — {}", results.join(", "));
        return;
    }

    // proxy instances: random SPD core, symmetrically scaled by squared
    // magnitudes spanning [1, s_max^2] so the solver has real work to undo
    let mut results = Vec::new();
    for (n, density, kappa_b, s_max, seed, need) in [
        (494usize, 0.007, 50.0, 100.0f64, 21u64, 80.0),
        (100, 0.06, 50.0, 30.0, 22, 30.0),
    ] {
        let t0 = Instant::now();
        let b = gen_random_spd(n, density, kappa_b, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
        let s2: Vec<f64> = (0..n)
            .map(|_| (rng.gen::<f64>() * s_max.ln() * 2.0).exp())
            .collect();
        let a = b.sym_scaled(&DiagScaling::new(s2).unwrap()).unwrap();
        let red = reduction_percent(&a);
        let secs = t0.elapsed().as_secs_f64();
        assert!(
            red >= need,
            "proxy n = {n}: reduction {red:.1}% below the {need}% bar"
        );
        assert!(secs < 60.0, "proxy n = {n}: took {secs:.0} s");
        results.push(format!("n = {n}: {red:.1}% (bar {need}%, {secs:.1} s)"));
    }
    println!(
        "criterion 4: PASS (proxy) — benchmark files absent; ill-scaled proxy instances: {}",
        results.join(", ")
    );
}

// -------------------------------------------------------------- criterion 5

/// The large constructed instance keeps its designed sparsity, makes the
/// inverse-diagonal scaling measurably worse than the built-in optimum in
/// condition number, and still shows the inverse-diagonal scaling winning
/// the actual preconditioned solve by a wide margin — condition number alone
/// does not predict iteration counts.
#[test]
fn criterion_5_large_planted_instance_behaves_as_designed() {
    let t0 = Instant::now();
    let n = 5000;
    let kappa_star = 1e4;
    let a = gen_kappa_optimal(n, kappa_star, 1.0, 7).unwrap();

    let density = a.density();
    assert!(
        (density - 9.4e-3).abs() <= 0.15 * 9.4e-3,
        "density {density:.3e} strays from the 9.4e-3 design"
    );

    let jacobi = jacobi_scaling(&a);
    let kappa_j = kappa_eval(&a, &jacobi, &EigConfig::default()).unwrap().kappa;
    let kappa_ratio = kappa_j / kappa_star;
    assert!(
        (2.0..=6.0).contains(&kappa_ratio),
        "kappa(jacobi)/kappa(identity) = {kappa_ratio:.2} outside [2, 6]"
    );

    let b = rhs_gen(n, 70);
    let starts = x0_gen(n, 71, 5);
    let cfg = PcgConfig {
        rel_tol: 1e-7,
        max_iter: None,
        record_residuals: false,
    };
    let plain = pcg_multi_start(&a, &b, Precond::Identity, &starts, &cfg).unwrap();
    let jac = pcg_multi_start(&a, &b, Precond::Diagonal(&jacobi), &starts, &cfg).unwrap();
    assert!(plain.all_converged, "unpreconditioned runs did not converge");
    assert!(jac.all_converged, "diagonally scaled runs did not converge");
    let iter_ratio = plain.mean_iterations / jac.mean_iterations;
    assert!(
        iter_ratio >= 5.0,
        "iteration ratio unpreconditioned/jacobi = {iter_ratio:.1} below 5"
    );

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 300.0, "criterion 5 took {secs:.0} s");
    println!(
        "criterion 5: PASS — n = 5000: density {density:.2e}, kappa ratio {kappa_ratio:.2} \
         in [2, 6], yet the scaled solve wins iterations {iter_ratio:.1}x ({secs:.0} s)"
    );
}

// -------------------------------------------------------------- criterion 6

/// Feasibility invariants hold with runtime assertions compiled in: the box
/// solver never leaves `d >= delta`, the simplex solver keeps `w = e + V v`
/// on the slice and above its floor, the line search is monotone, and a full
/// benchmark sweep survives under the same assertions.
#[test]
fn criterion_6_iterates_respect_feasibility() {
    assert!(
        cfg!(debug_assertions),
        "this gate needs the in-solver feasibility assertions compiled in"
    );

    let a = gen_random_spd(40, 0.15, 500.0, 601).unwrap();
    let d0 = DiagScaling::new(log_uniform(40, 0.05, 20.0, 602)).unwrap();

    let proj_cfg = SubgradConfig {
        delta: 0.4,
        tol: 0.0,
        max_iter: 300,
        ..SubgradConfig::default()
    };
    let (best_p, _) = solve_projected_subgrad_from(&a, &d0, &proj_cfg).unwrap();
    assert!(
        best_p
            .values()
            .iter()
            .all(|&di| di >= proj_cfg.delta * (1.0 - FEASIBILITY_SLACK)),
        "projected iterate left the box"
    );

    let simplex_cfg = SubgradConfig {
        delta: 0.05,
        tol: 0.0,
        max_iter: 300,
        ..SubgradConfig::simplex_default()
    };
    let (best_s, _) = solve_simplex_subgrad_from(&a, &v_of_scaling(&d0), &simplex_cfg).unwrap();
    assert!(
        best_s
            .values()
            .iter()
            .all(|&wi| wi >= simplex_cfg.delta * (1.0 - FEASIBILITY_SLACK)),
        "simplex iterate fell below its floor"
    );
    let sum: f64 = best_s.values().iter().sum();
    assert!(
        (sum - 40.0).abs() <= 1e-9 * 40.0,
        "simplex iterate left the trace slice: sum = {sum}"
    );

    let (best_l, tr_l) = solve_linesearch_from(&a, &v_of_scaling(&d0), &LineSearchConfig::default()).unwrap();
    assert!(best_l.values().iter().all(|&wi| wi > 0.0));
    for pair in tr_l.rows.windows(2) {
        assert!(
            pair[1].kappa <= pair[0].kappa,
            "line search went uphill: {} -> {}",
            pair[0].kappa,
            pair[1].kappa
        );
    }

    let man = parse_manifest(
        "[instance]\n\
         table = kappa-reduction\n\
         name = planted\n\
         gen = kappa-opt n=30 lambda1=200 seed=31\n\
         methods = proj, simplex, linesearch\n\
         seed = 32\n\
         maxiter = 150\n\
         \n\
         [instance]\n\
         table = pcg-comparison\n\
         name = rand\n\
         gen = random n=40 density=0.12 kappa=300 seed=33\n\
         precond = none, jacobi, kappa-simplex, blocks\n\
         blocks = 8, 8, 8, 8, 8\n\
         seed = 34\n\
         maxiter = 150\n\
         \n\
         [instance]\n\
         table = kappa-vs-omega\n\
         name = mixed\n\
         gen = random n=24 density=0.2 kappa=100 seed=35\n\
         seed = 36\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_bench(&man, dir.path(), &BenchOptions::default()).unwrap();
    assert_eq!(summary.failures, 0, "benchmark sweep recorded failures");
    assert!(summary.rows_written.iter().all(|&r| r > 0));

    println!(
        "criterion 6: PASS — box, slice, and monotonicity invariants held on stressed runs \
         and a full benchmark sweep ran clean with assertions live"
    );
}

// -------------------------------------------------------------- criterion 7

/// At oracle-checkable sizes the sparse paths must agree with dense
/// references: condition measures and extreme eigenpairs to 1e-9 relative,
/// the preconditioned solver with a from-scratch conjugate gradient loop to
/// one iteration and matching solutions.
#[test]
fn criterion_7_sparse_results_match_dense_oracles() {
    let tight = EigConfig {
        tol: 1e-12,
        ..EigConfig::default()
    };

    let a1 = gen_random_spd(96, 0.06, 1e3, 701).unwrap();
    let a2 = gen_kappa_optimal(128, 500.0, 1.0, 703).unwrap();
    let cases: Vec<(&SparseSymMatrix, Vec<f64>, &str)> = vec![
        (&a1, vec![1.0; 96], "random n=96, identity scaling"),
        (&a1, log_uniform(96, 0.2, 5.0, 702), "random n=96, log-uniform scaling"),
        (&a2, jacobi_scaling(&a2).into_values(), "planted n=128, inverse-diagonal scaling"),
    ];
    for (a, dv, what) in &cases {
        let d = DiagScaling::new(dv.clone()).unwrap();
        let s = sym_scaled_dense(&dense_of(a), dv);
        let (vals, vecs) = dense_eig_oracle(&s).unwrap();
        let n = a.n();

        let eval = kappa_eval(a, &d, &tight).unwrap();
        assert!(
            (eval.lambda_max - vals[0]).abs() <= 1e-9 * vals[0],
            "{what}: lambda_max {} vs dense {}",
            eval.lambda_max,
            vals[0]
        );
        assert!(
            (eval.lambda_min - vals[n - 1]).abs() <= 1e-9 * vals[n - 1],
            "{what}: lambda_min {} vs dense {}",
            eval.lambda_min,
            vals[n - 1]
        );
        let kappa_dense = vals[0] / vals[n - 1];
        assert!(
            (eval.kappa - kappa_dense).abs() <= 1e-9 * kappa_dense,
            "{what}: kappa {} vs dense {kappa_dense}",
            eval.kappa
        );
        for (u, col) in [(&eval.u_max, 0), (&eval.u_min, n - 1)] {
            let align: f64 = (0..n).map(|i| u[i] * vecs.get(i, col)).sum();
            assert!(
                1.0 - align.abs() <= 1e-7,
                "{what}: eigenvector column {col} misaligned, |<u, q>| = {}",
                align.abs()
            );
        }

        let omega = omega_eval(a, &d).unwrap().omega;
        let omega_dense = omega_of_dense(&s);
        assert!(
            (omega - omega_dense).abs() <= 1e-9 * omega_dense,
            "{what}: omega {omega} vs dense {omega_dense}"
        );
    }

    // preconditioned solves against an independently written CG loop
    for (a, seed) in [(&a1, 704u64), (&a2, 706)] {
        let n = a.n();
        let dense = dense_of(a);
        let b = rhs_gen(n, seed);
        let x0 = x0_gen(n, seed + 1, 1).remove(0);
        let cfg = PcgConfig {
            rel_tol: 1e-7,
            max_iter: Some(20_000),
            record_residuals: false,
        };
        let scalings = [vec![1.0; n], jacobi_scaling(a).into_values()];
        for (case, dv) in scalings.iter().enumerate() {
            let d = DiagScaling::new(dv.clone()).unwrap();
            let precond = if case == 0 {
                Precond::Identity
            } else {
                Precond::Diagonal(&d)
            };
            let (x, report) = pcg_solve(a, &b, precond, Some(&x0), &cfg).unwrap();
            let (x_ref, iters_ref, conv_ref) =
                cg_diag_reference(&dense, dv, &b, &x0, cfg.rel_tol, 20_000);
            assert!(report.converged && conv_ref, "n = {n}, case {case}: no convergence");
            assert!(
                report.iterations.abs_diff(iters_ref) <= 1,
                "n = {n}, case {case}: {} iterations vs reference {iters_ref}",
                report.iterations
            );
            let diff: f64 = x
                .iter()
                .zip(&x_ref)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            assert!(
                diff <= 1e-8 * (1.0 + norm2(&x)),
                "n = {n}, case {case}: solutions differ by {diff:e}"
            );
        }
    }

    println!(
        "criterion 7: PASS — condition measures and extreme eigenpairs match dense oracles \
         to 1e-9 relative on three scaled instances; solver agrees with a reference \
         conjugate gradient loop within one iteration on four solves"
    );
}

// -------------------------------------------------------------- criterion 8

/// Two benchmark sweeps of the same manifest — and a third with four worker
/// threads — must produce byte-identical CSV files.
#[test]
fn criterion_8_benchmark_runs_reproduce_bytes() {
    let man = parse_manifest(
        "[instance]\n\
         table = kappa-reduction\n\
         name = planted-a\n\
         gen = kappa-opt n=24 lambda1=150 seed=81\n\
         methods = proj, simplex, linesearch\n\
         seed = 82\n\
         maxiter = 120\n\
         \n\
         [instance]\n\
         table = kappa-reduction\n\
         name = rand-b\n\
         gen = random n=30 density=0.15 kappa=250 seed=83\n\
         methods = simplex\n\
         seed = 84\n\
         maxiter = 120\n\
         \n\
         [instance]\n\
         table = pcg-comparison\n\
         name = rand-c\n\
         gen = random n=36 density=0.12 kappa=400 seed=85\n\
         precond = none, jacobi, kappa-simplex, blocks\n\
         blocks = 12, 12, 12\n\
         seed = 86\n\
         maxiter = 120\n\
         \n\
         [instance]\n\
         table = kappa-vs-omega\n\
         name = rand-d\n\
         gen = random n=20 density=0.25 kappa=60 seed=87\n\
         seed = 88\n",
    )
    .unwrap();

    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let opts = [
        BenchOptions::default(),
        BenchOptions::default(),
        BenchOptions {
            workers: 4,
            ..BenchOptions::default()
        },
    ];
    let mut summaries = Vec::new();
    for (dir, opt) in dirs.iter().zip(&opts) {
        let summary = run_bench(&man, dir.path(), opt).unwrap();
        assert_eq!(summary.failures, 0);
        assert!(summary.rows_written.iter().all(|&r| r > 0));
        summaries.push(summary);
    }
    for i in 0..3 {
        let base = std::fs::read(&summaries[0].files[i]).unwrap();
        assert!(!base.is_empty());
        let lines = base.iter().filter(|&&c| c == b'\n').count();
        assert_eq!(lines, summaries[0].rows_written[i] + 1, "file {i}: row count");
        for s in &summaries[1..] {
            let other = std::fs::read(&s.files[i]).unwrap();
            assert_eq!(
                base, other,
                "table {i} differs between runs of the same manifest"
            );
        }
    }

    println!(
        "criterion 8: PASS — repeated sweeps (including one with four worker threads) \
         wrote byte-identical CSVs for all three tables"
    );
}
