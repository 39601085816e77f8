//! `precond` — condition-number and mean-to-geometric-mean optimal
//! preconditioning for sparse SPD matrices, plus a PCG test bench.
//!
//! Exit codes: 0 success; 1 bad input or a failed computation; 2 usage
//! errors (from argument parsing); 3 a solver aborted mid-run after making
//! progress (partial results are still written).

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use precond::bench::{
    load_source, parse_gen_source, read_manifest, run_bench, write_trace_csv, BenchOptions,
    Method, PCG_STARTS,
};
use precond::chol::logdet_spd;
use precond::cond::{kappa_eval_retry, omega_eval};
use precond::dense::spd_inverse_and_logdet;
use precond::eigen::{EigConfig, WarmStart};
use precond::gen::{rhs_gen, x0_gen};
use precond::kappa::{
    solve_linesearch, solve_projected_subgrad, solve_simplex_subgrad, LineSearchConfig,
    StopReason, SubgradConfig,
};
use precond::mm::{read_matrix_market, read_vector, write_matrix_market, write_vector};
use precond::omega::{jacobi_scaling, omega_block_optimal, BlockDiagFactor};
use precond::pcg::{pcg_multi_start, PcgAverage, PcgConfig, Precond};
use precond::sparse::{BlockPartition, DiagScaling, SparseSymMatrix};
use precond::{Error, Result};

#[derive(Parser)]
#[command(
    name = "precond",
    version,
    about = "Optimal diagonal and block-diagonal preconditioners for sparse SPD matrices"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Report size, density, and both figures of merit of a matrix.
    Condition(ConditionArgs),
    /// Minimize the condition number over diagonal scalings.
    KappaOpt(KappaOptArgs),
    /// Apply the closed-form mean-ratio-optimal diagonal or block scaling.
    OmegaOpt(OmegaOptArgs),
    /// Run the 5-start averaged preconditioned CG protocol.
    Pcg(PcgArgs),
    /// Generate a test matrix and write it as a Matrix Market file.
    Gen(GenArgs),
    /// Run a benchmark manifest and write the three CSV tables.
    Bench(BenchArgs),
}

/// Where the matrix comes from: a Matrix Market file, or a generator spec.
#[derive(Args)]
struct InputArgs {
    /// Matrix Market file holding the SPD matrix.
    #[arg(value_name = "MATRIX", required_unless_present = "gen")]
    matrix: Option<PathBuf>,
    /// Generate the matrix instead, e.g. "kappa-opt n=50 lambda1=1e4 seed=3"
    /// or "random n=80 density=0.05 kappa=100 seed=1".
    #[arg(long, value_name = "SPEC", conflicts_with = "matrix")]
    gen: Option<String>,
}

impl InputArgs {
    fn load(&self) -> Result<SparseSymMatrix> {
        match (&self.matrix, &self.gen) {
            (Some(path), None) => read_matrix_market(path),
            (None, Some(spec)) => load_source(&parse_gen_source(spec)?),
            _ => unreachable!("clap enforces exactly one input"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Proj,
    Simplex,
    Linesearch,
}

impl MethodArg {
    fn method(self) -> Method {
        match self {
            MethodArg::Proj => Method::Proj,
            MethodArg::Simplex => Method::Simplex,
            MethodArg::Linesearch => Method::LineSearch,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecondArg {
    None,
    Jacobi,
    /// Diagonal scaling read from the --scaling vector file.
    File,
    /// Block factor computed from the --blocks partition.
    Blocks,
}

impl PrecondArg {
    fn name(self) -> &'static str {
        match self {
            PrecondArg::None => "none",
            PrecondArg::Jacobi => "jacobi",
            PrecondArg::File => "file",
            PrecondArg::Blocks => "blocks",
        }
    }
}

#[derive(Args)]
struct ConditionArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Print a JSON object instead of the text report.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct KappaOptArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Simplex)]
    method: MethodArg,
    /// Stopping tolerance (default 1e-4).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap (default 500; 80 for linesearch).
    #[arg(long)]
    maxiter: Option<usize>,
    /// Lower bound on the scaling entries (subgradient methods).
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Step safeguard fraction (linesearch).
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Write the computed scaling as a one-value-per-line vector file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the iteration trace as CSV (columns k,kappa,step,dirnorm,eigiters).
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OmegaOptArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated block sizes (must sum to n); omit for the diagonal
    /// closed form.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    /// Write the scaling vector (diagonal) or the block factor (text format).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PcgArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Right-hand side vector file; omitted, one is generated from --seed.
    #[arg(long, value_name = "FILE")]
    rhs: Option<PathBuf>,
    /// Seed for the generated right-hand side and starting points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Preconditioners to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [PrecondArg::None, PrecondArg::Jacobi])]
    precond: Vec<PrecondArg>,
    /// Diagonal scaling file for `--precond file`.
    #[arg(long, value_name = "FILE")]
    scaling: Option<PathBuf>,
    /// Comma-separated block sizes for `--precond blocks`.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Iteration cap (default 10n).
    #[arg(long)]
    maxiter: Option<usize>,
    /// Write the result table to this CSV file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec, e.g. "kappa-opt n=50 lambda1=1e4 lambdan=1 seed=3".
    spec: String,
    /// Matrix Market file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Manifest file of [instance] sections.
    manifest: PathBuf,
    /// Directory receiving the three CSV tables.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    out: PathBuf,
    /// Record solver wall-clock times in the cpu columns (off by default so
    /// reruns are byte-identical).
    #[arg(long)]
    timings: bool,
    /// Worker threads; output order is independent of this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Condition(args) => cmd_condition(args),
        Cmd::KappaOpt(args) => cmd_kappa_opt(args),
        Cmd::OmegaOpt(args) => cmd_omega_opt(args),
        Cmd::Pcg(args) => cmd_pcg(args),
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}

fn density(a: &SparseSymMatrix) -> f64 {
    a.nnz() as f64 / (a.n() * a.n()) as f64
}

fn cmd_condition(args: ConditionArgs) -> Result<i32> {
    let a = args.input.load()?;
    let ones = DiagScaling::ones(a.n());
    let kappa = kappa_eval_retry(&a, &ones, &EigConfig::default(), &WarmStart::default())?;
    let omega = omega_eval(&a, &ones)?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "n": a.n(),
                "nnz": a.nnz(),
                "density": density(&a),
                "kappa": kappa.kappa,
                "omega": omega.omega,
                "eig_iterations": kappa.eig_iterations,
            })
        );
    } else {
        println!("n              = {}", a.n());
        println!("nnz            = {}", a.nnz());
        println!("density        = {:.6e}", density(&a));
        println!("kappa          = {:.6e}", kappa.kappa);
        println!("omega          = {:.6e}", omega.omega);
        println!("eig iterations = {}", kappa.eig_iterations);
    }
    Ok(0)
}

fn cmd_kappa_opt(args: KappaOptArgs) -> Result<i32> {
    let a = args.input.load()?;
    let started = Instant::now();
    let (d, trace) = match args.method.method() {
        Method::Proj => {
            let mut cfg = SubgradConfig::default();
            apply_subgrad_overrides(&mut cfg, &args);
            solve_projected_subgrad(&a, &cfg)?
        }
        Method::Simplex => {
            let mut cfg = SubgradConfig::simplex_default();
            apply_subgrad_overrides(&mut cfg, &args);
            solve_simplex_subgrad(&a, &cfg)?
        }
        Method::LineSearch => {
            let mut cfg = LineSearchConfig {
                sigma: args.sigma,
                ..LineSearchConfig::default()
            };
            if let Some(tol) = args.tol {
                cfg.main_tol = tol;
            }
            if let Some(maxiter) = args.maxiter {
                cfg.main_max_iter = maxiter;
            }
            solve_linesearch(&a, &cfg)?
        }
    };
    let cpu_s = started.elapsed().as_secs_f64();

    let kappa_before = trace.rows[0].kappa;
    let kappa_after = trace.best_kappa;
    let reduction = (kappa_before - kappa_after) / kappa_before * 100.0;
    let aborted = trace.stop == StopReason::EigFailure;

    if let Some(path) = &args.out {
        write_vector(path, d.values())?;
    }
    if let Some(path) = &args.trace {
        let file = std::fs::File::create(path).map_err(Error::Io)?;
        write_trace_csv(file, &trace)?;
    }
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "method": args.method.method().name(),
                "kappa_before": kappa_before,
                "kappa_after": kappa_after,
                "reduction_percent": reduction,
                "iterations": trace.iterations(),
                "stop": trace.stop.to_string(),
                "cpu_s": cpu_s,
            })
        );
    } else {
        println!("method       = {}", args.method.method().name());
        println!("kappa before = {kappa_before:.6e}");
        println!("kappa after  = {kappa_after:.6e}");
        println!("reduction    = {reduction:.2}%");
        println!("iterations   = {}", trace.iterations());
        println!("stop         = {}", trace.stop);
        println!("cpu time     = {cpu_s:.3} s");
    }
    if aborted {
        eprintln!(
            "warning: eigensolver failed mid-run; results cover the {} completed iterations",
            trace.iterations()
        );
        return Ok(3);
    }
    Ok(0)
}

fn apply_subgrad_overrides(cfg: &mut SubgradConfig, args: &KappaOptArgs) {
    cfg.delta = args.delta;
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if let Some(maxiter) = args.maxiter {
        cfg.max_iter = maxiter;
    }
}

fn cmd_omega_opt(args: OmegaOptArgs) -> Result<i32> {
    let a = args.input.load()?;
    let ones = DiagScaling::ones(a.n());
    let before = omega_eval(&a, &ones)?.omega;
    match &args.blocks {
        None => {
            let d = jacobi_scaling(&a);
            let after = omega_eval(&a, &d)?.omega;
            if let Some(path) = &args.out {
                write_vector(path, d.values())?;
            }
            report_omega(&args, "jacobi", before, after);
        }
        Some(sizes) => {
            let partition = BlockPartition::new(sizes.clone())?;
            let factor = omega_block_optimal(&a, &partition)?;
            let after = omega_after_block(&a, &factor)?;
            if let Some(path) = &args.out {
                write_block_factor(path, &factor)?;
            }
            report_omega(&args, "blocks", before, after);
        }
    }
    Ok(0)
}

/// `omega` of the two-sided block-scaled matrix. Its diagonal blocks are
/// identities, so the trace term is exactly 1 and only the determinant
/// needs computing: each block factor contributes `-2 logdet B_k` as the
/// log-determinant of the corresponding diagonal block of the original.
fn omega_after_block(a: &SparseSymMatrix, factor: &BlockDiagFactor) -> Result<f64> {
    let logdet_a = logdet_spd(a)?;
    let mut logdet_blocks = 0.0;
    for block in factor.blocks() {
        let (_, logdet_b) = spd_inverse_and_logdet(block)?;
        logdet_blocks += -2.0 * logdet_b;
    }
    Ok((-(logdet_a - logdet_blocks) / a.n() as f64).exp())
}

fn report_omega(args: &OmegaOptArgs, kind: &str, before: f64, after: f64) {
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "kind": kind,
                "omega_before": before,
                "omega_after": after,
            })
        );
    } else {
        println!("kind         = {kind}");
        println!("omega before = {before:.6e}");
        println!("omega after  = {after:.6e}");
    }
}

/// Text format for block factors: a `block <size>` line, then the block's
/// rows with space-separated entries.
fn write_block_factor(path: &std::path::Path, factor: &BlockDiagFactor) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(Error::Io)?);
    for block in factor.blocks() {
        let s = block.n();
        writeln!(out, "block {s}").map_err(Error::Io)?;
        for i in 0..s {
            let row: Vec<String> = (0..s).map(|j| format!("{:e}", block.get(i, j))).collect();
            writeln!(out, "{}", row.join(" ")).map_err(Error::Io)?;
        }
    }
    out.flush().map_err(Error::Io)
}

struct PcgRow {
    precond: &'static str,
    avg: PcgAverage,
}

fn cmd_pcg(args: PcgArgs) -> Result<i32> {
    let a = args.input.load()?;
    let n = a.n();
    let b = match &args.rhs {
        Some(path) => {
            let v = read_vector(path)?;
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "right-hand side has length {}, matrix dimension is {n}",
                    v.len()
                )));
            }
            v
        }
        None => rhs_gen(n, args.seed),
    };
    let starts = x0_gen(n, args.seed, PCG_STARTS);
    let cfg = PcgConfig {
        rel_tol: args.tol,
        max_iter: args.maxiter,
        record_residuals: false,
    };

    let mut rows: Vec<PcgRow> = Vec::new();
    for &p in &args.precond {
        let avg = match p {
            PrecondArg::None => pcg_multi_start(&a, &b, Precond::Identity, &starts, &cfg)?,
            PrecondArg::Jacobi => {
                let d = jacobi_scaling(&a);
                pcg_multi_start(&a, &b, Precond::Diagonal(&d), &starts, &cfg)?
            }
            PrecondArg::File => {
                let path = args.scaling.as_ref().ok_or_else(|| {
                    Error::InvalidInput("--precond file needs --scaling FILE".into())
                })?;
                let d = DiagScaling::new(read_vector(path)?)?;
                if d.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "scaling has length {}, matrix dimension is {n}",
                        d.len()
                    )));
                }
                pcg_multi_start(&a, &b, Precond::Diagonal(&d), &starts, &cfg)?
            }
            PrecondArg::Blocks => {
                let sizes = args.blocks.clone().ok_or_else(|| {
                    Error::InvalidInput("--precond blocks needs --blocks SIZES".into())
                })?;
                let partition = BlockPartition::new(sizes)?;
                let factor = omega_block_optimal(&a, &partition)?;
                pcg_multi_start(&a, &b, Precond::Block(&factor), &starts, &cfg)?
            }
        };
        rows.push(PcgRow {
            precond: p.name(),
            avg,
        });
    }

    let ratio = iteration_ratio(&args.precond, &rows);
    if args.json {
        let rows_json: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "precond": r.precond,
                    "mean_iterations": r.avg.mean_iterations,
                    "mean_rel_residual": mean_res(&r.avg),
                    "all_converged": r.avg.all_converged,
                    "mean_time_s": r.avg.mean_wall_time_s,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({ "rows": rows_json, "iter_ratio_none_over_jacobi": ratio })
        );
        return Ok(0);
    }

    let mut table = String::new();
    table.push_str("precond,mean_iterations,mean_rel_residual,all_converged,mean_time_s\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{:e},{},{:.6}\n",
            r.precond,
            r.avg.mean_iterations,
            mean_res(&r.avg),
            r.avg.all_converged,
            r.avg.mean_wall_time_s
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, &table).map_err(Error::Io)?,
        None => print!("{table}"),
    }
    if let Some(ratio) = ratio {
        println!("iteration ratio none/jacobi = {ratio:.3}");
    }
    Ok(0)
}

fn mean_res(avg: &PcgAverage) -> f64 {
    avg.reports.iter().map(|r| r.rel_residual).sum::<f64>() / avg.reports.len() as f64
}

fn iteration_ratio(asked: &[PrecondArg], rows: &[PcgRow]) -> Option<f64> {
    if !asked.contains(&PrecondArg::None) || !asked.contains(&PrecondArg::Jacobi) {
        return None;
    }
    let find = |name: &str| rows.iter().find(|r| r.precond == name);
    let (plain, jac) = (find("none")?, find("jacobi")?);
    if jac.avg.mean_iterations > 0.0 {
        Some(plain.avg.mean_iterations / jac.avg.mean_iterations)
    } else {
        None
    }
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let source = parse_gen_source(&args.spec)?;
    let a = load_source(&source)?;
    write_matrix_market(&args.out, &a)?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "n": a.n(),
                "nnz": a.nnz(),
                "density": density(&a),
                "out": args.out.display().to_string(),
            })
        );
    } else {
        println!(
            "wrote {} ({} x {}, nnz {}, density {:.6e})",
            args.out.display(),
            a.n(),
            a.n(),
            a.nnz(),
            density(&a)
        );
    }
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let manifest = read_manifest(&args.manifest)?;
    let opt = BenchOptions {
        timings: args.timings,
        workers: args.workers,
        ..BenchOptions::default()
    };
    let summary = run_bench(&manifest, &args.out, &opt)?;
    println!(
        "wrote {} (kappa-reduction {} rows, pcg-comparison {} rows, kappa-vs-omega {} rows, {} failed)",
        args.out.display(),
        summary.rows_written[0],
        summary.rows_written[1],
        summary.rows_written[2],
        summary.failures
    );
    Ok(0)
}
