//! Benchmark manifests and the table runners behind the `bench` subcommand.
//!
//! A manifest is a flat text file of `[instance]` sections made of
//! `key = value` lines (`#` starts a comment). Every instance belongs to one
//! of three table families and contributes one or more rows to that family's
//! CSV:
//!
//! - `kappa-reduction` — condition-number reduction per solver method
//!   (`methods = proj,simplex,linesearch`; default `simplex`),
//! - `pcg-comparison` — averaged 5-start PCG runs per preconditioner
//!   (`precond = none,jacobi,kappa-proj,kappa-simplex,kappa-linesearch,blocks`;
//!   default `none,jacobi`),
//! - `kappa-vs-omega` — Jacobi scaling measured by both figures of merit next
//!   to plain/Jacobi PCG iteration counts.
//!
//! Instances name their matrix either by `path = file.mtx` or by a generator
//! spec such as `gen = kappa-opt n=50 lambda1=1e4 lambdan=1 seed=3` or
//! `gen = random n=80 density=0.05 kappa=100 seed=1`.
//!
//! A failing instance becomes a row whose `status` cell carries the error;
//! the run continues. With timings disabled (the default) the cpu cells are
//! left empty so that rerunning a manifest reproduces the CSVs byte for
//! byte.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::cond::{kappa_eval_retry, KappaEval};
use crate::eigen::{EigConfig, WarmStart};
use crate::gen::{gen_kappa_optimal, gen_random_spd, rhs_gen, x0_gen};
use crate::kappa::{
    solve_linesearch, solve_projected_subgrad, solve_simplex_subgrad, LineSearchConfig,
    SolveTrace, SubgradConfig,
};
use crate::mm::read_matrix_market;
use crate::omega::{jacobi_scaling, omega_block_optimal};
use crate::pcg::{pcg_multi_start, PcgAverage, PcgConfig, Precond};
use crate::sparse::{BlockPartition, DiagScaling, SparseSymMatrix};
use crate::{Error, Result};

/// Number of starting points in the averaged PCG protocol.
pub const PCG_STARTS: usize = 5;

/// The three table families a manifest instance can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    KappaReduction,
    PcgComparison,
    KappaVsOmega,
}

impl Table {
    fn parse(s: &str, line: usize) -> Result<Table> {
        match s {
            "kappa-reduction" => Ok(Table::KappaReduction),
            "pcg-comparison" => Ok(Table::PcgComparison),
            "kappa-vs-omega" => Ok(Table::KappaVsOmega),
            other => Err(Error::Parse {
                line,
                msg: format!(
                    "unknown table `{other}` (expected kappa-reduction, \
                     pcg-comparison, or kappa-vs-omega)"
                ),
            }),
        }
    }

    /// File name of this family's CSV inside the output directory.
    pub fn csv_name(self) -> &'static str {
        match self {
            Table::KappaReduction => "kappa-reduction.csv",
            Table::PcgComparison => "pcg-comparison.csv",
            Table::KappaVsOmega => "kappa-vs-omega.csv",
        }
    }

    fn index(self) -> usize {
        match self {
            Table::KappaReduction => 0,
            Table::PcgComparison => 1,
            Table::KappaVsOmega => 2,
        }
    }
}

/// Solver selector shared by manifests and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Proj,
    Simplex,
    LineSearch,
}

impl Method {
    fn parse(s: &str, line: usize) -> Result<Method> {
        match s {
            "proj" => Ok(Method::Proj),
            "simplex" => Ok(Method::Simplex),
            "linesearch" => Ok(Method::LineSearch),
            other => Err(Error::Parse {
                line,
                msg: format!("unknown method `{other}` (expected proj, simplex, or linesearch)"),
            }),
        }
    }

    /// The token used in manifests, CSV cells, and `--method`.
    pub fn name(self) -> &'static str {
        match self {
            Method::Proj => "proj",
            Method::Simplex => "simplex",
            Method::LineSearch => "linesearch",
        }
    }
}

/// Preconditioner selector for `pcg-comparison` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondSpec {
    None,
    Jacobi,
    /// Diagonal scaling produced by the given condition-number solver.
    Kappa(Method),
    /// Block factor from the `blocks = ...` partition of the instance.
    Blocks,
}

impl PrecondSpec {
    fn parse(s: &str, line: usize) -> Result<PrecondSpec> {
        match s {
            "none" => Ok(PrecondSpec::None),
            "jacobi" => Ok(PrecondSpec::Jacobi),
            "kappa-proj" => Ok(PrecondSpec::Kappa(Method::Proj)),
            "kappa-simplex" => Ok(PrecondSpec::Kappa(Method::Simplex)),
            "kappa-linesearch" => Ok(PrecondSpec::Kappa(Method::LineSearch)),
            "blocks" => Ok(PrecondSpec::Blocks),
            other => Err(Error::Parse {
                line,
                msg: format!(
                    "unknown preconditioner `{other}` (expected none, jacobi, \
                     kappa-proj, kappa-simplex, kappa-linesearch, or blocks)"
                ),
            }),
        }
    }

    fn name(self) -> &'static str {
        match self {
            PrecondSpec::None => "none",
            PrecondSpec::Jacobi => "jacobi",
            PrecondSpec::Kappa(Method::Proj) => "kappa-proj",
            PrecondSpec::Kappa(Method::Simplex) => "kappa-simplex",
            PrecondSpec::Kappa(Method::LineSearch) => "kappa-linesearch",
            PrecondSpec::Blocks => "blocks",
        }
    }
}

/// Where an instance's matrix comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Path(PathBuf),
    KappaOptimal {
        n: usize,
        lambda1: f64,
        lambdan: f64,
        seed: u64,
    },
    RandomSpd {
        n: usize,
        density: f64,
        kappa: f64,
        seed: u64,
    },
}

/// One `[instance]` section, fully validated.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub table: Table,
    pub name: String,
    pub source: Source,
    pub methods: Vec<Method>,
    pub preconds: Vec<PrecondSpec>,
    pub blocks: Option<Vec<usize>>,
    /// Seed for the right-hand side and starting points.
    pub seed: u64,
    pub tol: Option<f64>,
    pub maxiter: Option<usize>,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    /// 1-based line of the `[instance]` header, for diagnostics.
    pub line: usize,
}

/// A parsed benchmark manifest.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub instances: Vec<InstanceSpec>,
}

#[derive(Default)]
struct RawInstance {
    line: usize,
    table: Option<(String, usize)>,
    name: Option<(String, usize)>,
    path: Option<(String, usize)>,
    gen: Option<(String, usize)>,
    methods: Option<(String, usize)>,
    precond: Option<(String, usize)>,
    blocks: Option<(String, usize)>,
    seed: Option<(String, usize)>,
    tol: Option<(String, usize)>,
    maxiter: Option<(String, usize)>,
    delta: Option<(String, usize)>,
    sigma: Option<(String, usize)>,
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{what}: cannot parse `{s}`"),
    })
}

fn parse_gen_spec(spec: &str, line: usize) -> Result<Source> {
    let mut tokens = spec.split_whitespace();
    let kind = tokens.next().ok_or_else(|| Error::Parse {
        line,
        msg: "empty generator spec".into(),
    })?;
    let mut n: Option<usize> = None;
    let mut lambda1: Option<f64> = None;
    let mut lambdan: Option<f64> = None;
    let mut density: Option<f64> = None;
    let mut kappa: Option<f64> = None;
    let mut seed: u64 = 0;
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("generator argument `{tok}` is not key=value"),
        })?;
        match key {
            "n" => n = Some(parse_num(value, line, "n")?),
            "lambda1" => lambda1 = Some(parse_num(value, line, "lambda1")?),
            "lambdan" => lambdan = Some(parse_num(value, line, "lambdan")?),
            "density" => density = Some(parse_num(value, line, "density")?),
            "kappa" => kappa = Some(parse_num(value, line, "kappa")?),
            "seed" => seed = parse_num(value, line, "seed")?,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown generator argument `{other}`"),
                })
            }
        }
    }
    let need = |opt: Option<f64>, what: &str| {
        opt.ok_or_else(|| Error::Parse {
            line,
            msg: format!("generator `{kind}` needs {what}="),
        })
    };
    let n = n.ok_or_else(|| Error::Parse {
        line,
        msg: format!("generator `{kind}` needs n="),
    })?;
    match kind {
        "kappa-opt" => Ok(Source::KappaOptimal {
            n,
            lambda1: need(lambda1, "lambda1")?,
            lambdan: lambdan.unwrap_or(1.0),
            seed,
        }),
        "random" => Ok(Source::RandomSpd {
            n,
            density: need(density, "density")?,
            kappa: need(kappa, "kappa")?,
            seed,
        }),
        other => Err(Error::Parse {
            line,
            msg: format!("unknown generator `{other}` (expected kappa-opt or random)"),
        }),
    }
}

fn finalize(raw: RawInstance) -> Result<InstanceSpec> {
    let at = raw.line;
    let missing = |what: &str| Error::Parse {
        line: at,
        msg: format!("instance is missing `{what} = ...`"),
    };
    let (table_str, table_line) = raw.table.ok_or_else(|| missing("table"))?;
    let table = Table::parse(&table_str, table_line)?;
    let name = raw.name.ok_or_else(|| missing("name"))?.0;

    let source = match (raw.path, raw.gen) {
        (Some((p, _)), None) => Source::Path(PathBuf::from(p)),
        (None, Some((g, line))) => parse_gen_spec(&g, line)?,
        (Some((_, line)), Some(_)) => {
            return Err(Error::Parse {
                line,
                msg: "instance has both `path` and `gen`; pick one".into(),
            })
        }
        (None, None) => return Err(missing("path` or `gen")),
    };

    let methods = match raw.methods {
        Some((list, line)) => split_list(&list, line, |tok, l| Method::parse(tok, l))?,
        None => vec![Method::Simplex],
    };
    let preconds = match raw.precond {
        Some((list, line)) => split_list(&list, line, |tok, l| PrecondSpec::parse(tok, l))?,
        None => vec![PrecondSpec::None, PrecondSpec::Jacobi],
    };
    let blocks = match raw.blocks {
        Some((list, line)) => Some(split_list(&list, line, |tok, l| {
            parse_num::<usize>(tok, l, "block size")
        })?),
        None => None,
    };
    if preconds.contains(&PrecondSpec::Blocks) && blocks.is_none() {
        return Err(Error::Parse {
            line: at,
            msg: "preconditioner `blocks` needs a `blocks = size,size,...` line".into(),
        });
    }

    let seed = match raw.seed {
        Some((s, line)) => parse_num(&s, line, "seed")?,
        None => 0,
    };
    let parse_opt_f64 = |field: Option<(String, usize)>, what: &str| -> Result<Option<f64>> {
        field
            .map(|(s, line)| parse_num(&s, line, what))
            .transpose()
    };
    Ok(InstanceSpec {
        table,
        name,
        source,
        methods,
        preconds,
        blocks,
        seed,
        tol: parse_opt_f64(raw.tol, "tol")?,
        maxiter: raw
            .maxiter
            .map(|(s, line)| parse_num(&s, line, "maxiter"))
            .transpose()?,
        delta: parse_opt_f64(raw.delta, "delta")?,
        sigma: parse_opt_f64(raw.sigma, "sigma")?,
        line: at,
    })
}

fn split_list<T>(
    list: &str,
    line: usize,
    mut parse: impl FnMut(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for tok in list.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty entry in comma-separated list".into(),
            });
        }
        out.push(parse(tok, line)?);
    }
    Ok(out)
}

/// Parses manifest text. Errors carry 1-based line numbers.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut instances = Vec::new();
    let mut cur: Option<RawInstance> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(section) = line.strip_prefix('[') {
            let section = section.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "unterminated section header".into(),
            })?;
            if section != "instance" {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown section `[{section}]` (expected [instance])"),
                });
            }
            if let Some(done) = cur.take() {
                instances.push(finalize(done)?);
            }
            cur = Some(RawInstance {
                line: lineno,
                ..RawInstance::default()
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim().to_string();
        let raw = cur.as_mut().ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "key outside any [instance] section".into(),
        })?;
        let slot = match key {
            "table" => &mut raw.table,
            "name" => &mut raw.name,
            "path" => &mut raw.path,
            "gen" => &mut raw.gen,
            "methods" => &mut raw.methods,
            "precond" => &mut raw.precond,
            "blocks" => &mut raw.blocks,
            "seed" => &mut raw.seed,
            "tol" => &mut raw.tol,
            "maxiter" => &mut raw.maxiter,
            "delta" => &mut raw.delta,
            "sigma" => &mut raw.sigma,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown key `{other}`"),
                })
            }
        };
        if slot.is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate key `{key}`"),
            });
        }
        *slot = Some((value, lineno));
    }
    if let Some(done) = cur.take() {
        instances.push(finalize(done)?);
    }
    Ok(Manifest { instances })
}

/// Reads and parses a manifest file.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(Error::Io)?;
    parse_manifest(&text)
}

/// Parses a standalone generator spec such as
/// `kappa-opt n=50 lambda1=1e4 lambdan=1 seed=3` or
/// `random n=80 density=0.05 kappa=100 seed=1`.
pub fn parse_gen_source(spec: &str) -> Result<Source> {
    parse_gen_spec(spec, 1)
}

/// Loads or generates the instance's matrix.
pub fn load_source(source: &Source) -> Result<SparseSymMatrix> {
    match source {
        Source::Path(p) => read_matrix_market(p),
        Source::KappaOptimal {
            n,
            lambda1,
            lambdan,
            seed,
        } => gen_kappa_optimal(*n, *lambda1, *lambdan, *seed),
        Source::RandomSpd {
            n,
            density,
            kappa,
            seed,
        } => gen_random_spd(*n, *density, *kappa, *seed),
    }
}

/// Knobs of a benchmark run that live outside the manifest.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Emit wall-clock solver timings. Off by default so identical manifests
    /// reproduce identical CSV bytes.
    pub timings: bool,
    /// Worker threads; rows keep manifest order regardless.
    pub workers: usize,
    pub pcg: PcgConfig,
    pub eig: EigConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            timings: false,
            workers: 1,
            pcg: PcgConfig::default(),
            eig: EigConfig::default(),
        }
    }
}

/// What `run_bench` produced.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    /// Data rows written per table family, in [`Table`] order
    /// (kappa-reduction, pcg-comparison, kappa-vs-omega).
    pub rows_written: [usize; 3],
    /// Rows whose `status` records a failure.
    pub failures: usize,
    /// Paths of the three CSVs, in the same order.
    pub files: [PathBuf; 3],
}

const KAPPA_REDUCTION_HEADER: [&str; 12] = [
    "name",
    "n",
    "nnz",
    "density",
    "kappa_before",
    "method",
    "status",
    "kappa_after",
    "reduction_percent",
    "iterations",
    "stop",
    "cpu_s",
];
const PCG_COMPARISON_HEADER: [&str; 8] = [
    "name",
    "n",
    "precond",
    "status",
    "mean_iterations",
    "mean_rel_residual",
    "all_converged",
    "cpu_s",
];
const KAPPA_VS_OMEGA_HEADER: [&str; 12] = [
    "name",
    "n",
    "density",
    "status",
    "kappa_a",
    "kappa_j_over_a",
    "omega_j_over_a",
    "pcg_iters_a",
    "pcg_iters_j",
    "iter_ratio",
    "cpu_a_s",
    "cpu_j_s",
];

struct InstanceOutput {
    table: Table,
    rows: Vec<Vec<String>>,
    failures: usize,
}

fn fmt_time(opt: &BenchOptions, seconds: f64) -> String {
    if opt.timings {
        format!("{seconds:.6}")
    } else {
        String::new()
    }
}

fn subgrad_config(spec: &InstanceSpec, opt: &BenchOptions, simplex: bool) -> SubgradConfig {
    let mut cfg = if simplex {
        SubgradConfig::simplex_default()
    } else {
        SubgradConfig::default()
    };
    cfg.eig = opt.eig.clone();
    if let Some(tol) = spec.tol {
        cfg.tol = tol;
    }
    if let Some(maxiter) = spec.maxiter {
        cfg.max_iter = maxiter;
    }
    if let Some(delta) = spec.delta {
        cfg.delta = delta;
    }
    cfg
}

fn linesearch_config(spec: &InstanceSpec, opt: &BenchOptions) -> LineSearchConfig {
    let mut cfg = LineSearchConfig {
        eig: opt.eig.clone(),
        ..LineSearchConfig::default()
    };
    if let Some(tol) = spec.tol {
        cfg.main_tol = tol;
    }
    if let Some(maxiter) = spec.maxiter {
        cfg.main_max_iter = maxiter;
    }
    if let Some(sigma) = spec.sigma {
        cfg.sigma = sigma;
    }
    cfg
}

fn run_method(
    a: &SparseSymMatrix,
    method: Method,
    spec: &InstanceSpec,
    opt: &BenchOptions,
) -> Result<(DiagScaling, SolveTrace, f64)> {
    let start = Instant::now();
    let (d, trace) = match method {
        Method::Proj => solve_projected_subgrad(a, &subgrad_config(spec, opt, false))?,
        Method::Simplex => solve_simplex_subgrad(a, &subgrad_config(spec, opt, true))?,
        Method::LineSearch => solve_linesearch(a, &linesearch_config(spec, opt))?,
    };
    Ok((d, trace, start.elapsed().as_secs_f64()))
}

/// `omega(Jacobi-scaled A) / omega(A)` via the closed form
/// geomean(diag A) / arithmean(diag A), computed in the log domain.
/// Requires no factorization, so it stays exact at any size.
pub fn omega_jacobi_ratio(a: &SparseSymMatrix) -> f64 {
    let inv_diag = jacobi_scaling(a);
    let n = a.n() as f64;
    let mut log_sum = 0.0;
    let mut sum = 0.0;
    for &inv in inv_diag.values() {
        let aii = 1.0 / inv;
        log_sum += aii.ln();
        sum += aii;
    }
    (log_sum / n - (sum / n).ln()).exp()
}

fn kappa_reduction_rows(
    spec: &InstanceSpec,
    a: &SparseSymMatrix,
    opt: &BenchOptions,
) -> (Vec<Vec<String>>, usize) {
    let n = a.n();
    let density = a.nnz() as f64 / (n * n) as f64;
    let before = match kappa_eval_retry(a, &DiagScaling::ones(n), &opt.eig, &WarmStart::default())
    {
        Ok(eval) => eval,
        Err(err) => {
            let mut row = vec![
                spec.name.clone(),
                n.to_string(),
                a.nnz().to_string(),
                density.to_string(),
            ];
            row.extend(["", ""].map(String::from));
            row.push(err.to_string());
            row.extend(["", "", "", "", ""].map(String::from));
            return (vec![row], 1);
        }
    };
    let mut rows = Vec::with_capacity(spec.methods.len());
    let mut failures = 0;
    for &method in &spec.methods {
        let mut row = vec![
            spec.name.clone(),
            n.to_string(),
            a.nnz().to_string(),
            density.to_string(),
            before.kappa.to_string(),
            method.name().to_string(),
        ];
        match run_method(a, method, spec, opt) {
            Ok((_, trace, seconds)) => {
                let reduction = (before.kappa - trace.best_kappa) / before.kappa * 100.0;
                row.push("ok".into());
                row.push(trace.best_kappa.to_string());
                row.push(reduction.to_string());
                row.push(trace.iterations().to_string());
                row.push(trace.stop.to_string());
                row.push(fmt_time(opt, seconds));
            }
            Err(err) => {
                failures += 1;
                row.push(err.to_string());
                row.extend(["", "", "", "", ""].map(String::from));
            }
        }
        rows.push(row);
    }
    (rows, failures)
}

fn pcg_row_cells(avg: &PcgAverage, opt: &BenchOptions) -> [String; 4] {
    let mean_res =
        avg.reports.iter().map(|r| r.rel_residual).sum::<f64>() / avg.reports.len() as f64;
    [
        avg.mean_iterations.to_string(),
        mean_res.to_string(),
        avg.all_converged.to_string(),
        fmt_time(opt, avg.mean_wall_time_s),
    ]
}

fn pcg_comparison_rows(
    spec: &InstanceSpec,
    a: &SparseSymMatrix,
    opt: &BenchOptions,
) -> (Vec<Vec<String>>, usize) {
    let n = a.n();
    let b = rhs_gen(n, spec.seed);
    let starts = x0_gen(n, spec.seed, PCG_STARTS);
    let mut rows = Vec::with_capacity(spec.preconds.len());
    let mut failures = 0;
    for &pspec in &spec.preconds {
        let mut row = vec![
            spec.name.clone(),
            n.to_string(),
            pspec.name().to_string(),
        ];
        let outcome = run_one_precond(spec, a, pspec, &b, &starts, opt);
        match outcome {
            Ok(avg) => {
                row.push("ok".into());
                row.extend(pcg_row_cells(&avg, opt));
            }
            Err(err) => {
                failures += 1;
                row.push(err.to_string());
                row.extend(["", "", "", ""].map(String::from));
            }
        }
        rows.push(row);
    }
    (rows, failures)
}

fn run_one_precond(
    spec: &InstanceSpec,
    a: &SparseSymMatrix,
    pspec: PrecondSpec,
    b: &[f64],
    starts: &[Vec<f64>],
    opt: &BenchOptions,
) -> Result<PcgAverage> {
    match pspec {
        PrecondSpec::None => pcg_multi_start(a, b, Precond::Identity, starts, &opt.pcg),
        PrecondSpec::Jacobi => {
            let d = jacobi_scaling(a);
            pcg_multi_start(a, b, Precond::Diagonal(&d), starts, &opt.pcg)
        }
        PrecondSpec::Kappa(method) => {
            let (d, _, _) = run_method(a, method, spec, opt)?;
            pcg_multi_start(a, b, Precond::Diagonal(&d), starts, &opt.pcg)
        }
        PrecondSpec::Blocks => {
            let sizes = spec
                .blocks
                .clone()
                .expect("validated at parse time: blocks precond requires sizes");
            let partition = BlockPartition::new(sizes)?;
            let factor = omega_block_optimal(a, &partition)?;
            pcg_multi_start(a, b, Precond::Block(&factor), starts, &opt.pcg)
        }
    }
}

fn kappa_vs_omega_rows(
    spec: &InstanceSpec,
    a: &SparseSymMatrix,
    opt: &BenchOptions,
) -> (Vec<Vec<String>>, usize) {
    let n = a.n();
    let density = a.nnz() as f64 / (n * n) as f64;
    let mut row = vec![spec.name.clone(), n.to_string(), density.to_string()];
    let result = (|| -> Result<[String; 8]> {
        let ones = DiagScaling::ones(n);
        let warm = WarmStart::default();
        let kappa_a = kappa_eval_retry(a, &ones, &opt.eig, &warm)?;
        let jacobi = jacobi_scaling(a);
        let kappa_j = kappa_eval_retry(a, &jacobi, &opt.eig, &warm_from(&kappa_a))?;
        let omega_ratio = omega_jacobi_ratio(a);

        let b = rhs_gen(n, spec.seed);
        let starts = x0_gen(n, spec.seed, PCG_STARTS);
        let plain = pcg_multi_start(a, &b, Precond::Identity, &starts, &opt.pcg)?;
        let jac = pcg_multi_start(a, &b, Precond::Diagonal(&jacobi), &starts, &opt.pcg)?;
        let ratio = if jac.mean_iterations > 0.0 {
            (plain.mean_iterations / jac.mean_iterations).to_string()
        } else {
            String::new()
        };
        Ok([
            kappa_a.kappa.to_string(),
            (kappa_j.kappa / kappa_a.kappa).to_string(),
            omega_ratio.to_string(),
            plain.mean_iterations.to_string(),
            jac.mean_iterations.to_string(),
            ratio,
            fmt_time(opt, plain.mean_wall_time_s),
            fmt_time(opt, jac.mean_wall_time_s),
        ])
    })();
    match result {
        Ok(cells) => {
            row.push("ok".into());
            row.extend(cells);
            (vec![row], 0)
        }
        Err(err) => {
            row.push(err.to_string());
            row.extend(["", "", "", "", "", "", "", ""].map(String::from));
            (vec![row], 1)
        }
    }
}

fn warm_from(eval: &KappaEval) -> WarmStart {
    WarmStart {
        max: Some(eval.u_max.clone()),
        min: Some(eval.u_min.clone()),
    }
}

fn run_instance(spec: &InstanceSpec, opt: &BenchOptions) -> InstanceOutput {
    let a = match load_source(&spec.source) {
        Ok(a) => a,
        Err(err) => {
            // One status row with the shape of the instance's family.
            let row = match spec.table {
                Table::KappaReduction => {
                    let mut row = vec![spec.name.clone()];
                    row.extend(["", "", "", "", ""].map(String::from));
                    row.push(err.to_string());
                    row.extend(["", "", "", "", ""].map(String::from));
                    row
                }
                Table::PcgComparison => {
                    let mut row = vec![spec.name.clone()];
                    row.extend(["", ""].map(String::from));
                    row.push(err.to_string());
                    row.extend(["", "", "", ""].map(String::from));
                    row
                }
                Table::KappaVsOmega => {
                    let mut row = vec![spec.name.clone()];
                    row.extend(["", ""].map(String::from));
                    row.push(err.to_string());
                    row.extend(["", "", "", "", "", "", "", ""].map(String::from));
                    row
                }
            };
            return InstanceOutput {
                table: spec.table,
                rows: vec![row],
                failures: 1,
            };
        }
    };
    let (rows, failures) = match spec.table {
        Table::KappaReduction => kappa_reduction_rows(spec, &a, opt),
        Table::PcgComparison => pcg_comparison_rows(spec, &a, opt),
        Table::KappaVsOmega => kappa_vs_omega_rows(spec, &a, opt),
    };
    InstanceOutput {
        table: spec.table,
        rows,
        failures,
    }
}

fn run_all(man: &Manifest, opt: &BenchOptions) -> Vec<InstanceOutput> {
    let count = man.instances.len();
    if opt.workers <= 1 || count <= 1 {
        return man
            .instances
            .iter()
            .map(|spec| run_instance(spec, opt))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, InstanceOutput)>> = Mutex::new(Vec::with_capacity(count));
    std::thread::scope(|scope| {
        for _ in 0..opt.workers.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let out = run_instance(&man.instances[i], opt);
                done.lock().expect("worker poisoned the result lock").push((i, out));
            });
        }
    });
    let mut done = done.into_inner().expect("worker poisoned the result lock");
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, out)| out).collect()
}

fn csv_error(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv write failed: {other:?}")),
    }
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(row).map_err(csv_error)?;
    }
    writer.flush().map_err(Error::Io)
}

/// Runs every manifest instance and writes the three family CSVs into
/// `out_dir` (created if absent). Families with no instances still get a
/// header-only file.
pub fn run_bench(man: &Manifest, out_dir: &Path, opt: &BenchOptions) -> Result<BenchSummary> {
    if opt.workers == 0 {
        return Err(Error::InvalidInput("workers must be >= 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(Error::Io)?;
    let outputs = run_all(man, opt);

    let mut tables: [Vec<Vec<String>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut failures = 0;
    for out in outputs {
        failures += out.failures;
        tables[out.table.index()].extend(out.rows);
    }

    let files = [
        out_dir.join(Table::KappaReduction.csv_name()),
        out_dir.join(Table::PcgComparison.csv_name()),
        out_dir.join(Table::KappaVsOmega.csv_name()),
    ];
    write_table(&files[0], &KAPPA_REDUCTION_HEADER, &tables[0])?;
    write_table(&files[1], &PCG_COMPARISON_HEADER, &tables[1])?;
    write_table(&files[2], &KAPPA_VS_OMEGA_HEADER, &tables[2])?;
    Ok(BenchSummary {
        rows_written: [tables[0].len(), tables[1].len(), tables[2].len()],
        failures,
        files,
    })
}

/// Writes a solver trace as CSV with columns `k,kappa,step,dirnorm,eigiters`.
pub fn write_trace_csv<W: std::io::Write>(w: W, trace: &SolveTrace) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer
        .write_record(["k", "kappa", "step", "dirnorm", "eigiters"])
        .map_err(csv_error)?;
    for row in &trace.rows {
        writer
            .write_record([
                row.k.to_string(),
                row.kappa.to_string(),
                row.step.to_string(),
                row.dir_norm.to_string(),
                row.eig_iters.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush().map_err(Error::Io)
}
