//! `indexcode` command line: `sweep`, `solve` and `verify`.
//!
//! Exit codes: 0 on success, 1 when verification fails, 2 for usage and I/O
//! errors. Settings are resolved as flags, then `--config` file, then
//! built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::{altmin_solve, AltMinConfig};
use crate::error::{Error, Result};
use crate::ic_model::{decode_simulation, pattern_to_side_info, sum_rate, verify_alignment, IndexCode, SideInformation};
use crate::linalg::{numerical_rank, DenseMatrix, DEFAULT_RANK_TOL};
use crate::objectives::SparsityPattern;
use crate::pipeline::{solve_one, IndexCodingSolution, PipelineConfig, SolverKind, TradeoffCurve, DECODE_TOL};

/// Gaussian trials used by `verify`.
pub const VERIFY_TRIALS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "indexcode", version, about = "Sparse and low-rank index code design")]
pub struct Cli {
    /// Log solver progress, including per-iteration trust-region records.
    #[arg(long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every rank and write the side-information/rank tradeoff.
    Sweep(RunArgs),
    /// Solve a single rank and write the solution as JSON.
    Solve(RunArgs),
    /// Re-check a solution file: alignment, rank and decoding.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Riemannian,
    Altmin,
    Both,
}

impl SolverChoice {
    fn kinds(self) -> Vec<SolverKind> {
        match self {
            SolverChoice::Riemannian => vec![SolverKind::Riemannian],
            SolverChoice::Altmin => vec![SolverKind::Altmin],
            SolverChoice::Both => vec![SolverKind::Riemannian, SolverKind::Altmin],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Number of users.
    #[arg(long = "K", value_name = "K")]
    pub k: Option<usize>,
    /// Single rank (solve).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Rank range `a..b`, inclusive (sweep).
    #[arg(long, value_parser = parse_rank_range)]
    pub ranks: Option<(usize, usize)>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// JSON file mirroring the run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Solution JSON written by `solve`.
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Side-information JSON (`{"K": .., "sets": [[..]..]}`, 1-based)
    /// overriding the sets stored in the solution.
    #[arg(long)]
    pub side_info: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_rank_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("range {a}..{b} must satisfy 1 ≤ a ≤ b"));
    }
    Ok((a, b))
}

/// Resolved run settings; also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(rename = "K")]
    pub k: usize,
    /// Explicit rank list; empty means `1..=K` (sweep) or requires `rank`.
    pub ranks: Vec<usize>,
    pub rank: Option<usize>,
    pub solver: SolverChoice,
    /// Shared by both solvers so their runs are matched.
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub altmin: AltMinConfig,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 16,
            ranks: Vec::new(),
            rank: None,
            solver: SolverChoice::Both,
            seed: 0,
            pipeline: PipelineConfig::default(),
            altmin: AltMinConfig::default(),
            output_path: None,
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(k) = args.k {
            cfg.k = k;
        }
        if let Some(r) = args.rank {
            cfg.rank = Some(r);
        }
        if let Some((a, b)) = args.ranks {
            cfg.ranks = (a..=b).collect();
        }
        if let Some(s) = args.solver {
            cfg.solver = s;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(rho) = args.rho {
            cfg.pipeline.rho = rho;
        }
        if let Some(eps) = args.eps {
            cfg.pipeline.eps = eps;
        }
        if let Some(n) = args.restarts {
            cfg.pipeline.restarts = n;
        }
        if let Some(out) = &args.out {
            cfg.output_path = Some(out.clone());
        }
        if let Some(f) = args.format {
            cfg.format = f;
        }
        cfg.pipeline.seed = cfg.seed;
        cfg.altmin.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if let Some(bad) = self.ranks.iter().chain(self.rank.iter()).find(|&&r| r == 0 || r > self.k) {
            return Err(Error::invalid(format!("rank {bad} outside 1..={}", self.k)));
        }
        self.pipeline.validate()?;
        self.altmin.validate()
    }

    fn sweep_ranks(&self) -> Vec<usize> {
        if self.ranks.is_empty() {
            (1..=self.k).collect()
        } else {
            let mut r = self.ranks.clone();
            r.sort_unstable();
            r.dedup();
            r
        }
    }
}

fn run_solver(kind: SolverKind, k: usize, r: usize, cfg: &RunConfig) -> (Result<IndexCodingSolution>, f64) {
    let start = Instant::now();
    let res = match kind {
        SolverKind::Riemannian => solve_one(k, r, &cfg.pipeline),
        SolverKind::Altmin => altmin_solve(k, r, &cfg.altmin),
    };
    (res, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, Serialize)]
struct SolverStatus {
    solver: SolverKind,
    status: &'static str,
    side_info_amount: Option<usize>,
    feasible: bool,
    seed: Option<u64>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct RankStatus {
    rank: usize,
    solvers: Vec<SolverStatus>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a RunConfig,
    outputs: Vec<String>,
    ranks: Vec<RankStatus>,
}

#[derive(Debug, Serialize)]
struct RankTiming {
    rank: usize,
    solver: SolverKind,
    seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_riemannian: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_altmin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible_riemannian: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible_altmin: Option<bool>,
    /// Present when the Riemannian solver ran; `null` until a feasible
    /// rank has been seen.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_riemannian: Option<Option<usize>>,
}

/// Fixed CSV header for the solvers present.
pub fn csv_header(solvers: &[SolverKind]) -> String {
    let has = |k| solvers.contains(&k);
    let mut cols = vec!["rank"];
    if has(SolverKind::Riemannian) {
        cols.push("sparsity_riemannian");
    }
    if has(SolverKind::Altmin) {
        cols.push("sparsity_altmin");
    }
    if has(SolverKind::Riemannian) {
        cols.push("feasible_riemannian");
    }
    if has(SolverKind::Altmin) {
        cols.push("feasible_altmin");
    }
    if has(SolverKind::Riemannian) {
        cols.push("envelope_riemannian");
    }
    cols.join(",")
}

fn csv_row(row: &SweepRow) -> String {
    let mut cells = vec![row.rank.to_string()];
    let num = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
    if let Some(s) = row.sparsity_riemannian {
        cells.push(s.to_string());
    }
    if let Some(s) = row.sparsity_altmin {
        cells.push(s.to_string());
    }
    if let Some(f) = row.feasible_riemannian {
        cells.push(f.to_string());
    }
    if let Some(f) = row.feasible_altmin {
        cells.push(f.to_string());
    }
    if let Some(env) = row.envelope_riemannian {
        cells.push(num(env));
    }
    cells.join(",")
}

/// Build sweep rows from a tradeoff curve.
pub fn sweep_rows(curve: &TradeoffCurve, ranks: &[usize], solvers: &[SolverKind]) -> Vec<SweepRow> {
    let find = |kind, r| curve.entries.iter().find(|e| e.solver == kind && e.rank == r);
    ranks
        .iter()
        .map(|&r| {
            let riem = solvers.contains(&SolverKind::Riemannian).then(|| find(SolverKind::Riemannian, r)).flatten();
            let alt = solvers.contains(&SolverKind::Altmin).then(|| find(SolverKind::Altmin, r)).flatten();
            SweepRow {
                rank: r,
                sparsity_riemannian: riem.map(|e| e.side_info_amount),
                sparsity_altmin: alt.map(|e| e.side_info_amount),
                feasible_riemannian: riem.map(|e| e.feasible),
                feasible_altmin: alt.map(|e| e.feasible),
                envelope_riemannian: riem.map(|e| e.envelope),
            }
        })
        .collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<PathBuf> {
    let solvers = cfg.solver.kinds();
    let ranks = cfg.sweep_ranks();
    let out = cfg.output_path.clone().unwrap_or_else(|| {
        PathBuf::from(match cfg.format {
            OutputFormat::Csv => "tradeoff.csv",
            OutputFormat::Json => "tradeoff.json",
        })
    });
    // Fail on an unwritable destination before spending solver time.
    write_file(&out, "")?;

    let jobs: Vec<(usize, SolverKind)> = ranks.iter().flat_map(|&r| solvers.iter().map(move |&s| (r, s))).collect();
    let results: Vec<(usize, SolverKind, Result<IndexCodingSolution>, f64)> = jobs
        .par_iter()
        .map(|&(r, kind)| {
            let (res, secs) = run_solver(kind, cfg.k, r, cfg);
            (r, kind, res, secs)
        })
        .collect();

    let mut solutions = Vec::new();
    let mut statuses: Vec<RankStatus> = ranks.iter().map(|&rank| RankStatus { rank, solvers: Vec::new() }).collect();
    let mut timings = Vec::new();
    for (r, kind, res, secs) in results {
        timings.push(RankTiming { rank: r, solver: kind, seconds: secs });
        let slot = statuses.iter_mut().find(|s| s.rank == r).expect("rank listed");
        match res {
            Ok(sol) => {
                slot.solvers.push(SolverStatus {
                    solver: kind,
                    status: if sol.feasible { "feasible" } else { "infeasible" },
                    side_info_amount: Some(sol.side_info_amount),
                    feasible: sol.feasible,
                    seed: Some(sol.seed),
                    error: None,
                });
                solutions.push(sol);
            }
            Err(e @ Error::InvalidInput(_)) => return Err(e),
            Err(e) => {
                log::warn!("rank {r} {}: {e}", kind.name());
                slot.solvers.push(SolverStatus {
                    solver: kind,
                    status: "failed",
                    side_info_amount: None,
                    feasible: false,
                    seed: None,
                    error: Some(e.to_string()),
                });
                // A failed rank is reported as infeasible and dense.
                solutions.push(failed_solution(cfg.k, r, kind));
            }
        }
    }

    let curve = TradeoffCurve::from_solutions(&solutions);
    let rows = sweep_rows(&curve, &ranks, &solvers);
    let body = match cfg.format {
        OutputFormat::Csv => {
            let mut s = csv_header(&solvers);
            s.push('\n');
            for row in &rows {
                let _ = writeln!(s, "{}", csv_row(row));
            }
            s
        }
        OutputFormat::Json => to_json_pretty(&serde_json::json!({ "K": cfg.k, "rows": rows }))?,
    };
    write_file(&out, &body)?;

    let manifest_path = sibling(&out, ".manifest.json");
    let timings_path = sibling(&out, ".timings.json");
    let manifest = Manifest {
        command: "sweep",
        config: cfg,
        outputs: vec![out.display().to_string(), timings_path.display().to_string()],
        ranks: statuses,
    };
    write_file(&manifest_path, &to_json_pretty(&manifest)?)?;
    write_file(&timings_path, &to_json_pretty(&timings)?)?;
    Ok(out)
}

fn failed_solution(k: usize, r: usize, solver: SolverKind) -> IndexCodingSolution {
    let pattern = SparsityPattern::full(k);
    IndexCodingSolution {
        x: DenseMatrix::zeros(k, k),
        u: DenseMatrix::zeros(k, r),
        v: DenseMatrix::zeros(k, r),
        side_info_amount: pattern.side_info_amount(),
        pattern,
        rank: r,
        feasible: false,
        solver,
        seed: 0,
        alignment: crate::ic_model::AlignmentReport {
            passed: false,
            max_diagonal_residual: f64::INFINITY,
            max_interference_residual: f64::INFINITY,
            worst: None,
        },
        decode_error: None,
    }
}

/// Round to 12 significant digits.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn matrix_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| sig12(m[(i, j)])).collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(format!("{what} must be a non-empty rectangular array")));
    }
    Ok(DenseMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Solution file written by `solve` and read by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub rank: usize,
    pub side_info_amount: usize,
    pub feasible: bool,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub pattern: SparsityPattern,
    /// 1-based.
    pub side_info_sets: Vec<Vec<usize>>,
    pub sum_rate: f64,
    pub per_user_rate: f64,
    pub solver: SolverKind,
    pub seed: u64,
    /// Decoders, one row per user.
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Vec<f64>>>,
    /// Precoders, one row per user.
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<f64>>>,
}

impl SolutionFile {
    pub fn from_solution(sol: &IndexCodingSolution) -> Result<Self> {
        let k = sol.dim();
        Ok(Self {
            k,
            rank: sol.rank,
            side_info_amount: sol.side_info_amount,
            feasible: sol.feasible,
            x: matrix_rows(&sol.x),
            pattern: sol.pattern.clone(),
            side_info_sets: pattern_to_side_info(&sol.pattern).one_based(),
            sum_rate: sum_rate(k, sol.rank)?,
            per_user_rate: 1.0 / sol.rank as f64,
            solver: sol.solver,
            seed: sol.seed,
            u: Some(matrix_rows(&sol.u)),
            v: Some(matrix_rows(&sol.v)),
        })
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<PathBuf> {
    let r = cfg.rank.ok_or_else(|| Error::invalid("solve needs --rank"))?;
    let kind = match cfg.solver {
        SolverChoice::Altmin => SolverKind::Altmin,
        _ => SolverKind::Riemannian,
    };
    let out = cfg.output_path.clone().unwrap_or_else(|| PathBuf::from("solution.json"));
    write_file(&out, "")?;
    let (res, _) = run_solver(kind, cfg.k, r, cfg);
    let sol = res?;
    write_file(&out, &to_json_pretty(&SolutionFile::from_solution(&sol)?)?)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub alignment_passed: bool,
    pub worst: Option<String>,
    pub numerical_rank: usize,
    pub rank_passed: bool,
    pub factor_mismatch: Option<f64>,
    pub decode_error: Option<f64>,
    pub decode_passed: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.alignment_passed && self.rank_passed && self.decode_passed
    }
}

pub fn verify_solution(file: &SolutionFile, side: Option<SideInformation>, tol: f64, seed: u64) -> Result<VerifyReport> {
    let x = rows_to_matrix(&file.x, "X")?;
    if x.shape() != (file.k, file.k) || file.pattern.dim() != file.k {
        return Err(Error::invalid("X and pattern must be K x K"));
    }
    let side = match side {
        Some(s) => s,
        None => SideInformation::from_one_based(file.k, file.side_info_sets.clone())?,
    };
    if side.dim() != file.k {
        return Err(Error::invalid("side information has the wrong number of users"));
    }
    let alignment = verify_alignment(&x, &file.pattern, tol)?;
    let rank = numerical_rank(&x, DEFAULT_RANK_TOL)?;
    let rank_passed = rank <= file.rank;

    let (code, factor_mismatch) = match (&file.u, &file.v) {
        (Some(u), Some(v)) => {
            let u = rows_to_matrix(u, "U")?;
            let v = rows_to_matrix(v, "V")?;
            let code = IndexCode::from_matrices(&u, &v)?;
            if u.nrows() != file.k {
                return Err(Error::invalid("factor rows must equal K"));
            }
            let mismatch = (code.alignment_matrix() - &x).amax();
            (code, Some(mismatch))
        }
        // Without factors, X itself is a (blocklength K) code: u_i = X row i, v_j = e_j.
        _ => (IndexCode::from_matrices(&x, &DenseMatrix::identity(file.k, file.k))?, None),
    };
    let decode_error = decode_simulation(&code, &side, VERIFY_TRIALS, seed).ok();
    let mismatch_ok = factor_mismatch.is_none_or(|m| m <= tol);
    Ok(VerifyReport {
        alignment_passed: alignment.passed && mismatch_ok,
        worst: alignment.worst.map(|w| w.to_string()),
        numerical_rank: rank,
        rank_passed,
        factor_mismatch,
        decode_passed: decode_error.is_some_and(|e| e <= DECODE_TOL),
        decode_error,
    })
}

fn cmd_verify(args: &VerifyArgs) -> std::result::Result<i32, Error> {
    let text = fs::read_to_string(&args.solution)?;
    let file: SolutionFile = serde_json::from_str(&text)?;
    let side = match &args.side_info {
        Some(p) => Some(serde_json::from_str::<SideInformation>(&fs::read_to_string(p)?)?),
        None => None,
    };
    let report = verify_solution(&file, side, args.tol, args.seed)?;
    println!("alignment: {}", if report.alignment_passed { "pass" } else { "FAIL" });
    if let Some(w) = &report.worst {
        println!("  worst violation: {w}");
    }
    if let Some(m) = report.factor_mismatch {
        println!("  max |U Vᵀ - X|: {m:.3e}");
    }
    println!(
        "rank: {} (numerical) vs {} (declared): {}",
        report.numerical_rank,
        file.rank,
        if report.rank_passed { "pass" } else { "FAIL" }
    );
    match report.decode_error {
        Some(e) => println!(
            "decode: max relative error {e:.3e} over {VERIFY_TRIALS} trials: {}",
            if report.decode_passed { "pass" } else { "FAIL" }
        ),
        None => println!("decode: FAIL (degenerate code)"),
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Sweep(a) => RunConfig::resolve(a).and_then(|c| cmd_sweep(&c)).map(|p| {
            println!("wrote {}", p.display());
            0
        }),
        Command::Solve(a) => RunConfig::resolve(a).and_then(|c| cmd_solve(&c)).map(|p| {
            println!("wrote {}", p.display());
            0
        }),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_range_parsing() {
        assert_eq!(parse_rank_range("1..16"), Ok((1, 16)));
        assert!(parse_rank_range("0..3").is_err());
        assert!(parse_rank_range("4..2").is_err());
        assert!(parse_rank_range("3").is_err());
    }

    #[test]
    fn header_omits_absent_solvers() {
        assert_eq!(
            csv_header(&[SolverKind::Riemannian, SolverKind::Altmin]),
            "rank,sparsity_riemannian,sparsity_altmin,feasible_riemannian,feasible_altmin,envelope_riemannian"
        );
        assert_eq!(csv_header(&[SolverKind::Altmin]), "rank,sparsity_altmin,feasible_altmin");
        assert_eq!(csv_header(&[SolverKind::Riemannian]), "rank,sparsity_riemannian,feasible_riemannian,envelope_riemannian");
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(0.0), 0.0);
        assert_eq!(sig12(-2.0), -2.0);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"K": 5, "seed": 3, "pipeline": {"rho": 0.01}, "solver": "altmin"}"#).unwrap();
        let args = RunArgs {
            k: None,
            rank: None,
            ranks: None,
            solver: None,
            seed: Some(9),
            rho: None,
            eps: Some(0.02),
            restarts: None,
            out: None,
            format: None,
            config: Some(path),
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.altmin.seed, 9);
        assert_eq!(cfg.pipeline.rho, 0.01);
        assert_eq!(cfg.pipeline.eps, 0.02);
        assert_eq!(cfg.pipeline.restarts, 10);
        assert_eq!(cfg.solver, SolverChoice::Altmin);
    }
}
