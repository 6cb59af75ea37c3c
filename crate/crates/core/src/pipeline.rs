//! Two-stage search for sparse unit-diagonal matrices of a given rank.
//!
//! 1. Minimize the smoothed-ℓ1 regularized cost from a random start and
//!    threshold the result into a sparsity pattern.
//! 2. Complete that pattern at the same rank from the stage-1 factors,
//!    rescale rows of `U` so the diagonal is exactly one, and check the
//!    alignment conditions.
//!
//! [`solve_one`] repeats this over several seeds and keeps the sparsest
//! feasible result; [`sweep`] does that for every rank `1..=K`.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ic_model::{
    decode_simulation, pattern_to_side_info, verify_alignment, AlignmentReport, IndexCode,
};
use crate::linalg::{derive_seed, numerical_rank, random_gaussian, DenseMatrix, DEFAULT_RANK_TOL};
use crate::manifold::FactorPoint;
use crate::objectives::{extract_pattern, RefinementObjective, RegularizedObjective, SparsityPattern};
use crate::trust_region::{start_point, tr_solve, SolveStatus, TrustRegionConfig};

/// Largest decode error tolerated for a solution to count as feasible.
pub const DECODE_TOL: f64 = 1e-8;

/// Gaussian trials behind the feasibility verdict.
pub const FEASIBILITY_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub rho: f64,
    pub eps: f64,
    pub restarts: usize,
    pub seed: u64,
    pub tr_config: TrustRegionConfig,
    /// Gradient tolerance for the completion stage, which has to drive the
    /// off-pattern entries to roundoff for the code to decode.
    pub refine_grad_tol: f64,
    pub feasibility_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rho: 0.001,
            eps: 0.01,
            restarts: 10,
            seed: 0,
            tr_config: TrustRegionConfig::default(),
            refine_grad_tol: 1e-12,
            feasibility_tol: 1e-6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if !(self.feasibility_tol > 0.0) || !(self.refine_grad_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        RegularizedObjective::new(1, self.rho, self.eps)?;
        self.tr_config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Riemannian,
    Altmin,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Riemannian => "riemannian",
            SolverKind::Altmin => "altmin",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndexCodingSolution {
    pub x: DenseMatrix,
    /// Decoders (rows of `U`) and precoders (rows of `V`).
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub pattern: SparsityPattern,
    pub rank: usize,
    pub side_info_amount: usize,
    pub feasible: bool,
    pub solver: SolverKind,
    /// Seed of the run that produced this solution.
    pub seed: u64,
    pub alignment: AlignmentReport,
    pub decode_error: Option<f64>,
}

impl IndexCodingSolution {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn code(&self) -> IndexCode {
        IndexCode::from_matrices(&self.u, &self.v).expect("factor shapes agree")
    }

    pub fn factors(&self) -> Result<FactorPoint> {
        FactorPoint::new(self.u.clone(), self.v.clone())
    }
}

/// Rescale `u_i ← u_i / (u_iᵀ v_i)` and judge feasibility. Shared by both
/// solvers so their accounting is identical.
pub(crate) fn finalize(
    u: DenseMatrix,
    v: DenseMatrix,
    pattern: SparsityPattern,
    solver: SolverKind,
    seed: u64,
    tol: f64,
) -> Result<IndexCodingSolution> {
    let k = u.nrows();
    let rank = u.ncols();
    let x0 = &u * v.transpose();
    let diag_ok = (0..k).all(|i| x0[(i, i)].abs() >= tol);
    let u = if diag_ok {
        let mut u = u;
        for i in 0..k {
            let d = x0[(i, i)];
            u.row_mut(i).scale_mut(1.0 / d);
        }
        u
    } else {
        debug!("{} seed {seed}: diagonal too small to renormalize", solver.name());
        u
    };
    let x = &u * v.transpose();
    let alignment = verify_alignment(&x, &pattern, tol)?;
    let rank_ok = numerical_rank(&x, DEFAULT_RANK_TOL)? <= rank;

    let decode_error = if diag_ok && alignment.passed {
        let code = IndexCode::from_matrices(&u, &v)?;
        decode_simulation(&code, &pattern_to_side_info(&pattern), FEASIBILITY_TRIALS, seed).ok()
    } else {
        None
    };
    let feasible = diag_ok && alignment.passed && rank_ok && decode_error.is_some_and(|e| e <= DECODE_TOL);
    Ok(IndexCodingSolution {
        side_info_amount: pattern.side_info_amount(),
        x,
        u,
        v,
        pattern,
        rank,
        feasible,
        solver,
        seed,
        alignment,
        decode_error,
    })
}

fn check_rank(k: usize, r: usize) -> Result<()> {
    if k == 0 || r == 0 || r > k {
        return Err(Error::invalid(format!("rank {r} must lie in 1..={k}")));
    }
    Ok(())
}

/// Random factors with entries `N(0, 1/r)`. Rows of `U` whose diagonal
/// product `u_iᵀv_i` is negative are negated, which keeps the distribution
/// symmetric but starts every `X_ii` on the right side of zero.
pub fn initial_factors(k: usize, r: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let scale = 1.0 / (r as f64).sqrt();
    let mut u = random_gaussian(k, r, derive_seed(seed, &[0])) * scale;
    let v = random_gaussian(k, r, derive_seed(seed, &[1])) * scale;
    for i in 0..k {
        if u.row(i).dot(&v.row(i)) < 0.0 {
            u.row_mut(i).neg_mut();
        }
    }
    (u, v)
}

/// Stage 1: solve the regularized problem and threshold the result.
pub fn find_pattern(k: usize, r: usize, cfg: &PipelineConfig, seed: u64) -> Result<(FactorPoint, SparsityPattern)> {
    check_rank(k, r)?;
    let objective = RegularizedObjective::new(k, cfg.rho, cfg.eps)?;
    let (u0, v0) = initial_factors(k, r, seed);
    let x0 = start_point(u0, v0, derive_seed(seed, &[2]))?;
    let res = tr_solve(&objective, x0, &cfg.tr_config)?;
    debug!(
        "stage 1 K={k} r={r} seed={seed}: {:?} after {} iterations, f={:.6e}, |grad|={:.3e}",
        res.status, res.iterations, res.value, res.grad_norm
    );
    if res.status == SolveStatus::NumericalFailure {
        return Err(Error::NumericalFailure(format!("stage 1 failed for seed {seed}")));
    }
    let pattern = extract_pattern(&res.point.matrix(), cfg.eps)?;
    Ok((res.point, pattern))
}

/// Stage 2: rank-constrained completion of `pattern` from `warm_start`.
pub fn refine(pattern: &SparsityPattern, r: usize, warm_start: FactorPoint, cfg: &PipelineConfig, seed: u64) -> Result<IndexCodingSolution> {
    if warm_start.dim() != pattern.dim() || warm_start.rank() != r {
        return Err(Error::invalid("warm start does not match pattern dimension and rank"));
    }
    let objective = RefinementObjective::new(pattern.clone());
    let tr = TrustRegionConfig { grad_norm_tol: cfg.refine_grad_tol.min(cfg.tr_config.grad_norm_tol), ..cfg.tr_config };
    let res = tr_solve(&objective, warm_start, &tr)?;
    debug!(
        "stage 2 r={r} s={} seed={seed}: {:?} after {} iterations, f={:.3e}, |grad|={:.3e}",
        pattern.side_info_amount(),
        res.status,
        res.iterations,
        res.value,
        res.grad_norm
    );
    let (u, v) = res.point.into_factors();
    finalize(u, v, pattern.clone(), SolverKind::Riemannian, seed, cfg.feasibility_tol)
}

/// Seed for restart `restart` at rank `r`.
pub fn restart_seed(base: u64, k: usize, r: usize, restart: usize) -> u64 {
    derive_seed(base, &[k as u64, r as u64, restart as u64])
}

/// Pick the sparsest feasible solution (earliest on ties), or the one with the
/// smallest alignment residual when none is feasible.
pub(crate) fn select_best(candidates: Vec<IndexCodingSolution>) -> Option<IndexCodingSolution> {
    let mut best: Option<IndexCodingSolution> = None;
    for cand in candidates {
        let better = match &best {
            None => true,
            Some(b) => match (cand.feasible, b.feasible) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => cand.side_info_amount < b.side_info_amount,
                (false, false) => infeasibility(&cand) < infeasibility(b),
            },
        };
        if better {
            best = Some(cand);
        }
    }
    best
}

fn infeasibility(s: &IndexCodingSolution) -> f64 {
    s.alignment.max_diagonal_residual.max(s.alignment.max_interference_residual)
}

/// Best of `cfg.restarts` two-stage runs at rank `r`.
pub fn solve_one(k: usize, r: usize, cfg: &PipelineConfig) -> Result<IndexCodingSolution> {
    check_rank(k, r)?;
    cfg.validate()?;
    let runs: Vec<Result<IndexCodingSolution>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let seed = restart_seed(cfg.seed, k, r, i);
            let (x, pattern) = find_pattern(k, r, cfg, seed)?;
            refine(&pattern, r, x, cfg, seed)
        })
        .collect();
    let mut ok = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(sol) => ok.push(sol),
            Err(e @ Error::InvalidInput(_)) => return Err(e),
            Err(e) => debug!("K={k} r={r} restart {i} failed: {e}"),
        }
    }
    let best = select_best(ok).ok_or_else(|| Error::Pipeline(format!("all {} restarts failed at rank {r}", cfg.restarts)))?;
    info!(
        "K={k} r={r}: s={} feasible={} (riemannian)",
        best.side_info_amount, best.feasible
    );
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffEntry {
    pub rank: usize,
    pub side_info_amount: usize,
    pub feasible: bool,
    pub solver: SolverKind,
    /// `min_{r' ≤ r} s(r')` over feasible entries of the same solver.
    pub envelope: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub entries: Vec<TradeoffEntry>,
}

impl TradeoffCurve {
    /// Build from per-rank solutions; entries are ordered by solver then rank.
    pub fn from_solutions<'a>(solutions: impl IntoIterator<Item = &'a IndexCodingSolution>) -> Self {
        let mut entries: Vec<TradeoffEntry> = solutions
            .into_iter()
            .map(|s| TradeoffEntry {
                rank: s.rank,
                side_info_amount: s.side_info_amount,
                feasible: s.feasible,
                solver: s.solver,
                envelope: None,
            })
            .collect();
        entries.sort_by_key(|e| (e.solver, e.rank));
        let mut running: Option<(SolverKind, Option<usize>)> = None;
        for e in &mut entries {
            let prev = match running {
                Some((solver, env)) if solver == e.solver => env,
                _ => None,
            };
            let own = e.feasible.then_some(e.side_info_amount);
            let env = match (prev, own) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            e.envelope = env;
            running = Some((e.solver, env));
        }
        Self { entries }
    }

    pub fn series(&self, solver: SolverKind) -> impl Iterator<Item = &TradeoffEntry> {
        self.entries.iter().filter(move |e| e.solver == solver)
    }
}

/// Riemannian tradeoff curve over ranks `1..=K`.
pub fn sweep(k: usize, cfg: &PipelineConfig) -> Result<TradeoffCurve> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let solutions: Vec<IndexCodingSolution> =
        (1..=k).into_par_iter().map(|r| solve_one(k, r, cfg)).collect::<Result<_>>()?;
    Ok(TradeoffCurve::from_solutions(&solutions))
}
