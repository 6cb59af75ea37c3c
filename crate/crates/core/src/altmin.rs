//! Alternating-minimization baseline for
//! `min ‖U Vᵀ‖₁  s.t. [U Vᵀ]_ii = 1`.
//!
//! With `V` fixed, `‖U Vᵀ‖₁ = Σ_i ‖V u_i‖₁` and the `i`-th diagonal constraint
//! only involves row `u_i`, so the `U` half-step splits into `K` independent
//! linear programs `min ‖V u‖₁ s.t. v_iᵀ u = 1`. The `V` half-step is the
//! same with the roles swapped.

use log::debug;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, DenseMatrix};
use crate::lp::solve_standard_form;
use crate::objectives::extract_pattern;
use crate::pipeline::{finalize, initial_factors, IndexCodingSolution, SolverKind};

/// Fresh random starts tried when a row problem turns infeasible.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AltMinConfig {
    pub max_outer: usize,
    pub zero_tol: f64,
    pub seed: u64,
    pub stall_tol: f64,
}

impl Default for AltMinConfig {
    fn default() -> Self {
        Self { max_outer: 50, zero_tol: 1e-6, seed: 0, stall_tol: 1e-8 }
    }
}

impl AltMinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || !(self.zero_tol > 0.0) || !(self.stall_tol > 0.0) {
            return Err(Error::invalid("alt-min needs max_outer ≥ 1 and positive tolerances"));
        }
        Ok(())
    }
}

/// `argmin ‖V u‖₁  s.t. anchorᵀ u = 1`, ties broken toward the smallest
/// `‖u‖₁`.
///
/// Standard form over `(u⁺, u⁻, p, n) ≥ 0` with `V(u⁺ − u⁻) − p + n = 0` and
/// `anchorᵀ(u⁺ − u⁻) = 1`, minimizing `Σ(p + n)` and then `Σ(u⁺ + u⁻)`.
pub fn lp_row_subproblem(v: &DenseMatrix, anchor: &DVector<f64>) -> Result<DVector<f64>> {
    let (k, r) = v.shape();
    if anchor.len() != r {
        return Err(Error::invalid(format!("anchor has length {}, expected {r}", anchor.len())));
    }
    if anchor.iter().all(|&a| a == 0.0) {
        return Err(Error::InfeasibleRow);
    }
    let n = 2 * r + 2 * k;
    let mut a = DenseMatrix::zeros(k + 1, n);
    for i in 0..k {
        for j in 0..r {
            a[(i, j)] = v[(i, j)];
            a[(i, r + j)] = -v[(i, j)];
        }
        a[(i, 2 * r + i)] = -1.0;
        a[(i, 2 * r + k + i)] = 1.0;
    }
    for j in 0..r {
        a[(k, j)] = anchor[j];
        a[(k, r + j)] = -anchor[j];
    }
    let mut b = vec![0.0; k + 1];
    b[k] = 1.0;
    let l1_cost: Vec<f64> = (0..n).map(|j| if j >= 2 * r { 1.0 } else { 0.0 }).collect();
    let norm_cost: Vec<f64> = (0..n).map(|j| if j < 2 * r { 1.0 } else { 0.0 }).collect();

    let sol = solve_standard_form(&a, &b, &[l1_cost, norm_cost]).map_err(|e| match e {
        Error::NumericalFailure(msg) if msg.contains("infeasible") => Error::InfeasibleRow,
        other => other,
    })?;
    let u = DVector::from_fn(r, |j, _| sol.x[j] - sol.x[r + j]);
    // Snap the equality back onto the constraint surface.
    let lhs = anchor.dot(&u);
    if !(lhs.abs() > 0.5) {
        return Err(Error::NumericalFailure(format!("row solution violates its constraint (aᵀu = {lhs})")));
    }
    Ok(u / lhs)
}

/// `‖U Vᵀ‖₁`
pub fn l1_objective(u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    (u * v.transpose()).iter().map(|x| x.abs()).sum()
}

/// Replace every row of `target` by the row-subproblem solution against
/// `fixed`.
fn half_step(fixed: &DenseMatrix) -> Result<DenseMatrix> {
    let (k, r) = fixed.shape();
    let rows: Vec<DVector<f64>> = (0..k)
        .into_par_iter()
        .map(|i| lp_row_subproblem(fixed, &fixed.row(i).transpose()))
        .collect::<Result<_>>()?;
    let mut out = DenseMatrix::zeros(k, r);
    for (i, row) in rows.iter().enumerate() {
        out.row_mut(i).copy_from(&row.transpose());
    }
    Ok(out)
}

/// Raw alternating iterates from one start.
#[derive(Debug, Clone)]
pub struct AltMinRun {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    /// `‖U Vᵀ‖₁` after every half-step (U first).
    pub objective_history: Vec<f64>,
    pub outer_iterations: usize,
    pub seed: u64,
}

/// Alternate from the given start until the objective stalls or the
/// iteration budget runs out.
pub fn altmin_iterate(u0: DenseMatrix, v0: DenseMatrix, cfg: &AltMinConfig, seed: u64) -> Result<AltMinRun> {
    cfg.validate()?;
    let (mut u, mut v) = (u0, v0);
    let mut history = Vec::with_capacity(2 * cfg.max_outer);
    let mut outer = 0;
    let mut prev = f64::INFINITY;
    while outer < cfg.max_outer {
        u = half_step(&v)?;
        history.push(l1_objective(&u, &v));
        v = half_step(&u)?;
        let cur = l1_objective(&u, &v);
        history.push(cur);
        outer += 1;
        if (prev - cur).abs() <= cfg.stall_tol * prev.max(1.0) {
            break;
        }
        prev = cur;
    }
    Ok(AltMinRun { u, v, objective_history: history, outer_iterations: outer, seed })
}

/// Seeded alternating minimization at rank `r`, retried from fresh starts
/// when a row problem is infeasible.
pub fn altmin_run(k: usize, r: usize, cfg: &AltMinConfig) -> Result<AltMinRun> {
    if k == 0 || r == 0 || r > k {
        return Err(Error::invalid(format!("rank {r} must lie in 1..={k}")));
    }
    let mut last_err = None;
    for attempt in 0..MAX_RETRIES {
        let seed = derive_seed(cfg.seed, &[k as u64, r as u64, attempt as u64, 0xa17]);
        let (u0, v0) = initial_factors(k, r, seed);
        match altmin_iterate(u0, v0, cfg, seed) {
            Ok(run) => return Ok(run),
            Err(e @ (Error::InfeasibleRow | Error::NumericalFailure(_))) => {
                debug!("alt-min K={k} r={r} attempt {attempt}: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::InfeasibleRow))
}

/// Baseline solution at rank `r`. When every retry fails the result is
/// reported as infeasible rather than as an error.
pub fn altmin_solve(k: usize, r: usize, cfg: &AltMinConfig) -> Result<IndexCodingSolution> {
    let run = match altmin_run(k, r, cfg) {
        Ok(run) => run,
        Err(e @ Error::InvalidInput(_)) => return Err(e),
        Err(e) => {
            debug!("alt-min K={k} r={r} gave up: {e}");
            let (u, v) = initial_factors(k, r, cfg.seed);
            let pattern = crate::objectives::SparsityPattern::full(k);
            let mut sol = finalize(u, v, pattern, SolverKind::Altmin, cfg.seed, cfg.zero_tol)?;
            sol.feasible = false;
            return Ok(sol);
        }
    };
    debug!(
        "alt-min K={k} r={r}: {} outer iterations, objective {:.6}",
        run.outer_iterations,
        run.objective_history.last().copied().unwrap_or(f64::NAN)
    );
    let pattern = extract_pattern(&(&run.u * run.v.transpose()), cfg.zero_tol)?;
    finalize(run.u, run.v, pattern, SolverKind::Altmin, run.seed, cfg.zero_tol)
}
