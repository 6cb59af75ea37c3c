//! Riemannian trust-region method on the fixed-rank quotient manifold.
//!
//! Each outer iteration minimizes the quadratic model
//! `m(ξ) = f + g(grad, ξ) + ½ g(Hess[ξ], ξ)` over horizontal `ξ` with
//! `‖ξ‖_g ≤ Δ` by truncated conjugate gradients (Steihaug–Toint), then
//! compares actual to predicted decrease to accept the step and resize `Δ`.
//!
//! Inner CG works at a fixed base point, so no vector transport is needed;
//! the gradient and Hessian are rebuilt at every accepted point.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_gaussian, DenseMatrix};
use crate::manifold::{
    egrad_to_rgrad, metric_unchecked, project_unchecked, retract, rhess_unchecked, FactorPoint, TangentVector,
};
use crate::objectives::Objective;

/// Step halvings tried when a retraction leaves the manifold.
pub const MAX_STEP_HALVINGS: usize = 10;

// Guards the acceptance ratio against cancellation when f and the model
// decrease are both at roundoff level.
const RATIO_REGULARIZATION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionConfig {
    pub max_iterations: usize,
    /// Stop once the Riemannian gradient norm falls to this value.
    pub grad_norm_tol: f64,
    pub delta0: f64,
    pub delta_max: f64,
    /// Minimum actual/predicted ratio for accepting a step.
    pub rho_accept: f64,
    /// Inner CG iteration cap; `None` means `2·K·r`.
    pub tcg_max_inner: Option<usize>,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            grad_norm_tol: 1e-6,
            delta0: 1.0,
            delta_max: 1024.0,
            rho_accept: 0.1,
            tcg_max_inner: None,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_norm_tol, self.delta0, self.delta_max, self.tcg_kappa, self.tcg_theta];
        if self.max_iterations == 0 || positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("trust-region parameters must be positive and finite"));
        }
        if !(self.rho_accept > 0.0 && self.rho_accept < 1.0) {
            return Err(Error::invalid(format!("rho_accept must lie in (0, 1), got {}", self.rho_accept)));
        }
        if self.delta0 > self.delta_max {
            return Err(Error::invalid("delta0 exceeds delta_max"));
        }
        if self.tcg_max_inner == Some(0) {
            return Err(Error::invalid("tcg_max_inner must be at least 1"));
        }
        Ok(())
    }

    fn inner_cap(&self, x: &FactorPoint) -> usize {
        self.tcg_max_inner.unwrap_or(2 * x.dim() * x.rank())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    StepFailure,
    NumericalFailure,
}

/// One outer iteration, for verbose traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub delta: f64,
    pub ratio: f64,
    pub inner_iterations: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub point: FactorPoint,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcgStop {
    ZeroGradient,
    NegativeCurvature,
    Boundary,
    ResidualReduced,
    InnerLimit,
}

#[derive(Debug, Clone)]
pub struct TcgOutput {
    pub step: TangentVector,
    /// `Hess[step]`, accumulated alongside the step.
    pub hess_step: TangentVector,
    pub hit_boundary: bool,
    pub inner_iterations: usize,
    pub stop: TcgStop,
}

/// Steihaug–Toint truncated CG for the trust-region subproblem in the
/// metric `g_x`.
pub fn tcg_subproblem<H>(
    x: &FactorPoint,
    rgrad: &TangentVector,
    mut hess_op: H,
    delta: f64,
    cfg: &TrustRegionConfig,
) -> Result<TcgOutput>
where
    H: FnMut(&TangentVector) -> Result<TangentVector>,
{
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("trust-region radius must be positive, got {delta}")));
    }
    let g = |a: &TangentVector, b: &TangentVector| metric_unchecked(x, a, b);
    let mut step = TangentVector::zeros_like(x);
    let mut hess_step = TangentVector::zeros_like(x);

    let mut r = rgrad.clone();
    let mut r_r = g(&r, &r);
    let norm_r0 = r_r.sqrt();
    if norm_r0 == 0.0 {
        return Ok(TcgOutput { step, hess_step, hit_boundary: false, inner_iterations: 0, stop: TcgStop::ZeroGradient });
    }
    let target = norm_r0 * norm_r0.powf(cfg.tcg_theta).min(cfg.tcg_kappa);

    let mut dir = -&r;
    // e = step, d = dir; track <e,e>, <e,d>, <d,d> in the metric
    let (mut e_e, mut e_d, mut d_d) = (0.0, 0.0, r_r);
    let delta2 = delta * delta;
    let cap = cfg.inner_cap(x);

    for j in 0..cap {
        let h_dir = hess_op(&dir)?;
        if !h_dir.is_finite() {
            return Err(Error::NumericalFailure("Hessian returned non-finite values".into()));
        }
        let d_hd = g(&dir, &h_dir);
        let alpha = r_r / d_hd;
        let e_e_next = e_e + 2.0 * alpha * e_d + alpha * alpha * d_d;

        if d_hd <= 0.0 || e_e_next >= delta2 {
            let tau = (-e_d + (e_d * e_d + d_d * (delta2 - e_e)).max(0.0).sqrt()) / d_d;
            step.axpy(tau, &dir);
            hess_step.axpy(tau, &h_dir);
            let stop = if d_hd <= 0.0 { TcgStop::NegativeCurvature } else { TcgStop::Boundary };
            return Ok(TcgOutput { step, hess_step, hit_boundary: true, inner_iterations: j + 1, stop });
        }

        e_e = e_e_next;
        step.axpy(alpha, &dir);
        hess_step.axpy(alpha, &h_dir);

        r.axpy(alpha, &h_dir);
        r = project_unchecked(x, &r);
        let r_r_next = g(&r, &r);
        if r_r_next.sqrt() <= target {
            return Ok(TcgOutput {
                step,
                hess_step,
                hit_boundary: false,
                inner_iterations: j + 1,
                stop: TcgStop::ResidualReduced,
            });
        }

        let beta = r_r_next / r_r;
        r_r = r_r_next;
        dir = &(&dir * beta) - &r;
        dir = project_unchecked(x, &dir);
        e_d = beta * (e_d + alpha * d_d);
        d_d = r_r + beta * beta * d_d;
    }
    Ok(TcgOutput { step, hess_step, hit_boundary: false, inner_iterations: cap, stop: TcgStop::InnerLimit })
}

/// Build a starting point, perturbing a rank-deficient pair once with
/// `1e-8`-scaled Gaussian noise before giving up.
pub fn start_point(u: DenseMatrix, v: DenseMatrix, seed: u64) -> Result<FactorPoint> {
    match FactorPoint::new(u.clone(), v.clone()) {
        Err(Error::RankDeficient(msg)) => {
            debug!("degenerate start ({msg}); perturbing");
            let (k, r) = u.shape();
            let scale_u = 1e-8 * u.amax().max(1.0);
            let scale_v = 1e-8 * v.amax().max(1.0);
            let pu = u + random_gaussian(k, r, seed) * scale_u;
            let pv = v + random_gaussian(k, r, seed.wrapping_add(1)) * scale_v;
            FactorPoint::new(pu, pv)
        }
        other => other,
    }
}

struct Evaluated {
    point: FactorPoint,
    value: f64,
    egrad: TangentVector,
    rgrad: TangentVector,
    grad_norm: f64,
}

fn evaluate<O: Objective>(objective: &O, point: FactorPoint) -> Result<Option<Evaluated>> {
    let value = objective.value(&point)?;
    if !value.is_finite() {
        return Ok(None);
    }
    let egrad = objective.egrad(&point)?;
    if !egrad.is_finite() {
        return Ok(None);
    }
    let rgrad = egrad_to_rgrad(&point, &egrad)?;
    let grad_norm = metric_unchecked(&point, &rgrad, &rgrad).max(0.0).sqrt();
    Ok(Some(Evaluated { point, value, egrad, rgrad, grad_norm }))
}

/// Minimize `objective` over rank-`r` matrices starting from `x0`.
pub fn tr_solve<O: Objective>(objective: &O, x0: FactorPoint, cfg: &TrustRegionConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let Some(mut cur) = evaluate(objective, x0.clone())? else {
        let value = objective.value(&x0).unwrap_or(f64::NAN);
        return Ok(SolveResult {
            point: x0,
            value,
            grad_norm: f64::NAN,
            iterations: 0,
            status: SolveStatus::NumericalFailure,
            trace: Vec::new(),
        });
    };
    let mut delta = cfg.delta0;
    let mut trace = Vec::new();
    let finish = |cur: Evaluated, iterations, status, trace| SolveResult {
        point: cur.point,
        value: cur.value,
        grad_norm: cur.grad_norm,
        iterations,
        status,
        trace,
    };

    for iter in 0..cfg.max_iterations {
        if cur.grad_norm <= cfg.grad_norm_tol {
            return Ok(finish(cur, iter, SolveStatus::Converged, trace));
        }

        let tcg = {
            let x = &cur.point;
            let egrad = &cur.egrad;
            let hess = |xi: &TangentVector| -> Result<TangentVector> {
                let d = objective.egrad_directional(x, xi)?;
                Ok(rhess_unchecked(x, xi, egrad, &d))
            };
            match tcg_subproblem(x, &cur.rgrad, hess, delta, cfg) {
                Ok(out) => out,
                Err(Error::NumericalFailure(msg)) => {
                    debug!("tCG failed: {msg}");
                    return Ok(finish(cur, iter, SolveStatus::NumericalFailure, trace));
                }
                Err(e) => return Err(e),
            }
        };

        let g_eta = metric_unchecked(&cur.point, &cur.rgrad, &tcg.step);
        let h_eta = metric_unchecked(&cur.point, &tcg.hess_step, &tcg.step);

        // Retract, halving on failure.
        let mut scale = 1.0;
        let mut candidate = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            match retract(&cur.point, &tcg.step.scaled(scale)) {
                Ok(p) => {
                    candidate = Some(p);
                    break;
                }
                Err(Error::RetractionFailure) => scale *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(candidate) = candidate else {
            debug!("retraction failed after {MAX_STEP_HALVINGS} halvings");
            return Ok(finish(cur, iter + 1, SolveStatus::StepFailure, trace));
        };
        let model_decrease = -(scale * g_eta + 0.5 * scale * scale * h_eta);

        let Some(next) = evaluate(objective, candidate)? else {
            debug!("objective non-finite at candidate");
            return Ok(finish(cur, iter + 1, SolveStatus::NumericalFailure, trace));
        };

        let reg = cur.value.abs().max(1.0) * f64::EPSILON * RATIO_REGULARIZATION;
        let ratio = (cur.value - next.value + reg) / (model_decrease + reg);
        let hit_boundary = tcg.hit_boundary && scale == 1.0;

        if !(ratio >= 0.25) {
            delta *= 0.25;
        } else if ratio > 0.75 && hit_boundary {
            delta = (2.0 * delta).min(cfg.delta_max);
        }
        let accepted = model_decrease > 0.0 && ratio > cfg.rho_accept && next.value <= cur.value;

        let record = IterationRecord {
            iteration: iter + 1,
            value: if accepted { next.value } else { cur.value },
            grad_norm: if accepted { next.grad_norm } else { cur.grad_norm },
            delta,
            ratio,
            inner_iterations: tcg.inner_iterations,
            accepted,
        };
        debug!(
            "tr iter {:>3} f {:.10e} |g| {:.3e} delta {:.3e} ratio {:+.3e} inner {} {}",
            record.iteration,
            record.value,
            record.grad_norm,
            record.delta,
            record.ratio,
            record.inner_iterations,
            if accepted { "acc" } else { "REJ" }
        );
        trace.push(record);
        if accepted {
            cur = next;
        }
    }

    let status = if cur.grad_norm <= cfg.grad_norm_tol { SolveStatus::Converged } else { SolveStatus::IterationLimit };
    Ok(finish(cur, cfg.max_iterations, status, trace))
}
