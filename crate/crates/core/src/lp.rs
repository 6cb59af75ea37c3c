//! Small dense linear programs in standard form
//! `min cᵀx  s.t.  A x = b, x ≥ 0`, solved with a two-phase tableau simplex
//! under Bland's rule.
//!
//! Several objectives can be given; they are optimized lexicographically by
//! barring every nonbasic column with positive reduced cost after each stage.
//! The alternating-minimization baseline uses this to break ties in the ℓ1
//! row problems toward the smallest `‖u‖₁`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Objective values, one per stage.
    pub objectives: Vec<f64>,
    pub pivots: usize,
}

struct Tableau {
    /// m rows × (cols + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns allowed to enter.
    allowed: Vec<bool>,
    pivots: usize,
    pivot_cap: usize,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.allowed.len()
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.cols()]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.cols() + 1;
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..w {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.t[i][j];
                }
            }
        }
        d
    }

    /// Primal simplex on cost `c` with Bland's rule.
    fn optimize(&mut self, c: &[f64]) -> Result<()> {
        loop {
            let d = self.reduced_costs(c);
            let Some(enter) = (0..self.cols()).find(|&j| self.allowed[j] && d[j] < -COST_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::NumericalFailure("linear program is unbounded".into()));
            };
            if self.pivots >= self.pivot_cap {
                return Err(Error::NumericalFailure(format!("simplex exceeded {} pivots", self.pivot_cap)));
            }
            self.pivot(row, enter);
        }
    }

    fn objective(&self, c: &[f64]) -> f64 {
        self.basis.iter().enumerate().map(|(i, &b)| c[b] * self.rhs(i)).sum()
    }
}

/// Solve `min c_1ᵀx, then c_2ᵀx, …  s.t. A x = b, x ≥ 0`.
pub fn solve_standard_form(a: &DenseMatrix, b: &[f64], costs: &[Vec<f64>]) -> Result<LpSolution> {
    let (m, n) = a.shape();
    if b.len() != m || costs.is_empty() || costs.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("inconsistent linear program dimensions"));
    }
    if a.iter().chain(b).chain(costs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("linear program data must be finite"));
    }

    // Columns: n structural, then m artificials.
    let cols = n + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[(i, j)];
        }
        t[i][n + i] = 1.0;
        t[i][cols] = sign * b[i];
    }
    let mut tab = Tableau {
        t,
        basis: (n..cols).collect(),
        allowed: vec![true; cols],
        pivots: 0,
        pivot_cap: 50 * (cols + m).max(10),
    };

    let phase1: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    tab.optimize(&phase1)?;
    let infeasibility = tab.objective(&phase1);
    let b_scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if infeasibility > FEAS_TOL * b_scale {
        return Err(Error::NumericalFailure(format!("linear program is infeasible (residual {infeasibility:.3e})")));
    }

    // Drive artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.t[i][j].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    for j in n..cols {
        tab.allowed[j] = false;
    }

    let mut objectives = Vec::with_capacity(costs.len());
    for (stage, c) in costs.iter().enumerate() {
        let mut full = c.clone();
        full.resize(cols, 0.0);
        tab.optimize(&full)?;
        objectives.push(tab.objective(&full));
        if stage + 1 < costs.len() {
            let d = tab.reduced_costs(&full);
            for (j, &dj) in d.iter().enumerate().take(n) {
                if dj > COST_TOL && !tab.basis.contains(&j) {
                    tab.allowed[j] = false;
                }
            }
        }
    }

    let mut x = vec![0.0; n];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab.rhs(i).max(0.0);
        }
    }
    Ok(LpSolution { x, objectives, pivots: tab.pivots })
}
