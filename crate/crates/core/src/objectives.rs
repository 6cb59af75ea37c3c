//! Cost functions over the factorization `X = U Vᵀ`.
//!
//! Both costs are functions of `X` only, so they are invariant under the
//! `GL(r)` action and descend to the quotient. Each one supplies its value,
//! the Euclidean partials `(∂f/∂U, ∂f/∂V) = (G V, Gᵀ U)` with `G = ∂f/∂X`,
//! and the directional derivative of those partials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::manifold::{FactorPoint, TangentVector};

/// Smooth objective over a [`FactorPoint`], as consumed by the trust-region
/// solver.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &FactorPoint) -> Result<f64>;

    /// Euclidean partials `(∂f/∂U, ∂f/∂V)`.
    fn egrad(&self, x: &FactorPoint) -> Result<TangentVector>;

    /// `D[egrad](x)[ξ]`.
    fn egrad_directional(&self, x: &FactorPoint, xi: &TangentVector) -> Result<TangentVector>;
}

fn check_dim(expected: usize, x: &FactorPoint) -> Result<()> {
    if x.dim() != expected {
        return Err(Error::invalid(format!("point has dimension {}, objective expects {expected}", x.dim())));
    }
    Ok(())
}

fn check_tangent(x: &FactorPoint, xi: &TangentVector) -> Result<()> {
    if xi.u.shape() != x.u().shape() || xi.v.shape() != x.v().shape() {
        return Err(Error::invalid("tangent shape does not match point"));
    }
    Ok(())
}

/// `(G V, Gᵀ U)`
fn partials(x: &FactorPoint, g: &DenseMatrix) -> TangentVector {
    TangentVector::new(g * x.v(), g.transpose() * x.u())
}

/// `(Ġ V + G ξ_V, Ġᵀ U + Gᵀ ξ_U)`
fn partials_directional(x: &FactorPoint, xi: &TangentVector, g: &DenseMatrix, g_dot: &DenseMatrix) -> TangentVector {
    TangentVector::new(g_dot * x.v() + g * &xi.v, g_dot.transpose() * x.u() + g.transpose() * &xi.u)
}

/// `Ẋ = ξ_U Vᵀ + U ξ_Vᵀ`
fn x_dot(x: &FactorPoint, xi: &TangentVector) -> DenseMatrix {
    &xi.u * x.v().transpose() + x.u() * xi.v.transpose()
}

/// `½ Σ_i (X_ii − 1)² + ρ Σ_ij (X_ij² + ε²)^{1/2}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedObjective {
    k: usize,
    rho: f64,
    eps: f64,
}

impl RegularizedObjective {
    pub fn new(k: usize, rho: f64, eps: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("rho must be finite and non-negative, got {rho}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be finite and positive, got {eps}")));
        }
        Ok(Self { k, rho, eps })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value_of_matrix(&self, x: &DenseMatrix) -> f64 {
        let eps2 = self.eps * self.eps;
        let diag: f64 = x.diagonal().iter().map(|d| 0.5 * (d - 1.0).powi(2)).sum();
        let smooth: f64 = x.iter().map(|v| (v * v + eps2).sqrt()).sum();
        diag + self.rho * smooth
    }

    fn g_matrix(&self, x: &DenseMatrix) -> DenseMatrix {
        let eps2 = self.eps * self.eps;
        let mut g = x.map(|v| self.rho * v / (v * v + eps2).sqrt());
        for i in 0..self.k {
            g[(i, i)] += x[(i, i)] - 1.0;
        }
        g
    }
}

impl Objective for RegularizedObjective {
    fn dim(&self) -> usize {
        self.k
    }

    fn value(&self, x: &FactorPoint) -> Result<f64> {
        check_dim(self.k, x)?;
        Ok(self.value_of_matrix(&x.matrix()))
    }

    fn egrad(&self, x: &FactorPoint) -> Result<TangentVector> {
        check_dim(self.k, x)?;
        Ok(partials(x, &self.g_matrix(&x.matrix())))
    }

    fn egrad_directional(&self, x: &FactorPoint, xi: &TangentVector) -> Result<TangentVector> {
        check_dim(self.k, x)?;
        check_tangent(x, xi)?;
        let xm = x.matrix();
        let xd = x_dot(x, xi);
        let eps2 = self.eps * self.eps;
        let mut g_dot = xm.zip_map(&xd, |v, d| self.rho * d * eps2 / (v * v + eps2).powf(1.5));
        for i in 0..self.k {
            g_dot[(i, i)] += xd[(i, i)];
        }
        Ok(partials_directional(x, xi, &self.g_matrix(&xm), &g_dot))
    }
}

/// Binary `K×K` matrix with unit diagonal marking the allowed nonzeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct SparsityPattern {
    k: usize,
    bits: Vec<bool>,
}

impl SparsityPattern {
    /// Row-major entries; the diagonal must be set.
    pub fn new(k: usize, bits: Vec<bool>) -> Result<Self> {
        if k == 0 || bits.len() != k * k {
            return Err(Error::invalid(format!("pattern needs {} entries for K = {k}, got {}", k * k, bits.len())));
        }
        if let Some(i) = (0..k).find(|&i| !bits[i * k + i]) {
            return Err(Error::invalid(format!("pattern diagonal entry ({i}, {i}) must be 1")));
        }
        Ok(Self { k, bits })
    }

    pub fn identity(k: usize) -> Self {
        Self { k, bits: (0..k * k).map(|n| n / k == n % k).collect() }
    }

    pub fn full(k: usize) -> Self {
        Self { k, bits: vec![true; k * k] }
    }

    /// Pattern from a 0/1 matrix. Other values are rejected.
    pub fn from_matrix(p: &DenseMatrix) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::invalid("pattern must be square"));
        }
        let k = p.nrows();
        let mut bits = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                match p[(i, j)] {
                    1.0 => bits.push(true),
                    0.0 => bits.push(false),
                    v => return Err(Error::invalid(format!("pattern entry ({i}, {j}) = {v} is not 0/1"))),
                }
            }
        }
        Self::new(k, bits)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.k + j]
    }

    pub fn nnz(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `nnz(P) − K`, the off-diagonal ones.
    pub fn side_info_amount(&self) -> usize {
        self.nnz() - self.k
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k, self.k, |i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    /// Positions `(i, j)` with `P_ij = 0`.
    pub fn zeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.k;
        (0..k * k).filter(move |&n| !self.bits[n]).map(move |n| (n / k, n % k))
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.k).map(|i| (0..self.k).map(|j| self.get(i, j) as u8).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<u8>>> for SparsityPattern {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        let k = rows.len();
        let mut bits = Vec::with_capacity(k * k);
        for row in &rows {
            if row.len() != k {
                return Err(Error::invalid("pattern rows must have K entries"));
            }
            for &b in row {
                match b {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    other => return Err(Error::invalid(format!("pattern entry {other} is not 0/1"))),
                }
            }
        }
        Self::new(k, bits)
    }
}

impl From<SparsityPattern> for Vec<Vec<u8>> {
    fn from(p: SparsityPattern) -> Self {
        p.rows()
    }
}

/// `P_ij = 1` iff `|X_ij| > eps`; the diagonal is always kept.
pub fn extract_pattern(x_opt: &DenseMatrix, eps: f64) -> Result<SparsityPattern> {
    if !x_opt.is_square() || x_opt.nrows() == 0 {
        return Err(Error::invalid("pattern source must be a non-empty square matrix"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {eps}")));
    }
    let k = x_opt.nrows();
    let bits = (0..k * k)
        .map(|n| {
            let (i, j) = (n / k, n % k);
            i == j || x_opt[(i, j)].abs() > eps
        })
        .collect();
    SparsityPattern::new(k, bits)
}

/// `½ Σ_i (X_ii − 1)² + ½ ‖(P .* X) − X‖_F²`
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementObjective {
    pattern: SparsityPattern,
}

impl RefinementObjective {
    pub fn new(pattern: SparsityPattern) -> Self {
        Self { pattern }
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn value_of_matrix(&self, x: &DenseMatrix) -> f64 {
        let diag: f64 = x.diagonal().iter().map(|d| 0.5 * (d - 1.0).powi(2)).sum();
        let off: f64 = self.pattern.zeros().map(|(i, j)| 0.5 * x[(i, j)].powi(2)).sum();
        diag + off
    }

    /// `Diag(M_ii) + (1 − P) .* M`; applied to `X − I` on the diagonal this
    /// is `∂f/∂X`, and to `Ẋ` its derivative.
    fn masked(&self, m: &DenseMatrix, diag_shift: f64) -> DenseMatrix {
        let k = self.pattern.k;
        let mut g = DenseMatrix::zeros(k, k);
        for i in 0..k {
            g[(i, i)] = m[(i, i)] - diag_shift;
        }
        for (i, j) in self.pattern.zeros() {
            g[(i, j)] = m[(i, j)];
        }
        g
    }
}

impl Objective for RefinementObjective {
    fn dim(&self) -> usize {
        self.pattern.k
    }

    fn value(&self, x: &FactorPoint) -> Result<f64> {
        check_dim(self.pattern.k, x)?;
        Ok(self.value_of_matrix(&x.matrix()))
    }

    fn egrad(&self, x: &FactorPoint) -> Result<TangentVector> {
        check_dim(self.pattern.k, x)?;
        Ok(partials(x, &self.masked(&x.matrix(), 1.0)))
    }

    fn egrad_directional(&self, x: &FactorPoint, xi: &TangentVector) -> Result<TangentVector> {
        check_dim(self.pattern.k, x)?;
        check_tangent(x, xi)?;
        let g = self.masked(&x.matrix(), 1.0);
        let g_dot = self.masked(&x_dot(x, xi), 0.0);
        Ok(partials_directional(x, xi, &g, &g_dot))
    }
}
