//! Quotient geometry of rank-`r` matrices `X = U Vᵀ`.
//!
//! Points live in the total space `ℝ^{K×r} × ℝ^{K×r}` and represent the class
//! `{(U M⁻¹, V Mᵀ) : M ∈ GL(r)}`. Tangent directions are pairs `(ξ_U, ξ_V)`;
//! the horizontal space is the `g`-orthogonal complement of the vertical
//! directions `(-UΛ, VΛᵀ)`, with metric
//!
//! ```text
//! g_x(ξ, η) = Tr((VᵀV) ξ_Uᵀ η_U) + Tr((UᵀU) ξ_Vᵀ η_V)
//! ```
//!
//! All `(·ᵀ·)⁻¹` applications go through the Cholesky factors cached on the
//! point.

use std::ops::{Add, Mul, Neg, Sub};

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, frob_dot, singular_values, sym, DenseMatrix, SpdFactor};

/// Smallest admissible ratio between the extreme singular values of a factor.
pub const FACTOR_RANK_RATIO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FactorPoint {
    u: DenseMatrix,
    v: DenseMatrix,
    gram_u: DenseMatrix,
    gram_v: DenseMatrix,
    gram_u_fac: SpdFactor,
    gram_v_fac: SpdFactor,
}

impl FactorPoint {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.shape() != v.shape() {
            return Err(Error::invalid(format!("factor shapes differ: {:?} vs {:?}", u.shape(), v.shape())));
        }
        let (k, r) = u.shape();
        if r == 0 || r > k {
            return Err(Error::invalid(format!("rank {r} not in 1..={k}")));
        }
        ensure_finite(&u, "U")?;
        ensure_finite(&v, "V")?;
        for (name, f) in [("U", &u), ("V", &v)] {
            let sv = singular_values(f);
            let (hi, lo) = (sv[0], sv[r - 1]);
            if !(lo > FACTOR_RANK_RATIO * hi) {
                return Err(Error::RankDeficient(format!(
                    "{name} singular values {hi:.3e}..{lo:.3e} below ratio {FACTOR_RANK_RATIO:e}"
                )));
            }
        }
        let gram_u = u.transpose() * &u;
        let gram_v = v.transpose() * &v;
        let gram_u_fac = SpdFactor::new(&gram_u)?;
        let gram_v_fac = SpdFactor::new(&gram_v)?;
        Ok(Self { u, v, gram_u, gram_v, gram_u_fac, gram_v_fac })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn gram_u(&self) -> &DenseMatrix {
        &self.gram_u
    }

    pub fn gram_v(&self) -> &DenseMatrix {
        &self.gram_v
    }

    /// Problem dimension `K`.
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// The represented matrix `U Vᵀ`.
    pub fn matrix(&self) -> DenseMatrix {
        &self.u * self.v.transpose()
    }

    /// Another representative of the same class: `(U M⁻¹, V Mᵀ)`.
    pub fn act(&self, m: &DenseMatrix) -> Result<Self> {
        let r = self.rank();
        if m.shape() != (r, r) {
            return Err(Error::invalid("group element must be r x r"));
        }
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("group element is singular".into()))?;
        Self::new(&self.u * m_inv, &self.v * m.transpose())
    }

    pub fn into_factors(self) -> (DenseMatrix, DenseMatrix) {
        (self.u, self.v)
    }

    fn check(&self, xi: &TangentVector) -> Result<()> {
        if xi.u.shape() != self.u.shape() || xi.v.shape() != self.v.shape() {
            return Err(Error::invalid(format!(
                "tangent shape {:?}/{:?} does not match point {:?}",
                xi.u.shape(),
                xi.v.shape(),
                self.u.shape()
            )));
        }
        Ok(())
    }
}

/// A direction `(ξ_U, ξ_V)` at some [`FactorPoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl TangentVector {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Self {
        Self { u, v }
    }

    pub fn zeros_like(x: &FactorPoint) -> Self {
        let (k, r) = x.u.shape();
        Self { u: DenseMatrix::zeros(k, r), v: DenseMatrix::zeros(k, r) }
    }

    /// Flat (Euclidean) inner product of the stacked components.
    pub fn flat_dot(&self, other: &Self) -> f64 {
        frob_dot(&self.u, &other.u) + frob_dot(&self.v, &other.v)
    }

    pub fn flat_norm(&self) -> f64 {
        self.flat_dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.u += &other.u * alpha;
        self.v += &other.v * alpha;
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { u: &self.u * alpha, v: &self.v * alpha }
    }
}

impl Add for &TangentVector {
    type Output = TangentVector;
    fn add(self, rhs: &TangentVector) -> TangentVector {
        TangentVector { u: &self.u + &rhs.u, v: &self.v + &rhs.v }
    }
}

impl Sub for &TangentVector {
    type Output = TangentVector;
    fn sub(self, rhs: &TangentVector) -> TangentVector {
        TangentVector { u: &self.u - &rhs.u, v: &self.v - &rhs.v }
    }
}

impl Neg for &TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &TangentVector {
    type Output = TangentVector;
    fn mul(self, alpha: f64) -> TangentVector {
        self.scaled(alpha)
    }
}

pub fn metric(x: &FactorPoint, xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    x.check(xi)?;
    x.check(eta)?;
    Ok(metric_unchecked(x, xi, eta))
}

// Tr(G_V ξ_Uᵀ η_U) = <ξ_U G_V, η_U>
pub(crate) fn metric_unchecked(x: &FactorPoint, xi: &TangentVector, eta: &TangentVector) -> f64 {
    frob_dot(&(&xi.u * &x.gram_v), &eta.u) + frob_dot(&(&xi.v * &x.gram_u), &eta.v)
}

pub fn norm(x: &FactorPoint, xi: &TangentVector) -> Result<f64> {
    Ok(metric(x, xi, xi)?.max(0.0).sqrt())
}

/// Relative residual of the horizontal-space condition
/// `Uᵀ ζ_U (VᵀV) = (UᵀU) ζ_Vᵀ V`.
pub fn horizontal_residual(x: &FactorPoint, zeta: &TangentVector) -> Result<f64> {
    x.check(zeta)?;
    let lhs = x.u.transpose() * &zeta.u * &x.gram_v;
    let rhs = &x.gram_u * zeta.v.transpose() * &x.v;
    let scale = x.u.norm() * zeta.u.norm() * x.gram_v.norm() + x.gram_u.norm() * zeta.v.norm() * x.v.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).norm() / scale)
}

/// Orthogonal projection onto the horizontal space:
/// `(η_U + UΛ, η_V − VΛᵀ)` with `Λ = ½[η_VᵀV (VᵀV)⁻¹ − (UᵀU)⁻¹ Uᵀ η_U]`.
pub fn project_horizontal(x: &FactorPoint, eta: &TangentVector) -> Result<TangentVector> {
    x.check(eta)?;
    Ok(project_unchecked(x, eta))
}

pub(crate) fn project_unchecked(x: &FactorPoint, eta: &TangentVector) -> TangentVector {
    let a = x.gram_v_fac.solve_right(&(eta.v.transpose() * &x.v));
    let b = x.gram_u_fac.solve_left(&(x.u.transpose() * &eta.u));
    let lambda = (a - b) * 0.5;
    TangentVector {
        u: &eta.u + &x.u * &lambda,
        v: &eta.v - &x.v * lambda.transpose(),
    }
}

/// Unprojected gradient scaling `(∂f/∂U (VᵀV)⁻¹, ∂f/∂V (UᵀU)⁻¹)`.
fn scale_by_gram_inverse(x: &FactorPoint, egrad: &TangentVector) -> TangentVector {
    TangentVector {
        u: x.gram_v_fac.solve_right(&egrad.u),
        v: x.gram_u_fac.solve_right(&egrad.v),
    }
}

/// Riemannian gradient from the Euclidean partials. The trailing projection
/// is a no-op in exact arithmetic for invariant objectives.
pub fn egrad_to_rgrad(x: &FactorPoint, egrad: &TangentVector) -> Result<TangentVector> {
    x.check(egrad)?;
    let scaled = scale_by_gram_inverse(x, egrad);
    let projected = project_unchecked(x, &scaled);
    if log::log_enabled!(log::Level::Debug) {
        let drift = (&projected - &scaled).flat_norm();
        let base = scaled.flat_norm();
        debug!("rgrad projection drift {:.3e} (relative {:.3e})", drift, if base > 0.0 { drift / base } else { 0.0 });
    }
    Ok(projected)
}

/// Riemannian connection in the total space: `D η[ξ] + (A_U, A_V)` with
///
/// ```text
/// A_U = η_U Sym(ξ_VᵀV)(VᵀV)⁻¹ + ξ_U Sym(η_VᵀV)(VᵀV)⁻¹ − U Sym(η_Vᵀξ_V)(VᵀV)⁻¹
/// A_V = η_V Sym(ξ_UᵀU)(UᵀU)⁻¹ + ξ_V Sym(η_UᵀU)(UᵀU)⁻¹ − V Sym(η_Uᵀξ_U)(UᵀU)⁻¹
/// ```
pub fn connection(
    x: &FactorPoint,
    xi: &TangentVector,
    eta: &TangentVector,
    eta_directional: &TangentVector,
) -> Result<TangentVector> {
    for t in [xi, eta, eta_directional] {
        x.check(t)?;
    }
    Ok(connection_unchecked(x, xi, eta, eta_directional))
}

fn connection_unchecked(
    x: &FactorPoint,
    xi: &TangentVector,
    eta: &TangentVector,
    eta_directional: &TangentVector,
) -> TangentVector {
    let (u, v) = (&x.u, &x.v);
    let a_u = &eta.u * sym(&(xi.v.transpose() * v)) + &xi.u * sym(&(eta.v.transpose() * v))
        - u * sym(&(eta.v.transpose() * &xi.v));
    let a_v = &eta.v * sym(&(xi.u.transpose() * u)) + &xi.v * sym(&(eta.u.transpose() * u))
        - v * sym(&(eta.u.transpose() * &xi.u));
    TangentVector {
        u: &eta_directional.u + x.gram_v_fac.solve_right(&a_u),
        v: &eta_directional.v + x.gram_u_fac.solve_right(&a_v),
    }
}

/// Riemannian Hessian `Π_x(∇_ξ grad f)`.
///
/// `egrad` holds `(f_U, f_V)` at `x` and `egrad_directional` their Euclidean
/// derivative along `ξ`. The derivative of the Gram-inverse scaling enters by
/// the product rule:
/// `D[f_U (VᵀV)⁻¹][ξ] = D f_U[ξ] (VᵀV)⁻¹ − f_U (VᵀV)⁻¹ (ξ_VᵀV + Vᵀξ_V) (VᵀV)⁻¹`.
pub fn rhess_apply(
    x: &FactorPoint,
    xi: &TangentVector,
    egrad: &TangentVector,
    egrad_directional: &TangentVector,
) -> Result<TangentVector> {
    for t in [xi, egrad, egrad_directional] {
        x.check(t)?;
    }
    let out = rhess_unchecked(x, xi, egrad, egrad_directional);
    if !out.is_finite() {
        return Err(Error::NumericalFailure("Hessian application produced non-finite values".into()));
    }
    Ok(out)
}

pub(crate) fn rhess_unchecked(
    x: &FactorPoint,
    xi: &TangentVector,
    egrad: &TangentVector,
    egrad_directional: &TangentVector,
) -> TangentVector {
    let grad = scale_by_gram_inverse(x, egrad);
    let dgram_v = sym(&(xi.v.transpose() * &x.v)) * 2.0;
    let dgram_u = sym(&(xi.u.transpose() * &x.u)) * 2.0;
    let dgrad = TangentVector {
        u: x.gram_v_fac.solve_right(&(&egrad_directional.u - &grad.u * dgram_v)),
        v: x.gram_u_fac.solve_right(&(&egrad_directional.v - &grad.v * dgram_u)),
    };
    let nabla = connection_unchecked(x, xi, &grad, &dgrad);
    project_unchecked(x, &nabla)
}

/// Additive retraction `(U + ξ_U, V + ξ_V)`.
pub fn retract(x: &FactorPoint, xi: &TangentVector) -> Result<FactorPoint> {
    x.check(xi)?;
    FactorPoint::new(&x.u + &xi.u, &x.v + &xi.v).map_err(|e| match e {
        Error::RankDeficient(_) | Error::InvalidInput(_) => Error::RetractionFailure,
        other => other,
    })
}
