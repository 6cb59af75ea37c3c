//! Dense-matrix substrate.
//!
//! Everything here works on [`nalgebra::DMatrix<f64>`]. Matrices in this
//! crate are at most a few dozen rows, so the routines favour robustness
//! (SVD for rank, Cholesky with a condition guard for SPD solves) over speed.
//!
//! Random matrices come from `ChaCha8Rng` (crate `rand_chacha`) seeded with
//! `seed_from_u64`, sampled through `rand_distr::StandardNormal` and written
//! in row-major order. That generator is part of the reproducibility
//! contract: changing it changes every sweep output.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Default relative tolerance for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Largest condition estimate accepted by [`SpdFactor`]. Matches the
/// `1e-12` singular-value ratio required of manifold factors.
pub const MAX_SPD_CONDITION: f64 = 1e24;

pub fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values strictly above `tol` times the largest one.
pub fn numerical_rank(m: &DenseMatrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be positive, got {tol}")));
    }
    ensure_finite(m, "matrix")?;
    let sv = singular_values(m);
    let Some(&largest) = sv.first() else {
        return Ok(0);
    };
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * largest).count())
}

/// Cholesky factor of a small symmetric positive-definite matrix, kept so
/// repeated `A⁻¹` applications never form the inverse.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid(format!("SPD matrix must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        ensure_finite(a, "SPD matrix")?;
        let scale = a.amax().max(1.0);
        if (a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("matrix is not symmetric"));
        }
        let chol = Cholesky::new(a.clone())
            .ok_or_else(|| Error::RankDeficient("matrix is not positive definite".into()))?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if !(lo > 0.0) || (hi / lo).powi(2) > MAX_SPD_CONDITION {
            return Err(Error::RankDeficient(format!(
                "condition estimate {:.3e} exceeds {MAX_SPD_CONDITION:e}",
                (hi / lo).powi(2)
            )));
        }
        Ok(Self { chol })
    }

    /// `A⁻¹ B`
    pub fn solve_left(&self, b: &DenseMatrix) -> DenseMatrix {
        self.chol.solve(b)
    }

    /// `B A⁻¹`, using the symmetry of `A`.
    pub fn solve_right(&self, b: &DenseMatrix) -> DenseMatrix {
        self.chol.solve(&b.transpose()).transpose()
    }
}

/// Solve `A X = B` for symmetric positive-definite `A`.
pub fn solve_small_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.nrows() != a.nrows() {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    ensure_finite(b, "right-hand side")?;
    Ok(SpdFactor::new(a)?.solve_left(b))
}

/// `rows × cols` matrix of standard normal draws, filled row by row.
pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

/// Mix a base seed with a path of indices (rank, restart, ...) into an
/// independent 64-bit seed. SplitMix64 finalizer per component.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Symmetric part `(Z + Zᵀ) / 2`.
pub fn sym(z: &DenseMatrix) -> DenseMatrix {
    (z + z.transpose()) * 0.5
}

/// Frobenius inner product `Tr(Aᵀ B)`.
pub fn frob_dot(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.dot(b)
}
