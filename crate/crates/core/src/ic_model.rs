//! Scalar linear index codes over the reals.
//!
//! User `k` holds the messages indexed by its side-information set `𝒱_k`,
//! receives `z = Σ_i v_i s_i ∈ ℝ^N` and decodes
//!
//! ```text
//! ŝ_k = (u_kᵀ v_k)⁻¹ u_kᵀ (z − Σ_{i ∈ 𝒱_k} v_i s_i)
//! ```
//!
//! which recovers `s_k` exactly when `u_kᵀ v_k ≠ 0` and `u_kᵀ v_i = 0` for every
//! other `i ∉ 𝒱_k`. With `X_ij = u_iᵀ v_j` these alignment conditions say
//! `X` has a nonzero diagonal and zeros outside the side-information pattern;
//! `rank(X)` is the blocklength.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, DenseMatrix};
use crate::manifold::FactorPoint;
use crate::objectives::SparsityPattern;

/// Below this `|u_kᵀ v_k|` a code cannot be decoded.
pub const DEGENERATE_DIAGONAL: f64 = 1e-12;

/// Side-information sets, 0-based in memory. The JSON form is
/// `{"K": int, "sets": [[int…]…]}` with 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInformation {
    k: usize,
    sets: Vec<Vec<usize>>,
}

impl SideInformation {
    /// `sets[i]` lists the 0-based messages known at user `i`.
    pub fn new(k: usize, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.len() != k {
            return Err(Error::invalid(format!("expected {k} side-information sets, got {}", sets.len())));
        }
        for (i, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.contains(&i) {
                return Err(Error::invalid(format!("user {} lists its own message as side information", i + 1)));
            }
            if let Some(&bad) = set.iter().find(|&&j| j >= k) {
                return Err(Error::invalid(format!("index {} out of range 1..={k}", bad + 1)));
            }
        }
        Ok(Self { k, sets })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn set(&self, user: usize) -> &[usize] {
        &self.sets[user]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn total(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn to_pattern(&self) -> SparsityPattern {
        let k = self.k;
        let mut bits: Vec<bool> = (0..k * k).map(|n| n / k == n % k).collect();
        for (i, set) in self.sets.iter().enumerate() {
            for &j in set {
                bits[i * k + j] = true;
            }
        }
        SparsityPattern::new(k, bits).expect("diagonal is set")
    }

    /// 1-based sets, as written to JSON.
    pub fn one_based(&self) -> Vec<Vec<usize>> {
        self.sets.iter().map(|s| s.iter().map(|j| j + 1).collect()).collect()
    }

    pub fn from_one_based(k: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let sets = sets
            .into_iter()
            .map(|s| {
                s.into_iter()
                    .map(|j| j.checked_sub(1).ok_or_else(|| Error::invalid("side-information indices are 1-based")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, sets)
    }
}

#[derive(Serialize, Deserialize)]
struct SideInformationJson {
    #[serde(rename = "K")]
    k: usize,
    sets: Vec<Vec<usize>>,
}

impl Serialize for SideInformation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SideInformationJson { k: self.k, sets: self.one_based() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SideInformation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SideInformationJson::deserialize(d)?;
        Self::from_one_based(raw.k, raw.sets).map_err(serde::de::Error::custom)
    }
}

/// Precoders `v_j` and decoders `u_i` in `ℝ^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexCode {
    pub blocklength: usize,
    pub precoders: Vec<DVector<f64>>,
    pub decoders: Vec<DVector<f64>>,
}

impl IndexCode {
    /// Rows of `U` (decoders) and `V` (precoders) of equal shape.
    pub fn from_matrices(u: &DenseMatrix, v: &DenseMatrix) -> Result<Self> {
        if u.shape() != v.shape() || u.ncols() == 0 {
            return Err(Error::invalid("decoder and precoder matrices must share a non-empty shape"));
        }
        let rows = |m: &DenseMatrix| (0..m.nrows()).map(|i| m.row(i).transpose()).collect();
        Ok(Self { blocklength: u.ncols(), decoders: rows(u), precoders: rows(v) })
    }

    pub fn users(&self) -> usize {
        self.decoders.len()
    }

    /// `X_ij = u_iᵀ v_j`
    pub fn alignment_matrix(&self) -> DenseMatrix {
        let k = self.users();
        DenseMatrix::from_fn(k, k, |i, j| self.decoders[i].dot(&self.precoders[j]))
    }
}

pub fn code_from_factors(x: &FactorPoint) -> IndexCode {
    IndexCode::from_matrices(x.u(), x.v()).expect("factor point shapes are consistent")
}

/// `𝒱_i = { j ≠ i : P_ij = 1 }`
pub fn pattern_to_side_info(p: &SparsityPattern) -> SideInformation {
    let k = p.dim();
    let sets = (0..k).map(|i| (0..k).filter(|&j| j != i && p.get(i, j)).collect()).collect();
    SideInformation { k, sets }
}

/// `nnz(P) − K`
pub fn side_info_amount(p: &SparsityPattern) -> usize {
    p.side_info_amount()
}

/// Per-user rate `1 / rank`.
pub fn achievable_rate(rank: usize) -> Result<f64> {
    if rank == 0 {
        return Err(Error::invalid("rank must be at least 1"));
    }
    Ok(1.0 / rank as f64)
}

/// Sum rate `K / rank`.
pub fn sum_rate(k: usize, rank: usize) -> Result<f64> {
    Ok(k as f64 * achievable_rate(rank)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// `|X_kk − 1| > tol`
    Diagonal,
    /// `|X_ki| > tol` where `i ∉ 𝒱_k`
    Interference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 0-based row (receiving user).
    pub row: usize,
    /// 0-based column (interfering message).
    pub col: usize,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Diagonal => "|X_kk - 1|",
            ViolationKind::Interference => "|X_ki|",
        };
        write!(f, "{what} = {:.3e} at ({}, {})", self.residual, self.row + 1, self.col + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub passed: bool,
    pub max_diagonal_residual: f64,
    pub max_interference_residual: f64,
    /// Largest residual above tolerance, if any.
    pub worst: Option<Violation>,
}

/// Check `|X_kk − 1| ≤ tol` and `|X_ki| ≤ tol` wherever `P_ki = 0`.
pub fn verify_alignment(x: &DenseMatrix, p: &SparsityPattern, tol: f64) -> Result<AlignmentReport> {
    let k = p.dim();
    if x.shape() != (k, k) {
        return Err(Error::invalid(format!("matrix is {:?}, pattern is {k}x{k}", x.shape())));
    }
    let mut worst: Option<Violation> = None;
    let mut consider = |v: Violation| {
        if v.residual > tol && worst.is_none_or(|w| v.residual > w.residual) {
            worst = Some(v);
        }
    };
    let mut max_diag = 0.0f64;
    for i in 0..k {
        let residual = (x[(i, i)] - 1.0).abs();
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        max_diag = max_diag.max(residual);
        consider(Violation { kind: ViolationKind::Diagonal, row: i, col: i, residual });
    }
    let mut max_off = 0.0f64;
    for (i, j) in p.zeros() {
        let residual = x[(i, j)].abs();
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        max_off = max_off.max(residual);
        consider(Violation { kind: ViolationKind::Interference, row: i, col: j, residual });
    }
    Ok(AlignmentReport {
        passed: worst.is_none(),
        max_diagonal_residual: max_diag,
        max_interference_residual: max_off,
        worst,
    })
}

/// Send Gaussian messages through the code, decode every user, and return
/// the largest `|ŝ_k − s_k| / max(1, |s_k|)` over users and trials.
pub fn decode_simulation(code: &IndexCode, side: &SideInformation, trials: usize, seed: u64) -> Result<f64> {
    let k = code.users();
    if side.dim() != k {
        return Err(Error::invalid(format!("code has {k} users, side information {}", side.dim())));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let gains: Vec<f64> = (0..k).map(|i| code.decoders[i].dot(&code.precoders[i])).collect();
    if let Some((user, &value)) = gains.iter().enumerate().find(|(_, g)| !(g.abs() >= DEGENERATE_DIAGONAL)) {
        return Err(Error::DegenerateCode { user: user + 1, value });
    }

    let n = code.blocklength;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[trial as u64]));
        let s: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut z = DVector::zeros(n);
        for (v, &si) in code.precoders.iter().zip(&s) {
            z.axpy(si, v, 1.0);
        }
        for user in 0..k {
            let mut y = z.clone();
            for &i in side.set(user) {
                y.axpy(-s[i], &code.precoders[i], 1.0);
            }
            let estimate = code.decoders[user].dot(&y) / gains[user];
            let err = (estimate - s[user]).abs() / s[user].abs().max(1.0);
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
    }
    Ok(worst)
}
