//! Reference oracles shared by the integration tests. Nothing here calls the
//! code it is used to check; everything is recomputed from first principles
//! with plain loops.
#![allow(dead_code)]

use indexcode::manifold::{connection, egrad_to_rgrad, project_horizontal, rhess_apply, FactorPoint, TangentVector};
use indexcode::objectives::{Objective, RefinementObjective, RegularizedObjective, SparsityPattern};
use indexcode::DenseMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, rng: &mut StdRng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_tangent(k: usize, r: usize, rng: &mut StdRng) -> TangentVector {
    TangentVector::new(gaussian(k, r, rng), gaussian(k, r, rng))
}

pub fn random_point(k: usize, r: usize, rng: &mut StdRng) -> FactorPoint {
    loop {
        if let Ok(x) = FactorPoint::new(gaussian(k, r, rng), gaussian(k, r, rng)) {
            return x;
        }
    }
}

/// The fixed side-information sets of the five-user example (1-based).
pub fn five_user_sets() -> Vec<Vec<usize>> {
    vec![vec![2, 5], vec![1, 5], vec![2, 4], vec![2, 3], vec![1, 3, 4]]
}

/// `Tr(G_V ξ_Uᵀη_U) + Tr(G_U ξ_Vᵀη_V)` by explicit sums.
pub fn metric_ref(u: &DenseMatrix, v: &DenseMatrix, xi: &TangentVector, eta: &TangentVector) -> f64 {
    let (k, r) = u.shape();
    let gram = |m: &DenseMatrix, a: usize, b: usize| (0..k).map(|i| m[(i, a)] * m[(i, b)]).sum::<f64>();
    let mut total = 0.0;
    for a in 0..r {
        for b in 0..r {
            let gv = gram(v, a, b);
            let gu = gram(u, a, b);
            let xu: f64 = (0..k).map(|i| xi.u[(i, b)] * eta.u[(i, a)]).sum();
            let xv: f64 = (0..k).map(|i| xi.v[(i, b)] * eta.v[(i, a)]).sum();
            total += gv * xu + gu * xv;
        }
    }
    total
}

pub fn product(u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let (k, r) = u.shape();
    DenseMatrix::from_fn(k, v.nrows(), |i, j| (0..r).map(|a| u[(i, a)] * v[(j, a)]).sum())
}

/// Smoothed-ℓ1 objective evaluated entry by entry.
pub fn reg_value_ref(x: &DenseMatrix, rho: f64, eps: f64) -> f64 {
    let k = x.nrows();
    let mut f = 0.0;
    for i in 0..k {
        f += 0.5 * (x[(i, i)] - 1.0).powi(2);
        for j in 0..k {
            f += rho * (x[(i, j)] * x[(i, j)] + eps * eps).sqrt();
        }
    }
    f
}

/// Pattern-violation objective evaluated entry by entry.
pub fn refine_value_ref(x: &DenseMatrix, p: &[Vec<bool>]) -> f64 {
    let k = x.nrows();
    let mut f = 0.0;
    for i in 0..k {
        f += 0.5 * (x[(i, i)] - 1.0).powi(2);
        for j in 0..k {
            if !p[i][j] {
                f += 0.5 * x[(i, j)].powi(2);
            }
        }
    }
    f
}

/// Either objective paired with its loop oracle.
pub enum TestObjective {
    Reg(RegularizedObjective, f64, f64),
    Refine(RefinementObjective, Vec<Vec<bool>>),
}

impl TestObjective {
    pub fn random(k: usize, rng: &mut StdRng, which: usize) -> Self {
        if which.is_multiple_of(2) {
            let rho = 0.05 + 0.2 * rng.random::<f64>();
            let eps = 0.05 + 0.3 * rng.random::<f64>();
            TestObjective::Reg(RegularizedObjective::new(k, rho, eps).unwrap(), rho, eps)
        } else {
            let mut bits = vec![vec![false; k]; k];
            for (i, row) in bits.iter_mut().enumerate() {
                for (j, b) in row.iter_mut().enumerate() {
                    *b = i == j || rng.random::<f64>() < 0.4;
                }
            }
            let flat = bits.iter().flatten().copied().collect();
            TestObjective::Refine(RefinementObjective::new(SparsityPattern::new(k, flat).unwrap()), bits)
        }
    }

    pub fn objective(&self) -> &dyn ObjectiveDyn {
        match self {
            TestObjective::Reg(o, ..) => o,
            TestObjective::Refine(o, _) => o,
        }
    }

    pub fn reference(&self, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
        let x = product(u, v);
        match self {
            TestObjective::Reg(_, rho, eps) => reg_value_ref(&x, *rho, *eps),
            TestObjective::Refine(_, p) => refine_value_ref(&x, p),
        }
    }
}

/// Object-safe view of [`Objective`].
pub trait ObjectiveDyn {
    fn value_at(&self, x: &FactorPoint) -> f64;
    fn rgrad(&self, x: &FactorPoint) -> TangentVector;
    fn hess(&self, x: &FactorPoint, xi: &TangentVector) -> TangentVector;
}

impl<O: Objective> ObjectiveDyn for O {
    fn value_at(&self, x: &FactorPoint) -> f64 {
        Objective::value(self, x).unwrap()
    }

    fn rgrad(&self, x: &FactorPoint) -> TangentVector {
        egrad_to_rgrad(x, &self.egrad(x).unwrap()).unwrap()
    }

    fn hess(&self, x: &FactorPoint, xi: &TangentVector) -> TangentVector {
        let eg = self.egrad(x).unwrap();
        let deg = self.egrad_directional(x, xi).unwrap();
        rhess_apply(x, xi, &eg, &deg).unwrap()
    }
}

fn shifted(x: &FactorPoint, xi: &TangentVector, t: f64) -> (DenseMatrix, DenseMatrix) {
    (x.u() + &xi.u * t, x.v() + &xi.v * t)
}

/// Worst-case residuals of the geometry checks over a batch of random points.
#[derive(Debug, Default, Clone, Copy)]
pub struct GeometryReport {
    pub points: usize,
    pub projection_idempotency: f64,
    pub vertical_annihilation: f64,
    pub gradient_fd: f64,
    pub hessian_symmetry: f64,
    pub value_invariance: f64,
    pub grad_norm_invariance: f64,
    pub hessian_fd: f64,
    pub value_oracle: f64,
}

pub fn geometry_report(points: usize, seed: u64) -> GeometryReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rep = GeometryReport { points, ..Default::default() };
    for idx in 0..points {
        let k = 2 + idx % 5;
        let r = 1 + (idx / 5) % k.min(3);
        let x = random_point(k, r, &mut rng);
        let obj = TestObjective::random(k, &mut rng, idx);
        let f = obj.objective();
        let g = |a: &TangentVector, b: &TangentVector| metric_ref(x.u(), x.v(), a, b);
        let gnorm = |a: &TangentVector| g(a, a).sqrt();

        // Value against the loop oracle.
        let fx = f.value_at(&x);
        rep.value_oracle = rep.value_oracle.max((fx - obj.reference(x.u(), x.v())).abs() / fx.abs().max(1.0));

        // Projection.
        let eta = random_tangent(k, r, &mut rng);
        let p1 = project_horizontal(&x, &eta).unwrap();
        let p2 = project_horizontal(&x, &p1).unwrap();
        rep.projection_idempotency = rep.projection_idempotency.max((&p2 - &p1).flat_norm() / p1.flat_norm().max(1e-300));
        let omega = gaussian(r, r, &mut rng);
        let vertical = TangentVector::new(x.u() * &omega, -(x.v() * omega.transpose()));
        let pv = project_horizontal(&x, &vertical).unwrap();
        rep.vertical_annihilation = rep.vertical_annihilation.max(pv.flat_norm() / vertical.flat_norm());

        // Gradient against a central difference of the loop oracle.
        let grad = f.rgrad(&x);
        let mut xi = random_tangent(k, r, &mut rng);
        xi = xi.scaled(1.0 / xi.flat_norm());
        let h = 1e-5;
        let (up, vp) = shifted(&x, &xi, h);
        let (um, vm) = shifted(&x, &xi, -h);
        let fd = (obj.reference(&up, &vp) - obj.reference(&um, &vm)) / (2.0 * h);
        let analytic = g(&grad, &xi);
        rep.gradient_fd = rep.gradient_fd.max((analytic - fd).abs() / fd.abs().max(analytic.abs()).max(1e-12));

        // Hessian symmetry on horizontal directions.
        let xi_h = project_horizontal(&x, &random_tangent(k, r, &mut rng)).unwrap();
        let eta_h = project_horizontal(&x, &random_tangent(k, r, &mut rng)).unwrap();
        let h_xi = f.hess(&x, &xi_h);
        let h_eta = f.hess(&x, &eta_h);
        let scale = gnorm(&h_xi) * gnorm(&eta_h) + gnorm(&xi_h) * gnorm(&h_eta);
        rep.hessian_symmetry = rep.hessian_symmetry.max((g(&h_xi, &eta_h) - g(&xi_h, &h_eta)).abs() / (0.5 * scale).max(1e-300));

        // Second derivative along the straight line x + tξ:
        // d²f = g(Hess ξ, ξ) + g(grad, ∇_ξ ξ) for horizontal ξ.
        let xi_n = xi_h.scaled(1.0 / gnorm(&xi_h));
        let hh = 1e-4;
        let (u1, v1) = shifted(&x, &xi_n, hh);
        let (u2, v2) = shifted(&x, &xi_n, -hh);
        let second = (obj.reference(&u1, &v1) - 2.0 * obj.reference(x.u(), x.v()) + obj.reference(&u2, &v2)) / (hh * hh);
        let accel = connection(&x, &xi_n, &xi_n, &TangentVector::zeros_like(&x)).unwrap();
        let model = g(&f.hess(&x, &xi_n), &xi_n) + g(&grad, &accel);
        rep.hessian_fd = rep.hessian_fd.max((second - model).abs() / second.abs().max(model.abs()).max(1e-3));

        // Quotient invariance under a well-conditioned GL(r) element.
        let m = loop {
            let m = gaussian(r, r, &mut rng) + DenseMatrix::identity(r, r) * 2.0;
            let sv = m.singular_values();
            if sv.min() > 0.2 * sv.max() {
                break m;
            }
        };
        let y = x.act(&m).unwrap();
        rep.value_invariance = rep.value_invariance.max((f.value_at(&y) - fx).abs() / fx.abs().max(1.0));
        let gy = f.rgrad(&y);
        let ny = metric_ref(y.u(), y.v(), &gy, &gy).sqrt();
        let nx = gnorm(&grad);
        rep.grad_norm_invariance = rep.grad_norm_invariance.max((ny - nx).abs() / nx.max(1e-300));
    }
    rep
}

/// Max relative decoding error of the linear code `(u_k, v_k)` under the
/// given 0-based side information, using Gaussian symbols.
pub fn decode_error_ref(u: &DenseMatrix, v: &DenseMatrix, sets: &[Vec<usize>], trials: usize, seed: u64) -> f64 {
    let (k, n) = u.shape();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let s: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|c| (0..k).map(|i| v[(i, c)] * s[i]).sum()).collect();
        for user in 0..k {
            let mut y = z.clone();
            for &i in &sets[user] {
                for (c, yc) in y.iter_mut().enumerate() {
                    *yc -= v[(i, c)] * s[i];
                }
            }
            let num: f64 = (0..n).map(|c| u[(user, c)] * y[c]).sum();
            let den: f64 = (0..n).map(|c| u[(user, c)] * v[(user, c)]).sum();
            let err = (num / den - s[user]).abs() / s[user].abs().max(1.0);
            worst = worst.max(if err.is_finite() { err } else { f64::INFINITY });
        }
    }
    worst
}

/// `|X_kk − 1| ≤ tol` and `|X_ki| ≤ tol` wherever the pattern is zero.
pub fn alignment_ok(x: &DenseMatrix, p: &[Vec<bool>], tol: f64) -> bool {
    let k = x.nrows();
    (0..k).all(|i| (x[(i, i)] - 1.0).abs() <= tol && (0..k).all(|j| p[i][j] || x[(i, j)].abs() <= tol))
}

pub fn rank_by_svd(m: &DenseMatrix, rel: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > rel * top).count()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Smallest rank of a 3×3 unit-diagonal matrix whose zeros include every
/// zero of the pattern, found by randomized completion and a rank test.
pub fn min_rank_k3(pattern: &[[bool; 3]; 3], rng: &mut StdRng) -> usize {
    let free: Vec<(usize, usize)> =
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| i != j && pattern[i][j]).collect();
    // Rank 1 is uv^T with u_i v_i = 1; try completions of that form.
    for _ in 0..20 {
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0) * if rng.random() { 1.0 } else { -1.0 }).collect();
        let m = DenseMatrix::from_fn(3, 3, |i, j| u[i] / u[j]);
        let respects = (0..3).all(|i| (0..3).all(|j| pattern[i][j] || m[(i, j)] == 0.0));
        if respects && rank_by_svd(&m, 1e-9) == 1 {
            return 1;
        }
    }
    // Rank 2: random free entries, then one free entry solved so the
    // determinant (affine in each entry) vanishes.
    for _ in 0..50 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for &(i, j) in &free {
            m[i][j] = rng.random_range(-2.0..2.0);
        }
        for &(i, j) in &free {
            let mut lo = m;
            lo[i][j] = 0.0;
            let mut hi = m;
            hi[i][j] = 1.0;
            let (a, b) = (det3(&lo), det3(&hi) - det3(&lo));
            if b.abs() > 1e-6 {
                let mut sol = m;
                sol[i][j] = -a / b;
                let dm = DenseMatrix::from_fn(3, 3, |p, q| sol[p][q]);
                if rank_by_svd(&dm, 1e-9) <= 2 {
                    return 2;
                }
            }
        }
    }
    3
}

/// Optimal `(rank, s)` tradeoff at K = 3 by exhaustive pattern enumeration.
pub fn brute_force_k3(seed: u64) -> Vec<(usize, usize)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let offdiag: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let mut best = [usize::MAX; 4];
    for mask in 0u32..(1 << offdiag.len()) {
        let mut p = [[false; 3]; 3];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = true;
        }
        for (b, &(i, j)) in offdiag.iter().enumerate() {
            p[i][j] = mask & (1 << b) != 0;
        }
        let s = mask.count_ones() as usize;
        let r = min_rank_k3(&p, &mut rng);
        for slot in best.iter_mut().skip(r) {
            *slot = (*slot).min(s);
        }
    }
    (1..=3).map(|r| (r, best[r])).collect()
}

/// Parse a sweep CSV into header and rows of cells.
pub fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().split(',').map(str::to_owned).collect();
    let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

pub fn column<'a>(header: &[String], rows: &'a [Vec<String>], name: &str) -> Vec<&'a str> {
    let idx = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"));
    rows.iter().map(|r| r[idx].as_str()).collect()
}

/// `min ‖V u‖₁ s.t. aᵀu = 1` for `r ≤ 2` by a dense grid over the feasible
/// line followed by ternary refinement (the objective is convex along it).
pub fn row_lp_brute_force(v: &DenseMatrix, a: &[f64]) -> f64 {
    let r = a.len();
    let eval = |u: &[f64]| -> f64 { (0..v.nrows()).map(|i| (0..r).map(|c| v[(i, c)] * u[c]).sum::<f64>().abs()).sum() };
    if r == 1 {
        return eval(&[1.0 / a[0]]);
    }
    let nn = a[0] * a[0] + a[1] * a[1];
    let base = [a[0] / nn, a[1] / nn];
    let dir = [-a[1], a[0]];
    let at = |t: f64| eval(&[base[0] + t * dir[0], base[1] + t * dir[1]]);
    // Kinks sit where some (V u)_i changes sign; the minimum is at one of them.
    let kinks: Vec<f64> = (0..v.nrows())
        .filter_map(|i| {
            let vb = v[(i, 0)] * base[0] + v[(i, 1)] * base[1];
            let vd = v[(i, 0)] * dir[0] + v[(i, 1)] * dir[1];
            (vd.abs() > 1e-14).then(|| -vb / vd)
        })
        .collect();
    let lo = kinks.iter().copied().fold(0.0f64, f64::min) - 1.0;
    let hi = kinks.iter().copied().fold(0.0f64, f64::max) + 1.0;
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let (mut best_t, mut best) = (lo, at(lo));
    for s in 1..=steps {
        let t = lo + s as f64 * h;
        let f = at(t);
        if f < best {
            best = f;
            best_t = t;
        }
    }
    let (mut l, mut u) = (best_t - h, best_t + h);
    for _ in 0..200 {
        let m1 = l + (u - l) / 3.0;
        let m2 = u - (u - l) / 3.0;
        if at(m1) < at(m2) {
            u = m2;
        } else {
            l = m1;
        }
    }
    best.min(at(0.5 * (l + u)))
}

#[derive(Debug, Default, Clone)]
pub struct SolverContractReport {
    pub tr_monotone_violations: usize,
    pub refine_converged: usize,
    pub refine_runs: usize,
    pub refine_worst_iterations: usize,
    pub altmin_monotone_violations: usize,
    pub row_lp_max_gap: f64,
    pub row_lp_cases: usize,
}

impl SolverContractReport {
    pub fn passed(&self) -> bool {
        self.tr_monotone_violations == 0
            && self.refine_converged == self.refine_runs
            && self.altmin_monotone_violations == 0
            && self.row_lp_max_gap <= 1e-6
    }
}

pub fn solver_contract_report() -> SolverContractReport {
    use indexcode::altmin::{altmin_iterate, l1_objective, lp_row_subproblem, AltMinConfig};
    use indexcode::trust_region::{tr_solve, SolveStatus, TrustRegionConfig};
    use nalgebra::DVector;

    let mut rep = SolverContractReport::default();
    let cfg = TrustRegionConfig::default();

    // Accepted objective values never increase.
    for seed in 0..10u64 {
        let mut rng = StdRng::seed_from_u64(100 + seed);
        let (k, r) = (4 + (seed as usize % 3), 1 + (seed as usize % 3));
        let x0 = random_point(k, r, &mut rng);
        let obj = RegularizedObjective::new(k, 1e-3, 1e-2).unwrap();
        let start = reg_value_ref(&product(x0.u(), x0.v()), 1e-3, 1e-2);
        let res = tr_solve(&obj, x0, &cfg).unwrap();
        let mut prev = start;
        for rec in res.trace.iter().filter(|t| t.accepted) {
            if rec.value > prev {
                rep.tr_monotone_violations += 1;
            }
            prev = rec.value;
        }
        let fin = reg_value_ref(&res.point.matrix(), 1e-3, 1e-2);
        if fin > start {
            rep.tr_monotone_violations += 1;
        }
    }

    // K = 2, r = 1 refinement under the all-ones pattern from 20 seeds.
    let obj = RefinementObjective::new(SparsityPattern::full(2));
    for seed in 0..20u64 {
        let mut rng = StdRng::seed_from_u64(200 + seed);
        let x0 = random_point(2, 1, &mut rng);
        let res = tr_solve(&obj, x0, &cfg).unwrap();
        let g = ObjectiveDyn::rgrad(&obj, &res.point);
        let gnorm = metric_ref(res.point.u(), res.point.v(), &g, &g).sqrt();
        rep.refine_runs += 1;
        rep.refine_worst_iterations = rep.refine_worst_iterations.max(res.iterations);
        if res.status == SolveStatus::Converged && gnorm <= 1e-6 && res.iterations <= 100 {
            rep.refine_converged += 1;
        }
    }

    // Alternating minimization never increases ‖U Vᵀ‖₁ across half-steps.
    for seed in 0..6u64 {
        let mut rng = StdRng::seed_from_u64(300 + seed);
        let (k, r) = (6, 2 + seed as usize % 3);
        let (u0, v0) = (gaussian(k, r, &mut rng), gaussian(k, r, &mut rng));
        let alt = AltMinConfig { seed, ..Default::default() };
        let Ok(run) = altmin_iterate(u0, v0, &alt, seed) else { continue };
        let hist = &run.objective_history;
        for w in hist.windows(2) {
            if w[1] > w[0] * (1.0 + 1e-9) {
                rep.altmin_monotone_violations += 1;
            }
        }
        if (l1_objective(&run.u, &run.v) - hist.last().unwrap()).abs() > 1e-9 * hist.last().unwrap() {
            rep.altmin_monotone_violations += 1;
        }
    }

    // Row LP against the brute-force optimum.
    for seed in 0..20u64 {
        let mut rng = StdRng::seed_from_u64(400 + seed);
        let r = 1 + seed as usize % 2;
        let v = gaussian(5, r, &mut rng);
        let a: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        let u = lp_row_subproblem(&v, &DVector::from_vec(a.clone())).unwrap();
        let lp_value: f64 = (&v * &u).iter().map(|x| x.abs()).sum();
        let feasibility: f64 = (0..r).map(|c| a[c] * u[c]).sum::<f64>() - 1.0;
        let gap = (lp_value - row_lp_brute_force(&v, &a)).abs().max(feasibility.abs());
        rep.row_lp_max_gap = rep.row_lp_max_gap.max(gap);
        rep.row_lp_cases += 1;
    }
    rep
}
