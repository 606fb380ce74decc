//! Primal-dual interior-point solver for small dense SDPs with an optional
//! nonnegative LP block.
//!
//! Primal:  min ⟨C, X⟩ + c·x   s.t. ⟨A_k, X⟩ + a_k·x = b_k,  X ⪰ 0,  x ≥ 0
//! Dual:    max b·y            s.t. C − Σ y_k A_k ⪰ 0,  c − Σ y_k a_k ≥ 0
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector.
//! Complex Hermitian problems are mapped to real symmetric ones through the
//! embedding `H ↦ [[Re H, −Im H], [Im H, Re H]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real symmetric constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    /// Diagonal matrix given as `(index, value)` pairs.
    Diagonal(Vec<(usize, f64)>),
}

impl SymMatrix {
    fn inner(&self, w: &DMatrix<f64>) -> f64 {
        match self {
            SymMatrix::Dense(a) => a.dot(w),
            SymMatrix::Diagonal(d) => d.iter().map(|&(i, v)| v * w[(i, i)]).sum(),
        }
    }

    fn frobenius(&self) -> f64 {
        match self {
            SymMatrix::Dense(a) => a.norm(),
            SymMatrix::Diagonal(d) => d.iter().map(|(_, v)| v * v).sum::<f64>().sqrt(),
        }
    }

    /// `out += alpha * self`
    fn add_scaled_to(&self, alpha: f64, out: &mut DMatrix<f64>) {
        match self {
            SymMatrix::Dense(a) => *out += a * alpha,
            SymMatrix::Diagonal(d) => {
                for &(i, v) in d {
                    out[(i, i)] += alpha * v;
                }
            }
        }
    }

    /// `X A S⁻¹`
    fn sandwich(&self, x: &DMatrix<f64>, s_inv: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(a) => x * a * s_inv,
            SymMatrix::Diagonal(d) => {
                let n = x.nrows();
                let mut w = DMatrix::zeros(n, n);
                for &(i, v) in d {
                    w += (x.column(i) * s_inv.row(i)) * v;
                }
                w
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealConstraint {
    pub matrix: SymMatrix,
    /// Sparse coefficients on the LP variables.
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct RealSdp {
    pub cost: DMatrix<f64>,
    pub lp_cost: Vec<f64>,
    pub constraints: Vec<RealConstraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealSdpSolution {
    pub x: DMatrix<f64>,
    pub x_lp: Vec<f64>,
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual| / (1 + |primal| + |dual|)`.
    pub gap: f64,
    pub iterations: usize,
}

struct Iterate {
    x: DMatrix<f64>,
    s: DMatrix<f64>,
    xl: DVector<f64>,
    sl: DVector<f64>,
    y: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    rdl: DVector<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.pinf.max(self.dinf).max(self.gap)
    }
}

pub fn solve_real_sdp(problem: &RealSdp, opts: &SdpOptions) -> Result<RealSdpSolution> {
    let outcome = solve_real_sdp_best(problem, opts);
    match outcome.best {
        Some(best) if outcome.converged => Ok(best),
        Some(best) => Err(Error::solver(
            format!("no convergence, best residual {:.3e} at gap {:.3e}", outcome.best_residual, best.gap),
            outcome.trace.len(),
            outcome.trace,
        )),
        None => Err(Error::solver("no iterations performed", 0, outcome.trace)),
    }
}

/// Result of a solve that may have stopped short of the tolerance.
#[derive(Debug, Clone)]
pub struct SdpOutcome {
    /// Converged iterate, or the iterate with the smallest residual seen.
    pub best: Option<RealSdpSolution>,
    pub best_residual: f64,
    pub converged: bool,
    /// Largest of the three relative residuals per iteration.
    pub trace: Vec<f64>,
}

pub fn solve_real_sdp_best(problem: &RealSdp, opts: &SdpOptions) -> SdpOutcome {
    let n = problem.cost.nrows();
    let m = problem.constraints.len();
    let nl = problem.lp_cost.len();
    let b = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.rhs));
    let c_lp = DVector::from_column_slice(&problem.lp_cost);
    // Dense LP coefficient matrix, m x nl.
    let mut a_lp = DMatrix::zeros(m, nl);
    for (k, con) in problem.constraints.iter().enumerate() {
        for &(i, v) in &con.lp {
            a_lp[(k, i)] += v;
        }
    }

    let norm_b = b.norm();
    let norm_c = (problem.cost.norm_squared() + c_lp.norm_squared()).sqrt();
    let mut it = initial_point(problem, &a_lp);
    let dim = (n + nl) as f64;
    let mut trace = Vec::new();
    let mut best: Option<(f64, RealSdpSolution)> = None;

    for iter in 0..opts.max_iter {
        let res = residuals(problem, &a_lp, &b, &c_lp, &it, norm_b, norm_c);
        trace.push(res.worst());
        let snapshot = |res: &Residuals, it: &Iterate| RealSdpSolution {
            x: it.x.clone(),
            x_lp: it.xl.iter().copied().collect(),
            y: it.y.iter().copied().collect(),
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            gap: res.gap,
            iterations: iter,
        };
        if res.worst() <= opts.tol {
            return SdpOutcome {
                best: Some(snapshot(&res, &it)),
                best_residual: res.worst(),
                converged: true,
                trace,
            };
        }
        if best.as_ref().is_none_or(|(w, _)| res.worst() < *w) {
            best = Some((res.worst(), snapshot(&res, &it)));
        }

        let Some(s_inv) = it.s.clone().cholesky().map(|c| c.inverse()) else {
            break;
        };
        let mu = (it.x.dot(&it.s) + it.xl.dot(&it.sl)) / dim;
        let w: Vec<DMatrix<f64>> = problem
            .constraints
            .iter()
            .map(|con| con.matrix.sandwich(&it.x, &s_inv))
            .collect();
        let ratio = it.xl.component_div(&it.sl);
        let mut schur = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                let lp: f64 = (0..nl).map(|i| a_lp[(k, i)] * a_lp[(l, i)] * ratio[i]).sum();
                schur[(k, l)] = problem.constraints[k].matrix.inner(&w[l]) + lp;
            }
        }
        let schur = symmetrize(&schur);
        let Some(chol) = factor_spd(schur) else {
            break;
        };

        let xs = &it.x * &it.s;
        let xsl = it.xl.component_mul(&it.sl);

        // Predictor.
        let rc = -&xs;
        let rcl = -&xsl;
        let (dx_a, dxl_a, _, ds_a, dsl_a) =
            direction(problem, &a_lp, &it, &res, &s_inv, &w, &ratio, &chol, &rc, &rcl);
        let ap = step_limit(&it.x, &dx_a, &it.xl, &dxl_a).min(1.0);
        let ad = step_limit(&it.s, &ds_a, &it.sl, &dsl_a).min(1.0);
        let mu_aff = ((&it.x + &dx_a * ap).dot(&(&it.s + &ds_a * ad))
            + (&it.xl + &dxl_a * ap).dot(&(&it.sl + &dsl_a * ad)))
            / dim;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc = DMatrix::identity(n, n) * (sigma * mu) - &xs - &dx_a * &ds_a;
        let rcl = DVector::from_element(nl, sigma * mu) - &xsl - dxl_a.component_mul(&dsl_a);
        let (dx, dxl, dy, ds, dsl) = direction(problem, &a_lp, &it, &res, &s_inv, &w, &ratio, &chol, &rc, &rcl);
        let frac = if iter < 2 { 0.9 } else { 0.98 };
        let ap = (frac * step_limit(&it.x, &dx, &it.xl, &dxl)).min(1.0);
        let ad = (frac * step_limit(&it.s, &ds, &it.sl, &dsl)).min(1.0);
        it.x = symmetrize(&(&it.x + dx * ap));
        it.xl += dxl * ap;
        it.y += dy * ad;
        it.s = symmetrize(&(&it.s + ds * ad));
        it.sl += dsl * ad;
        if ap.max(ad) < 1e-12 {
            break;
        }
    }
    let (best_residual, best) = match best {
        Some((w, b)) => (w, Some(b)),
        None => (f64::INFINITY, None),
    };
    SdpOutcome {
        best,
        best_residual,
        converged: false,
        trace,
    }
}

fn initial_point(problem: &RealSdp, a_lp: &DMatrix<f64>) -> Iterate {
    let n = problem.cost.nrows();
    let nl = problem.lp_cost.len();
    let m = problem.constraints.len();
    let sqrt_n = (n.max(1) as f64).sqrt();
    let mut xi: f64 = 10f64.max(sqrt_n);
    let mut eta: f64 = 10f64.max(sqrt_n);
    let c_norm = (problem.cost.norm_squared() + problem.lp_cost.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for (k, con) in problem.constraints.iter().enumerate() {
        let a_norm = (con.matrix.frobenius().powi(2) + a_lp.row(k).norm_squared()).sqrt();
        xi = xi.max(sqrt_n * (1.0 + con.rhs.abs()) / (1.0 + a_norm));
        eta = eta.max(a_norm);
    }
    eta = eta.max(c_norm);
    Iterate {
        x: DMatrix::identity(n, n) * xi,
        s: DMatrix::identity(n, n) * eta,
        xl: DVector::from_element(nl, xi),
        sl: DVector::from_element(nl, eta),
        y: DVector::zeros(m),
    }
}

fn residuals(
    problem: &RealSdp,
    a_lp: &DMatrix<f64>,
    b: &DVector<f64>,
    c_lp: &DVector<f64>,
    it: &Iterate,
    norm_b: f64,
    norm_c: f64,
) -> Residuals {
    let m = problem.constraints.len();
    let ax_lp = a_lp * &it.xl;
    let rp = DVector::from_iterator(
        m,
        problem
            .constraints
            .iter()
            .enumerate()
            .map(|(k, con)| b[k] - con.matrix.inner(&it.x) - ax_lp[k]),
    );
    let mut rd = &problem.cost - &it.s;
    for (k, con) in problem.constraints.iter().enumerate() {
        con.matrix.add_scaled_to(-it.y[k], &mut rd);
    }
    let rdl = c_lp - a_lp.transpose() * &it.y - &it.sl;
    let pobj = problem.cost.dot(&it.x) + c_lp.dot(&it.xl);
    let dobj = b.dot(&it.y);
    Residuals {
        pinf: rp.norm() / (1.0 + norm_b),
        dinf: (rd.norm_squared() + rdl.norm_squared()).sqrt() / (1.0 + norm_c),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        rp,
        rd,
        rdl,
        pobj,
        dobj,
    }
}

type Direction = (DMatrix<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>);

#[allow(clippy::too_many_arguments)]
fn direction(
    problem: &RealSdp,
    a_lp: &DMatrix<f64>,
    it: &Iterate,
    res: &Residuals,
    s_inv: &DMatrix<f64>,
    w: &[DMatrix<f64>],
    ratio: &DVector<f64>,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    rc: &DMatrix<f64>,
    rcl: &DVector<f64>,
) -> Direction {
    let m = problem.constraints.len();
    // ΔX = H + Σ Δy_l X A_l S⁻¹ with H = (R_c − X R_d) S⁻¹.
    let h = (rc - &it.x * &res.rd) * s_inv;
    let hl = (rcl - it.xl.component_mul(&res.rdl)).component_div(&it.sl);
    let a_hl = a_lp * &hl;
    let rhs = DVector::from_iterator(
        m,
        (0..m).map(|k| res.rp[k] - problem.constraints[k].matrix.inner(&h) - a_hl[k]),
    );
    let dy = chol.solve(&rhs);
    let mut dx = h;
    for (l, wl) in w.iter().enumerate() {
        dx += wl * dy[l];
    }
    let dx = symmetrize(&dx);
    let mut ds = res.rd.clone();
    for (l, con) in problem.constraints.iter().enumerate() {
        con.matrix.add_scaled_to(-dy[l], &mut ds);
    }
    let dsl = &res.rdl - a_lp.transpose() * &dy;
    let dxl = hl + (a_lp.transpose() * &dy).component_mul(ratio);
    (dx, dxl, dy, ds, dsl)
}

/// Largest step `α` keeping `X + αΔX ⪰ 0` and `x + αΔx ≥ 0`.
fn step_limit(x: &DMatrix<f64>, dx: &DMatrix<f64>, xl: &DVector<f64>, dxl: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for (v, dv) in xl.iter().zip(dxl.iter()) {
        if *dv < 0.0 {
            alpha = alpha.min(-v / dv);
        }
    }
    if x.nrows() > 0 {
        if let Some(chol) = x.clone().cholesky() {
            let l = chol.l();
            let Some(l_inv) = l.clone().try_inverse() else {
                return 0.0;
            };
            let scaled = symmetrize(&(&l_inv * dx * l_inv.transpose()));
            let lmin = scaled.symmetric_eigenvalues().min();
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        } else {
            return 0.0;
        }
    }
    alpha
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn factor_spd(mut a: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    if let Some(c) = a.clone().cholesky() {
        return Some(c);
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..12 {
        for i in 0..n {
            a[(i, i)] += reg;
        }
        if let Some(c) = a.clone().cholesky() {
            return Some(c);
        }
        reg *= 10.0;
    }
    None
}

/// Hermitian constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianMatrix {
    Dense(DMatrix<Complex64>),
    /// `e_k e_kᴴ`, selecting one diagonal entry.
    Unit(usize),
}

#[derive(Debug, Clone)]
pub struct SdpConstraint {
    pub matrix: HermitianMatrix,
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Hermitian SDP: `min tr(C Z) + c·x  s.t. tr(A_k Z) + a_k·x = b_k, Z ⪰ 0, x ≥ 0`.
#[derive(Debug, Clone)]
pub struct SdpStandardForm {
    pub dimension: usize,
    pub cost: DMatrix<Complex64>,
    pub lp_cost: Vec<f64>,
    pub constraints: Vec<SdpConstraint>,
}

impl SdpStandardForm {
    /// Pure matrix problem without LP variables.
    pub fn new(cost: DMatrix<Complex64>, constraints: Vec<(HermitianMatrix, f64)>) -> Self {
        Self {
            dimension: cost.nrows(),
            cost,
            lp_cost: Vec::new(),
            constraints: constraints
                .into_iter()
                .map(|(matrix, rhs)| SdpConstraint {
                    matrix,
                    lp: Vec::new(),
                    rhs,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        let check = |a: &DMatrix<Complex64>| {
            a.nrows() == n && a.ncols() == n && (a - a.adjoint()).norm() <= 1e-12 * (1.0 + a.norm())
        };
        if !check(&self.cost) {
            return Err(Error::Validation("SDP cost must be Hermitian of the declared dimension".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let ok = match &c.matrix {
                HermitianMatrix::Dense(a) => check(a),
                HermitianMatrix::Unit(i) => *i < n,
            };
            let lp_ok = c.lp.iter().all(|&(i, _)| i < self.lp_cost.len());
            if !ok || !lp_ok {
                return Err(Error::Validation(format!("SDP constraint {k} is malformed")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub z: DMatrix<Complex64>,
    pub lp: Vec<f64>,
    pub dual: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// `[[Re H, −Im H], [Im H, Re H]]`, scaled by `scale`.
pub fn embed(h: &DMatrix<Complex64>, scale: f64) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)] * scale;
            out[(r, c)] = z.re;
            out[(r + n, c + n)] = z.re;
            out[(r + n, c)] = z.im;
            out[(r, c + n)] = -z.im;
        }
    }
    out
}

/// Inverse of [`embed`] for a real symmetric matrix that need not have the
/// embedded block pattern: averages the two copies.
pub fn recover(y: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = y.nrows() / 2;
    DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(
            0.5 * (y[(r, c)] + y[(r + n, c + n)]),
            0.5 * (y[(r + n, c)] - y[(r, c + n)]),
        )
    })
}

pub fn solve_sdp(form: &SdpStandardForm, tol: f64) -> Result<SdpSolution> {
    solve_sdp_with(form, &SdpOptions { tol, ..Default::default() })
}

pub fn solve_sdp_with(form: &SdpStandardForm, opts: &SdpOptions) -> Result<SdpSolution> {
    form.validate()?;
    solve_real_sdp(&to_real(form), opts).map(from_real)
}

/// Like [`solve_sdp_with`] but hands back the best iterate when the
/// tolerance is not reached, together with its residual.
pub fn solve_sdp_best(form: &SdpStandardForm, opts: &SdpOptions) -> Result<(SdpSolution, f64)> {
    form.validate()?;
    let outcome = solve_real_sdp_best(&to_real(form), opts);
    let residual = outcome.best_residual;
    match outcome.best {
        Some(best) => Ok((from_real(best), residual)),
        None => Err(Error::solver("no iterations performed", 0, outcome.trace)),
    }
}

fn to_real(form: &SdpStandardForm) -> RealSdp {
    let n = form.dimension;
    // tr(H Z) = ½ ⟨embed(H), embed(Z)⟩.
    RealSdp {
        cost: embed(&form.cost, 0.5),
        lp_cost: form.lp_cost.clone(),
        constraints: form
            .constraints
            .iter()
            .map(|c| RealConstraint {
                matrix: match &c.matrix {
                    HermitianMatrix::Dense(a) => SymMatrix::Dense(embed(a, 0.5)),
                    HermitianMatrix::Unit(k) => SymMatrix::Diagonal(vec![(*k, 0.5), (k + n, 0.5)]),
                },
                lp: c.lp.clone(),
                rhs: c.rhs,
            })
            .collect(),
    }
}

fn from_real(sol: RealSdpSolution) -> SdpSolution {
    SdpSolution {
        z: recover(&sol.x),
        lp: sol.x_lp,
        dual: sol.y,
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
        gap: sol.gap,
        iterations: sol.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_diag(cost: DMatrix<Complex64>) -> SdpStandardForm {
        let n = cost.nrows();
        SdpStandardForm::new(cost, (0..n).map(|k| (HermitianMatrix::Unit(k), 1.0)).collect())
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn negative_identity_cost() {
        let c = -DMatrix::<Complex64>::identity(3, 3);
        let sol = solve_sdp(&unit_diag(c), 1e-8).unwrap();
        assert!(sol.primal_objective <= -3.0 + 1e-6, "{}", sol.primal_objective);
        assert!((sol.primal_objective - sol.dual_objective).abs() <= 1e-8 * (1.0 + sol.primal_objective.abs()));
    }

    #[test]
    fn one_by_one() {
        let c = DMatrix::from_element(1, 1, Complex64::new(2.5, 0.0));
        let sol = solve_sdp(&unit_diag(c), 1e-8).unwrap();
        assert!((sol.z[(0, 0)].re - 1.0).abs() < 1e-8);
        assert!((sol.primal_objective - 2.5).abs() < 1e-7);
    }

    #[test]
    fn real_embedding_preserves_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let direct = (&a * &b).trace().re;
        let embedded = 0.5 * embed(&a, 1.0).dot(&embed(&b, 1.0));
        assert!((direct - embedded).abs() < 1e-12);
        assert!((recover(&embed(&b, 1.0)) - &b).norm() < 1e-15);
    }

    #[test]
    fn random_instance_beats_feasible_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let c = random_hermitian(n, &mut rng);
        let sol = solve_sdp(&unit_diag(c.clone()), 1e-8).unwrap();
        let min_eig = sol.z.clone().symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-8);
        for k in 0..n {
            assert!((sol.z[(k, k)].re - 1.0).abs() < 1e-8);
        }
        let mut best = f64::INFINITY;
        for _ in 0..20_000 {
            let z = DVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
            best = best.min((z.adjoint() * &c * &z)[(0, 0)].re);
        }
        assert!(sol.primal_objective <= best + 1e-9);
    }

    #[test]
    fn lp_block_bounds_epigraph() {
        // max τ s.t. τ + s = 2, τ ≤ ... expressed as min −τ, τ + s = 2, with a 1x1 PSD block.
        let form = SdpStandardForm {
            dimension: 1,
            cost: DMatrix::zeros(1, 1),
            lp_cost: vec![-1.0, 0.0],
            constraints: vec![
                SdpConstraint {
                    matrix: HermitianMatrix::Unit(0),
                    lp: vec![],
                    rhs: 1.0,
                },
                SdpConstraint {
                    matrix: HermitianMatrix::Dense(DMatrix::zeros(1, 1)),
                    lp: vec![(0, 1.0), (1, 1.0)],
                    rhs: 2.0,
                },
            ],
        };
        let sol = solve_sdp(&form, 1e-9).unwrap();
        assert!((sol.lp[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut c = DMatrix::<Complex64>::zeros(2, 2);
        c[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(solve_sdp(&unit_diag(c), 1e-8), Err(Error::Validation(_))));
    }
}
