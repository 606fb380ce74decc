//! RIS phase-shift optimization: closed-form alignment for a single served
//! user, semidefinite relaxation with Gaussian randomization otherwise.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, ChannelVector};
use crate::cones::sdp::{solve_sdp_best, SdpOptions};
use crate::cones::{HermitianMatrix, SdpConstraint, SdpStandardForm};
use crate::error::{Error, Result};
use crate::model::{power_floor, Position, Scenario};

/// Phase shifts `θ_lm` in radians, one row per RIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseMatrix {
    pub theta: Vec<Vec<f64>>,
}

impl PhaseMatrix {
    pub fn zeros(ris_count: usize, elements: usize) -> Self {
        Self {
            theta: vec![vec![0.0; elements]; ris_count],
        }
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.theta[l]
    }

    pub fn set_row(&mut self, l: usize, row: Vec<f64>) {
        self.theta[l] = row.into_iter().map(wrap_angle).collect();
    }

    pub fn ris_count(&self) -> usize {
        self.theta.len()
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Aligning phases for one RIS toward one user: every element's reflected
/// path arrives with zero phase, i.e. in phase with the direct LOS term.
pub fn align_row(ur: &ChannelVector, rg: &ChannelVector, scenario: &Scenario) -> Vec<f64> {
    let vlc = &scenario.vlc;
    let k = 2.0 * PI * vlc.element_spacing / vlc.carrier_wavelength;
    let diff = rg.direction_cosine() - ur.direction_cosine();
    (0..ur.entries.len())
        .map(|m| wrap_angle(-k * m as f64 * diff))
        .collect()
}

/// Aligned rows for every RIS of `ris_set`, toward user `j` of UAV `i`.
pub fn align_phases(
    i: usize,
    j: usize,
    deployment: &[Position],
    ris_set: &[usize],
    scenario: &Scenario,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let ch = ChannelSet::new(deployment, scenario)?;
    Ok(align_with(&ch, i, j, ris_set, scenario))
}

pub fn align_with(ch: &ChannelSet, i: usize, j: usize, ris_set: &[usize], scenario: &Scenario) -> Vec<(usize, Vec<f64>)> {
    ris_set
        .iter()
        .map(|&l| (l, align_row(ch.ur(i, l), ch.rg(l, j), scenario)))
        .collect()
}

/// `Φ_ilj = conj(h_RG) ⊙ h_UR`.
pub fn build_phi(i: usize, l: usize, j: usize, scenario: &Scenario, deployment: &[Position]) -> Result<Vec<Complex64>> {
    Ok(ChannelSet::new(deployment, scenario)?.phi(i, l, j))
}

/// Min-max phase problem of one UAV, lifted to `ẑ = [z; 1]` with
/// `z_lm = e^{−iθ_lm}`.
#[derive(Debug, Clone)]
pub struct SdpInstance {
    pub users: Vec<usize>,
    pub ris_set: Vec<usize>,
    pub elements: usize,
    /// Stacked `Φ_ilj` over `ris_set`, one vector per user.
    pub phis: Vec<DVector<Complex64>>,
    pub q_matrices: Vec<DMatrix<Complex64>>,
    pub weights: Vec<f64>,
    pub los_terms: Vec<f64>,
}

impl SdpInstance {
    pub fn dimension(&self) -> usize {
        self.ris_set.len() * self.elements + 1
    }

    /// `w_j |h_j + zᴴ Φ_j|²` for every user.
    pub fn user_values(&self, z: &DVector<Complex64>) -> Vec<f64> {
        self.phis
            .iter()
            .zip(&self.los_terms)
            .zip(&self.weights)
            .map(|((phi, h), w)| w * (Complex64::new(*h, 0.0) + z.dotc(phi)).norm_sqr())
            .collect()
    }

    /// Min-max objective `max_j −w_j |h_j + zᴴ Φ_j|²` (lower is better).
    pub fn objective(&self, z: &DVector<Complex64>) -> f64 {
        -self.user_values(z).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn objective_of_rows(&self, rows: &[Vec<f64>]) -> f64 {
        self.objective(&z_from_rows(rows))
    }

    pub fn rows_from_z(&self, z: &DVector<Complex64>) -> Vec<Vec<f64>> {
        (0..self.ris_set.len())
            .map(|b| {
                (0..self.elements)
                    .map(|m| wrap_angle(-z[b * self.elements + m].arg()))
                    .collect()
            })
            .collect()
    }
}

pub fn z_from_rows(rows: &[Vec<f64>]) -> DVector<Complex64> {
    DVector::from_iterator(
        rows.iter().map(Vec::len).sum(),
        rows.iter().flatten().map(|&t| Complex64::from_polar(1.0, -t)),
    )
}

pub fn build_sdp(
    i: usize,
    users: &[usize],
    ris_set: &[usize],
    deployment: &[Position],
    scenario: &Scenario,
) -> Result<SdpInstance> {
    let ch = ChannelSet::new(deployment, scenario)?;
    build_sdp_with(&ch, i, users, ris_set, scenario)
}

pub fn build_sdp_with(
    ch: &ChannelSet,
    i: usize,
    users: &[usize],
    ris_set: &[usize],
    scenario: &Scenario,
) -> Result<SdpInstance> {
    if ris_set.is_empty() {
        return Err(Error::EmptyRisSet { uav: i });
    }
    let elements = scenario.ris_elements;
    let n = ris_set.len() * elements;
    let mut phis = Vec::with_capacity(users.len());
    let mut q_matrices = Vec::with_capacity(users.len());
    let mut weights = Vec::with_capacity(users.len());
    let mut los_terms = Vec::with_capacity(users.len());
    for &j in users {
        let phi = DVector::from_iterator(n, ris_set.iter().flat_map(|&l| ch.phi(i, l, j)));
        let h = ch.direct(i, j);
        let mut q = DMatrix::zeros(n + 1, n + 1);
        q.view_mut((0, 0), (n, n)).copy_from(&(&phi * phi.adjoint()));
        for r in 0..n {
            q[(r, n)] = phi[r] * h;
            q[(n, r)] = phi[r].conj() * h;
        }
        let a = power_floor(j, scenario);
        weights.push(if a > 0.0 { 1.0 / (a * a) } else { 1.0 });
        los_terms.push(h);
        phis.push(phi);
        q_matrices.push(q);
    }
    Ok(SdpInstance {
        users: users.to_vec(),
        ris_set: ris_set.to_vec(),
        elements,
        phis,
        q_matrices,
        weights,
        los_terms,
    })
}

/// Relaxed solution `Ẑ` of the lifted problem.
#[derive(Debug, Clone)]
pub struct PsdSolution {
    pub z_matrix: DMatrix<Complex64>,
    /// Relaxation value of `max_j −w_j (h_j² + tr(Q_j Ẑ))`; a lower bound on
    /// the objective of every unit-modulus point.
    pub objective: f64,
    pub gap: f64,
}

pub fn solve_passive_beamforming(instance: &SdpInstance) -> Result<PsdSolution> {
    solve_passive_beamforming_with(instance, &SdpOptions::default())
}

/// Epigraph form `max t  s.t. w_j tr(Q̃_j Ẑ) ≥ t, diag Ẑ = 1, Ẑ ⪰ 0`.
///
/// `t` is written as `t₀ + δτ` with `τ ≥ 0`, where `t₀` is achieved by a cheap
/// feasible point and `δ` bounds the variable part of every constraint, so
/// the solver sees O(1) data even when the reflected paths are tiny next to
/// the direct ones. Users whose constraint can never bind are dropped.
pub fn solve_passive_beamforming_with(instance: &SdpInstance, opts: &SdpOptions) -> Result<PsdSolution> {
    let dim = instance.dimension();
    let base: Vec<f64> = instance
        .weights
        .iter()
        .zip(&instance.los_terms)
        .map(|(w, h)| w * h * h)
        .collect();
    let spread: Vec<f64> = instance
        .weights
        .iter()
        .zip(&instance.q_matrices)
        .map(|(w, q)| w * q.iter().map(|v| v.norm()).sum::<f64>())
        .collect();
    let ceiling = base
        .iter()
        .zip(&spread)
        .map(|(b, s)| b + s)
        .fold(f64::INFINITY, f64::min);
    let active: Vec<usize> = (0..instance.users.len())
        .filter(|&k| base[k] - spread[k] <= ceiling)
        .collect();
    let delta = active.iter().map(|&k| spread[k]).fold(0.0, f64::max);

    let mut t_feas = f64::NEG_INFINITY;
    for z in cheap_candidates(instance) {
        t_feas = t_feas.max(-instance.objective(&z));
    }
    if delta == 0.0 {
        return Ok(PsdSolution {
            z_matrix: DMatrix::identity(dim, dim),
            objective: -t_feas,
            gap: 0.0,
        });
    }

    // LP variables: τ, then one slack per active user.
    let mut lp_cost = vec![0.0; 1 + active.len()];
    lp_cost[0] = -1.0;
    let mut constraints: Vec<SdpConstraint> = (0..dim)
        .map(|k| SdpConstraint {
            matrix: HermitianMatrix::Unit(k),
            lp: Vec::new(),
            rhs: 1.0,
        })
        .collect();
    for (slot, &k) in active.iter().enumerate() {
        let scale = instance.weights[k] / delta;
        constraints.push(SdpConstraint {
            matrix: HermitianMatrix::Dense(instance.q_matrices[k].map(|v| v * scale)),
            lp: vec![(0, -1.0), (slot + 1, -1.0)],
            rhs: (t_feas - base[k]) / delta,
        });
    }
    let form = SdpStandardForm {
        dimension: dim,
        cost: DMatrix::zeros(dim, dim),
        lp_cost,
        constraints,
    };
    let (sol, residual) = solve_sdp_best(&form, opts)?;
    if residual > opts.tol.max(1e-6) {
        return Err(Error::solver(
            format!("phase relaxation stalled at residual {residual:.3e}"),
            sol.iterations,
            vec![residual],
        ));
    }
    // Weak duality: −dual bounds τ* from above, keeping the value a valid bound.
    let tau = (-sol.dual_objective).max(sol.lp[0]);
    Ok(PsdSolution {
        z_matrix: sol.z,
        objective: -(t_feas + delta * tau),
        gap: sol.gap,
    })
}

/// Zero phases and the per-user aligned phases.
fn cheap_candidates(instance: &SdpInstance) -> Vec<DVector<Complex64>> {
    let n = instance.dimension() - 1;
    let mut out = vec![DVector::from_element(n, Complex64::new(1.0, 0.0))];
    for phi in &instance.phis {
        out.push(phi.map(|p| if p.norm() > 0.0 { p / p.norm() } else { Complex64::new(1.0, 0.0) }));
    }
    out
}

/// Gaussian randomization around `Ẑ`. The principal eigenvector is tried
/// first, then `trials` random draws; the best min-max candidate wins.
pub fn randomize_rank_one(
    psd: &PsdSolution,
    instance: &SdpInstance,
    trials: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, f64) {
    let dim = instance.dimension();
    let eig = psd.z_matrix.clone().symmetric_eigen();
    let factors: Vec<(f64, DVector<Complex64>)> = (0..dim)
        .map(|k| (eig.eigenvalues[k].max(0.0).sqrt(), eig.eigenvectors.column(k).into_owned()))
        .collect();
    let principal = (0..dim)
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    let mut consider = |xi: DVector<Complex64>| {
        let z = project(&xi);
        let value = instance.objective(&z);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, z));
        }
    };
    consider(factors[principal].1.clone());
    for _ in 0..trials {
        let mut xi = DVector::zeros(dim);
        for (s, v) in &factors {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            xi += v * (Complex64::new(re, im) * (s * std::f64::consts::FRAC_1_SQRT_2));
        }
        consider(xi);
    }
    let (value, z) = best.expect("at least one candidate");
    (instance.rows_from_z(&z), value)
}

/// Cyclic coordinate ascent on the min-max objective from `z`. Along one
/// coordinate every user value is a sinusoid, so the best angle is one of
/// the sinusoid peaks or pairwise crossings. Never returns a worse point.
pub fn refine_coordinates(instance: &SdpInstance, z: &DVector<Complex64>, sweeps: usize) -> (DVector<Complex64>, f64) {
    let mut z = z.clone();
    let users = instance.phis.len();
    let mut sums: Vec<Complex64> = (0..users)
        .map(|j| Complex64::new(instance.los_terms[j], 0.0) + z.dotc(&instance.phis[j]))
        .collect();
    let mut value = instance.objective(&z);
    for _ in 0..sweeps {
        let start = value;
        for k in 0..z.len() {
            let waves: Vec<(f64, f64, f64)> = (0..users)
                .map(|j| {
                    let w = instance.weights[j];
                    let b = instance.phis[j][k];
                    let a = sums[j] - z[k].conj() * b;
                    let c = w * (a.norm_sqr() + b.norm_sqr());
                    (c, 2.0 * w * a.norm() * b.norm(), (a.conj() * b).arg())
                })
                .collect();
            let floor = |t: f64| {
                waves
                    .iter()
                    .map(|&(c, r, al)| c + r * (t + al).cos())
                    .fold(f64::INFINITY, f64::min)
            };
            let current = z[k].conj().arg();
            let mut best = (current, floor(current));
            let mut consider = |t: f64| {
                let v = floor(t);
                if v > best.1 {
                    best = (t, v);
                }
            };
            for (j, &(cj, rj, aj)) in waves.iter().enumerate() {
                consider(-aj);
                for &(ck, rk, ak) in &waves[j + 1..] {
                    let p = rj * aj.cos() - rk * ak.cos();
                    let q = -(rj * aj.sin() - rk * ak.sin());
                    let rho = p.hypot(q);
                    if rho > 0.0 && (ck - cj).abs() <= rho {
                        let phi = q.atan2(p);
                        let off = ((ck - cj) / rho).acos();
                        consider(phi + off);
                        consider(phi - off);
                    }
                }
            }
            if best.0 != current {
                let e = Complex64::from_polar(1.0, best.0);
                for j in 0..users {
                    let b = instance.phis[j][k];
                    sums[j] += (e - z[k].conj()) * b;
                }
                z[k] = e.conj();
            }
        }
        // Recompute exactly to keep rounding from accumulating.
        sums = (0..users)
            .map(|j| Complex64::new(instance.los_terms[j], 0.0) + z.dotc(&instance.phis[j]))
            .collect();
        value = instance.objective(&z);
        if !(value < start - 1e-15 * start.abs()) {
            break;
        }
    }
    (z, value)
}

/// Projects onto unit modulus and rotates so the lifted last entry is 1;
/// returns the leading `dim − 1` entries.
fn project(xi: &DVector<Complex64>) -> DVector<Complex64> {
    let unit = xi.map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) });
    let last = unit[unit.len() - 1];
    let rot = last.conj();
    DVector::from_iterator(unit.len() - 1, unit.iter().take(unit.len() - 1).map(|v| v * rot))
}

const REFINE_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct PhaseOptions {
    pub trials: usize,
    pub seed: u64,
    pub sdp: SdpOptions,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            sdp: SdpOptions::default(),
        }
    }
}

/// New rows for `ris_set` serving `users` from UAV `i`. A single user gets
/// aligned phases; several users go through the relaxation, and the
/// incumbent rows are kept if they score better. `None` when there is
/// nothing to optimize.
pub fn optimize_uav_phases(
    ch: &ChannelSet,
    i: usize,
    users: &[usize],
    ris_set: &[usize],
    incumbent: &PhaseMatrix,
    scenario: &Scenario,
    opts: &PhaseOptions,
) -> Result<Option<Vec<(usize, Vec<f64>)>>> {
    if ris_set.is_empty() || users.is_empty() {
        return Ok(None);
    }
    if let [j] = users {
        return Ok(Some(align_with(ch, i, *j, ris_set, scenario)));
    }
    let instance = build_sdp_with(ch, i, users, ris_set, scenario)?;
    let current: Vec<Vec<f64>> = ris_set.iter().map(|&l| incumbent.row(l).to_vec()).collect();
    let mut best_rows = current.clone();
    let mut best_value = instance.objective_of_rows(&current);
    for z in cheap_candidates(&instance) {
        let v = instance.objective(&z);
        if v < best_value {
            best_value = v;
            best_rows = instance.rows_from_z(&z);
        }
    }
    if let Ok(psd) = solve_passive_beamforming_with(&instance, &opts.sdp) {
        let (rows, value) = randomize_rank_one(&psd, &instance, opts.trials, opts.seed);
        if value < best_value {
            best_value = value;
            best_rows = rows;
        }
    }
    let (z, value) = refine_coordinates(&instance, &z_from_rows(&best_rows), REFINE_SWEEPS);
    if value < best_value {
        best_rows = instance.rows_from_z(&z);
    }
    Ok(Some(ris_set.iter().copied().zip(best_rows).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_scenario, ScenarioConfig};

    fn strong_scenario(seed: u64, users: usize, ris: usize, m: usize) -> Scenario {
        let mut cfg = ScenarioConfig::table1();
        cfg.uav_count = 1;
        cfg.user_count = users;
        cfg.ris_count = ris;
        cfg.ris_elements = m;
        cfg.vlc.pd_area = 1.0;
        random_scenario(seed, &cfg).unwrap()
    }

    #[test]
    fn wrap_stays_in_range() {
        for a in [-TAU, -1e-18, 0.0, TAU, 3.0 * TAU + 0.1, -7.0] {
            let w = wrap_angle(a);
            assert!((0.0..TAU).contains(&w), "{a} -> {w}");
        }
    }

    #[test]
    fn coordinate_refinement_never_worsens() {
        let s = strong_scenario(4, 3, 2, 3);
        let dep = [Position::new(40.0, 60.0)];
        let inst = build_sdp(0, &[0, 1, 2], &[0, 1], &dep, &s).unwrap();
        let z = z_from_rows(&[vec![0.3, 1.0, 2.0], vec![4.0, 0.0, 5.5]]);
        let (refined, value) = refine_coordinates(&inst, &z, 20);
        assert!(value <= inst.objective(&z));
        assert!((inst.objective(&refined) - value).abs() <= 1e-12 * value.abs());
        assert!(refined.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn coordinate_refinement_reaches_alignment_for_one_user() {
        let s = strong_scenario(9, 1, 1, 3);
        let dep = [Position::new(40.0, 60.0)];
        let inst = build_sdp(0, &[0], &[0], &dep, &s).unwrap();
        let (_, value) = refine_coordinates(&inst, &z_from_rows(&[vec![0.0; 3]]), 20);
        let ch = ChannelSet::new(&dep, &s).unwrap();
        let aligned = inst.weights[0] * ch.aligned_gain(0, &[0], 0).powi(2);
        assert!((value + aligned).abs() <= 1e-9 * aligned);
    }

    #[test]
    fn first_element_never_shifted() {
        let s = strong_scenario(1, 1, 2, 4);
        let rows = align_phases(0, 0, &[Position::new(30.0, 30.0)], &[0, 1], &s).unwrap();
        assert!(rows.iter().all(|(_, r)| r[0] == 0.0));
    }

    #[test]
    fn half_wavelength_unit_difference_gives_pi() {
        let mut s = strong_scenario(1, 1, 1, 2);
        // RIS directly below the UAV (ϑ_il = 0) and user far along +x so
        // that ϑ_lj is close to but below 1; check the formula instead.
        s.ris_list[0] = Position::new(50.0, 50.0);
        let ch = ChannelSet::new(&[Position::new(50.0, 50.0)], &s).unwrap();
        let mut rg = ch.rg(0, 0).clone();
        let mut geo = rg.geometry.unwrap();
        geo.direction_cosine = 1.0;
        rg.geometry = Some(geo);
        let row = align_row(ch.ur(0, 0), &rg, &s);
        assert!((row[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_identity() {
        let s = strong_scenario(7, 3, 2, 3);
        let dep = [Position::new(20.0, 70.0)];
        let inst = build_sdp(0, &[0, 1, 2], &[0, 1], &dep, &s).unwrap();
        let ch = ChannelSet::new(&dep, &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut phases = PhaseMatrix::zeros(2, 3);
            for l in 0..2 {
                phases.set_row(l, (0..3).map(|_| rand::Rng::random_range(&mut rng, 0.0..TAU)).collect());
            }
            let z = z_from_rows(&phases.theta);
            let zhat = z.clone().insert_row(z.len(), Complex64::new(1.0, 0.0));
            for (k, &j) in inst.users.iter().enumerate() {
                let h = inst.los_terms[k];
                let lifted = (zhat.adjoint() * &inst.q_matrices[k] * &zhat)[(0, 0)].re + h * h;
                let direct = ch.gain(0, &phases, &[0, 1], j).powi(2);
                assert!((lifted - direct).abs() <= 1e-10 * direct.max(1e-300), "{lifted} vs {direct}");
            }
        }
    }

    #[test]
    fn single_user_relaxation_is_tight() {
        let s = strong_scenario(3, 1, 1, 1);
        let dep = [Position::new(40.0, 40.0)];
        let inst = build_sdp(0, &[0], &[0], &dep, &s).unwrap();
        let psd = solve_passive_beamforming(&inst).unwrap();
        let ch = ChannelSet::new(&dep, &s).unwrap();
        let aligned = ch.aligned_gain(0, &[0], 0);
        let expected = -inst.weights[0] * aligned * aligned;
        assert!((psd.objective - expected).abs() <= 1e-6 * expected.abs());
    }

    #[test]
    fn randomization_never_beats_relaxation() {
        let s = strong_scenario(9, 3, 2, 2);
        let dep = [Position::new(50.0, 50.0)];
        let inst = build_sdp(0, &[0, 1, 2], &[0, 1], &dep, &s).unwrap();
        let psd = solve_passive_beamforming(&inst).unwrap();
        let (rows, value) = randomize_rank_one(&psd, &inst, 50, 1);
        assert!(value >= psd.objective - 1e-9 * psd.objective.abs());
        assert!(rows.iter().flatten().all(|t| (0.0..TAU).contains(t)));
        assert!((inst.objective_of_rows(&rows) - value).abs() <= 1e-12 * value.abs());
    }
}
