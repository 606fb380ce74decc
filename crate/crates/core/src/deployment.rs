//! UAV placement by successive convex approximation.
//!
//! Each pass linearizes the nonconvex parts of the power problem around the
//! current positions and hands the resulting convex program to the barrier
//! solver. Quantities are normalized: lengths by the area size, gains by the
//! strongest direct gain and powers by `max A_j / gain scale`.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{geometry, ChannelSet, Optics};
use crate::cones::barrier::{solve_subproblem_with, Affine, BarrierOptions, Constraint, ConvexSubproblem};
use crate::error::{Error, Result};
use crate::model::{power_floor, Association, Position, Scenario};
use crate::phases::PhaseMatrix;

/// `2(q_i^r − q_k^r)ᵀ(q_i − q_k) − ‖q_i^r − q_k^r‖²`, a global lower bound
/// on `‖q_i − q_k‖²` that is tight at the reference points.
pub fn minorant_g0(qi: Position, qk: Position, qi_ref: Position, qk_ref: Position) -> f64 {
    let (dx, dy) = (qi_ref.x - qk_ref.x, qi_ref.y - qk_ref.y);
    2.0 * (dx * (qi.x - qk.x) + dy * (qi.y - qk.y)) - (dx * dx + dy * dy)
}

/// Affine lower bound of `|a|²` around `a_ref`, where `a = h + Σ κ_l h_l` is
/// linear in the real gains: `2 Re(conj(a_ref) a) − |a_ref|²`.
pub fn minorant_g1(direct: f64, ris: &[f64], kappa: &[Complex64], direct_ref: f64, ris_ref: &[f64]) -> f64 {
    let a = combine(direct, ris, kappa);
    let a_ref = combine(direct_ref, ris_ref, kappa);
    2.0 * (a_ref.conj() * a).re - a_ref.norm_sqr()
}

fn combine(direct: f64, ris: &[f64], kappa: &[Complex64]) -> Complex64 {
    kappa
        .iter()
        .zip(ris)
        .fold(Complex64::new(direct, 0.0), |acc, (k, h)| acc + k * h)
}

/// Tangent of the convex map `h ↦ C / h` at `h_ref`: `C (2 h_ref − h) / h_ref²`.
/// Requiring it to dominate the squared distance forces `h ≤ C / d²`.
pub fn minorant_reciprocal(c: f64, h: f64, h_ref: f64) -> Result<f64> {
    if !(h_ref > 0.0) {
        return Err(Error::Domain(format!("linearization gain {h_ref} must be positive")));
    }
    Ok(c * (2.0 * h_ref - h) / (h_ref * h_ref))
}

/// Bound for a UAV-to-user direct link.
pub fn minorant_g2(c: f64, h: f64, h_ref: f64) -> Result<f64> {
    minorant_reciprocal(c, h, h_ref)
}

/// Bound for a UAV-to-RIS link.
pub fn minorant_g3(c: f64, h: f64, h_ref: f64) -> Result<f64> {
    minorant_reciprocal(c, h, h_ref)
}

/// Reflected term of RIS `l` per unit of U-R path loss, frozen at the
/// current geometry: `(h_RG)ᴴ Θ_l h_UR / h_UR^LOS`.
pub fn compute_kappa(ch: &ChannelSet, i: usize, l: usize, j: usize, phases: &PhaseMatrix) -> Result<Complex64> {
    let pl = ch.ur(i, l).path_loss;
    if !(pl > 0.0) {
        return Err(Error::ZeroPathLoss { uav: i, ris: l });
    }
    Ok(ch.reflected(i, l, j, phases.row(l)) / pl)
}

#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Relative change of the total power that ends the iteration.
    pub tol: f64,
    pub barrier: BarrierOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            barrier: BarrierOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaState {
    pub iterate_positions: Vec<Position>,
    /// True total power after every accepted pass, starting with the input.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    /// Set when a pass was rejected by the monotone or coverage guard.
    pub rejected_step: bool,
}

const SHRINK: f64 = 1e-3;

/// Runs SCA from `deployment`. The returned positions never have a larger
/// total power than the input.
pub fn optimize_deployment(
    deployment: &[Position],
    assoc: &Association,
    phases: &PhaseMatrix,
    scenario: &Scenario,
    opts: &ScaOptions,
) -> Result<(Vec<Position>, ScaState)> {
    let mut current = deployment.to_vec();
    let mut ch = ChannelSet::new(&current, scenario)?;
    let mut power = total_power(&ch, assoc, phases, scenario)?;
    let mut state = ScaState {
        iterate_positions: current.clone(),
        objective_history: vec![power],
        iterations: 0,
        rejected_step: false,
    };
    for _ in 0..opts.max_iters {
        state.iterations += 1;
        let Some(candidate) = sca_step(&current, &ch, assoc, phases, scenario, &opts.barrier)? else {
            break;
        };
        let cand_ch = ChannelSet::new(&candidate, scenario)?;
        let accepted = total_power(&cand_ch, assoc, phases, scenario)
            .ok()
            .filter(|&p| p <= power && keeps_coverage(&ch, &cand_ch, assoc))
            .filter(|_| separated(&candidate, scenario.min_separation));
        let Some(new_power) = accepted else {
            state.rejected_step = true;
            break;
        };
        let change = (power - new_power) / power.max(f64::MIN_POSITIVE);
        current = candidate;
        ch = cand_ch;
        power = new_power;
        state.objective_history.push(power);
        if change < opts.tol {
            break;
        }
    }
    state.iterate_positions = current.clone();
    Ok((current, state))
}

fn separated(q: &[Position], d_min: f64) -> bool {
    (0..q.len()).all(|a| (a + 1..q.len()).all(|b| q[a].distance(q[b]) >= d_min))
}

/// Every served link with positive direct or RIS path loss before the step
/// keeps a positive one afterwards.
fn keeps_coverage(before: &ChannelSet, after: &ChannelSet, assoc: &Association) -> bool {
    assoc.user_to_uav.iter().enumerate().all(|(j, &i)| {
        let was = before.direct(i, j) > 0.0;
        !was || after.direct(i, j) > 0.0
    }) && assoc.ris_to_uav.iter().enumerate().all(|(l, &i)| {
        let was = before.ur(i, l).path_loss > 0.0;
        !was || after.ur(i, l).path_loss > 0.0
    })
}

fn total_power(ch: &ChannelSet, assoc: &Association, phases: &PhaseMatrix, scenario: &Scenario) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..scenario.uav_count {
        let ris = assoc.ris_of(i);
        let mut p: f64 = 0.0;
        for j in assoc.users_of(i) {
            let g = ch.gain(i, phases, &ris, j);
            if !(g > 0.0) {
                return Err(Error::InfeasibleChannel { uav: i, user: j });
            }
            p = p.max(power_floor(j, scenario) / g);
        }
        total += p;
    }
    Ok(total)
}

/// Builds and solves one convex subproblem. `None` if the linearization
/// admits no strictly feasible start.
fn sca_step(
    q_ref: &[Position],
    ch: &ChannelSet,
    assoc: &Association,
    phases: &PhaseMatrix,
    scenario: &Scenario,
    barrier: &BarrierOptions,
) -> Result<Option<Vec<Position>>> {
    let optics = Optics::new(&scenario.vlc);
    let ls = scenario.area[0].max(scenario.area[1]);
    let served: Vec<(usize, usize)> = assoc.user_to_uav.iter().enumerate().map(|(j, &i)| (i, j)).collect();
    let gs = served
        .iter()
        .map(|&(i, j)| ch.direct(i, j).max(ch.gain(i, phases, &assoc.ris_of(i), j)))
        .fold(0.0, f64::max);
    if !(gs > 0.0) {
        return Ok(None);
    }
    let a_max = served
        .iter()
        .map(|&(_, j)| power_floor(j, scenario))
        .fold(0.0, f64::max);
    if !(a_max > 0.0) {
        return Ok(None);
    }
    let h_hat = scenario.uav_altitude / ls;
    let dz_hat = (scenario.uav_altitude - scenario.ris_height) / ls;

    let mut p = ConvexSubproblem::default();
    let mut start = Vec::new();
    let var = |p: &mut ConvexSubproblem, start: &mut Vec<f64>, name: String, cost: f64, x0: f64| {
        start.push(x0);
        p.add_variable(name, cost)
    };

    let d = scenario.uav_count;
    let mut qx = Vec::with_capacity(d);
    let mut qy = Vec::with_capacity(d);
    for (i, q) in q_ref.iter().enumerate() {
        qx.push(var(&mut p, &mut start, format!("x{i}"), 0.0, q.x / ls));
        qy.push(var(&mut p, &mut start, format!("y{i}"), 0.0, q.y / ls));
    }

    for i in 0..d {
        let users = assoc.users_of(i);
        if users.is_empty() {
            continue;
        }
        let ris: Vec<usize> = assoc
            .ris_of(i)
            .into_iter()
            .filter(|&l| ch.ur(i, l).path_loss > 0.0)
            .collect();
        // U-R gain variables shared by every user of this UAV.
        let mut hr = Vec::with_capacity(ris.len());
        for &l in &ris {
            let h_ref = ch.ur(i, l).path_loss / gs;
            let geo = geometry(&scenario.uav_point(q_ref[i]), &scenario.ris_point(l))?;
            let c_hat = optics.prefactor * optics.angle_factor(&geo) / (gs * ls * ls);
            let v = var(&mut p, &mut start, format!("hr{i}_{l}"), 0.0, (1.0 - SHRINK) * h_ref);
            p.constraints.push(Constraint::Linear(Affine::new(vec![(v, -1.0)], 0.0)));
            let ris_pos = scenario.ris_list[l];
            p.constraints.push(Constraint::QuadraticUnderLinear {
                rows: vec![
                    Affine::new(vec![(qx[i], 1.0)], -ris_pos.x / ls),
                    Affine::new(vec![(qy[i], 1.0)], -ris_pos.y / ls),
                    Affine::new(vec![], dz_hat),
                ],
                bound: Affine::new(vec![(v, -c_hat / (h_ref * h_ref))], 2.0 * c_hat / h_ref),
            });
            hr.push((l, v, h_ref));
        }

        let mut floors = Vec::new();
        let mut hh_vars = Vec::new();
        for &j in &users {
            let kappa: Vec<Complex64> = hr
                .iter()
                .map(|&(l, _, _)| compute_kappa(ch, i, l, j, phases))
                .collect::<Result<_>>()?;
            let hd_ref = ch.direct(i, j) / gs;
            let mut a_terms: Vec<(usize, Complex64)> = Vec::new();
            let mut a_ref = Complex64::new(0.0, 0.0);
            if hd_ref > 0.0 {
                let geo = geometry(&scenario.uav_point(q_ref[i]), &scenario.user_point(j))?;
                let c_hat = optics.prefactor * optics.angle_factor(&geo) / (gs * ls * ls);
                let v = var(&mut p, &mut start, format!("hd{i}_{j}"), 0.0, (1.0 - SHRINK) * hd_ref);
                p.constraints.push(Constraint::Linear(Affine::new(vec![(v, -1.0)], 0.0)));
                let user = scenario.users[j];
                p.constraints.push(Constraint::QuadraticUnderLinear {
                    rows: vec![
                        Affine::new(vec![(qx[i], 1.0)], -user.x / ls),
                        Affine::new(vec![(qy[i], 1.0)], -user.y / ls),
                        Affine::new(vec![], h_hat),
                    ],
                    bound: Affine::new(vec![(v, -c_hat / (hd_ref * hd_ref))], 2.0 * c_hat / hd_ref),
                });
                a_terms.push((v, Complex64::new(1.0, 0.0)));
                a_ref += hd_ref;
            }
            for (&(_, v, h_ref), k) in hr.iter().zip(&kappa) {
                a_terms.push((v, *k));
                a_ref += k * h_ref;
            }
            let mag = a_ref.norm();
            if !(mag > 0.0) {
                return Ok(None);
            }
            // hh² ≤ 2 Re(conj(a_ref) a) − |a_ref|²
            let hh = var(&mut p, &mut start, format!("h{i}_{j}"), 0.0, (1.0 - 2.0 * SHRINK) * mag);
            p.constraints.push(Constraint::QuadraticUnderLinear {
                rows: vec![Affine::new(vec![(hh, 1.0)], 0.0)],
                bound: Affine::new(
                    a_terms.iter().map(|&(v, c)| (v, 2.0 * (a_ref.conj() * c).re)).collect(),
                    -a_ref.norm_sqr(),
                ),
            });
            floors.push(power_floor(j, scenario) / a_max);
            hh_vars.push((hh, (1.0 - 2.0 * SHRINK) * mag));
        }
        let p0 = floors
            .iter()
            .zip(&hh_vars)
            .map(|(a, (_, h))| a / h)
            .fold(0.0, f64::max)
            * (1.0 + SHRINK);
        let pv = var(&mut p, &mut start, format!("P{i}"), 1.0, p0);
        for (a, (hh, _)) in floors.iter().zip(&hh_vars) {
            p.constraints.push(Constraint::Hyperbolic { a: pv, b: *hh, c: *a });
        }
    }

    // Pairwise separation through the affine lower bound of ‖q_i − q_k‖².
    let dmin_sq = (scenario.min_separation / ls).powi(2);
    for a in 0..d {
        for b in a + 1..d {
            let dx = (q_ref[a].x - q_ref[b].x) / ls;
            let dy = (q_ref[a].y - q_ref[b].y) / ls;
            // dmin² − g0 ≤ 0
            p.constraints.push(Constraint::Linear(Affine::new(
                vec![(qx[a], -2.0 * dx), (qx[b], 2.0 * dx), (qy[a], -2.0 * dy), (qy[b], 2.0 * dy)],
                dmin_sq + dx * dx + dy * dy,
            )));
        }
    }
    // Keep UAVs over the service area, widened to contain the start.
    for i in 0..d {
        for (v, extent, coord) in [(qx[i], scenario.area[0], q_ref[i].x), (qy[i], scenario.area[1], q_ref[i].y)] {
            let lo = (coord - 1.0).min(0.0) / ls;
            let hi = (coord + 1.0).max(extent) / ls;
            p.constraints.push(Constraint::Linear(Affine::new(vec![(v, -1.0)], lo)));
            p.constraints.push(Constraint::Linear(Affine::new(vec![(v, 1.0)], -hi)));
        }
    }

    let sol = match solve_subproblem_with(&p, &start, barrier) {
        Ok(sol) => sol,
        Err(Error::Infeasible { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(
        (0..d)
            .map(|i| Position::new(sol.x[qx[i]] * ls, sol.x[qy[i]] * ls))
            .collect(),
    ))
}

/// Starting positions: the centroid of each UAV's users (the area center
/// for idle UAVs), pushed apart until every pair clears `1.01 · d_min`.
pub fn initial_deployment(assoc: &Association, scenario: &Scenario) -> Vec<Position> {
    let [w, h] = scenario.area;
    let center = Position::new(w / 2.0, h / 2.0);
    let mut q: Vec<Position> = (0..scenario.uav_count)
        .map(|i| {
            let users = assoc.users_of(i);
            if users.is_empty() {
                return center;
            }
            let n = users.len() as f64;
            let (sx, sy) = users
                .iter()
                .fold((0.0, 0.0), |(x, y), &j| (x + scenario.users[j].x, y + scenario.users[j].y));
            Position::new(sx / n, sy / n)
        })
        .collect();
    separate(&mut q, scenario.min_separation * 1.01);
    q
}

/// Deterministic pairwise repulsion until all pairs are at least `target` apart.
pub fn separate(q: &mut [Position], target: f64) {
    if target <= 0.0 {
        return;
    }
    for _ in 0..1000 {
        let mut moved = false;
        for a in 0..q.len() {
            for b in a + 1..q.len() {
                let dist = q[a].distance(q[b]);
                if dist >= target {
                    continue;
                }
                moved = true;
                let (ux, uy) = if dist > 1e-9 {
                    ((q[b].x - q[a].x) / dist, (q[b].y - q[a].y) / dist)
                } else {
                    // Coincident: split along a direction fixed by the pair.
                    let ang = 2.399_963 * (a * 7 + b) as f64;
                    (ang.cos(), ang.sin())
                };
                let push = 0.5 * (target - dist) + 1e-9;
                q[a] = Position::new(q[a].x - ux * push, q[a].y - uy * push);
                q[b] = Position::new(q[b].x + ux * push, q[b].y + uy * push);
            }
        }
        if !moved {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_scenario, ScenarioConfig};

    fn config(d: usize, u: usize, l: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::table1();
        cfg.uav_count = d;
        cfg.user_count = u;
        cfg.ris_count = l;
        cfg
    }

    #[test]
    fn g0_tangent_and_below() {
        let (a, b) = (Position::new(1.0, 2.0), Position::new(4.0, -2.0));
        assert!((minorant_g0(a, b, a, b) - a.distance_sq(b)).abs() < 1e-12);
        let (c, e) = (Position::new(-3.0, 5.0), Position::new(0.5, 0.5));
        assert!(minorant_g0(c, e, a, b) <= c.distance_sq(e));
        assert_eq!(minorant_g0(c, e, a, a), 0.0);
    }

    #[test]
    fn reciprocal_tangent() {
        assert!((minorant_g2(3.0, 0.5, 0.5).unwrap() - 6.0).abs() < 1e-12);
        assert!(minorant_g3(3.0, 0.7, 0.5).unwrap() <= 3.0 / 0.7);
        assert!(matches!(minorant_g2(1.0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_uav_single_user_moves_to_nadir() {
        let s = random_scenario(2, &config(1, 1, 0)).unwrap();
        let assoc = Association::new(vec![0], vec![]);
        let start = vec![Position::new(s.users[0].x + 15.0, s.users[0].y - 10.0)];
        let phases = PhaseMatrix::zeros(0, s.ris_elements);
        let (q, state) = optimize_deployment(&start, &assoc, &phases, &s, &ScaOptions::default()).unwrap();
        assert!(q[0].distance(s.users[0]) < 1e-2, "{:?} vs {:?}", q[0], s.users[0]);
        assert!(state.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let s = random_scenario(2, &config(1, 1, 0)).unwrap();
        let assoc = Association::new(vec![0], vec![]);
        let phases = PhaseMatrix::zeros(0, s.ris_elements);
        let (q, state) = optimize_deployment(&[s.users[0]], &assoc, &phases, &s, &ScaOptions::default()).unwrap();
        assert!(state.iterations <= 2);
        assert!(q[0].distance(s.users[0]) < 1e-6);
    }

    #[test]
    fn crowded_uavs_keep_separation() {
        let mut s = random_scenario(5, &config(2, 2, 0)).unwrap();
        s.users = vec![Position::new(50.0, 50.0), Position::new(51.0, 50.0)];
        let assoc = Association::new(vec![0, 1], vec![]);
        let start = initial_deployment(&assoc, &s);
        let phases = PhaseMatrix::zeros(0, s.ris_elements);
        let (q, _) = optimize_deployment(&start, &assoc, &phases, &s, &ScaOptions::default()).unwrap();
        assert!(q[0].distance(q[1]) >= s.min_separation - 1e-6);
    }

    #[test]
    fn initial_deployment_respects_margin() {
        let s = random_scenario(8, &config(3, 6, 3)).unwrap();
        let assoc = Association::new(vec![0; 6], vec![0; 3]);
        let q = initial_deployment(&assoc, &s);
        for a in 0..3 {
            for b in a + 1..3 {
                assert!(q[a].distance(q[b]) >= s.min_separation * 1.01 - 1e-9);
            }
        }
    }
}
