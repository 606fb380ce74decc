//! Brute-force reference solvers for tests. They use only the channel and
//! model code, never the optimizers they are meant to check.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{aggregate_gain, los_gain, rg_channel, ur_channel};
use crate::error::{Error, Result};
use crate::model::{power_floor, Association, Position, Scenario};
use crate::phases::PhaseMatrix;

const MAX_GRID: f64 = 1e8;
const MAX_ASSOCIATIONS: f64 = 1e6;
const MAX_LATTICE: usize = 10_000;

/// Per-user pieces of `|h + Σ_k c_k e^{iθ_k}|` for a UAV and a RIS set,
/// with `k` running over (RIS, element) pairs in order.
struct Linear {
    direct: f64,
    coef: Vec<Complex64>,
}

fn linear(q: Position, ris_set: &[usize], j: usize, scenario: &Scenario) -> Result<Linear> {
    let direct = los_gain(&scenario.uav_point(q), &scenario.user_point(j), &scenario.vlc)?;
    let mut coef = Vec::new();
    for &l in ris_set {
        let ur = ur_channel(q, l, scenario)?;
        let rg = rg_channel(l, j, scenario)?;
        coef.extend(ur.entries.iter().zip(&rg.entries).map(|(u, r)| r.conj() * u));
    }
    Ok(Linear { direct, coef })
}

impl Linear {
    fn gain(&self, unit: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(self.direct, 0.0);
        for (c, e) in self.coef.iter().zip(unit) {
            acc += c * e;
        }
        acc.norm()
    }

    /// Closed-form best phases: every reflected term in phase with the
    /// (real, nonnegative) direct term.
    fn aligned(&self) -> Vec<f64> {
        self.coef.iter().map(|c| (-c.arg()).rem_euclid(2.0 * PI)).collect()
    }
}

fn power_of(links: &[(usize, Linear)], unit: &[Complex64], scenario: &Scenario) -> f64 {
    links
        .iter()
        .map(|(j, lin)| {
            let g = lin.gain(unit);
            if g > 0.0 {
                power_floor(*j, scenario) / g
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Exhaustive search over `θ ∈ {0, Δ, …}` for every element of every RIS
/// in `ris_set`, minimizing the power UAV `uav` needs for `users`. Returns
/// the phases (other rows zero) and that power.
pub fn grid_phase_search(
    scenario: &Scenario,
    deployment: &[Position],
    uav: usize,
    users: &[usize],
    ris_set: &[usize],
    resolution: f64,
) -> Result<(PhaseMatrix, f64)> {
    if !(resolution > 0.0) {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let steps = (2.0 * PI / resolution).round().max(1.0) as usize;
    let dims = ris_set.len() * scenario.ris_elements;
    let points = (steps as f64).powi(dims as i32);
    if points > MAX_GRID {
        return Err(Error::TooLarge { points });
    }
    let q = deployment[uav];
    let links: Vec<(usize, Linear)> = users
        .iter()
        .map(|&j| Ok((j, linear(q, ris_set, j, scenario)?)))
        .collect::<Result<_>>()?;
    let table: Vec<Complex64> = (0..steps)
        .map(|s| Complex64::from_polar(1.0, s as f64 * 2.0 * PI / steps as f64))
        .collect();

    let mut idx = vec![0usize; dims];
    let mut unit = vec![table[0]; dims];
    let mut best = (idx.clone(), f64::INFINITY);
    loop {
        let p = power_of(&links, &unit, scenario);
        if p < best.1 {
            best = (idx.clone(), p);
        }
        // Odometer increment.
        let mut k = 0;
        while k < dims {
            idx[k] += 1;
            if idx[k] < steps {
                unit[k] = table[idx[k]];
                break;
            }
            idx[k] = 0;
            unit[k] = table[0];
            k += 1;
        }
        if k == dims {
            break;
        }
    }
    let m = scenario.ris_elements;
    let mut phases = PhaseMatrix::zeros(scenario.ris_count(), m);
    for (r, &l) in ris_set.iter().enumerate() {
        let row = best.0[r * m..(r + 1) * m]
            .iter()
            .map(|&s| s as f64 * 2.0 * PI / steps as f64)
            .collect();
        phases.set_row(l, row);
    }
    Ok((phases, best.1))
}

/// Every `(u, m)` pair, priced with phases aligned for single-user UAVs and
/// `phases` kept elsewhere. Ties keep the first candidate in enumeration
/// order. Returns the best association, its phases and its total power.
pub fn exhaustive_association(
    scenario: &Scenario,
    deployment: &[Position],
    phases: &PhaseMatrix,
) -> Result<(Association, PhaseMatrix, f64)> {
    let d = scenario.uav_count;
    let (u, l) = (scenario.user_count(), scenario.ris_count());
    let count = (d as f64).powi((u + l) as i32);
    if count > MAX_ASSOCIATIONS {
        return Err(Error::TooLarge { points: count });
    }
    let mut cache: HashMap<(usize, Vec<usize>, Vec<usize>), (f64, Vec<(usize, Vec<f64>)>)> = HashMap::new();
    let mut uav_cost = |i: usize, users: Vec<usize>, ris: Vec<usize>| -> Result<(f64, Vec<(usize, Vec<f64>)>)> {
        let key = (i, users, ris);
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
        let (_, users, ris) = &key;
        let q = deployment[i];
        let rows: Vec<(usize, Vec<f64>)> = match users.as_slice() {
            [j] if !ris.is_empty() => {
                let angles = linear(q, ris, *j, scenario)?.aligned();
                let m = scenario.ris_elements;
                ris.iter()
                    .enumerate()
                    .map(|(r, &l)| (l, angles[r * m..(r + 1) * m].to_vec()))
                    .collect()
            }
            _ => ris.iter().map(|&l| (l, phases.row(l).to_vec())).collect(),
        };
        let mut local = phases.clone();
        for (l, row) in &rows {
            local.set_row(*l, row.clone());
        }
        let mut power: f64 = 0.0;
        for &j in users {
            let g = aggregate_gain(q, &local, ris, j, scenario)?;
            power = power.max(if g > 0.0 { power_floor(j, scenario) / g } else { f64::INFINITY });
        }
        cache.insert(key.clone(), (power, rows.clone()));
        Ok((power, rows))
    };

    let total = u + l;
    let mut digits = vec![0usize; total];
    let mut best: Option<(Vec<usize>, f64, PhaseMatrix)> = None;
    loop {
        let mut sum = 0.0;
        let mut local = phases.clone();
        for i in 0..d {
            let users = (0..u).filter(|&j| digits[j] == i).collect();
            let ris = (0..l).filter(|&k| digits[u + k] == i).collect();
            let (p, rows) = uav_cost(i, users, ris)?;
            sum += p;
            for (k, row) in rows {
                local.set_row(k, row);
            }
        }
        if best.as_ref().is_none_or(|b| sum < b.1) {
            best = Some((digits.clone(), sum, local));
        }
        let mut k = 0;
        while k < total {
            digits[k] += 1;
            if digits[k] < d {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
        if k == total {
            break;
        }
    }
    let (digits, power, phases) = best.expect("at least one association");
    Ok((Association::new(digits[..u].to_vec(), digits[u..].to_vec()), phases, power))
}

/// Lattice search over UAV positions (`D ≤ 2`) for fixed association and
/// phases, honoring the minimum separation. Points lie on `{0, step, …}`
/// along each side of the area.
pub fn grid_deployment(
    scenario: &Scenario,
    assoc: &Association,
    phases: &PhaseMatrix,
    step: f64,
) -> Result<(Vec<Position>, f64)> {
    let d = scenario.uav_count;
    if d > 2 {
        return Err(Error::Validation("grid_deployment supports at most two UAVs".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Domain("lattice step must be positive".into()));
    }
    let [w, h] = scenario.area;
    let nx = (w / step).floor() as usize + 1;
    let ny = (h / step).floor() as usize + 1;
    if nx * ny > MAX_LATTICE {
        return Err(Error::TooLarge {
            points: (nx * ny) as f64,
        });
    }
    let lattice: Vec<Position> = (0..nx)
        .flat_map(|a| (0..ny).map(move |b| Position::new(a as f64 * step, b as f64 * step)))
        .collect();

    // Per-UAV power at each lattice point, then the best separated pair.
    let mut costs: Vec<Vec<(f64, usize)>> = Vec::with_capacity(d);
    for i in 0..d {
        let users = assoc.users_of(i);
        let ris = assoc.ris_of(i);
        let mut c = Vec::with_capacity(lattice.len());
        for (k, &q) in lattice.iter().enumerate() {
            let mut p: f64 = 0.0;
            for &j in &users {
                let g = aggregate_gain(q, phases, &ris, j, scenario)?;
                p = p.max(if g > 0.0 { power_floor(j, scenario) / g } else { f64::INFINITY });
            }
            c.push((p, k));
        }
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        costs.push(c);
    }
    match d {
        0 => Ok((Vec::new(), 0.0)),
        1 => {
            let (p, k) = costs[0][0];
            Ok((vec![lattice[k]], p))
        }
        _ => {
            let dmin = scenario.min_separation;
            let mut best: Option<(usize, usize, f64)> = None;
            for &(pa, a) in &costs[0] {
                if best.is_some_and(|b| pa + costs[1][0].0 >= b.2) {
                    break;
                }
                for &(pb, b) in &costs[1] {
                    if best.is_some_and(|bb| pa + pb >= bb.2) {
                        break;
                    }
                    if lattice[a].distance(lattice[b]) >= dmin {
                        best = Some((a, b, pa + pb));
                        break;
                    }
                }
            }
            let (a, b, p) = best.ok_or_else(|| Error::Validation("no separated lattice pair".into()))?;
            Ok((vec![lattice[a], lattice[b]], p))
        }
    }
}
