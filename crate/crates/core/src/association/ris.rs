//! RIS association: the dual method with linearized RIS pair products, and
//! the one-RIS-at-a-time greedy alternative.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::Serialize;

use super::{AssociationEvaluator, AssociationOutcome};
use crate::channel::ChannelSet;
use crate::error::Result;
use crate::model::{power_floor, Association, Position, Scenario};
use crate::phases::PhaseMatrix;

/// Expansion of `|h + Σ_l m_l r_l|²` over binary `m`:
/// `c0 + Σ_l c1[l] m_l + Σ_{l>v} c2[l][v] m_l m_v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RisCoefficients {
    pub c0: f64,
    pub c1: Vec<f64>,
    /// Lower triangle: `c2[l][v]` for `v < l`.
    pub c2: Vec<Vec<f64>>,
}

impl RisCoefficients {
    pub fn reconstruct(&self, m: &[bool]) -> f64 {
        let mut v = self.c0;
        for l in 0..m.len() {
            if !m[l] {
                continue;
            }
            v += self.c1[l];
            for k in 0..l {
                if m[k] {
                    v += self.c2[l][k];
                }
            }
        }
        v
    }
}

pub fn ris_coefficients(
    i: usize,
    j: usize,
    deployment: &[Position],
    phases: &PhaseMatrix,
    scenario: &Scenario,
) -> Result<RisCoefficients> {
    Ok(ris_coefficients_with(&ChannelSet::new(deployment, scenario)?, i, j, phases))
}

pub fn ris_coefficients_with(ch: &ChannelSet, i: usize, j: usize, phases: &PhaseMatrix) -> RisCoefficients {
    let h = ch.direct(i, j);
    let r: Vec<Complex64> = (0..ch.rg.len()).map(|l| ch.reflected(i, l, j, phases.row(l))).collect();
    RisCoefficients {
        c0: h * h,
        c1: r.iter().map(|rl| 2.0 * h * rl.re + rl.norm_sqr()).collect(),
        c2: (0..r.len())
            .map(|l| (0..l).map(|v| 2.0 * (r[l].conj() * r[v]).re).collect())
            .collect(),
    }
}

/// Multipliers and primal iterates of the RIS dual method. Pair-indexed
/// arrays use `(l, v)` with `v < l`: `g1` prices `E ≥ m_l + m_v − 1`, `g2`
/// prices `E ≤ m_l` and `g3` prices `E ≤ m_v`.
#[derive(Debug, Clone, Serialize)]
pub struct RisDualState {
    pub tau: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub g1: Vec<Vec<Vec<f64>>>,
    pub g2: Vec<Vec<Vec<f64>>>,
    pub g3: Vec<Vec<Vec<f64>>>,
    pub e_vars: Vec<Vec<Vec<f64>>>,
    pub h_tilde: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct RisDualOptions {
    pub iters: usize,
    pub step0: f64,
}

impl Default for RisDualOptions {
    fn default() -> Self {
        Self { iters: 60, step0: 0.1 }
    }
}

/// Dual method for the RIS association with users fixed. Every integer
/// candidate is priced by the evaluator; the cheapest one seen, refined by
/// single-RIS moves, is returned (never worse than `incumbent`).
pub fn ris_dual_solve(
    eval: &AssociationEvaluator<'_>,
    incumbent: &Association,
    opts: &RisDualOptions,
) -> Result<AssociationOutcome> {
    let scenario = eval.scenario();
    let ch = eval.channels();
    let d = scenario.uav_count;
    let l_count = scenario.ris_count();
    let users = &incumbent.user_to_uav;
    if l_count == 0 {
        return eval.outcome(incumbent.clone());
    }
    let served: Vec<Vec<usize>> = (0..d).map(|i| incumbent.users_of(i)).collect();

    // Normalization: gains by the strongest direct gain, floors by the largest.
    let gs = (0..users.len())
        .map(|j| ch.direct(users[j], j))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let a_max = (0..users.len())
        .map(|j| power_floor(j, scenario))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let floor = |j: usize| power_floor(j, scenario) / a_max;
    let coef: Vec<Vec<RisCoefficients>> = (0..d)
        .map(|i| {
            served[i]
                .iter()
                .map(|&j| {
                    let c = ris_coefficients_with(ch, i, j, eval.incumbent());
                    let s = 1.0 / (gs * gs);
                    RisCoefficients {
                        c0: c.c0 * s,
                        c1: c.c1.iter().map(|v| v * s).collect(),
                        c2: c.c2.iter().map(|row| row.iter().map(|v| v * s).collect()).collect(),
                    }
                })
                .collect()
        })
        .collect();

    let pairs = |init: f64| -> Vec<Vec<Vec<f64>>> {
        (0..d).map(|_| (0..l_count).map(|l| vec![init; l]).collect()).collect()
    };
    let mut st = RisDualState {
        tau: served.iter().map(|s| vec![1.0; s.len()]).collect(),
        gamma: Vec::new(),
        g1: pairs(0.0),
        g2: pairs(0.0),
        g3: pairs(0.0),
        e_vars: pairs(0.0),
        h_tilde: Vec::new(),
    };
    // Start h̃ at the current gains and pick γ so the stationarity rule
    // reproduces them.
    st.h_tilde = (0..d)
        .map(|i| {
            let set = incumbent.ris_of(i);
            served[i]
                .iter()
                .map(|&j| (ch.gain(i, eval.incumbent(), &set, j) / gs).max(1e-12))
                .collect()
        })
        .collect();
    st.gamma = (0..d)
        .map(|i| {
            served[i]
                .iter()
                .enumerate()
                .map(|(k, &j)| st.tau[i][k] * floor(j) / st.h_tilde[i][k].powi(3))
                .collect()
        })
        .collect();

    let mut seen: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut price = |m: &[usize]| -> Result<f64> {
        if let Some(v) = seen.get(m) {
            return Ok(*v);
        }
        let ris: Vec<Option<usize>> = m.iter().map(|&i| Some(i)).collect();
        let v = eval.price(users, &ris)?.total;
        seen.insert(m.to_vec(), v);
        Ok(v)
    };
    let mut best_m = incumbent.ris_to_uav.clone();
    let mut best = price(&best_m)?;

    for t in 0..opts.iters {
        let rho = opts.step0 / ((t + 1) as f64).sqrt();
        // E* from the sign of its Lagrangian coefficient.
        for i in 0..d {
            for l in 0..l_count {
                for v in 0..l {
                    let gc: f64 = coef[i].iter().zip(&st.gamma[i]).map(|(c, g)| g * c.c2[l][v]).sum();
                    let score = st.g1[i][l][v] - st.g2[i][l][v] - st.g3[i][l][v] + gc;
                    st.e_vars[i][l][v] = if score > 0.0 { 1.0 } else { 0.0 };
                }
            }
        }
        // Aggregated coefficients and the per-RIS argmin.
        let m: Vec<usize> = (0..l_count)
            .map(|l| {
                let mut best_i = 0;
                let mut best_c = f64::INFINITY;
                for i in 0..d {
                    let mut c: f64 = -coef[i].iter().zip(&st.gamma[i]).map(|(cf, g)| g * cf.c1[l]).sum::<f64>();
                    for v in 0..l {
                        c -= st.g2[i][l][v] - st.g1[i][l][v];
                    }
                    for v in l + 1..l_count {
                        c -= st.g3[i][v][l] - st.g1[i][v][l];
                    }
                    if c < best_c {
                        best_c = c;
                        best_i = i;
                    }
                }
                best_i
            })
            .collect();
        // h̃ from stationarity, P as the smallest feasible power.
        for i in 0..d {
            for (k, &j) in served[i].iter().enumerate() {
                if st.gamma[i][k] > 0.0 {
                    st.h_tilde[i][k] = (st.tau[i][k] * floor(j) / st.gamma[i][k]).cbrt();
                }
            }
        }
        let p: Vec<f64> = (0..d)
            .map(|i| {
                served[i]
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| floor(j) / st.h_tilde[i][k])
                    .fold(0.0, f64::max)
            })
            .collect();

        let total = price(&m)?;
        if total < best {
            best = total;
            best_m = m.clone();
        }

        // Projected subgradient updates.
        for i in 0..d {
            let mi: Vec<f64> = (0..l_count).map(|l| if m[l] == i { 1.0 } else { 0.0 }).collect();
            for (k, &j) in served[i].iter().enumerate() {
                let h = st.h_tilde[i][k];
                st.tau[i][k] = (st.tau[i][k] + rho * (floor(j) / h - p[i])).max(0.0);
                let c = &coef[i][k];
                let mut rhs = c.c0;
                for l in 0..l_count {
                    rhs += c.c1[l] * mi[l];
                    for v in 0..l {
                        rhs += c.c2[l][v] * st.e_vars[i][l][v];
                    }
                }
                st.gamma[i][k] = (st.gamma[i][k] + rho * (h * h - rhs)).max(0.0);
            }
            for l in 0..l_count {
                for v in 0..l {
                    let e = st.e_vars[i][l][v];
                    st.g1[i][l][v] = (st.g1[i][l][v] + rho * (mi[l] + mi[v] - 1.0 - e)).max(0.0);
                    st.g2[i][l][v] = (st.g2[i][l][v] + rho * (e - mi[l])).max(0.0);
                    st.g3[i][l][v] = (st.g3[i][l][v] + rho * (e - mi[v])).max(0.0);
                }
            }
        }
    }

    polish(&mut best_m, &mut best, d, &mut price)?;
    eval.outcome(Association::new(users.clone(), best_m))
}

/// Single-RIS moves until none lowers the total.
fn polish(
    m: &mut [usize],
    best: &mut f64,
    d: usize,
    price: &mut impl FnMut(&[usize]) -> Result<f64>,
) -> Result<()> {
    loop {
        let mut improved = false;
        for l in 0..m.len() {
            for i in 0..d {
                if i == m[l] {
                    continue;
                }
                let mut cand = m.to_vec();
                cand[l] = i;
                let total = price(&cand)?;
                if total < *best {
                    *best = total;
                    m.copy_from_slice(&cand);
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(());
        }
    }
}

/// Greedy placement: starting with no RIS in use, each RIS in turn goes to
/// the UAV giving the lowest total power, lowest index on ties.
pub fn ris_greedy(eval: &AssociationEvaluator<'_>, user_to_uav: &[usize]) -> Result<AssociationOutcome> {
    let scenario = eval.scenario();
    let mut m: Vec<Option<usize>> = vec![None; scenario.ris_count()];
    for l in 0..m.len() {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..scenario.uav_count {
            m[l] = Some(i);
            let total = eval.price(user_to_uav, &m)?.total;
            if best.is_none_or(|(_, b)| total < b) {
                best = Some((i, total));
            }
        }
        m[l] = best.map(|(i, _)| i);
    }
    let ris = m.into_iter().map(|i| i.unwrap_or(0)).collect();
    eval.outcome(Association::new(user_to_uav.to_vec(), ris))
}
