//! User association by Lagrangian dual decomposition.

use serde::Serialize;

use super::{check_coverage, AssociationEvaluator, AssociationOutcome};
use crate::error::{Error, Result};
use crate::model::{power_floor, Association};

/// Multipliers `β_ij` of the power constraints `P_i ≥ A_j u_ij / h_ij`.
#[derive(Debug, Clone, Serialize)]
pub struct UserDualState {
    pub beta: Vec<Vec<f64>>,
    pub step0: f64,
    pub iteration: usize,
}

impl UserDualState {
    pub fn uniform(uavs: usize, users: usize, step0: f64) -> Self {
        Self {
            beta: vec![vec![1.0 / users.max(1) as f64; users]; uavs],
            step0,
            iteration: 0,
        }
    }

    pub fn step(&self) -> f64 {
        self.step0 / ((self.iteration + 1) as f64).sqrt()
    }
}

/// Each user picks the UAV with the smallest `β_ij A_j / h_ij`, lowest
/// index on ties. Zero gains count as infinitely expensive.
pub fn user_assoc_step(beta: &[Vec<f64>], gains: &[Vec<f64>], floors: &[f64]) -> Result<Vec<usize>> {
    let d = gains.len();
    (0..floors.len())
        .map(|j| {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..d {
                if !(gains[i][j] > 0.0) {
                    continue;
                }
                let coef = beta[i][j] * floors[j] / gains[i][j];
                if best.is_none_or(|(_, c)| coef < c) {
                    best = Some((i, coef));
                }
            }
            best.map(|(i, _)| i).ok_or(Error::NoCoverage { user: j })
        })
        .collect()
}

/// Projected subgradient step. The subgradient is divided by the largest
/// power so the step size is scale free; rows summing above 1 are rescaled.
pub fn user_beta_update(
    state: &mut UserDualState,
    assignment: &[usize],
    powers: &[f64],
    gains: &[Vec<f64>],
    floors: &[f64],
    rho: f64,
) {
    let scale = powers.iter().copied().filter(|p| p.is_finite()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for (i, row) in state.beta.iter_mut().enumerate() {
        for (j, b) in row.iter_mut().enumerate() {
            let demand = if assignment[j] == i && gains[i][j] > 0.0 {
                floors[j] / gains[i][j]
            } else {
                0.0
            };
            let p = if powers[i].is_finite() { powers[i] } else { scale };
            *b = (*b + rho * (demand - p) / scale).max(0.0);
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 {
            row.iter_mut().for_each(|b| *b /= sum);
        }
    }
    state.iteration += 1;
}

#[derive(Debug, Clone, Copy)]
pub struct UserAssocOptions {
    pub iters: usize,
    pub step0: f64,
}

impl Default for UserAssocOptions {
    fn default() -> Self {
        Self { iters: 60, step0: 0.1 }
    }
}

/// Dual iterations followed by single-user moves, keeping the cheapest
/// integer association seen. The RIS association of `incumbent` is kept.
pub fn optimize_user_association(
    eval: &AssociationEvaluator<'_>,
    incumbent: &Association,
    opts: &UserAssocOptions,
) -> Result<AssociationOutcome> {
    let scenario = eval.scenario();
    let ch = eval.channels();
    let d = scenario.uav_count;
    let u = scenario.user_count();
    check_coverage(ch, eval.incumbent(), &incumbent.ris_to_uav, d, u)?;
    let ris: Vec<Option<usize>> = incumbent.ris_to_uav.iter().map(|&i| Some(i)).collect();
    let gains: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let set = incumbent.ris_of(i);
            (0..u).map(|j| ch.gain(i, eval.incumbent(), &set, j)).collect()
        })
        .collect();
    let floors: Vec<f64> = (0..u).map(|j| power_floor(j, scenario)).collect();

    let mut best_u = incumbent.user_to_uav.clone();
    let mut best = eval.price(&best_u, &ris)?.total;
    let mut state = UserDualState::uniform(d, u, opts.step0);
    for _ in 0..opts.iters {
        let cand = user_assoc_step(&state.beta, &gains, &floors)?;
        let priced = eval.price(&cand, &ris)?;
        if priced.total < best {
            best = priced.total;
            best_u = cand.clone();
        }
        let rho = state.step();
        user_beta_update(&mut state, &cand, &priced.powers, &gains, &floors, rho);
    }

    // Single-user moves and whole-UAV merges until none helps.
    loop {
        let mut moves: Vec<Vec<usize>> = Vec::new();
        for j in 0..u {
            for i in 0..d {
                if i != best_u[j] {
                    let mut cand = best_u.clone();
                    cand[j] = i;
                    moves.push(cand);
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                if a != b && best_u.contains(&a) {
                    moves.push(best_u.iter().map(|&i| if i == a { b } else { i }).collect());
                }
            }
        }
        let mut improved = false;
        for cand in moves {
            if cand.iter().enumerate().any(|(j, &i)| !(gains[i][j] > 0.0)) {
                continue;
            }
            let total = eval.price(&cand, &ris)?.total;
            if total < best {
                best = total;
                best_u = cand;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    eval.outcome(Association::new(best_u, incumbent.ris_to_uav.clone()))
}
