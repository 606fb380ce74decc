//! User and RIS association.
//!
//! Both association problems are scored by the true total power. The
//! [`AssociationEvaluator`] prices a candidate UAV load (its users and RISs)
//! under a [`PhasePolicy`] and caches the result, because the searches keep
//! revisiting the same loads.

mod ris;
mod user;

use std::cell::RefCell;
use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::model::{power_floor, Association, Position, Scenario};
use crate::phases::{align_with, optimize_uav_phases, PhaseMatrix, PhaseOptions};

pub use ris::{
    ris_coefficients, ris_coefficients_with, ris_dual_solve, ris_greedy, RisCoefficients, RisDualOptions, RisDualState,
};
pub use user::{
    optimize_user_association, user_assoc_step, user_beta_update, UserAssocOptions, UserDualState,
};

/// How phases are treated when a candidate association is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhasePolicy {
    /// Keep the incumbent phases.
    Fixed,
    /// Closed-form alignment for single-user UAVs, incumbent phases otherwise.
    Realign,
    /// Alignment for single-user UAVs, relaxation plus randomization for
    /// multi-user UAVs (keeping the incumbent rows if they score better).
    Reoptimize,
}

/// Priced load of one UAV.
#[derive(Debug, Clone)]
pub struct UavEvaluation {
    /// Required power, `∞` if some user has zero gain.
    pub power: f64,
    /// Phase rows for the UAV's RISs.
    pub rows: Vec<(usize, Vec<f64>)>,
}

/// Result of an association block.
#[derive(Debug, Clone)]
pub struct AssociationOutcome {
    pub assoc: Association,
    pub phases: PhaseMatrix,
    pub powers: Vec<f64>,
    pub total: f64,
}

pub struct AssociationEvaluator<'a> {
    scenario: &'a Scenario,
    channels: ChannelSet,
    incumbent: PhaseMatrix,
    policy: PhasePolicy,
    phase_opts: PhaseOptions,
    cache: RefCell<HashMap<(usize, u64, u64), UavEvaluation>>,
}

impl<'a> AssociationEvaluator<'a> {
    pub fn new(
        deployment: &[Position],
        incumbent: &PhaseMatrix,
        scenario: &'a Scenario,
        policy: PhasePolicy,
        phase_opts: PhaseOptions,
    ) -> Result<Self> {
        if scenario.user_count() > 64 || scenario.ris_count() > 64 {
            return Err(Error::Validation("association search supports at most 64 users and 64 RISs".into()));
        }
        Ok(Self {
            scenario,
            channels: ChannelSet::new(deployment, scenario)?,
            incumbent: incumbent.clone(),
            policy,
            phase_opts,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn incumbent(&self) -> &PhaseMatrix {
        &self.incumbent
    }

    /// Gain toward `j` with explicit rows for the RISs in `rows`.
    fn gain_with_rows(&self, i: usize, j: usize, rows: &[(usize, Vec<f64>)]) -> f64 {
        let mut total = Complex64::new(self.channels.direct(i, j), 0.0);
        for (l, row) in rows {
            total += self.channels.reflected(i, *l, j, row);
        }
        total.norm()
    }

    pub fn uav(&self, i: usize, users: &[usize], ris: &[usize]) -> Result<UavEvaluation> {
        let key = (i, mask(users), mask(ris));
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let rows = self.rows_for(i, users, ris)?;
        let power = users
            .iter()
            .map(|&j| {
                let g = self.gain_with_rows(i, j, &rows);
                if g > 0.0 {
                    power_floor(j, self.scenario) / g
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        let eval = UavEvaluation { power, rows };
        self.cache.borrow_mut().insert(key, eval.clone());
        Ok(eval)
    }

    fn rows_for(&self, i: usize, users: &[usize], ris: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
        let keep = || ris.iter().map(|&l| (l, self.incumbent.row(l).to_vec())).collect();
        if ris.is_empty() {
            return Ok(Vec::new());
        }
        Ok(match (self.policy, users) {
            (PhasePolicy::Fixed, _) => keep(),
            (_, [j]) => align_with(&self.channels, i, *j, ris, self.scenario),
            (PhasePolicy::Realign, _) => keep(),
            (PhasePolicy::Reoptimize, _) => {
                let mut opts = self.phase_opts;
                opts.seed = mix(opts.seed, &[i as u64, mask(users), mask(ris)]);
                optimize_uav_phases(&self.channels, i, users, ris, &self.incumbent, self.scenario, &opts)?
                    .unwrap_or_else(keep)
            }
        })
    }

    /// Prices a full or partial association. `ris_to_uav[l] = None` leaves
    /// RIS `l` unused.
    pub fn price(&self, user_to_uav: &[usize], ris_to_uav: &[Option<usize>]) -> Result<Priced> {
        let d = self.scenario.uav_count;
        let mut users = vec![Vec::new(); d];
        let mut ris = vec![Vec::new(); d];
        for (j, &i) in user_to_uav.iter().enumerate() {
            users[i].push(j);
        }
        for (l, owner) in ris_to_uav.iter().enumerate() {
            if let Some(i) = owner {
                ris[*i].push(l);
            }
        }
        let mut phases = self.incumbent.clone();
        let mut powers = Vec::with_capacity(d);
        for i in 0..d {
            let eval = self.uav(i, &users[i], &ris[i])?;
            for (l, row) in eval.rows {
                phases.set_row(l, row);
            }
            powers.push(eval.power);
        }
        Ok(Priced {
            total: powers.iter().sum(),
            powers,
            phases,
        })
    }

    pub fn price_full(&self, assoc: &Association) -> Result<Priced> {
        let ris: Vec<Option<usize>> = assoc.ris_to_uav.iter().map(|&i| Some(i)).collect();
        self.price(&assoc.user_to_uav, &ris)
    }

    pub fn outcome(&self, assoc: Association) -> Result<AssociationOutcome> {
        let priced = self.price_full(&assoc)?;
        Ok(AssociationOutcome {
            assoc,
            phases: priced.phases,
            powers: priced.powers,
            total: priced.total,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Priced {
    pub total: f64,
    pub powers: Vec<f64>,
    pub phases: PhaseMatrix,
}

fn mask(idx: &[usize]) -> u64 {
    idx.iter().fold(0u64, |m, &k| m | (1u64 << k))
}

/// SplitMix64-style mixing for per-candidate seeds.
pub(crate) fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Users whose gain is zero toward every UAV cannot be served.
pub(crate) fn check_coverage(ch: &ChannelSet, phases: &PhaseMatrix, ris_to_uav: &[usize], d: usize, u: usize) -> Result<()> {
    for j in 0..u {
        let covered = (0..d).any(|i| {
            let ris: Vec<usize> = (0..ris_to_uav.len()).filter(|&l| ris_to_uav[l] == i).collect();
            ch.gain(i, phases, &ris, j) > 0.0
        });
        if !covered {
            return Err(Error::NoCoverage { user: j });
        }
    }
    Ok(())
}
