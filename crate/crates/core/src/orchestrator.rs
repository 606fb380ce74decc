//! The alternating outer loop: phases, deployment, user association and RIS
//! association in turn, each block kept only if it does not raise the total
//! power.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{
    mix, optimize_user_association, ris_dual_solve, ris_greedy, AssociationEvaluator, PhasePolicy, RisDualOptions,
    UserAssocOptions,
};
use crate::channel::ChannelSet;
use crate::deployment::{initial_deployment, optimize_deployment, ScaOptions};
use crate::error::{Error, Result};
use crate::model::{uav_powers, Association, Scenario, Solution};
use crate::phases::{optimize_uav_phases, PhaseMatrix, PhaseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// All four blocks, RIS association by the dual method.
    Scheme1Dual,
    /// All four blocks, RIS association by the greedy method.
    Scheme2Greedy,
    /// Every RIS removed; phases and RIS association are moot.
    NoRis,
    /// The random starting point, no optimization.
    InitialOnly,
    PhaseOnly,
    DeploymentOnly,
    UserAssocOnly,
    RisAssocOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Scheme1Dual,
        Scheme::Scheme2Greedy,
        Scheme::NoRis,
        Scheme::InitialOnly,
        Scheme::PhaseOnly,
        Scheme::DeploymentOnly,
        Scheme::UserAssocOnly,
        Scheme::RisAssocOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Scheme1Dual => "scheme1-dual",
            Scheme::Scheme2Greedy => "scheme2-greedy",
            Scheme::NoRis => "no-ris",
            Scheme::InitialOnly => "initial-only",
            Scheme::PhaseOnly => "phase-only",
            Scheme::DeploymentOnly => "deployment-only",
            Scheme::UserAssocOnly => "user-assoc-only",
            Scheme::RisAssocOnly => "ris-assoc-only",
        }
    }

    fn blocks(self) -> &'static [Block] {
        use Block::*;
        match self {
            Scheme::Scheme1Dual | Scheme::Scheme2Greedy | Scheme::NoRis => {
                &[Phases, Deployment, UserAssociation, RisAssociation, Regroup]
            }
            Scheme::InitialOnly => &[],
            Scheme::PhaseOnly => &[Phases],
            Scheme::DeploymentOnly => &[Deployment],
            Scheme::UserAssocOnly => &[UserAssociation],
            Scheme::RisAssocOnly => &[RisAssociation],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts the kebab-case names plus the short forms `scheme1`/`scheme2`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheme1" => return Ok(Scheme::Scheme1Dual),
            "scheme2" => return Ok(Scheme::Scheme2Greedy),
            _ => {}
        }
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Phases,
    Deployment,
    UserAssociation,
    RisAssociation,
    /// Compound move: every user to its strongest UAV, then redeploy,
    /// repeated a few times. Escapes states where no single block helps.
    Regroup,
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub scheme: Scheme,
    /// Relative change of the total power over one pass that counts as converged.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub seed: u64,
    /// Phase treatment while association candidates are priced.
    pub policy: PhasePolicy,
    pub phases: PhaseOptions,
    pub sca: ScaOptions,
    pub user: UserAssocOptions,
    pub ris: RisDualOptions,
}

impl RunConfig {
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        Self {
            scheme,
            outer_tol: 1e-4,
            max_outer: 30,
            seed,
            policy: PhasePolicy::Reoptimize,
            phases: PhaseOptions::default(),
            sca: ScaOptions::default(),
            user: UserAssocOptions::default(),
            ris: RisDualOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || self.max_outer == 0 {
            return Err(Error::Validation("outer_tol must be > 0 and max_outer >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockRecord {
    pub block: Block,
    /// Total power after the block (the incumbent's if it was rejected).
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub scheme: Scheme,
    pub seed: u64,
    /// Total power at the start and after every outer pass.
    pub objectives: Vec<f64>,
    pub blocks: Vec<Vec<BlockRecord>>,
    /// Wall-clock seconds per outer pass. Left out of the JSON form so that
    /// repeated runs serialize identically.
    #[serde(skip)]
    pub pass_seconds: Vec<f64>,
    pub converged: bool,
    pub solution: Solution,
}

impl RunTrace {
    pub fn final_power(&self) -> f64 {
        self.solution.total_power()
    }

    /// Number of objective entries, the initial one included.
    pub fn outer_iters(&self) -> usize {
        self.objectives.len()
    }

    pub fn mean_pass_seconds(&self) -> f64 {
        if self.pass_seconds.is_empty() {
            0.0
        } else {
            self.pass_seconds.iter().sum::<f64>() / self.pass_seconds.len() as f64
        }
    }
}

/// A failed run together with the last accepted solution, if any.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub last: Option<Solution>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, last: None }
    }
}

const REDRAWS: usize = 10;

/// Zero phases, uniform random associations (users drawn before RISs) and
/// centroid deployment. Redraws when some user cannot be served.
pub fn initialize(scenario: &Scenario, seed: u64) -> Result<Solution> {
    scenario.validate()?;
    let d = scenario.uav_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = Error::NoCoverage { user: 0 };
    for _ in 0..REDRAWS {
        let users = (0..scenario.user_count()).map(|_| rng.random_range(0..d)).collect();
        let ris = (0..scenario.ris_count()).map(|_| rng.random_range(0..d)).collect();
        let assoc = Association::new(users, ris);
        let deployment = initial_deployment(&assoc, scenario);
        let phases = PhaseMatrix::zeros(scenario.ris_count(), scenario.ris_elements);
        match uav_powers(&deployment, &phases, &assoc, scenario) {
            Ok(powers) => {
                return Ok(Solution {
                    deployment,
                    phases,
                    assoc,
                    powers,
                })
            }
            Err(Error::InfeasibleChannel { user, .. }) => last = Error::NoCoverage { user },
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

pub fn run(scenario: &Scenario, config: &RunConfig) -> std::result::Result<RunTrace, RunFailure> {
    config.validate()?;
    let reduced;
    let scenario = if config.scheme == Scheme::NoRis {
        reduced = scenario.without_ris();
        &reduced
    } else {
        scenario
    };
    let mut sol = initialize(scenario, config.seed)?;
    let mut trace = RunTrace {
        scheme: config.scheme,
        seed: config.seed,
        objectives: vec![sol.total_power()],
        blocks: Vec::new(),
        pass_seconds: Vec::new(),
        converged: config.scheme.blocks().is_empty(),
        solution: sol.clone(),
    };
    if trace.converged {
        return Ok(trace);
    }
    for pass in 0..config.max_outer {
        let start = Instant::now();
        let before = sol.total_power();
        let mut records = Vec::new();
        for &block in config.scheme.blocks() {
            let candidate = match run_block(block, &sol, scenario, config, pass) {
                Ok(c) => c,
                Err(error) => {
                    return Err(RunFailure {
                        error,
                        last: Some(sol),
                    })
                }
            };
            let accepted = candidate.total_power() <= sol.total_power();
            if accepted {
                sol = candidate;
            }
            records.push(BlockRecord {
                block,
                objective: sol.total_power(),
                accepted,
            });
        }
        trace.blocks.push(records);
        trace.pass_seconds.push(start.elapsed().as_secs_f64());
        let after = sol.total_power();
        trace.objectives.push(after);
        if (before - after) <= config.outer_tol * before.abs() {
            trace.converged = true;
            break;
        }
    }
    trace.solution = sol;
    Ok(trace)
}

fn run_block(block: Block, sol: &Solution, scenario: &Scenario, config: &RunConfig, pass: usize) -> Result<Solution> {
    let mut phase_opts = config.phases;
    phase_opts.seed = mix(config.seed, &[pass as u64, block as u64]);
    let mut next = sol.clone();
    match block {
        Block::Phases => next.phases = phase_step(sol, scenario, &phase_opts)?,
        Block::Deployment => {
            next.deployment = optimize_deployment(&sol.deployment, &sol.assoc, &sol.phases, scenario, &config.sca)?.0;
        }
        Block::UserAssociation | Block::RisAssociation => {
            if block == Block::RisAssociation && scenario.ris_count() == 0 {
                return Ok(next);
            }
            let eval = AssociationEvaluator::new(&sol.deployment, &sol.phases, scenario, config.policy, phase_opts)?;
            let out = match (block, config.scheme) {
                (Block::UserAssociation, _) => optimize_user_association(&eval, &sol.assoc, &config.user)?,
                (_, Scheme::Scheme2Greedy) => ris_greedy(&eval, &sol.assoc.user_to_uav)?,
                _ => ris_dual_solve(&eval, &sol.assoc, &config.ris)?,
            };
            next.assoc = out.assoc;
            next.phases = out.phases;
        }
        Block::Regroup => {
            // Any failure here only means the move is not taken.
            return Ok(regroup(sol, scenario, config, &phase_opts).unwrap_or_else(|_| sol.clone()));
        }
    }
    next.refresh_powers(scenario)?;
    Ok(next)
}

fn phase_step(sol: &Solution, scenario: &Scenario, opts: &PhaseOptions) -> Result<PhaseMatrix> {
    let ch = ChannelSet::new(&sol.deployment, scenario)?;
    let mut phases = sol.phases.clone();
    for i in 0..scenario.uav_count {
        let mut o = *opts;
        o.seed = mix(opts.seed, &[i as u64]);
        let users = sol.assoc.users_of(i);
        let ris = sol.assoc.ris_of(i);
        if let Some(rows) = optimize_uav_phases(&ch, i, &users, &ris, &sol.phases, scenario, &o)? {
            for (l, row) in rows {
                phases.set_row(l, row);
            }
        }
    }
    Ok(phases)
}

const REGROUP_ROUNDS: usize = 5;

fn regroup(sol: &Solution, scenario: &Scenario, config: &RunConfig, phase_opts: &PhaseOptions) -> Result<Solution> {
    let mut cand = sol.clone();
    for _ in 0..REGROUP_ROUNDS {
        let ch = ChannelSet::new(&cand.deployment, scenario)?;
        let sets: Vec<Vec<usize>> = (0..scenario.uav_count).map(|i| cand.assoc.ris_of(i)).collect();
        let users = (0..scenario.user_count())
            .map(|j| {
                let mut best = (0, 0.0);
                for (i, set) in sets.iter().enumerate() {
                    let g = ch.gain(i, &cand.phases, set, j);
                    if g > best.1 {
                        best = (i, g);
                    }
                }
                if best.1 > 0.0 {
                    Ok(best.0)
                } else {
                    Err(Error::NoCoverage { user: j })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if users == cand.assoc.user_to_uav {
            break;
        }
        cand.assoc.user_to_uav = users;
        cand.deployment = optimize_deployment(&cand.deployment, &cand.assoc, &cand.phases, scenario, &config.sca)?.0;
    }
    cand.phases = phase_step(&cand, scenario, phase_opts)?;
    cand.refresh_powers(scenario)?;
    Ok(cand)
}
