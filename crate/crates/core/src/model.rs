//! Scenario data, power floors and feasibility checks.
//!
//! All lengths are meters, angles are degrees in the public types and
//! radians internally, powers are watts. Illumination demands are raw
//! constraint constants in the same scale as `responsivity * P * h`.

use std::f64::consts::{E, PI};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Point3};
use crate::error::{Error, Result};
use crate::phases::PhaseMatrix;

/// Ground-plane position `(x, y)` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn at_height(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Position {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

/// Optical front-end and noise parameters shared by every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlcParams {
    /// Semi-angle at half power of the emitter, degrees.
    pub semi_angle_half_power: f64,
    /// Photodetector area, m².
    pub pd_area: f64,
    /// Receiver field of view, degrees.
    pub fov: f64,
    /// Refractive index of the optical concentrator.
    pub refractive_index: f64,
    /// Illumination response factor, A/W.
    pub responsivity: f64,
    /// AWGN power, W.
    pub noise_power: f64,
    /// Carrier wavelength, m.
    pub carrier_wavelength: f64,
    /// RIS element spacing, m.
    pub element_spacing: f64,
}

impl VlcParams {
    /// Lambertian emission order derived from the half-power semi-angle.
    pub fn lambertian_order(&self) -> f64 {
        let cos = self.semi_angle_half_power.to_radians().cos();
        -std::f64::consts::LN_2 / cos.ln()
    }

    pub fn fov_rad(&self) -> f64 {
        self.fov.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Validation(msg.to_string()));
        if !(self.semi_angle_half_power > 0.0 && self.semi_angle_half_power < 90.0) {
            return fail("vlc.semi_angle_half_power must lie in (0, 90) degrees");
        }
        if !(self.fov > 0.0 && self.fov <= 90.0) {
            return fail("vlc.fov must lie in (0, 90] degrees");
        }
        for (name, v) in [
            ("vlc.pd_area", self.pd_area),
            ("vlc.refractive_index", self.refractive_index),
            ("vlc.responsivity", self.responsivity),
            ("vlc.noise_power", self.noise_power),
            ("vlc.carrier_wavelength", self.carrier_wavelength),
            ("vlc.element_spacing", self.element_spacing),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// One problem instance: geometry, requirements and physical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub uav_count: usize,
    /// Common UAV altitude H, m.
    pub uav_altitude: f64,
    pub users: Vec<Position>,
    pub ris_list: Vec<Position>,
    /// Common RIS mounting height z_R, m.
    pub ris_height: f64,
    /// Reflecting elements per RIS.
    pub ris_elements: usize,
    /// Service area `[width, height]`, m. Positions lie in `[0, w] x [0, h]`.
    pub area: [f64; 2],
    /// Minimum horizontal distance between two UAVs, m.
    pub min_separation: f64,
    /// Required rate, bit/s/Hz.
    pub rate_requirement: f64,
    /// Per-user illumination demand.
    pub illumination_demands: Vec<f64>,
    pub vlc: VlcParams,
}

impl Scenario {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn ris_count(&self) -> usize {
        self.ris_list.len()
    }

    pub fn uav_point(&self, q: Position) -> Point3 {
        q.at_height(self.uav_altitude)
    }

    pub fn ris_point(&self, l: usize) -> Point3 {
        self.ris_list[l].at_height(self.ris_height)
    }

    pub fn user_point(&self, j: usize) -> Point3 {
        self.users[j].at_height(0.0)
    }

    /// Copy of this scenario with every RIS removed.
    pub fn without_ris(&self) -> Scenario {
        Scenario {
            ris_list: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        self.vlc.validate()?;
        if self.uav_count == 0 {
            return fail("uav_count must be at least 1".into());
        }
        if self.ris_elements == 0 {
            return fail("ris_elements must be at least 1".into());
        }
        let [w, h] = self.area;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return fail("area dimensions must be positive".into());
        }
        if !(self.ris_height > 0.0 && self.ris_height < self.uav_altitude) {
            return fail("require 0 < ris_height < uav_altitude".into());
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return fail("min_separation must be non-negative".into());
        }
        if !(self.rate_requirement >= 0.0 && self.rate_requirement.is_finite()) {
            return fail("rate_requirement must be non-negative".into());
        }
        if self.illumination_demands.len() != self.users.len() {
            return fail(format!(
                "illumination_demands has {} entries for {} users",
                self.illumination_demands.len(),
                self.users.len()
            ));
        }
        if let Some(j) = self
            .illumination_demands
            .iter()
            .position(|&eta| !(eta >= 0.0 && eta.is_finite()))
        {
            return fail(format!("illumination_demands[{j}] must be non-negative"));
        }
        let inside = |p: &Position| (0.0..=w).contains(&p.x) && (0.0..=h).contains(&p.y);
        if let Some(j) = self.users.iter().position(|p| !inside(p)) {
            return fail(format!("users[{j}] lies outside the area"));
        }
        if let Some(l) = self.ris_list.iter().position(|p| !inside(p)) {
            return fail(format!("ris_list[{l}] lies outside the area"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema {
            path: String::new(),
            message: e.to_string(),
        })?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let mut de = serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }
}

/// Loads a scenario file. `.json` files are read as JSON, everything else as TOML.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Scenario::from_json_str(&text),
        _ => Scenario::from_toml_str(&text),
    }
}

/// Knobs for [`random_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub uav_count: usize,
    pub user_count: usize,
    pub ris_count: usize,
    pub ris_elements: usize,
    pub uav_altitude: f64,
    pub ris_height: f64,
    pub area: [f64; 2],
    pub min_separation: f64,
    pub rate_requirement: f64,
    /// Illumination demands are drawn uniformly from `[lo, hi]`.
    pub illumination_range: [f64; 2],
    pub vlc: VlcParams,
}

impl ScenarioConfig {
    /// The reference simulation setup: 3 UAVs at 20 m serving 6 users with
    /// three 5-element RISs over a 100 m x 100 m area.
    pub fn table1() -> Self {
        Self {
            uav_count: 3,
            user_count: 6,
            ris_count: 3,
            ris_elements: 5,
            uav_altitude: 20.0,
            ris_height: 5.0,
            area: [100.0, 100.0],
            min_separation: 10.0,
            rate_requirement: 25.0,
            illumination_range: [1e-5, 9e-5],
            vlc: VlcParams {
                semi_angle_half_power: 80.0,
                pd_area: 1e-4,
                fov: 90.0,
                refractive_index: 4.5,
                responsivity: 0.9,
                noise_power: 1e-12,
                carrier_wavelength: 550e-9,
                element_spacing: 275e-9,
            },
        }
    }
}

/// Draws a scenario from `config`. Users are drawn first, then their
/// demands, then the RISs, so that changing only the RIS count keeps the
/// users and the leading RIS positions fixed for a given seed.
pub fn random_scenario(seed: u64, config: &ScenarioConfig) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [w, h] = config.area;
    let [lo, hi] = config.illumination_range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::Validation("illumination_range must satisfy 0 <= lo <= hi".into()));
    }
    let draw_point = |rng: &mut ChaCha8Rng| Position::new(rng.random::<f64>() * w, rng.random::<f64>() * h);
    let users: Vec<Position> = (0..config.user_count).map(|_| draw_point(&mut rng)).collect();
    let illumination_demands = (0..config.user_count)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    let ris_list = (0..config.ris_count).map(|_| draw_point(&mut rng)).collect();
    let scenario = Scenario {
        uav_count: config.uav_count,
        uav_altitude: config.uav_altitude,
        users,
        ris_list,
        ris_height: config.ris_height,
        ris_elements: config.ris_elements,
        area: config.area,
        min_separation: config.min_separation,
        rate_requirement: config.rate_requirement,
        illumination_demands,
        vlc: config.vlc.clone(),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// User and RIS association, stored as the serving UAV index per column.
///
/// Storing the index rather than a binary matrix makes the one-UAV-per-column
/// constraint hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Association {
    pub user_to_uav: Vec<usize>,
    pub ris_to_uav: Vec<usize>,
}

impl Association {
    pub fn new(user_to_uav: Vec<usize>, ris_to_uav: Vec<usize>) -> Self {
        Self {
            user_to_uav,
            ris_to_uav,
        }
    }

    pub fn users_of(&self, uav: usize) -> Vec<usize> {
        indices_of(&self.user_to_uav, uav)
    }

    pub fn ris_of(&self, uav: usize) -> Vec<usize> {
        indices_of(&self.ris_to_uav, uav)
    }

    /// Binary D x U matrix `u_ij`.
    pub fn user_matrix(&self, uav_count: usize) -> Vec<Vec<u8>> {
        binary_matrix(&self.user_to_uav, uav_count)
    }

    /// Binary D x L matrix `m_il`.
    pub fn ris_matrix(&self, uav_count: usize) -> Vec<Vec<u8>> {
        binary_matrix(&self.ris_to_uav, uav_count)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.user_to_uav.len() != scenario.user_count() || self.ris_to_uav.len() != scenario.ris_count() {
            return Err(Error::Validation("association shape does not match scenario".into()));
        }
        let d = scenario.uav_count;
        if self.user_to_uav.iter().chain(&self.ris_to_uav).any(|&i| i >= d) {
            return Err(Error::Validation("association refers to a nonexistent UAV".into()));
        }
        Ok(())
    }
}

fn indices_of(owner: &[usize], uav: usize) -> Vec<usize> {
    owner
        .iter()
        .enumerate()
        .filter_map(|(k, &i)| (i == uav).then_some(k))
        .collect()
}

fn binary_matrix(owner: &[usize], rows: usize) -> Vec<Vec<u8>> {
    let mut m = vec![vec![0u8; owner.len()]; rows];
    for (k, &i) in owner.iter().enumerate() {
        m[i][k] = 1;
    }
    m
}

/// The four decision blocks plus per-UAV powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub deployment: Vec<Position>,
    pub phases: PhaseMatrix,
    pub assoc: Association,
    pub powers: Vec<f64>,
}

impl Solution {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Recomputes `powers` from the other three blocks.
    pub fn refresh_powers(&mut self, scenario: &Scenario) -> Result<()> {
        self.powers = uav_powers(&self.deployment, &self.phases, &self.assoc, scenario)?;
        Ok(())
    }
}

/// Per-user power floor `A_j`: `P_i >= A_j / h_j(q_i)` enforces both the
/// rate and the illumination requirement.
pub fn power_floor(j: usize, scenario: &Scenario) -> f64 {
    let xi = scenario.vlc.responsivity;
    let illumination = scenario.illumination_demands[j] / xi;
    illumination.max(rate_floor(scenario))
}

fn rate_floor(scenario: &Scenario) -> f64 {
    let vlc = &scenario.vlc;
    let snr_term = (2.0 * PI / E) * ((2.0 * scenario.rate_requirement).exp2() - 1.0);
    vlc.noise_power * snr_term.sqrt() / vlc.responsivity
}

/// Minimum transmit power of UAV `i`: the largest `A_j / h_j(q_i)` over its
/// users, or 0 W for an idle UAV.
pub fn required_power(
    i: usize,
    deployment: &[Position],
    phases: &PhaseMatrix,
    assoc: &Association,
    scenario: &Scenario,
) -> Result<f64> {
    let ris_set = assoc.ris_of(i);
    let mut power: f64 = 0.0;
    for j in assoc.users_of(i) {
        let gain = channel::aggregate_gain(deployment[i], phases, &ris_set, j, scenario)?;
        if gain <= 0.0 {
            return Err(Error::InfeasibleChannel { uav: i, user: j });
        }
        power = power.max(power_floor(j, scenario) / gain);
    }
    Ok(power)
}

pub fn uav_powers(
    deployment: &[Position],
    phases: &PhaseMatrix,
    assoc: &Association,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    (0..scenario.uav_count)
        .map(|i| required_power(i, deployment, phases, assoc, scenario))
        .collect()
}

pub fn total_power(
    deployment: &[Position],
    phases: &PhaseMatrix,
    assoc: &Association,
    scenario: &Scenario,
) -> Result<f64> {
    Ok(uav_powers(deployment, phases, assoc, scenario)?.iter().sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkSlack {
    pub uav: usize,
    pub user: usize,
    /// Achieved rate minus the requirement, bit/s/Hz.
    pub rate: f64,
    /// `xi * P * h - eta`.
    pub illumination: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationSlack {
    pub uav_a: usize,
    pub uav_b: usize,
    /// Horizontal distance minus `min_separation`, m.
    pub slack: f64,
}

/// Per-constraint slacks of a solution. Infeasibility is reported, not raised.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub links: Vec<LinkSlack>,
    pub separations: Vec<SeparationSlack>,
    pub user_column_sums: Vec<usize>,
    pub ris_column_sums: Vec<usize>,
    /// Smallest slack after normalization: rate in bits, illumination
    /// relative to the demand, separation relative to `min_separation`.
    pub worst_normalized_slack: f64,
    pub feasible: bool,
}

pub fn check_feasibility(solution: &Solution, scenario: &Scenario, tol: f64) -> Result<FeasibilityReport> {
    let vlc = &scenario.vlc;
    let assoc = &solution.assoc;
    let mut links = Vec::new();
    let mut worst = f64::INFINITY;
    for (j, &i) in assoc.user_to_uav.iter().enumerate() {
        let ris_set = assoc.ris_of(i);
        let gain = channel::aggregate_gain(solution.deployment[i], &solution.phases, &ris_set, j, scenario)?;
        let p = solution.powers[i];
        let amplitude = vlc.responsivity * p * gain;
        let snr = (E / (2.0 * PI)) * (amplitude / vlc.noise_power).powi(2);
        let rate = 0.5 * snr.ln_1p() / std::f64::consts::LN_2 - scenario.rate_requirement;
        let eta = scenario.illumination_demands[j];
        let illumination = amplitude - eta;
        let illum_norm = if eta > 0.0 { illumination / eta } else { illumination.max(0.0) };
        worst = worst.min(rate).min(illum_norm);
        links.push(LinkSlack {
            uav: i,
            user: j,
            rate,
            illumination,
        });
    }
    let mut separations = Vec::new();
    for a in 0..scenario.uav_count {
        for b in a + 1..scenario.uav_count {
            let dist = solution.deployment[a].distance(solution.deployment[b]);
            let slack = dist - scenario.min_separation;
            worst = worst.min(slack / scenario.min_separation.max(1.0));
            separations.push(SeparationSlack {
                uav_a: a,
                uav_b: b,
                slack,
            });
        }
    }
    let column_sums = |owner: &[usize], n: usize| {
        let mut sums = vec![0usize; n];
        for (k, &i) in owner.iter().enumerate() {
            if i < scenario.uav_count {
                sums[k] += 1;
            }
        }
        sums
    };
    let user_column_sums = column_sums(&assoc.user_to_uav, scenario.user_count());
    let ris_column_sums = column_sums(&assoc.ris_to_uav, scenario.ris_count());
    let sums_ok = user_column_sums.iter().chain(&ris_column_sums).all(|&s| s == 1);
    let powers_ok = solution.powers.iter().all(|&p| p >= 0.0);
    Ok(FeasibilityReport {
        links,
        separations,
        user_column_sums,
        ris_column_sums,
        worst_normalized_slack: worst,
        feasible: sums_ok && powers_ok && worst >= -tol,
    })
}
