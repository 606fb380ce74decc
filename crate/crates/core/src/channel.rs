//! Lambertian line-of-sight gains, ULA responses and the aggregate
//! UAV-to-user gain through the associated RISs.
//!
//! Emission and incidence angles are both measured from the vertical axis,
//! so for any link the two cosines equal `Δz / d`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Position, Scenario, VlcParams};
use crate::phases::PhaseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryAngles {
    pub distance: f64,
    pub emission_cos: f64,
    pub incidence_cos: f64,
    /// `(rx.x - tx.x) / d`, the ULA direction cosine along the x axis.
    pub direction_cosine: f64,
}

pub fn geometry(tx: &Point3, rx: &Point3) -> Result<GeometryAngles> {
    let distance = tx.distance(rx);
    if distance == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    let cos = (tx.z - rx.z) / distance;
    Ok(GeometryAngles {
        distance,
        emission_cos: cos,
        incidence_cos: cos,
        direction_cosine: ((rx.x - tx.x) / distance).clamp(-1.0, 1.0),
    })
}

pub fn lambertian_order(semi_angle_deg: f64) -> Result<f64> {
    if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
        return Err(Error::Domain(format!(
            "half-power semi-angle {semi_angle_deg} deg outside (0, 90)"
        )));
    }
    Ok(-std::f64::consts::LN_2 / semi_angle_deg.to_radians().cos().ln())
}

/// Optical concentrator gain for an incidence angle in radians.
pub fn concentrator_gain(incidence_angle: f64, params: &VlcParams) -> f64 {
    let fov = params.fov_rad();
    if (0.0..=fov).contains(&incidence_angle) {
        params.refractive_index.powi(2) / fov.sin().powi(2)
    } else {
        0.0
    }
}

/// Precomputed constants of the Lambertian link model.
#[derive(Debug, Clone, Copy)]
pub struct Optics {
    pub order: f64,
    /// `(k + 1) A / (2π)`.
    pub prefactor: f64,
    pub concentrator: f64,
    pub fov: f64,
}

impl Optics {
    pub fn new(params: &VlcParams) -> Self {
        let order = params.lambertian_order();
        let fov = params.fov_rad();
        Self {
            order,
            prefactor: (order + 1.0) * params.pd_area / (2.0 * PI),
            concentrator: params.refractive_index.powi(2) / fov.sin().powi(2),
            fov,
        }
    }

    /// `cos^k(φ) g(ϕ) cos(ϕ)`, zero outside the field of view or when the
    /// transmitter is not above the receiver.
    pub fn angle_factor(&self, g: &GeometryAngles) -> f64 {
        if g.incidence_cos <= 0.0 || g.incidence_cos.clamp(-1.0, 1.0).acos() > self.fov {
            return 0.0;
        }
        g.emission_cos.powf(self.order) * self.concentrator * g.incidence_cos
    }

    pub fn gain(&self, g: &GeometryAngles) -> f64 {
        self.prefactor / (g.distance * g.distance) * self.angle_factor(g)
    }
}

pub fn los_gain(tx: &Point3, rx: &Point3, params: &VlcParams) -> Result<f64> {
    Ok(Optics::new(params).gain(&geometry(tx, rx)?))
}

/// ULA response with entry `m` equal to `exp(-i 2π d m ϑ / λ)`.
pub fn array_response(direction_cosine: f64, elements: usize, spacing: f64, wavelength: f64) -> Vec<Complex64> {
    let step = -2.0 * PI * spacing / wavelength * direction_cosine;
    (0..elements)
        .map(|m| Complex64::from_polar(1.0, step * m as f64))
        .collect()
}

/// Per-element channel of one hop: a real path loss times a ULA response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub entries: Vec<Complex64>,
    pub path_loss: f64,
    pub geometry: Option<GeometryAngles>,
}

impl ChannelVector {
    fn from_link(tx: &Point3, rx: &Point3, scenario: &Scenario, optics: &Optics) -> Result<Self> {
        let geo = geometry(tx, rx)?;
        let path_loss = optics.gain(&geo);
        let vlc = &scenario.vlc;
        let entries = array_response(
            geo.direction_cosine,
            scenario.ris_elements,
            vlc.element_spacing,
            vlc.carrier_wavelength,
        )
        .into_iter()
        .map(|a| a * path_loss)
        .collect();
        Ok(Self {
            entries,
            path_loss,
            geometry: Some(geo),
        })
    }

    pub fn direction_cosine(&self) -> f64 {
        self.geometry.map_or(0.0, |g| g.direction_cosine)
    }
}

pub fn ur_channel(q: Position, l: usize, scenario: &Scenario) -> Result<ChannelVector> {
    let optics = Optics::new(&scenario.vlc);
    ChannelVector::from_link(&scenario.uav_point(q), &scenario.ris_point(l), scenario, &optics)
}

pub fn rg_channel(l: usize, j: usize, scenario: &Scenario) -> Result<ChannelVector> {
    let optics = Optics::new(&scenario.vlc);
    ChannelVector::from_link(&scenario.ris_point(l), &scenario.user_point(j), scenario, &optics)
}

/// `(h_RG)^H diag(e^{iθ}) h_UR` for one RIS.
pub fn reflected_term(ur: &ChannelVector, rg: &ChannelVector, theta: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for ((u, r), &t) in ur.entries.iter().zip(&rg.entries).zip(theta) {
        acc += r.conj() * Complex64::from_polar(1.0, t) * u;
    }
    acc
}

/// Aggregate gain of UAV at `q` toward user `j` through the RISs in `ris_set`.
pub fn aggregate_gain(
    q: Position,
    phases: &PhaseMatrix,
    ris_set: &[usize],
    j: usize,
    scenario: &Scenario,
) -> Result<f64> {
    let optics = Optics::new(&scenario.vlc);
    let direct = optics.gain(&geometry(&scenario.uav_point(q), &scenario.user_point(j))?);
    let mut total = Complex64::new(direct, 0.0);
    for &l in ris_set {
        let ur = ChannelVector::from_link(&scenario.uav_point(q), &scenario.ris_point(l), scenario, &optics)?;
        let rg = ChannelVector::from_link(&scenario.ris_point(l), &scenario.user_point(j), scenario, &optics)?;
        total += reflected_term(&ur, &rg, phases.row(l));
    }
    Ok(total.norm())
}

/// Channels of one UAV position toward every user and RIS.
#[derive(Debug, Clone)]
pub struct UavChannels {
    pub position: Position,
    /// Direct LOS gain per user.
    pub direct: Vec<f64>,
    /// U-R channel per RIS.
    pub ur: Vec<ChannelVector>,
}

impl UavChannels {
    pub fn new(q: Position, scenario: &Scenario, optics: &Optics) -> Result<Self> {
        let tx = scenario.uav_point(q);
        let direct = (0..scenario.user_count())
            .map(|j| Ok(optics.gain(&geometry(&tx, &scenario.user_point(j))?)))
            .collect::<Result<_>>()?;
        let ur = (0..scenario.ris_count())
            .map(|l| ChannelVector::from_link(&tx, &scenario.ris_point(l), scenario, optics))
            .collect::<Result<_>>()?;
        Ok(Self {
            position: q,
            direct,
            ur,
        })
    }
}

/// Cached channels for a fixed deployment. R-G channels do not depend on
/// the deployment and are shared.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub uavs: Vec<UavChannels>,
    /// R-G channel, indexed `[l][j]`.
    pub rg: Vec<Vec<ChannelVector>>,
}

impl ChannelSet {
    pub fn new(deployment: &[Position], scenario: &Scenario) -> Result<Self> {
        let optics = Optics::new(&scenario.vlc);
        let uavs = deployment
            .iter()
            .map(|&q| UavChannels::new(q, scenario, &optics))
            .collect::<Result<_>>()?;
        let rg = (0..scenario.ris_count())
            .map(|l| {
                let tx = scenario.ris_point(l);
                (0..scenario.user_count())
                    .map(|j| ChannelVector::from_link(&tx, &scenario.user_point(j), scenario, &optics))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { uavs, rg })
    }

    /// Replaces the channels of UAV `i` after it moves.
    pub fn relocate(&mut self, i: usize, q: Position, scenario: &Scenario) -> Result<()> {
        self.uavs[i] = UavChannels::new(q, scenario, &Optics::new(&scenario.vlc))?;
        Ok(())
    }

    pub fn direct(&self, i: usize, j: usize) -> f64 {
        self.uavs[i].direct[j]
    }

    pub fn ur(&self, i: usize, l: usize) -> &ChannelVector {
        &self.uavs[i].ur[l]
    }

    pub fn rg(&self, l: usize, j: usize) -> &ChannelVector {
        &self.rg[l][j]
    }

    /// `conj(h_RG) ⊙ h_UR`, so that the reflected term is `Σ_m e^{iθ_m} Φ_m`.
    pub fn phi(&self, i: usize, l: usize, j: usize) -> Vec<Complex64> {
        self.ur(i, l)
            .entries
            .iter()
            .zip(&self.rg(l, j).entries)
            .map(|(u, r)| r.conj() * u)
            .collect()
    }

    pub fn reflected(&self, i: usize, l: usize, j: usize, theta: &[f64]) -> Complex64 {
        reflected_term(self.ur(i, l), self.rg(l, j), theta)
    }

    pub fn gain(&self, i: usize, phases: &PhaseMatrix, ris_set: &[usize], j: usize) -> f64 {
        let mut total = Complex64::new(self.direct(i, j), 0.0);
        for &l in ris_set {
            total += self.reflected(i, l, j, phases.row(l));
        }
        total.norm()
    }

    /// Gain when every RIS in `ris_set` is coherently aligned toward `j`.
    pub fn aligned_gain(&self, i: usize, ris_set: &[usize], j: usize) -> f64 {
        self.direct(i, j)
            + ris_set
                .iter()
                .map(|&l| {
                    let ur = self.ur(i, l);
                    ur.entries.len() as f64 * ur.path_loss * self.rg(l, j).path_loss
                })
                .sum::<f64>()
    }
}
