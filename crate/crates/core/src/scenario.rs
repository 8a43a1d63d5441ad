//! Physical units, deployment geometry and large-scale fading.
//!
//! Everything downstream of this module works in linear SI units (watts,
//! meters). Decibel quantities only appear here and in the config layer.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Default per-UE transmit power, 200 mW.
pub const DEFAULT_UE_POWER_W: f64 = 0.2;
pub const DEFAULT_PATHLOSS_OFFSET_DB: f64 = -34.53;
pub const DEFAULT_PATHLOSS_SLOPE_DB: f64 = 38.0;
pub const DEFAULT_NOISE_DENSITY_DBW_PER_HZ: f64 = -204.0;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 5.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 100e6;

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
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Euclidean 3D distance in meters.
pub fn node_distance(a: Point3, b: Point3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Thermal noise power in watts from a density (dBW/Hz), a bandwidth and a
/// receiver noise figure.
pub fn noise_variance(noise_density_dbw_per_hz: f64, bandwidth_hz: f64, noise_figure_db: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(domain(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    Ok(db_to_linear(
        noise_density_dbw_per_hz + linear_to_db(bandwidth_hz) + noise_figure_db,
    ))
}

/// Scalar physical parameters of one uplink operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub num_bs_antennas: usize,
    pub num_ues: usize,
    /// Per-UE transmit power `p`, watts.
    pub ue_power: f64,
    /// Repeater input noise variance, watts.
    pub repeater_noise_var: f64,
    /// BS per-antenna noise variance, watts.
    pub bs_noise_var: f64,
    /// Repeater amplitude gain; 0 switches the repeater off.
    pub amp_gain: f64,
    /// Third-order PA coefficient in `r = u + rho |u|^2 u`, 1/W.
    pub compression: f64,
}

impl SystemParams {
    /// Parameters of the reference deployment: 200 mW UEs, -89 dBm noise at
    /// both the repeater and the BS, ideal repeater switched off.
    pub fn reference(num_bs_antennas: usize, num_ues: usize) -> Self {
        let noise = noise_variance(
            DEFAULT_NOISE_DENSITY_DBW_PER_HZ,
            DEFAULT_BANDWIDTH_HZ,
            DEFAULT_NOISE_FIGURE_DB,
        )
        .expect("positive bandwidth");
        Self {
            num_bs_antennas,
            num_ues,
            ue_power: DEFAULT_UE_POWER_W,
            repeater_noise_var: noise,
            bs_noise_var: noise,
            amp_gain: 0.0,
            compression: 0.0,
        }
    }

    pub fn with_operating_point(mut self, alpha: f64, rho: f64) -> Self {
        self.amp_gain = alpha;
        self.compression = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bs_antennas == 0 || self.num_ues == 0 {
            return Err(domain("M and K must be at least 1"));
        }
        for (name, v) in [
            ("ue_power", self.ue_power),
            ("repeater_noise_var", self.repeater_noise_var),
            ("bs_noise_var", self.bs_noise_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.amp_gain >= 0.0 && self.amp_gain.is_finite()) {
            return Err(domain(format!("amp_gain must be >= 0, got {}", self.amp_gain)));
        }
        if !(self.compression <= 0.0 && self.compression.is_finite()) {
            return Err(domain(format!("compression must be <= 0, got {}", self.compression)));
        }
        Ok(())
    }
}

/// Axis-aligned UE drop rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Region {
    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_position: Point3,
    pub repeater_position: Point3,
    pub ue_region: Region,
    pub ue_height: f64,
    pub pathloss_offset_db: f64,
    pub pathloss_slope_db_per_decade: f64,
}

impl Scenario {
    /// Repeater 200 m from the BS, UEs in [200,300]x[-50,50].
    pub fn far_repeater() -> Self {
        Self {
            bs_position: Point3::new(0.0, 0.0, 25.0),
            repeater_position: Point3::new(200.0, 0.0, 15.0),
            ue_region: Region { x: [200.0, 300.0], y: [-50.0, 50.0] },
            ue_height: 1.5,
            pathloss_offset_db: DEFAULT_PATHLOSS_OFFSET_DB,
            pathloss_slope_db_per_decade: DEFAULT_PATHLOSS_SLOPE_DB,
        }
    }

    /// Repeater 100 m from the BS, UEs in [100,200]x[-50,50].
    pub fn near_repeater() -> Self {
        Self {
            repeater_position: Point3::new(100.0, 0.0, 15.0),
            ue_region: Region { x: [100.0, 200.0], y: [-50.0, 50.0] },
            ..Self::far_repeater()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.ue_region;
        if !(r.x[1] > r.x[0] && r.y[1] > r.y[0]) || !r.area().is_finite() {
            return Err(domain("ue_region must have strictly positive area"));
        }
        let heights = [self.bs_position.z, self.repeater_position.z, self.ue_height];
        if heights.iter().any(|h| !(*h >= 0.0)) {
            return Err(domain("all heights must be >= 0"));
        }
        if !self.pathloss_offset_db.is_finite() || !self.pathloss_slope_db_per_decade.is_finite() {
            return Err(domain("pathloss coefficients must be finite"));
        }
        Ok(())
    }

    /// Large-scale gain in dB at distance `d` meters.
    pub fn pathloss_db(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(domain(format!("pathloss distance must be positive, got {d}")));
        }
        Ok(self.pathloss_offset_db - self.pathloss_slope_db_per_decade * d.log10())
    }

    /// Linear power gain between two nodes.
    pub fn link_gain(&self, a: Point3, b: Point3) -> Result<f64> {
        self.pathloss_db(node_distance(a, b)).map(db_to_linear)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::far_repeater()
    }
}
