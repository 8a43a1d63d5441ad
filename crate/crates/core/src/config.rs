//! Run configuration: a sectioned TOML file whose key names carry their
//! units. Unknown keys are rejected.
//!
//! ```toml
//! seed = 1
//!
//! [scenario]
//! repeater_position_m = [200.0, 0.0, 15.0]
//! ue_x_range_m = [200.0, 300.0]
//!
//! [system]
//! num_bs_antennas = 64
//! num_ues = 4
//! ue_power_mw = 200.0
//!
//! [sweep]
//! rho = [0.0, -0.1, -1.0]
//! realizations = 100
//! ```
//!
//! Every omitted key falls back to the reference deployment (BS at
//! (0,0,25) m, repeater 200 m away, -204 dBW/Hz over 100 MHz with a 5 dB
//! noise figure).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::combining::CombinerRegistry;
use crate::error::{Error, Result};
use crate::scenario::{self, dbm_to_watts, noise_variance, Point3, Region, Scenario, SystemParams};
use crate::sweep::{alpha_grid_with_zero, log_grid, SweepSpec};

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub bs_position_m: [f64; 3],
    pub repeater_position_m: [f64; 3],
    pub ue_x_range_m: [f64; 2],
    pub ue_y_range_m: [f64; 2],
    pub ue_height_m: f64,
    pub pathloss_offset_db: f64,
    pub pathloss_slope_db_per_decade: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let s = Scenario::far_repeater();
        Self {
            bs_position_m: [s.bs_position.x, s.bs_position.y, s.bs_position.z],
            repeater_position_m: [s.repeater_position.x, s.repeater_position.y, s.repeater_position.z],
            ue_x_range_m: s.ue_region.x,
            ue_y_range_m: s.ue_region.y,
            ue_height_m: s.ue_height,
            pathloss_offset_db: s.pathloss_offset_db,
            pathloss_slope_db_per_decade: s.pathloss_slope_db_per_decade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub num_bs_antennas: usize,
    pub num_ues: usize,
    /// Per-UE power; give at most one of `ue_power_mw` / `ue_power_dbm`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_power_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_power_dbm: Option<f64>,
    pub bandwidth_hz: f64,
    pub noise_density_dbw_per_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_bs_antennas: 64,
            num_ues: 4,
            ue_power_mw: None,
            ue_power_dbm: None,
            bandwidth_hz: scenario::DEFAULT_BANDWIDTH_HZ,
            noise_density_dbw_per_hz: scenario::DEFAULT_NOISE_DENSITY_DBW_PER_HZ,
            noise_figure_db: scenario::DEFAULT_NOISE_FIGURE_DB,
        }
    }
}

/// Default compression grid, 1/W.
pub const DEFAULT_RHO_GRID: [f64; 4] = [0.0, -0.1, -1.0, -10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Explicit alpha grid; when set, the `alpha_log_*` keys are ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    pub alpha_include_zero: bool,
    pub alpha_log_min: f64,
    pub alpha_log_max: f64,
    pub alpha_log_points: usize,
    pub rho: Vec<f64>,
    pub realizations: u64,
    pub flavors: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            alpha_include_zero: true,
            alpha_log_min: 1.0,
            alpha_log_max: 1e5,
            alpha_log_points: 25,
            rho: DEFAULT_RHO_GRID.to_vec(),
            realizations: 100,
            flavors: vec!["DA".into(), "DuA".into()],
        }
    }
}

/// Oracle cross-check settings for the `validate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// The check runs on the first `antennas` BS antennas of the realization.
    pub antennas: usize,
    pub realization: u64,
    pub samples_gain: u64,
    pub samples_cov: u64,
    /// Operating points checked; default is a reduced version of the sweep grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            antennas: 4,
            realization: 0,
            samples_gain: 1_000_000,
            samples_cov: 10_000_000,
            alpha: None,
            rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem for `<stem>.csv` / `<stem>.json`.
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stem: "sweep".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg(e.message().to_string() + &span_hint(text, e.span())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => cfg(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Validates every key and the derived physical parameters.
    pub fn check(&self) -> Result<()> {
        let s = &self.system;
        if s.num_bs_antennas == 0 {
            return Err(cfg("system.num_bs_antennas must be >= 1"));
        }
        if s.num_ues == 0 {
            return Err(cfg("system.num_ues must be >= 1"));
        }
        if s.ue_power_mw.is_some() && s.ue_power_dbm.is_some() {
            return Err(cfg("system.ue_power_mw and system.ue_power_dbm are mutually exclusive"));
        }
        if let Some(mw) = s.ue_power_mw {
            if !(mw > 0.0 && mw.is_finite()) {
                return Err(cfg(format!("system.ue_power_mw must be positive, got {mw}")));
            }
        }
        if let Some(dbm) = s.ue_power_dbm {
            if !dbm.is_finite() {
                return Err(cfg("system.ue_power_dbm must be finite"));
            }
        }
        if !(s.bandwidth_hz > 0.0 && s.bandwidth_hz.is_finite()) {
            return Err(cfg(format!("system.bandwidth_hz must be positive, got {}", s.bandwidth_hz)));
        }
        if !s.noise_density_dbw_per_hz.is_finite() || !s.noise_figure_db.is_finite() {
            return Err(cfg("system.noise_density_dbw_per_hz and system.noise_figure_db must be finite"));
        }

        let sc = &self.scenario;
        if !(sc.ue_x_range_m[1] > sc.ue_x_range_m[0]) {
            return Err(cfg("scenario.ue_x_range_m must be an increasing [min, max] pair"));
        }
        if !(sc.ue_y_range_m[1] > sc.ue_y_range_m[0]) {
            return Err(cfg("scenario.ue_y_range_m must be an increasing [min, max] pair"));
        }
        if !(sc.ue_height_m >= 0.0) {
            return Err(cfg("scenario.ue_height_m must be >= 0"));
        }
        if !(sc.bs_position_m[2] >= 0.0) {
            return Err(cfg("scenario.bs_position_m height must be >= 0"));
        }
        if !(sc.repeater_position_m[2] >= 0.0) {
            return Err(cfg("scenario.repeater_position_m height must be >= 0"));
        }
        self.scenario().validate().map_err(|e| cfg(format!("scenario: {e}")))?;

        let sw = &self.sweep;
        if let Some(a) = &sw.alpha {
            if a.is_empty() {
                return Err(cfg("sweep.alpha must be non-empty"));
            }
            if let Some(v) = a.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(cfg(format!("sweep.alpha values must be finite and >= 0, got {v}")));
            }
        } else {
            if !(sw.alpha_log_min > 0.0 && sw.alpha_log_max >= sw.alpha_log_min && sw.alpha_log_max.is_finite()) {
                return Err(cfg("sweep.alpha_log_min / sweep.alpha_log_max must satisfy 0 < min <= max"));
            }
            if sw.alpha_log_points == 0 && !sw.alpha_include_zero {
                return Err(cfg("sweep.alpha_log_points must be >= 1"));
            }
        }
        if sw.rho.is_empty() {
            return Err(cfg("sweep.rho must be non-empty"));
        }
        if let Some(v) = sw.rho.iter().find(|v| !(**v <= 0.0 && v.is_finite())) {
            return Err(cfg(format!("sweep.rho values must be finite and <= 0, got {v}")));
        }
        if sw.realizations == 0 {
            return Err(cfg("sweep.realizations must be >= 1"));
        }
        if sw.flavors.is_empty() {
            return Err(cfg("sweep.flavors must be non-empty"));
        }
        CombinerRegistry::with_defaults().resolve(&sw.flavors)?;

        let v = &self.validate;
        if v.antennas == 0 {
            return Err(cfg("validate.antennas must be >= 1"));
        }
        if v.samples_gain == 0 || v.samples_cov == 0 {
            return Err(cfg("validate.samples_gain and validate.samples_cov must be >= 1"));
        }
        if let Some(a) = &v.alpha {
            if a.is_empty() || a.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(cfg("validate.alpha must be a non-empty list of values >= 0"));
            }
        }
        if let Some(r) = &v.rho {
            if r.is_empty() || r.iter().any(|x| !(*x <= 0.0 && x.is_finite())) {
                return Err(cfg("validate.rho must be a non-empty list of values <= 0"));
            }
        }
        if self.output.stem.is_empty() {
            return Err(cfg("output.stem must be non-empty"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        let sc = &self.scenario;
        Scenario {
            bs_position: Point3::from(sc.bs_position_m),
            repeater_position: Point3::from(sc.repeater_position_m),
            ue_region: Region { x: sc.ue_x_range_m, y: sc.ue_y_range_m },
            ue_height: sc.ue_height_m,
            pathloss_offset_db: sc.pathloss_offset_db,
            pathloss_slope_db_per_decade: sc.pathloss_slope_db_per_decade,
        }
    }

    pub fn ue_power_watts(&self) -> f64 {
        match (self.system.ue_power_mw, self.system.ue_power_dbm) {
            (Some(mw), _) => mw * 1e-3,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => scenario::DEFAULT_UE_POWER_W,
        }
    }

    /// Physical parameters with the repeater switched off.
    pub fn system_params(&self) -> Result<SystemParams> {
        let s = &self.system;
        let noise = noise_variance(s.noise_density_dbw_per_hz, s.bandwidth_hz, s.noise_figure_db)?;
        let p = SystemParams {
            num_bs_antennas: s.num_bs_antennas,
            num_ues: s.num_ues,
            ue_power: self.ue_power_watts(),
            repeater_noise_var: noise,
            bs_noise_var: noise,
            amp_gain: 0.0,
            compression: 0.0,
        };
        p.validate().map_err(|e| cfg(format!("system: {e}")))?;
        Ok(p)
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        let sw = &self.sweep;
        if let Some(a) = &sw.alpha {
            return a.clone();
        }
        if sw.alpha_include_zero {
            alpha_grid_with_zero(sw.alpha_log_min, sw.alpha_log_max, sw.alpha_log_points + 1)
        } else {
            log_grid(sw.alpha_log_min, sw.alpha_log_max, sw.alpha_log_points)
        }
    }

    pub fn sweep_spec(&self, registry: &CombinerRegistry) -> Result<SweepSpec> {
        Ok(SweepSpec {
            alpha_grid: self.alpha_grid(),
            rho_grid: self.sweep.rho.clone(),
            num_realizations: self.sweep.realizations,
            scenario: self.scenario(),
            base_params: self.system_params()?,
            flavors: registry.resolve(&self.sweep.flavors)?,
            master_seed: self.seed,
        })
    }

    /// Operating points for `validate`: explicit lists, or the smallest
    /// nonzero, middle and largest alpha of the sweep grid crossed with
    /// `{0, most negative rho}`.
    pub fn validation_points(&self) -> (Vec<f64>, Vec<f64>) {
        let alphas = self.validate.alpha.clone().unwrap_or_else(|| {
            let nz: Vec<f64> = self.alpha_grid().into_iter().filter(|a| *a > 0.0).collect();
            let mut v = if nz.is_empty() { vec![0.0] } else { vec![nz[0], nz[nz.len() / 2], nz[nz.len() - 1]] };
            v.dedup();
            v
        });
        let rhos = self.validate.rho.clone().unwrap_or_else(|| {
            let most = self.sweep.rho.iter().copied().fold(0.0, f64::min);
            if most < 0.0 {
                vec![0.0, most]
            } else {
                vec![0.0]
            }
        });
        (alphas, rhos)
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_deployment() {
        let c = RunConfig::from_toml_str("").unwrap();
        let p = c.system_params().unwrap();
        assert_eq!(p.ue_power, 0.2);
        assert!((scenario::watts_to_dbm(p.bs_noise_var) + 89.0).abs() < 0.01);
        assert_eq!(c.scenario(), Scenario::far_repeater());
        let grid = c.alpha_grid();
        assert_eq!(grid.len(), 26);
        assert_eq!((grid[0], grid[1], grid[25]), (0.0, 1.0, 1e5));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_toml_str("[system]\nnum_uess = 3\n").unwrap_err().to_string();
        assert!(e.contains("num_uess"), "{e}");
        let e = RunConfig::from_toml_str("sed = 3\n").unwrap_err().to_string();
        assert!(e.contains("sed"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_key() {
        for (text, key) in [
            ("[sweep]\nrho = [0.5]\n", "sweep.rho"),
            ("[sweep]\nrealizations = 0\n", "sweep.realizations"),
            ("[system]\nnum_ues = 0\n", "system.num_ues"),
            ("[system]\nue_power_mw = 200.0\nue_power_dbm = 23.0\n", "ue_power_dbm"),
            ("[system]\nbandwidth_hz = -1.0\n", "system.bandwidth_hz"),
            ("[scenario]\nue_x_range_m = [300.0, 200.0]\n", "scenario.ue_x_range_m"),
            ("[sweep]\nflavors = [\"ZF\"]\n", "sweep.flavors"),
        ] {
            let e = RunConfig::from_toml_str(text).unwrap_err().to_string();
            assert!(e.contains(key), "{text}: {e}");
        }
    }

    #[test]
    fn power_units() {
        let c = RunConfig::from_toml_str("[system]\nue_power_dbm = 30.0\n").unwrap();
        assert!((c.ue_power_watts() - 1.0).abs() < 1e-12);
        let c = RunConfig::from_toml_str("[system]\nue_power_mw = 50.0\n").unwrap();
        assert!((c.ue_power_watts() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig::from_toml_str("seed = 9\n[sweep]\nalpha = [0.0, 10.0]\nrho = [0.0, -2.0]\n").unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn validation_grid_is_reduced() {
        let c = RunConfig::from_toml_str("[sweep]\nrho = [0.0, -0.5, -3.0]\n").unwrap();
        let (a, r) = c.validation_points();
        assert_eq!(a.len(), 3);
        assert_eq!(a[0], 1.0);
        assert_eq!(a[2], 1e5);
        assert_eq!(r, vec![0.0, -3.0]);
    }
}
