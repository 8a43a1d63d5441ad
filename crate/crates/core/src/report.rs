//! Result files: the sweep CSV, its JSON sidecar and the single-realization
//! dump.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bussgang::{psd_floor, repeater_input_power, BussgangModel};
use crate::channel::{ChannelDump, ChannelRealization};
use crate::combining::{evaluate, CellContext, CombinerStrategy, SeReport};
use crate::config::RunConfig;
use crate::error::Result;
use crate::linalg::{hermitian_eigenvalues, matrix_rows, real_trace};
use crate::scenario::SystemParams;
use crate::sweep::SweepResult;

pub const CSV_HEADER: &str = "alpha,rho,flavor,mean_sum_se_bits_per_hz,std_sum_se,num_realizations";

/// `printf("%.12g")`, independent of locale.
pub fn fmt_g12(x: f64) -> String {
    const P: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One row per cell, sorted by rho ascending, then flavor, then alpha
/// ascending, so each curve is a contiguous block.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut cells: Vec<_> = result.cells.iter().collect();
    cells.sort_by(|a, b| {
        a.rho
            .total_cmp(&b.rho)
            .then_with(|| a.flavor.cmp(&b.flavor))
            .then_with(|| a.alpha.total_cmp(&b.alpha))
    });
    let mut out = String::with_capacity(64 * (cells.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_g12(c.alpha),
            fmt_g12(c.rho),
            c.flavor,
            fmt_g12(c.mean),
            fmt_g12(c.std),
            c.num_realizations
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub name: String,
    pub version: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

/// Written next to the CSV. `config` is the fully resolved configuration,
/// so feeding it back reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: RunConfig,
    pub seed: u64,
    pub alpha_grid: Vec<f64>,
    pub num_cells: usize,
    pub build: BuildInfo,
    pub wall_time_s: f64,
}

impl Sidecar {
    pub fn new(config: &RunConfig, result: &SweepResult, wall_time_s: f64) -> Self {
        Self {
            config: config.clone(),
            seed: config.seed,
            alpha_grid: result.alpha_grid.clone(),
            num_cells: result.cells.len(),
            build: BuildInfo::current(),
            wall_time_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub min: f64,
    pub max: f64,
    pub trace: f64,
    pub psd_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlavorSe {
    pub flavor: String,
    #[serde(flatten)]
    pub se: SeReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointDump {
    pub alpha: f64,
    pub rho: f64,
    /// Rows of `B`, entries `[re, im]`.
    pub gain_rows: Vec<Vec<[f64; 2]>>,
    pub distortion_cov_eigenvalues: EigenSummary,
    pub se: Vec<FlavorSe>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleDump {
    pub realization: u64,
    pub seed: u64,
    pub repeater_input_power_w: f64,
    pub channels: ChannelDump,
    pub points: Vec<PointDump>,
}

pub fn single_dump(
    channels: &ChannelRealization,
    base: &SystemParams,
    alphas: &[f64],
    rhos: &[f64],
    flavors: &[std::sync::Arc<dyn CombinerStrategy>],
    realization: u64,
    seed: u64,
) -> Result<SingleDump> {
    let mut points = Vec::with_capacity(alphas.len() * rhos.len());
    for &alpha in alphas {
        for &rho in rhos {
            let params = base.with_operating_point(alpha, rho);
            let model = BussgangModel::new(channels, &params)?;
            let eig = hermitian_eigenvalues(&model.distortion_cov);
            let ctx = CellContext { channels, params: &params, model: &model };
            let se = flavors
                .iter()
                .map(|f| {
                    let set = f.form(&ctx)?;
                    Ok(FlavorSe { flavor: f.name().into(), se: evaluate(&set, &model)? })
                })
                .collect::<Result<_>>()?;
            points.push(PointDump {
                alpha,
                rho,
                gain_rows: matrix_rows(&model.gain),
                distortion_cov_eigenvalues: EigenSummary {
                    min: eig[0],
                    max: eig[eig.len() - 1],
                    trace: real_trace(&model.distortion_cov),
                    psd_floor: psd_floor(&model.distortion_cov),
                },
                se,
            });
        }
    }
    Ok(SingleDump {
        realization,
        seed,
        repeater_input_power_w: repeater_input_power(channels, base),
        channels: channels.dump(),
        points,
    })
}
