//! Channel realizations: i.i.d. Rayleigh small-scale fading scaled by the
//! distance-dependent pathloss of each link.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::{pairs, CMat, CVec};
use crate::scenario::{Point3, Scenario, SystemParams};
use crate::seed::{Purpose, SeedPolicy};

/// One draw from CN(0, 1): independent real and imaginary parts with
/// variance 1/2 each.
#[inline]
pub fn cn_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One draw from CN(0, variance).
pub fn sample_cn<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Result<Complex64> {
    if !(variance >= 0.0) {
        return Err(domain(format!("variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(cn_unit(rng) * variance.sqrt())
}

/// Channels of one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// UE -> repeater, length K.
    pub h: CVec,
    /// Repeater -> BS, length M.
    pub g: CVec,
    /// UE -> BS, M x K; column k is UE k's direct channel.
    pub h_bar: CMat,
    pub ue_positions: Vec<Point3>,
}

impl ChannelRealization {
    pub fn num_antennas(&self) -> usize {
        self.g.len()
    }

    pub fn num_ues(&self) -> usize {
        self.h.len()
    }

    pub fn check_dims(&self, params: &SystemParams) -> Result<()> {
        let (m, k) = (params.num_bs_antennas, params.num_ues);
        if self.h.len() != k || self.g.len() != m || self.h_bar.shape() != (m, k) {
            return Err(Error::Dimension(format!(
                "channels are h:{} g:{} h_bar:{:?}, params expect M={m} K={k}",
                self.h.len(),
                self.g.len(),
                self.h_bar.shape()
            )));
        }
        Ok(())
    }

    /// Keeps only the first `m` BS antennas.
    pub fn truncate_antennas(&self, m: usize) -> Self {
        let m = m.min(self.num_antennas());
        Self {
            h: self.h.clone(),
            g: self.g.rows(0, m).into_owned(),
            h_bar: self.h_bar.rows(0, m).into_owned(),
            ue_positions: self.ue_positions.clone(),
        }
    }

    pub fn dump(&self) -> ChannelDump {
        ChannelDump {
            h: pairs(self.h.iter().copied()),
            g: pairs(self.g.iter().copied()),
            h_bar_columns: self.h_bar.column_iter().map(|c| pairs(c.iter().copied())).collect(),
            ue_positions: self.ue_positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

/// JSON form of a realization; complex numbers are `[re, im]`.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelDump {
    pub h: Vec<[f64; 2]>,
    pub g: Vec<[f64; 2]>,
    pub h_bar_columns: Vec<Vec<[f64; 2]>>,
    pub ue_positions: Vec<[f64; 3]>,
}

/// Draws UE positions and fading for realization `index`.
pub fn draw_realization(
    scenario: &Scenario,
    params: &SystemParams,
    index: u64,
    seeds: &SeedPolicy,
) -> Result<ChannelRealization> {
    let region = scenario.ue_region;
    let ux = Uniform::new(region.x[0], region.x[1]).map_err(|e| domain(e.to_string()))?;
    let uy = Uniform::new(region.y[0], region.y[1]).map_err(|e| domain(e.to_string()))?;
    let mut rng = seeds.stream(index, Purpose::Positions);
    let positions: Vec<Point3> = (0..params.num_ues)
        .map(|_| {
            let x = ux.sample(&mut rng);
            let y = uy.sample(&mut rng);
            Point3::new(x, y, scenario.ue_height)
        })
        .collect();
    draw_fading(scenario, params, positions, index, seeds)
}

/// Draws fading for UEs at fixed positions.
pub fn draw_fading(
    scenario: &Scenario,
    params: &SystemParams,
    ue_positions: Vec<Point3>,
    index: u64,
    seeds: &SeedPolicy,
) -> Result<ChannelRealization> {
    let (m, k) = (params.num_bs_antennas, params.num_ues);
    if ue_positions.len() != k {
        return Err(Error::Dimension(format!("{} UE positions for K={k}", ue_positions.len())));
    }

    let to_repeater = ue_positions
        .iter()
        .map(|&u| scenario.link_gain(u, scenario.repeater_position).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let to_bs = ue_positions
        .iter()
        .map(|&u| scenario.link_gain(u, scenario.bs_position).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let backhaul = scenario
        .link_gain(scenario.repeater_position, scenario.bs_position)?
        .sqrt();

    let mut rng = seeds.stream(index, Purpose::UeToRepeater);
    let h = DVector::from_iterator(k, to_repeater.iter().map(|a| cn_unit(&mut rng) * *a));

    let mut rng = seeds.stream(index, Purpose::RepeaterToBs);
    let g = DVector::from_iterator(m, (0..m).map(|_| cn_unit(&mut rng) * backhaul));

    let mut rng = seeds.stream(index, Purpose::UeToBs);
    let mut h_bar = DMatrix::zeros(m, k);
    for (col, &a) in to_bs.iter().enumerate() {
        for row in 0..m {
            h_bar[(row, col)] = cn_unit(&mut rng) * a;
        }
    }

    Ok(ChannelRealization { h, g, h_bar, ue_positions })
}
