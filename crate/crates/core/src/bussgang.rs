//! Closed-form Bussgang decomposition of the received signal
//! `y = B s + eta` for a third-order repeater PA.
//!
//! With `P_r = p sum|h_i|^2 + sigma_r^2` the repeater input power and
//! `c = 1 + 2 rho alpha^2 P_r`, the gain collapses to
//! `B = sqrt(p) alpha c g h^T + sqrt(p) H_bar`, and the received covariance to
//!
//! ```text
//! C_y = (alpha^2 P_r + 4 rho alpha^4 P_r^2 + 6 rho^2 alpha^6 P_r^3) g g^H
//!     + p H_bar H_bar^H + sigma_bs^2 I + alpha c (g a^H + a g^H)
//! ```
//!
//! where `a = p H_bar conj(h)`. The term-by-term expansions (one sum per
//! Gaussian moment) are kept alongside as a second route and tested against
//! the consolidated forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitianize, real_trace, CMat, CVec};
use crate::scenario::SystemParams;

/// Relative tolerance for negative eigenvalues of `C_eta`.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub alpha: f64,
    pub rho: f64,
}

impl OperatingPoint {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(rho <= 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be <= 0, got {rho}")));
        }
        Ok(Self { alpha, rho })
    }

    pub fn of(params: &SystemParams) -> Self {
        Self { alpha: params.amp_gain, rho: params.compression }
    }
}

/// `(B, C_y, C_eta)` for one realization at one operating point.
#[derive(Debug, Clone)]
pub struct BussgangModel {
    pub gain: CMat,
    pub received_cov: CMat,
    pub distortion_cov: CMat,
    pub repeater_input_power: f64,
}

impl BussgangModel {
    pub fn new(channels: &ChannelRealization, params: &SystemParams) -> Result<Self> {
        channels.check_dims(params)?;
        let pr = repeater_input_power(channels, params);
        let gain = gain_with_power(channels, params, pr);
        let received_cov = covariance_with_power(channels, params, pr);
        let distortion_cov = distortion_covariance(&received_cov, &gain)?;
        Ok(Self { gain, received_cov, distortion_cov, repeater_input_power: pr })
    }

    pub fn num_ues(&self) -> usize {
        self.gain.ncols()
    }

    pub fn column(&self, k: usize) -> CVec {
        self.gain.column(k).into_owned()
    }
}

/// `E|u~|^2 = p sum_i |h_i|^2 + sigma_r^2`.
pub fn repeater_input_power(channels: &ChannelRealization, params: &SystemParams) -> f64 {
    params.ue_power * channels.h.iter().map(|z| z.norm_sqr()).sum::<f64>() + params.repeater_noise_var
}

/// Effective linear gain of the PA seen by the symbols, `1 + 2 rho alpha^2 P_r`.
pub fn compression_factor(alpha: f64, rho: f64, pr: f64) -> f64 {
    1.0 + 2.0 * rho * alpha * alpha * pr
}

/// Power scale of the repeater path in `C_y`:
/// `alpha^2 E|u~|^2 + 2 rho alpha^4 E|u~|^4 + rho^2 alpha^6 E|u~|^6`.
pub fn repeater_path_power(alpha: f64, rho: f64, pr: f64) -> f64 {
    let a2 = alpha * alpha;
    a2 * pr + 4.0 * rho * a2 * a2 * pr * pr + 6.0 * rho * rho * a2 * a2 * a2 * pr * pr * pr
}

/// Bussgang gain `B = E{y s^H}`, M x K.
pub fn bussgang_gain(channels: &ChannelRealization, params: &SystemParams) -> Result<CMat> {
    channels.check_dims(params)?;
    Ok(gain_with_power(channels, params, repeater_input_power(channels, params)))
}

fn gain_with_power(ch: &ChannelRealization, params: &SystemParams, pr: f64) -> CMat {
    let sqrt_p = params.ue_power.sqrt();
    let alpha = params.amp_gain;
    let scale = sqrt_p * alpha * compression_factor(alpha, params.compression, pr);
    let mut b = ch.h_bar.scale(sqrt_p);
    if scale != 0.0 {
        b += (&ch.g * ch.h.transpose()) * Complex64::from(scale);
    }
    b
}

/// Five-term entrywise expansion of `B`, summing `sum_{i != k} |h_i|^2`
/// explicitly.
pub fn bussgang_gain_expanded(channels: &ChannelRealization, params: &SystemParams) -> Result<CMat> {
    channels.check_dims(params)?;
    let (m_ant, k_ue) = (params.num_bs_antennas, params.num_ues);
    let p = params.ue_power;
    let sp = p.sqrt();
    let (alpha, rho, sr2) = (params.amp_gain, params.compression, params.repeater_noise_var);
    let a3 = alpha * alpha * alpha;
    let h = &channels.h;
    Ok(CMat::from_fn(m_ant, k_ue, |m, k| {
        let gm = channels.g[m];
        let hk = h[k];
        let others: f64 = (0..k_ue).filter(|&i| i != k).map(|i| h[i].norm_sqr()).sum();
        gm * alpha * sp * hk
            + gm * hk * (2.0 * rho * a3 * p * sp * hk.norm_sqr())
            + gm * hk * (2.0 * rho * a3 * p * sp * others)
            + gm * hk * (2.0 * rho * a3 * sp * sr2)
            + channels.h_bar[(m, k)] * sp
    }))
}

/// Received auto-correlation `C_y = E{y y^H}`, M x M.
pub fn received_covariance(channels: &ChannelRealization, params: &SystemParams) -> Result<CMat> {
    channels.check_dims(params)?;
    Ok(covariance_with_power(channels, params, repeater_input_power(channels, params)))
}

fn covariance_with_power(ch: &ChannelRealization, params: &SystemParams, pr: f64) -> CMat {
    let m = params.num_bs_antennas;
    let p = params.ue_power;
    let (alpha, rho) = (params.amp_gain, params.compression);

    let mut cy = (&ch.h_bar * ch.h_bar.adjoint()).scale(p);
    for i in 0..m {
        cy[(i, i)] += Complex64::from(params.bs_noise_var);
    }
    if alpha == 0.0 {
        return hermitianize(&cy);
    }
    let gg = &ch.g * ch.g.adjoint();
    cy += gg * Complex64::from(repeater_path_power(alpha, rho, pr));

    // a_m = p sum_i h_bar_{m,i} conj(h_i)
    let a = (&ch.h_bar * ch.h.conjugate()).scale(p);
    let cross = &ch.g * a.adjoint() + &a * ch.g.adjoint();
    cy += cross * Complex64::from(alpha * compression_factor(alpha, rho, pr));
    hermitianize(&cy)
}

/// Entrywise expansion of `C_y` with every Gaussian moment and
/// cross-moment written out as its own sum.
pub fn received_covariance_expanded(channels: &ChannelRealization, params: &SystemParams) -> Result<CMat> {
    channels.check_dims(params)?;
    let (m_ant, k_ue) = (params.num_bs_antennas, params.num_ues);
    let p = params.ue_power;
    let (alpha, rho, sr2) = (params.amp_gain, params.compression, params.repeater_noise_var);
    let (h, g, hb) = (&channels.h, &channels.g, &channels.h_bar);

    let [e2, e4, e6] = gaussian_moments(p * h.iter().map(|z| z.norm_sqr()).sum::<f64>() + sr2);

    let x1: Vec<Complex64> = (0..m_ant).map(|n| first_order_cross_moment(channels, params, n)).collect();
    let x3: Vec<Complex64> = (0..m_ant)
        .map(|n| third_order_cross_moment_expanded(channels, params, n))
        .collect();
    let (a2, a3, a4, a6) = (alpha.powi(2), alpha.powi(3), alpha.powi(4), alpha.powi(6));

    let cy = CMat::from_fn(m_ant, m_ant, |m, n| {
        let gmn = g[m] * g[n].conj();
        let mut v = gmn * (a2 * e2) + gmn * (rho * rho * a6 * e6) + gmn * (2.0 * rho * a4 * e4);
        v += (0..k_ue).map(|i| hb[(m, i)] * hb[(n, i)].conj()).sum::<Complex64>() * p;
        if m == n {
            v += Complex64::from(params.bs_noise_var);
        }
        v += g[m] * x1[n] * alpha;
        v += g[n].conj() * x1[m].conj() * alpha;
        v += g[m] * x3[n] * (rho * a3);
        v += g[n].conj() * x3[m].conj() * (rho * a3);
        v
    });
    Ok(cy)
}

/// `(E|x|^2, E|x|^4, E|x|^6)` for `x ~ CN(0, power)`.
pub fn gaussian_moments(power: f64) -> [f64; 3] {
    [power, 2.0 * power * power, 6.0 * power * power * power]
}

/// `E{u~ sqrt(p) sum_j conj(h_bar_{j,n} s_j)} = p sum_i h_i conj(h_bar_{i,n})`.
pub fn first_order_cross_moment(channels: &ChannelRealization, params: &SystemParams, n: usize) -> Complex64 {
    let (h, hb) = (&channels.h, &channels.h_bar);
    (0..h.len()).map(|i| h[i] * hb[(n, i)].conj()).sum::<Complex64>() * params.ue_power
}

/// `E{|u~|^2 u~ sqrt(p) sum_j conj(h_bar_{j,n} s_j)}` in consolidated form,
/// `2 P_r` times the first-order cross-moment.
pub fn third_order_cross_moment(channels: &ChannelRealization, params: &SystemParams, n: usize) -> Complex64 {
    first_order_cross_moment(channels, params, n) * (2.0 * repeater_input_power(channels, params))
}

/// The same third-order cross-moment as three separate sums: own-UE,
/// other-UE and repeater-noise contributions.
pub fn third_order_cross_moment_expanded(channels: &ChannelRealization, params: &SystemParams, n: usize) -> Complex64 {
    let (h, hb) = (&channels.h, &channels.h_bar);
    let (p, sr2) = (params.ue_power, params.repeater_noise_var);
    let k_ue = h.len();
    let mut own = Complex64::new(0.0, 0.0);
    let mut other = Complex64::new(0.0, 0.0);
    let mut noise = Complex64::new(0.0, 0.0);
    for i in 0..k_ue {
        let hi2 = h[i].norm_sqr();
        own += h[i] * hb[(n, i)].conj() * hi2;
        for j in (0..k_ue).filter(|&j| j != i) {
            other += h[j] * hb[(n, j)].conj() * hi2;
        }
        noise += h[i] * hb[(n, i)].conj();
    }
    own * (2.0 * p * p) + other * (2.0 * p * p) + noise * (2.0 * p * sr2)
}

/// `C_eta = C_y - B B^H`, re-Hermitianized. Fails if the result has an
/// eigenvalue below `-1e-8 trace / M`.
pub fn distortion_covariance(received_cov: &CMat, gain: &CMat) -> Result<CMat> {
    let m = received_cov.nrows();
    if received_cov.shape() != (m, m) || gain.nrows() != m {
        return Err(Error::Dimension(format!(
            "C_y is {:?}, B is {:?}",
            received_cov.shape(),
            gain.shape()
        )));
    }
    let c_eta = hermitianize(&(received_cov - gain * gain.adjoint()));
    let floor = psd_floor(&c_eta);
    let min_eig = hermitian_eigenvalues(&c_eta)[0];
    if min_eig < floor {
        return Err(Error::Numerical(format!(
            "distortion covariance has eigenvalue {min_eig:e} below {floor:e}"
        )));
    }
    Ok(c_eta)
}

/// `-1e-8 trace / M`, the most negative eigenvalue accepted for `C_eta`.
pub fn psd_floor(c_eta: &CMat) -> f64 {
    -PSD_TOLERANCE * real_trace(c_eta) / c_eta.nrows() as f64
}
