//! Brute-force Monte-Carlo estimators for every expectation behind the
//! closed forms.
//!
//! Each estimator simulates the full signal chain (UE symbols, repeater
//! noise, cubic PA, BS noise) with the channels held fixed. Samples are
//! drawn in fixed-size batches; batch `b` always uses substream `(seed, b)`,
//! and batch partial sums are merged in index order with Neumaier
//! compensation. The result is therefore identical for any thread count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{cn_unit, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::scenario::SystemParams;
use crate::seed::{Purpose, SeedPolicy};

/// Samples per batch (one RNG substream each).
pub const BATCH_SIZE: u64 = 1 << 14;
/// Batches whose partial sums are held in memory at once.
const BATCHES_IN_FLIGHT: u64 = 256;

/// A Monte-Carlo estimate with a standard-error proxy: the root of the summed
/// per-entry sample variances of the mean.
#[derive(Debug, Clone)]
pub struct McEstimate<T> {
    pub value: T,
    pub num_samples: u64,
    pub std_error: f64,
}

/// Sample moments of the repeater input `|u~|^{2,4,6}`.
#[derive(Debug, Clone)]
pub struct RepeaterMoments {
    pub m2: McEstimate<f64>,
    pub m4: McEstimate<f64>,
    pub m6: McEstimate<f64>,
}

/// One simulated channel use.
#[derive(Debug, Clone)]
pub struct SignalSample {
    pub y: CVec,
    pub s: CVec,
    /// Repeater input before amplification.
    pub u_tilde: Complex64,
}

/// Precomputed per-realization constants for fast sampling.
struct Chain<'a> {
    ch: &'a ChannelRealization,
    sqrt_p: f64,
    sigma_r: f64,
    sigma_bs: f64,
    alpha: f64,
    rho: f64,
    m: usize,
    k: usize,
}

impl<'a> Chain<'a> {
    fn new(ch: &'a ChannelRealization, params: &SystemParams) -> Result<Self> {
        ch.check_dims(params)?;
        Ok(Self {
            ch,
            sqrt_p: params.ue_power.sqrt(),
            sigma_r: params.repeater_noise_var.sqrt(),
            sigma_bs: params.bs_noise_var.sqrt(),
            alpha: params.amp_gain,
            rho: params.compression,
            m: params.num_bs_antennas,
            k: params.num_ues,
        })
    }

    /// Fills `s` and `y`, returns `u~`.
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut [Complex64], y: &mut [Complex64]) -> Complex64 {
        for sk in s.iter_mut() {
            *sk = cn_unit(rng);
        }
        let mut ut = cn_unit(rng) * self.sigma_r;
        for (hk, sk) in self.ch.h.iter().zip(s.iter()) {
            ut += hk * sk * self.sqrt_p;
        }
        let u = ut * self.alpha;
        let r = u + u * (self.rho * u.norm_sqr());
        for (m, ym) in y.iter_mut().enumerate() {
            let mut acc = self.ch.g[m] * r;
            for (k, sk) in s.iter().enumerate() {
                acc += self.ch.h_bar[(m, k)] * sk * self.sqrt_p;
            }
            *ym = acc + cn_unit(rng) * self.sigma_bs;
        }
        ut
    }
}

/// Draws one `(y, s)` pair through the full signal chain.
pub fn simulate_y<R: Rng + ?Sized>(
    channels: &ChannelRealization,
    params: &SystemParams,
    rng: &mut R,
) -> Result<SignalSample> {
    let chain = Chain::new(channels, params)?;
    let mut s = vec![Complex64::new(0.0, 0.0); chain.k];
    let mut y = vec![Complex64::new(0.0, 0.0); chain.m];
    let u_tilde = chain.draw(rng, &mut s, &mut y);
    Ok(SignalSample { y: CVec::from_vec(y), s: CVec::from_vec(s), u_tilde })
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Runs `n` samples in batches and returns the per-slot totals. `body` gets a
/// batch RNG and a sample count, and adds the batch's contributions into a
/// slot buffer of length `width`.
fn batched_sums<F>(n: u64, seed: u64, width: usize, body: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, u64, &mut [f64]) + Sync,
{
    let seeds = SeedPolicy::new(seed);
    let num_batches = n.div_ceil(BATCH_SIZE);
    let mut totals = vec![Neumaier::default(); width];
    let mut start = 0;
    while start < num_batches {
        let end = (start + BATCHES_IN_FLIGHT).min(num_batches);
        let partials: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|b| {
                let mut rng = seeds.stream(b, Purpose::Symbols);
                let count = BATCH_SIZE.min(n - b * BATCH_SIZE);
                let mut acc = vec![0.0; width];
                body(&mut rng, count, &mut acc);
                acc
            })
            .collect();
        for part in partials {
            for (t, x) in totals.iter_mut().zip(part) {
                t.add(x);
            }
        }
        start = end;
    }
    totals.iter().map(Neumaier::value).collect()
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("sample count must be >= 1".into()));
    }
    Ok(())
}

/// Standard error of a mean from the sums of `x` and `|x|^2`.
fn std_error_of_mean(mean_abs2: f64, mean: f64, n: u64) -> f64 {
    ((mean_abs2 - mean * mean).max(0.0) / n as f64).sqrt()
}

/// Mean of `x x^H`-style outer products `a b^H` and the summed variance of
/// the entries. `pair(y, s) -> (a, b)`.
fn estimate_outer<F>(
    channels: &ChannelRealization,
    params: &SystemParams,
    n: u64,
    seed: u64,
    rows: usize,
    cols: usize,
    pair: F,
) -> Result<McEstimate<CMat>>
where
    F: Fn(&[Complex64], &[Complex64], &mut [Complex64], &mut [Complex64]) + Sync,
{
    check_n(n)?;
    let chain = Chain::new(channels, params)?;
    let cells = rows * cols;
    // [re, im] per cell, then |a b*|^2 summed over all cells
    let width = 2 * cells + 1;
    let sums = batched_sums(n, seed, width, |rng, count, acc| {
        let mut s = vec![Complex64::new(0.0, 0.0); chain.k];
        let mut y = vec![Complex64::new(0.0, 0.0); chain.m];
        let mut a = vec![Complex64::new(0.0, 0.0); rows];
        let mut b = vec![Complex64::new(0.0, 0.0); cols];
        for _ in 0..count {
            chain.draw(rng, &mut s, &mut y);
            pair(&y, &s, &mut a, &mut b);
            let mut sq = 0.0;
            for (i, ai) in a.iter().enumerate() {
                for (j, bj) in b.iter().enumerate() {
                    let z = ai * bj.conj();
                    acc[2 * (i * cols + j)] += z.re;
                    acc[2 * (i * cols + j) + 1] += z.im;
                    sq += z.norm_sqr();
                }
            }
            acc[2 * cells] += sq;
        }
    });
    let nf = n as f64;
    let value = CMat::from_fn(rows, cols, |i, j| {
        Complex64::new(sums[2 * (i * cols + j)], sums[2 * (i * cols + j) + 1]) / nf
    });
    let mean_sq = sums[2 * cells] / nf;
    let std_error = ((mean_sq - value.norm_squared()).max(0.0) / nf).sqrt();
    Ok(McEstimate { value, num_samples: n, std_error })
}

/// `(1/N) sum y s^H`, the sample Bussgang gain.
pub fn estimate_bussgang(
    channels: &ChannelRealization,
    params: &SystemParams,
    n: u64,
    seed: u64,
) -> Result<McEstimate<CMat>> {
    estimate_outer(channels, params, n, seed, params.num_bs_antennas, params.num_ues, |y, s, a, b| {
        a.copy_from_slice(y);
        b.copy_from_slice(s);
    })
}

/// `(1/N) sum (y - B s) s^H`, which vanishes when `B` is the Bussgang gain.
pub fn estimate_residual_correlation(
    channels: &ChannelRealization,
    params: &SystemParams,
    gain: &CMat,
    n: u64,
    seed: u64,
) -> Result<McEstimate<CMat>> {
    let (m, k) = (params.num_bs_antennas, params.num_ues);
    if gain.shape() != (m, k) {
        return Err(Error::Dimension(format!("gain is {:?}, expected ({m}, {k})", gain.shape())));
    }
    estimate_outer(channels, params, n, seed, m, k, |y, s, a, b| {
        for (i, ai) in a.iter_mut().enumerate() {
            let mut bs = Complex64::new(0.0, 0.0);
            for (j, sj) in s.iter().enumerate() {
                bs += gain[(i, j)] * sj;
            }
            *ai = y[i] - bs;
        }
        b.copy_from_slice(s);
    })
}

/// `(1/N) sum y y^H`. Only the upper triangle is accumulated, so the result
/// is exactly Hermitian.
pub fn estimate_received_cov(
    channels: &ChannelRealization,
    params: &SystemParams,
    n: u64,
    seed: u64,
) -> Result<McEstimate<CMat>> {
    check_n(n)?;
    let chain = Chain::new(channels, params)?;
    let m = chain.m;
    let tri = m * (m + 1) / 2;
    let width = 2 * tri + 1;
    let sums = batched_sums(n, seed, width, |rng, count, acc| {
        let mut s = vec![Complex64::new(0.0, 0.0); chain.k];
        let mut y = vec![Complex64::new(0.0, 0.0); m];
        for _ in 0..count {
            chain.draw(rng, &mut s, &mut y);
            let mut idx = 0;
            let mut sq = 0.0;
            for i in 0..m {
                for j in i..m {
                    let z = y[i] * y[j].conj();
                    acc[2 * idx] += z.re;
                    acc[2 * idx + 1] += z.im;
                    let w = z.norm_sqr();
                    sq += if i == j { w } else { 2.0 * w };
                    idx += 1;
                }
            }
            acc[2 * tri] += sq;
        }
    });
    let nf = n as f64;
    let mut value = CMat::zeros(m, m);
    let mut idx = 0;
    for i in 0..m {
        for j in i..m {
            let z = Complex64::new(sums[2 * idx], sums[2 * idx + 1]) / nf;
            if i == j {
                value[(i, i)] = Complex64::new(z.re, 0.0);
            } else {
                value[(i, j)] = z;
                value[(j, i)] = z.conj();
            }
            idx += 1;
        }
    }
    let std_error = ((sums[2 * tri] / nf - value.norm_squared()).max(0.0) / nf).sqrt();
    Ok(McEstimate { value, num_samples: n, std_error })
}

/// Sample means of `|u~|^2`, `|u~|^4`, `|u~|^6` at the repeater input.
pub fn estimate_repeater_moments(
    channels: &ChannelRealization,
    params: &SystemParams,
    n: u64,
    seed: u64,
) -> Result<RepeaterMoments> {
    check_n(n)?;
    let chain = Chain::new(channels, params)?;
    let sums = batched_sums(n, seed, 6, |rng, count, acc| {
        let mut s = vec![Complex64::new(0.0, 0.0); chain.k];
        let mut y = vec![Complex64::new(0.0, 0.0); chain.m];
        for _ in 0..count {
            let p2 = chain.draw(rng, &mut s, &mut y).norm_sqr();
            let p4 = p2 * p2;
            let p6 = p4 * p2;
            acc[0] += p2;
            acc[1] += p4;
            acc[2] += p6;
            acc[3] += p4;
            acc[4] += p4 * p4;
            acc[5] += p6 * p6;
        }
    });
    let nf = n as f64;
    let est = |i: usize| {
        let mean = sums[i] / nf;
        McEstimate { value: mean, num_samples: n, std_error: std_error_of_mean(sums[i + 3] / nf, mean, n) }
    };
    Ok(RepeaterMoments { m2: est(0), m4: est(1), m6: est(2) })
}

/// Sample mean of `|u~|^2 u~ sqrt(p) sum_j conj(h_bar_{j,n} s_j)` for BS
/// antenna `antenna` (0-based).
pub fn estimate_cross_third_order(
    channels: &ChannelRealization,
    params: &SystemParams,
    n: u64,
    seed: u64,
    antenna: usize,
) -> Result<McEstimate<Complex64>> {
    check_n(n)?;
    let chain = Chain::new(channels, params)?;
    if antenna >= chain.m {
        return Err(Error::Domain(format!("antenna index {antenna} out of range for M={}", chain.m)));
    }
    let sums = batched_sums(n, seed, 3, |rng, count, acc| {
        let mut s = vec![Complex64::new(0.0, 0.0); chain.k];
        let mut y = vec![Complex64::new(0.0, 0.0); chain.m];
        for _ in 0..count {
            let ut = chain.draw(rng, &mut s, &mut y);
            let mut direct = Complex64::new(0.0, 0.0);
            for (j, sj) in s.iter().enumerate() {
                direct += (channels.h_bar[(antenna, j)] * sj).conj();
            }
            let z = ut * ut.norm_sqr() * direct * chain.sqrt_p;
            acc[0] += z.re;
            acc[1] += z.im;
            acc[2] += z.norm_sqr();
        }
    });
    let nf = n as f64;
    let value = Complex64::new(sums[0], sums[1]) / nf;
    let std_error = ((sums[2] / nf - value.norm_sqr()).max(0.0) / nf).sqrt();
    Ok(McEstimate { value, num_samples: n, std_error })
}
