//! Receive combining and achievable spectral efficiency.
//!
//! Combiner flavors are strategies behind [`CombinerStrategy`], looked up
//! by name in a [`CombinerRegistry`]. Both shipped flavors apply the same
//! SINR-maximizing formula `(sum_{i!=k} b_i b_i^H + C_eta)^{-1} b_k`; they
//! differ only in which Bussgang model they feed it. Whatever model formed
//! the combiner, SE is always evaluated under the true model.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::bussgang::{BussgangModel, OperatingPoint};
use crate::channel::ChannelRealization;
use crate::error::{domain, Error, Result};
use crate::linalg::{hermitian_solve, is_finite, CMat, CVec};
use crate::scenario::SystemParams;

/// Combining vectors for all UEs of one cell.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    pub vectors: Vec<CVec>,
    pub flavor: &'static str,
    /// Operating point the combiners were formed at (DuA forces `rho = 0`).
    pub formed_at: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeReport {
    pub per_ue: Vec<f64>,
    pub sum: f64,
}

impl SeReport {
    pub fn from_per_ue(per_ue: Vec<f64>) -> Self {
        let sum = per_ue.iter().sum();
        Self { per_ue, sum }
    }
}

/// Everything a strategy may look at when forming combiners for one
/// (realization, operating point) cell.
pub struct CellContext<'a> {
    pub channels: &'a ChannelRealization,
    pub params: &'a SystemParams,
    /// Bussgang model at the true operating point.
    pub model: &'a BussgangModel,
}

pub trait CombinerStrategy: Send + Sync {
    /// Registry key, also written to result files.
    fn name(&self) -> &'static str;

    fn form(&self, ctx: &CellContext<'_>) -> Result<CombinerSet>;
}

impl fmt::Debug for dyn CombinerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uses the true `(B, C_eta)`.
#[derive(Debug, Default, Clone, Copy)]
pub struct DistortionAware;

impl CombinerStrategy for DistortionAware {
    fn name(&self) -> &'static str {
        "DA"
    }

    fn form(&self, ctx: &CellContext<'_>) -> Result<CombinerSet> {
        let vectors = (0..ctx.model.num_ues())
            .map(|k| da_combiner(&ctx.model.gain, &ctx.model.distortion_cov, k))
            .collect::<Result<_>>()?;
        Ok(CombinerSet { vectors, flavor: self.name(), formed_at: OperatingPoint::of(ctx.params) })
    }
}

/// Forms combiners from the ideal-PA (`rho = 0`) model. Amplified repeater
/// noise is still whitened; only the PA non-linearity is ignored.
#[derive(Debug, Default, Clone, Copy)]
pub struct DistortionUnaware;

impl CombinerStrategy for DistortionUnaware {
    fn name(&self) -> &'static str {
        "DuA"
    }

    fn form(&self, ctx: &CellContext<'_>) -> Result<CombinerSet> {
        let linear = linear_params(ctx.params);
        let model = BussgangModel::new(ctx.channels, &linear)?;
        let vectors = (0..model.num_ues())
            .map(|k| da_combiner(&model.gain, &model.distortion_cov, k))
            .collect::<Result<_>>()?;
        Ok(CombinerSet { vectors, flavor: self.name(), formed_at: OperatingPoint::of(&linear) })
    }
}

fn linear_params(params: &SystemParams) -> SystemParams {
    SystemParams { compression: 0.0, ..*params }
}

/// Name -> strategy table.
#[derive(Clone, Default)]
pub struct CombinerRegistry {
    entries: Vec<Arc<dyn CombinerStrategy>>,
}

impl CombinerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// DA and DuA.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DistortionAware));
        r.register(Arc::new(DistortionUnaware));
        r
    }

    /// Adds or replaces the strategy under its name.
    pub fn register(&mut self, strategy: Arc<dyn CombinerStrategy>) {
        let name = strategy.name();
        self.entries.retain(|s| !s.name().eq_ignore_ascii_case(name));
        self.entries.push(strategy);
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<Arc<dyn CombinerStrategy>> {
        self.entries.iter().find(|s| s.name().eq_ignore_ascii_case(name)).cloned()
    }

    pub fn resolve(&self, names: &[String]) -> Result<Vec<Arc<dyn CombinerStrategy>>> {
        names
            .iter()
            .map(|n| {
                self.get(n).ok_or_else(|| {
                    Error::Config(format!("sweep.flavors: unknown combiner `{n}` (known: {})", self.names().join(", ")))
                })
            })
            .collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

fn check_ue(gain: &CMat, k: usize) -> Result<()> {
    if k >= gain.ncols() {
        return Err(domain(format!("UE index {k} out of range for K={}", gain.ncols())));
    }
    Ok(())
}

/// `sum_{i != k} b_i b_i^H + C_eta`.
fn interference_plus_distortion(gain: &CMat, distortion_cov: &CMat, k: usize) -> Result<CMat> {
    check_ue(gain, k)?;
    let m = gain.nrows();
    if distortion_cov.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "C_eta is {:?}, B has {m} rows",
            distortion_cov.shape()
        )));
    }
    if !is_finite(gain) || !is_finite(distortion_cov) {
        return Err(domain("non-finite B or C_eta"));
    }
    let mut a = distortion_cov.clone();
    for i in (0..gain.ncols()).filter(|&i| i != k) {
        let bi = gain.column(i);
        a += &bi * bi.adjoint();
    }
    Ok(a)
}

/// SINR-maximizing combiner for UE `k` (0-based), unnormalized.
pub fn da_combiner(gain: &CMat, distortion_cov: &CMat, k: usize) -> Result<CVec> {
    let a = interference_plus_distortion(gain, distortion_cov, k)?;
    hermitian_solve(&a, &gain.column(k).into_owned())
}

/// Combiner formed as if the PA were ideal, from the channels directly.
pub fn dua_combiner(channels: &ChannelRealization, params: &SystemParams, k: usize) -> Result<CVec> {
    let model = BussgangModel::new(channels, &linear_params(params))?;
    da_combiner(&model.gain, &model.distortion_cov, k)
}

/// Achievable SE of UE `k` with combiner `v`, in bit/s/Hz.
pub fn se_for_combiner(v: &CVec, gain: &CMat, distortion_cov: &CMat, k: usize) -> Result<f64> {
    check_ue(gain, k)?;
    if v.len() != gain.nrows() {
        return Err(Error::Dimension(format!("combiner length {} vs M={}", v.len(), gain.nrows())));
    }
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || v.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(domain("combiner must be finite and nonzero"));
    }
    let proj = gain.adjoint() * v;
    let signal = proj[k].norm_sqr();
    let interference: f64 = proj.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, z)| z.norm_sqr()).sum();
    let distortion = v.dotc(&(distortion_cov * v)).re;
    let denom = interference + distortion;
    if !(denom > 0.0) {
        return Err(domain("zero interference-plus-distortion power"));
    }
    Ok((signal / denom).ln_1p() / std::f64::consts::LN_2)
}

/// `log2(1 + b_k^H (sum_{i!=k} b_i b_i^H + C_eta)^{-1} b_k)`.
pub fn se_optimal(gain: &CMat, distortion_cov: &CMat, k: usize) -> Result<f64> {
    let a = interference_plus_distortion(gain, distortion_cov, k)?;
    let bk = gain.column(k).into_owned();
    let x = hermitian_solve(&a, &bk)?;
    let sinr = bk.dotc(&x).re.max(0.0);
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Per-UE SE of a combiner set under `model`.
pub fn evaluate(set: &CombinerSet, model: &BussgangModel) -> Result<SeReport> {
    let per_ue = set
        .vectors
        .iter()
        .enumerate()
        .map(|(k, v)| se_for_combiner(v, &model.gain, &model.distortion_cov, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeReport::from_per_ue(per_ue))
}
