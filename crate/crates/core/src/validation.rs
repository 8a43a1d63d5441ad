//! Closed form vs Monte-Carlo cross-checks for one realization.

use serde::Serialize;

use crate::bussgang::{
    gaussian_moments, psd_floor, repeater_input_power, third_order_cross_moment, third_order_cross_moment_expanded,
    BussgangModel,
};
use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::linalg::hermitian_eigenvalues;
use crate::report::fmt_g12;
use crate::oracle::{
    estimate_bussgang, estimate_cross_third_order, estimate_received_cov, estimate_repeater_moments,
    estimate_residual_correlation,
};
use crate::scenario::SystemParams;

pub const GAIN_REL_TOL: f64 = 0.02;
pub const COV_REL_TOL: f64 = 0.03;
pub const MOMENT_REL_TOL: [f64; 3] = [0.01, 0.02, 0.05];
/// Residual correlation may not exceed this many noise floors.
pub const UNCORRELATED_FLOOR_FACTOR: f64 = 3.0;
/// Cross third-order estimate must lie within this many standard errors.
pub const CROSS_SIGMAS: f64 = 5.0;
/// Agreement between the two closed-form routes.
pub const ROUTE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct SampleCounts {
    /// For `B` and the residual correlation.
    pub gain: u64,
    /// For `C_y`, the input moments and the third-order cross-moment.
    pub covariance: u64,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self { gain: 1_000_000, covariance: 10_000_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub family: &'static str,
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Closed-form reference (a norm for matrix quantities).
    pub closed_form: f64,
    /// Estimate (a norm for matrix quantities).
    pub estimate: f64,
    /// The statistic compared against `tolerance`.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub num_samples: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn families(&self) -> Vec<&'static str> {
        let mut f: Vec<&'static str> = self.checks.iter().map(|c| c.family).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let at = match (c.alpha, c.rho) {
                (Some(a), Some(r)) => format!(" alpha={} rho={}", fmt_g12(a), fmt_g12(r)),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{} {:<18} {:<31}{at} closed={:.6e} estimate={:.6e} error={:.3e} tol={:.3e} N={}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.family,
                c.quantity,
                c.closed_form,
                c.estimate,
                c.error,
                c.tolerance,
                c.num_samples,
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

/// Runs every oracle against the closed forms: realization-level moment
/// checks once, then gain, covariance, PSD and uncorrelatedness checks at
/// each `(alpha, rho)`. Seeds are derived from `seed` and the check index.
pub fn validate_realization(
    channels: &ChannelRealization,
    base: &SystemParams,
    alphas: &[f64],
    rhos: &[f64],
    samples: SampleCounts,
    seed: u64,
) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut next_seed = seed;
    let mut fresh = || {
        next_seed = next_seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        next_seed
    };

    let pr = repeater_input_power(channels, base);
    let moments = estimate_repeater_moments(channels, base, samples.covariance, fresh())?;
    let exact = gaussian_moments(pr);
    for (i, (name, est)) in [("m2", &moments.m2), ("m4", &moments.m4), ("m6", &moments.m6)].into_iter().enumerate() {
        let err = (est.value / exact[i] - 1.0).abs();
        checks.push(Check {
            family: "moments",
            quantity: format!("{name} = E|u~|^{}", 2 * (i + 1)),
            alpha: None,
            rho: None,
            closed_form: exact[i],
            estimate: est.value,
            error: err,
            tolerance: MOMENT_REL_TOL[i],
            passed: err <= MOMENT_REL_TOL[i],
            num_samples: est.num_samples,
        });
    }

    for n in 0..base.num_bs_antennas {
        let consolidated = third_order_cross_moment(channels, base, n);
        let expanded = third_order_cross_moment_expanded(channels, base, n);
        let routes_agree = (consolidated - expanded).norm() <= ROUTE_REL_TOL * consolidated.norm().max(f64::MIN_POSITIVE);
        let est = estimate_cross_third_order(channels, base, samples.covariance, fresh(), n)?;
        let sigmas = if est.std_error > 0.0 {
            (est.value - consolidated).norm() / est.std_error
        } else if (est.value - consolidated).norm() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        checks.push(Check {
            family: "cross_third_order",
            quantity: format!("antenna {n} (std errors)"),
            alpha: None,
            rho: None,
            closed_form: consolidated.norm(),
            estimate: est.value.norm(),
            error: sigmas,
            tolerance: CROSS_SIGMAS,
            passed: routes_agree && sigmas <= CROSS_SIGMAS,
            num_samples: est.num_samples,
        });
    }

    for &alpha in alphas {
        for &rho in rhos {
            let params = base.with_operating_point(alpha, rho);
            let (a, r) = (Some(alpha), Some(rho));
            let model = BussgangModel::new(channels, &params)?;

            let est = estimate_bussgang(channels, &params, samples.gain, fresh())?;
            let err = (&est.value - &model.gain).norm() / model.gain.norm();
            checks.push(Check {
                family: "bussgang_gain",
                quantity: "||B_mc - B|| / ||B||".into(),
                alpha: a,
                rho: r,
                closed_form: model.gain.norm(),
                estimate: est.value.norm(),
                error: err,
                tolerance: GAIN_REL_TOL,
                passed: err <= GAIN_REL_TOL,
                num_samples: est.num_samples,
            });

            let est = estimate_received_cov(channels, &params, samples.covariance, fresh())?;
            let err = (&est.value - &model.received_cov).norm() / model.received_cov.norm();
            checks.push(Check {
                family: "received_cov",
                quantity: "||C_y,mc - C_y|| / ||C_y||".into(),
                alpha: a,
                rho: r,
                closed_form: model.received_cov.norm(),
                estimate: est.value.norm(),
                error: err,
                tolerance: COV_REL_TOL,
                passed: err <= COV_REL_TOL,
                num_samples: est.num_samples,
            });

            let min_eig = hermitian_eigenvalues(&model.distortion_cov)[0];
            let floor = psd_floor(&model.distortion_cov);
            checks.push(Check {
                family: "distortion_psd",
                quantity: "min eig(C_eta)".into(),
                alpha: a,
                rho: r,
                closed_form: min_eig,
                estimate: min_eig,
                error: -min_eig,
                tolerance: -floor,
                passed: min_eig >= floor,
                num_samples: 0,
            });

            let est = estimate_residual_correlation(channels, &params, &model.gain, samples.gain, fresh())?;
            let ratio = if est.std_error > 0.0 { est.value.norm() / est.std_error } else { 0.0 };
            checks.push(Check {
                family: "uncorrelatedness",
                quantity: "||mean (y - B s) s^H|| / floor".into(),
                alpha: a,
                rho: r,
                closed_form: 0.0,
                estimate: est.value.norm(),
                error: ratio,
                tolerance: UNCORRELATED_FLOOR_FACTOR,
                passed: ratio <= UNCORRELATED_FLOOR_FACTOR,
                num_samples: est.num_samples,
            });
        }
    }
    Ok(ValidationReport { checks })
}
