//! Uplink repeater-assisted massive MIMO with a third-order repeater power
//! amplifier.
//!
//! The crate computes the Bussgang decomposition of the BS received signal
//! in closed form, forms distortion-aware (DA) and distortion-unaware (DuA)
//! receive combiners, evaluates the achievable spectral efficiency and runs
//! amplification-gain sweeps over random deployments. Every closed form has
//! a brute-force Monte-Carlo counterpart in [`oracle`].

pub mod bussgang;
pub mod channel;
pub mod cli;
pub mod combining;
pub mod config;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod sweep;
pub mod validation;

pub use bussgang::{BussgangModel, OperatingPoint};
pub use channel::{draw_realization, ChannelRealization};
pub use combining::{CombinerRegistry, CombinerStrategy, SeReport};
pub use error::{Error, Result};
pub use scenario::{Scenario, SystemParams};
pub use seed::SeedPolicy;
pub use sweep::{run_sweep, SweepResult, SweepSpec};
