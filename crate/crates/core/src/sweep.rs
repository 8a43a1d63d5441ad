//! Sweeps over `(alpha, rho)` with Monte-Carlo averaging over channel
//! realizations.
//!
//! Each realization is drawn once and shared by every grid cell (common
//! random numbers). Realizations are the parallel work unit; per-cell
//! statistics are merged in realization order so that results do not
//! depend on the worker count.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bussgang::BussgangModel;
use crate::channel::{draw_realization, ChannelRealization};
use crate::combining::{evaluate, CellContext, CombinerStrategy};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, SystemParams};
use crate::seed::SeedPolicy;

/// Per-realization samples are kept when the grid has at most this many cells.
pub const MAX_RETAINED_CELLS: usize = 10_000;
/// Realizations evaluated between two merges.
const REALIZATION_CHUNK: u64 = 64;

/// `{0}` followed by `points - 1` log-spaced gains from `lo` to `hi`.
pub fn alpha_grid_with_zero(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend(log_grid(lo, hi, points.saturating_sub(1)));
    grid
}

/// `points` log-spaced values from `lo` to `hi`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i + 1 == points {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub alpha_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub num_realizations: u64,
    pub scenario: Scenario,
    /// `amp_gain` and `compression` are overridden by the grids.
    pub base_params: SystemParams,
    pub flavors: Vec<Arc<dyn CombinerStrategy>>,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() || self.rho_grid.is_empty() || self.flavors.is_empty() {
            return Err(Error::Config("alpha grid, rho grid and flavors must be non-empty".into()));
        }
        if self.num_realizations == 0 {
            return Err(Error::Config("num_realizations must be >= 1".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("alpha grid value {a} must be finite and >= 0")));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(**r <= 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("rho grid value {r} must be finite and <= 0")));
        }
        self.scenario.validate()?;
        self.base_params.validate()
    }

    pub fn num_cells(&self) -> usize {
        self.alpha_grid.len() * self.rho_grid.len() * self.flavors.len()
    }

    /// Flat index of `(alpha, rho, flavor)`.
    fn cell_index(&self, a: usize, r: usize, f: usize) -> usize {
        (a * self.rho_grid.len() + r) * self.flavors.len() + f
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellStats {
    pub alpha: f64,
    pub rho: f64,
    pub flavor: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for one sample).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub num_realizations: u64,
    /// Per-realization sum-SE, in realization order, when retained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Ordered by alpha, then rho, then flavor.
    pub cells: Vec<CellStats>,
    pub alpha_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub flavors: Vec<String>,
    pub num_realizations: u64,
    pub master_seed: u64,
}

impl SweepResult {
    pub fn cell(&self, alpha: f64, rho: f64, flavor: &str) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.alpha == alpha && c.rho == rho && c.flavor.eq_ignore_ascii_case(flavor))
    }

    /// Mean sum-SE over the alpha grid for one `(rho, flavor)`.
    pub fn curve(&self, rho: f64, flavor: &str) -> Vec<f64> {
        self.alpha_grid
            .iter()
            .map(|&a| self.cell(a, rho, flavor).map_or(f64::NAN, |c| c.mean))
            .collect()
    }
}

/// Sum-SE of one flavor at the operating point in `params`, evaluated under
/// the true model.
pub fn evaluate_cell(channels: &ChannelRealization, params: &SystemParams, flavor: &dyn CombinerStrategy) -> Result<f64> {
    let model = BussgangModel::new(channels, params)?;
    let ctx = CellContext { channels, params, model: &model };
    Ok(evaluate(&flavor.form(&ctx)?, &model)?.sum)
}

/// All grid cells of one realization, in `cell_index` order.
fn evaluate_realization(spec: &SweepSpec, index: u64, seeds: &SeedPolicy) -> Result<Vec<f64>> {
    let channels = draw_realization(&spec.scenario, &spec.base_params, index, seeds)
        .map_err(|e| Error::Cell { realization: index, alpha: f64::NAN, rho: f64::NAN, source: Box::new(e) })?;
    let mut out = vec![0.0; spec.num_cells()];
    for (ai, &alpha) in spec.alpha_grid.iter().enumerate() {
        for (ri, &rho) in spec.rho_grid.iter().enumerate() {
            let wrap = |e: Error| Error::Cell { realization: index, alpha, rho, source: Box::new(e) };
            let params = spec.base_params.with_operating_point(alpha, rho);
            let model = BussgangModel::new(&channels, &params).map_err(wrap)?;
            let ctx = CellContext { channels: &channels, params: &params, model: &model };
            for (fi, flavor) in spec.flavors.iter().enumerate() {
                let se = flavor.form(&ctx).and_then(|set| evaluate(&set, &model)).map_err(wrap)?;
                out[spec.cell_index(ai, ri, fi)] = se.sum;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Welford {
    fn new() -> Self {
        Self { n: 0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let seeds = SeedPolicy::new(spec.master_seed);
    let cells = spec.num_cells();
    let retain = cells <= MAX_RETAINED_CELLS;
    let mut stats = vec![Welford::new(); cells];
    let mut samples: Vec<Vec<f64>> = if retain { vec![Vec::new(); cells] } else { Vec::new() };

    let total = spec.num_realizations;
    let done = AtomicU64::new(0);
    let mut start = 0;
    while start < total {
        let end = (start + REALIZATION_CHUNK).min(total);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|r| {
                let row = evaluate_realization(spec, r, &seeds);
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n == total || n % (total / 10).max(1) == 0 {
                    log::info!("realizations completed: {n}/{total}");
                }
                row
            })
            .collect::<Result<_>>()?;
        for row in rows {
            for (i, x) in row.into_iter().enumerate() {
                stats[i].push(x);
                if retain {
                    samples[i].push(x);
                }
            }
        }
        start = end;
    }

    let mut out = Vec::with_capacity(cells);
    for (ai, &alpha) in spec.alpha_grid.iter().enumerate() {
        for (ri, &rho) in spec.rho_grid.iter().enumerate() {
            for (fi, flavor) in spec.flavors.iter().enumerate() {
                let i = spec.cell_index(ai, ri, fi);
                let w = stats[i];
                out.push(CellStats {
                    alpha,
                    rho,
                    flavor: flavor.name().to_string(),
                    mean: w.mean,
                    std: w.std(),
                    min: w.min,
                    max: w.max,
                    num_realizations: w.n,
                    samples: retain.then(|| std::mem::take(&mut samples[i])),
                });
            }
        }
    }
    Ok(SweepResult {
        cells: out,
        alpha_grid: spec.alpha_grid.clone(),
        rho_grid: spec.rho_grid.clone(),
        flavors: spec.flavors.iter().map(|f| f.name().to_string()).collect(),
        num_realizations: total,
        master_seed: spec.master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combining::{CombinerRegistry, DistortionAware, DistortionUnaware};

    fn small_spec(realizations: u64) -> SweepSpec {
        SweepSpec {
            alpha_grid: vec![0.0, 1e2, 1e4, 1e5],
            rho_grid: vec![0.0, -0.1, -1.0],
            num_realizations: realizations,
            scenario: Scenario::default(),
            base_params: SystemParams::reference(8, 3),
            flavors: CombinerRegistry::with_defaults().resolve(&["DA".into(), "DuA".into()]).unwrap(),
            master_seed: 21,
        }
    }

    #[test]
    fn grids() {
        let g = alpha_grid_with_zero(1.0, 1e5, 26);
        assert_eq!(g.len(), 26);
        assert_eq!((g[0], g[1], g[25]), (0.0, 1.0, 1e5));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_grid(1.0, 100.0, 3), vec![1.0, 10.0, 100.0]);
    }

    #[test]
    fn single_cell_matches_evaluate_cell() {
        let mut spec = small_spec(1);
        spec.alpha_grid = vec![3e4];
        spec.rho_grid = vec![-0.2];
        spec.flavors = vec![Arc::new(DistortionUnaware)];
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.cells.len(), 1);
        let ch = draw_realization(&spec.scenario, &spec.base_params, 0, &SeedPolicy::new(21)).unwrap();
        let params = spec.base_params.with_operating_point(3e4, -0.2);
        let want = evaluate_cell(&ch, &params, &DistortionUnaware).unwrap();
        assert_eq!(res.cells[0].mean, want);
        assert_eq!(res.cells[0].std, 0.0);
    }

    #[test]
    fn invariants_hold_cellwise() {
        let res = run_sweep(&small_spec(6)).unwrap();
        for &a in &res.alpha_grid {
            for &r in &res.rho_grid {
                let da = res.cell(a, r, "DA").unwrap();
                let dua = res.cell(a, r, "DuA").unwrap();
                let (sa, sd) = (da.samples.as_ref().unwrap(), dua.samples.as_ref().unwrap());
                for (x, y) in sa.iter().zip(sd) {
                    assert!(*x >= *y - 1e-12);
                }
                if r == 0.0 {
                    assert_eq!(sa, sd);
                }
                for c in [da, dua] {
                    assert!(c.mean >= c.min && c.mean <= c.max);
                    assert!(c.mean.is_finite() && c.min >= 0.0);
                }
            }
        }
        let baseline = res.cell(0.0, 0.0, "DA").unwrap().samples.clone().unwrap();
        for &r in &res.rho_grid {
            for f in ["DA", "DuA"] {
                let s = res.cell(0.0, r, f).unwrap().samples.as_ref().unwrap();
                for (x, y) in s.iter().zip(&baseline) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = small_spec(5);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_sweep(&spec).unwrap())
        };
        let (a, b) = (run(1), run(4));
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
            assert_eq!(x.std.to_bits(), y.std.to_bits());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small_spec(1);
        s.rho_grid = vec![0.5];
        assert!(run_sweep(&s).is_err());
        let mut s = small_spec(0);
        s.flavors = vec![Arc::new(DistortionAware)];
        assert!(run_sweep(&s).is_err());
        let mut s = small_spec(1);
        s.alpha_grid.clear();
        assert!(run_sweep(&s).is_err());
    }
}
