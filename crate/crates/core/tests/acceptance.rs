//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramimo::bussgang::{gaussian_moments, psd_floor, repeater_input_power, BussgangModel};
use ramimo::channel::{cn_unit, draw_realization, ChannelRealization};
use ramimo::combining::{da_combiner, se_for_combiner, se_optimal, CombinerRegistry};
use ramimo::config::RunConfig;
use ramimo::linalg::{hermitian_eigenvalues, real_trace, CVec};
use ramimo::oracle::{estimate_bussgang, estimate_received_cov, estimate_repeater_moments, estimate_residual_correlation};
use ramimo::report::sweep_csv;
use ramimo::sweep::{run_sweep, SweepResult};
use ramimo::{SeedPolicy, SystemParams};

const ORACLE_INSTANCES: u64 = 20;
const ORACLE_ALPHAS: [f64; 2] = [1.0, 1e3];
const ORACLE_RHOS: [f64; 2] = [0.0, -1e4];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn example(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn sweep(cfg: &RunConfig) -> SweepResult {
    run_sweep(&cfg.sweep_spec(&CombinerRegistry::with_defaults()).unwrap()).unwrap()
}

/// Small instances (M=4, K=2) drawn from the 200 m deployment.
fn oracle_instances() -> (SystemParams, Vec<ChannelRealization>) {
    let cfg = example("far_k4.toml");
    let params = SystemParams { num_bs_antennas: 4, num_ues: 2, ..cfg.system_params().unwrap() };
    let seeds = SeedPolicy::new(2024);
    let chans = (0..ORACLE_INSTANCES)
        .map(|i| draw_realization(&cfg.scenario(), &params, i, &seeds).unwrap())
        .collect();
    (params, chans)
}

fn operating_points() -> impl Iterator<Item = (f64, f64)> {
    ORACLE_ALPHAS.into_iter().flat_map(|a| ORACLE_RHOS.into_iter().map(move |r| (a, r)))
}

fn criterion_gain(base: &SystemParams, chans: &[ChannelRealization]) -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for (i, ch) in chans.iter().enumerate() {
        let t = Instant::now();
        for (j, (a, r)) in operating_points().enumerate() {
            let p = base.with_operating_point(a, r);
            let closed = BussgangModel::new(ch, &p).unwrap().gain;
            let est = estimate_bussgang(ch, &p, 1_000_000, 100 + 10 * i as u64 + j as u64).unwrap();
            worst = worst.max((&est.value - &closed).norm() / closed.norm());
        }
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    outcome(
        worst <= 0.02 && slowest <= 60.0,
        format!("worst rel. Frobenius error {worst:.3e} (tol 2e-2), slowest instance {slowest:.1} s (limit 60 s)"),
    )
}

fn criterion_cov(base: &SystemParams, chans: &[ChannelRealization]) -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for (i, ch) in chans.iter().enumerate() {
        let t = Instant::now();
        for (j, (a, r)) in operating_points().enumerate() {
            let p = base.with_operating_point(a, r);
            let closed = BussgangModel::new(ch, &p).unwrap().received_cov;
            let est = estimate_received_cov(ch, &p, 10_000_000, 500 + 10 * i as u64 + j as u64).unwrap();
            worst = worst.max((&est.value - &closed).norm() / closed.norm());
        }
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    outcome(
        worst <= 0.03 && slowest <= 300.0,
        format!("worst rel. Frobenius error {worst:.3e} (tol 3e-2), slowest instance {slowest:.1} s (limit 300 s)"),
    )
}

fn criterion_moments(base: &SystemParams, chans: &[ChannelRealization]) -> Outcome {
    let tol = [0.01, 0.02, 0.05];
    let mut worst = [0.0f64; 3];
    for (i, ch) in chans.iter().enumerate() {
        let exact = gaussian_moments(repeater_input_power(ch, base));
        let m = estimate_repeater_moments(ch, base, 10_000_000, 900 + i as u64).unwrap();
        for (w, (est, ex)) in worst.iter_mut().zip([m.m2.value, m.m4.value, m.m6.value].into_iter().zip(exact)) {
            *w = w.max((est / ex - 1.0).abs());
        }
    }
    outcome(
        worst.iter().zip(tol).all(|(w, t)| *w <= t),
        format!("worst rel. errors m2 {:.2e} m4 {:.2e} m6 {:.2e} (tol 1%/2%/5%)", worst[0], worst[1], worst[2]),
    )
}

fn criterion_uncorrelated(base: &SystemParams, chans: &[ChannelRealization]) -> Outcome {
    let mut worst = 0.0f64;
    for (i, ch) in chans.iter().enumerate() {
        for (j, (a, r)) in operating_points().enumerate() {
            let p = base.with_operating_point(a, r);
            let gain = BussgangModel::new(ch, &p).unwrap().gain;
            let est = estimate_residual_correlation(ch, &p, &gain, 1_000_000, 1300 + 10 * i as u64 + j as u64).unwrap();
            worst = worst.max(est.value.norm() / est.std_error);
        }
    }
    outcome(worst <= 3.0, format!("worst ||mean (y-Bs)s^H||_F / noise floor = {worst:.3} (tol 3)"))
}

fn criterion_psd() -> Outcome {
    let cfg = example("far_k4.toml");
    let base = cfg.system_params().unwrap();
    let alphas = cfg.alpha_grid();
    let mut rhos = cfg.sweep.rho.clone();
    rhos.push(-1e4);
    let seeds = SeedPolicy::new(77);
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for i in 0..1000u64 {
        let a = alphas[i as usize % alphas.len()];
        let r = rhos[(i as usize / alphas.len()) % rhos.len()];
        let ch = draw_realization(&cfg.scenario(), &base, i, &seeds).unwrap();
        let c_eta = BussgangModel::new(&ch, &base.with_operating_point(a, r)).unwrap().distortion_cov;
        let min_eig = hermitian_eigenvalues(&c_eta)[0];
        let scale = real_trace(&c_eta) / c_eta.nrows() as f64;
        if min_eig < psd_floor(&c_eta) {
            failures += 1;
        }
        worst_margin = worst_margin.min(min_eig / scale);
    }
    outcome(
        failures == 0,
        format!("{failures} of 1000 instances below floor; smallest min-eig / (trace/M) = {worst_margin:.3e} (floor -1e-8)"),
    )
}

fn criterion_optimality() -> Outcome {
    let cfg = example("far_k4.toml");
    let base = cfg.system_params().unwrap();
    let alphas = cfg.alpha_grid();
    let rhos = &cfg.sweep.rho;
    let seeds = SeedPolicy::new(31);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_margin = f64::INFINITY;
    let mut worst_agreement = 0.0f64;
    for i in 0..100u64 {
        let a = alphas[1 + rng.random_range(0..alphas.len() - 1)];
        let r = rhos[rng.random_range(0..rhos.len())];
        let ch = draw_realization(&cfg.scenario(), &base, i, &seeds).unwrap();
        let model = BussgangModel::new(&ch, &base.with_operating_point(a, r)).unwrap();
        let k = (i % base.num_ues as u64) as usize;
        let v = da_combiner(&model.gain, &model.distortion_cov, k).unwrap();
        let se_da = se_for_combiner(&v, &model.gain, &model.distortion_cov, k).unwrap();
        let se_opt = se_optimal(&model.gain, &model.distortion_cov, k).unwrap();
        worst_agreement = worst_agreement.max((se_opt - se_da).abs() / se_da.abs().max(f64::MIN_POSITIVE));
        let scale = v.norm() / (v.len() as f64).sqrt();
        for c in 0..100 {
            let noise: CVec = CVec::from_fn(v.len(), |_, _| cn_unit(&mut rng));
            let candidate = if c < 50 {
                noise
            } else {
                let eps = 10f64.powi(-(c as i32 - 50) / 5);
                &v + noise * Complex64::new(eps * scale, 0.0)
            };
            let se_c = se_for_combiner(&candidate, &model.gain, &model.distortion_cov, k).unwrap();
            worst_margin = worst_margin.min(se_da - se_c);
        }
    }
    outcome(
        worst_margin >= -1e-12 && worst_agreement <= 1e-9,
        format!("worst margin over 10^4 candidates {worst_margin:.3e} (>= -1e-12); se_optimal vs explicit {worst_agreement:.3e} (<= 1e-9)"),
    )
}

fn criterion_da_dominates() -> Outcome {
    let res = sweep(&example("far_k8.toml"));
    // DA is optimal by construction; where the two models nearly coincide the
    // comparison is decided by rounding, so allow the optimality margin.
    let mut worst = f64::INFINITY;
    let mut rho0_gap = 0.0f64;
    for &r in &res.rho_grid {
        let da = res.curve(r, "DA");
        let dua = res.curve(r, "DuA");
        for (d, u) in da.iter().zip(&dua) {
            worst = worst.min(d - u);
            if r == 0.0 {
                rho0_gap = rho0_gap.max((d - u).abs());
            }
        }
    }
    outcome(
        worst >= -1e-12 && rho0_gap <= 1e-12,
        format!("min DA - DuA over grid {worst:.3e} (>= -1e-12); max |DA - DuA| at rho=0 {rho0_gap:.1e} (<= 1e-12)"),
    )
}

fn best_relative_gain(res: &SweepResult, rho: f64) -> f64 {
    let da = res.curve(rho, "DA");
    let best = da.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best / da[0] - 1.0
}

fn criterion_shape(res: &SweepResult, wall: f64) -> Outcome {
    let most_negative = res.rho_grid.iter().copied().fold(0.0, f64::min);
    let top = res.curve(0.0, "DA");
    // (a) rho=0 topmost at every alpha, across all curves.
    let mut excess = (0.0f64, 0.0, 0.0);
    for &r in &res.rho_grid {
        for f in &res.flavors {
            for ((t, c), a) in top.iter().zip(res.curve(r, f)).zip(&res.alpha_grid) {
                if c - t > excess.0 {
                    excess = (c - t, *a, r);
                }
            }
        }
    }
    let a_ok = excess.0 <= 1e-12;
    // (b) DuA at the strongest compression peaks inside the grid, then
    // falls below the alpha=0 baseline.
    let dua = res.curve(most_negative, "DuA");
    let argmax = dua.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map(|(i, _)| i).unwrap();
    let baseline = dua[0];
    let b_ok = argmax > 0 && argmax + 1 < dua.len() && dua[argmax] > baseline && *dua.last().unwrap() < baseline;
    // (c) DA at its best alpha beats the baseline.
    let c_gain = best_relative_gain(res, most_negative);
    let c_ok = c_gain > 0.0;
    outcome(
        a_ok && b_ok && c_ok && wall <= 600.0,
        format!(
            "(a) rho=0 topmost: {a_ok} (largest excess {:.2e} at alpha={:.3e}, rho={}); (b) DuA rho={most_negative} peak at alpha={:.3e} ({:.3} vs baseline {baseline:.3}), end {:.3}: {b_ok}; (c) best DA gain {:+.2}%: {c_ok}; {wall:.0} s",
            excess.0,
            excess.1,
            excess.2,
            res.alpha_grid[argmax],
            dua[argmax],
            dua.last().unwrap(),
            100.0 * c_gain
        ),
    )
}

fn criterion_headroom(far: &SweepResult) -> Outcome {
    let near = sweep(&example("near_k8.toml"));
    let mut ok = true;
    let mut parts = Vec::new();
    for &r in &far.rho_grid {
        let (g1, g3) = (best_relative_gain(far, r), best_relative_gain(&near, r));
        ok &= g3 < g1;
        parts.push(format!("rho={r}: {:.2}% vs {:.2}%", 100.0 * g3, 100.0 * g1));
    }
    outcome(ok, format!("best-alpha DA gain, 100 m vs 200 m repeater: {}", parts.join(", ")))
}

fn criterion_determinism() -> Outcome {
    let mut cfg = example("far_k4.toml");
    cfg.sweep.realizations = 12;
    cfg.seed = 99;
    let spec = cfg.sweep_spec(&CombinerRegistry::with_defaults()).unwrap();
    let csv_for = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        sweep_csv(&pool.install(|| run_sweep(&spec)).unwrap())
    };
    let reference = csv_for(1);
    let runs = [csv_for(1), csv_for(2), csv_for(5)];
    let identical = runs.iter().all(|c| c.as_bytes() == reference.as_bytes());
    outcome(identical, format!("{} CSV bytes, re-run and 1/2/5 threads identical: {identical}", reference.len()))
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all &= o.passed;
        println!(
            "criterion {n:>2} {} {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };
    let (base, chans) = oracle_instances();
    report(1, "Bussgang gain vs Monte-Carlo", &mut || criterion_gain(&base, &chans));
    report(2, "received covariance vs Monte-Carlo", &mut || criterion_cov(&base, &chans));
    report(3, "Gaussian moment identities", &mut || criterion_moments(&base, &chans));
    report(4, "distortion uncorrelated with symbols", &mut || criterion_uncorrelated(&base, &chans));
    report(5, "distortion covariance PSD", &mut criterion_psd);
    report(6, "combiner optimality", &mut criterion_optimality);
    report(7, "DA >= DuA (K=8, 200 m)", &mut criterion_da_dominates);
    let t = Instant::now();
    let far = sweep(&example("far_k4.toml"));
    let far_wall = t.elapsed().as_secs_f64();
    report(8, "gain-sweep shape (K=4, 200 m)", &mut || criterion_shape(&far, far_wall));
    report(9, "less headroom with a 100 m repeater", &mut || criterion_headroom(&far));
    report(10, "byte-identical CSV across runs and thread counts", &mut criterion_determinism);
    if !all {
        std::process::exit(1);
    }
}
