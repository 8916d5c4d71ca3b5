//! `tmedia verify`: the acceptance battery.
//!
//! Each criterion is an independent job; jobs run on up to `workers` threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tmedia_core::bounds::{verify_sweep_bounds, EmbeddingConstants};
use tmedia_core::fixtures::{
    antisymmetric_rectangle, manufactured, radial_power, torsion_ball, torsion_plateau, zero_ball, Fixture, Profile,
    MANUFACTURED_AMPLITUDE,
};
use tmedia_core::flux::{
    boundary_trace_check, default_bump, flux_balance, jump_concentration, mean_trace, pairing_residual, sign_split,
    TraceStatus,
};
use tmedia_core::operator::{jacobian, residual};
use tmedia_core::solver::{continuation_sweep, solve_fixed_eps, Continuation, SweepResult};
use tmedia_core::{Grid, GridSpec, OperatorParams, ScalarField, SolverConfig};

use crate::config::RunConfig;
use crate::run::{execute, interior_mask, recover, RunOptions};
use crate::CliError;

/// Continuation schedule of the battery: `5e-2 * 2^-k`, `k < 14`, ending near `6.1e-6`.
pub const SCHEDULE: Continuation = Continuation { eps0: 0.05, factor: 0.5, count: 14 };
/// Wall-clock budget of the whole battery.
pub const SUITE_BUDGET_S: f64 = 600.0;

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub workers: usize,
    pub flip_flux_sign: bool,
    pub slack: f64,
    pub s1: Option<f64>,
    pub s1_tilde: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { workers: default_workers(), flip_flux_sign: false, slack: 1.1, s1: None, s1_tilde: None }
    }
}

/// `TM_WORKERS` if set to a positive integer, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("TM_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {:<28} {} ({:.2} s)", self.id, self.name, self.detail, self.seconds)
    }
}

type Outcome = Result<(bool, String), CliError>;

fn config(m: f64) -> SolverConfig {
    SolverConfig {
        params: OperatorParams { m, eps: SCHEDULE.eps0, delta: 0.0 },
        continuation: SCHEDULE,
        ..Default::default()
    }
}

fn sweep(fx: &Fixture, m: f64) -> Result<SweepResult, CliError> {
    let sw = continuation_sweep(&fx.f, &config(m))?;
    match &sw.failure {
        Some(fail) => {
            Err(CliError::Solver(format!("{}: sweep stopped at eps = {:e}: {}", fx.name, fail.eps, fail.message)))
        }
        None => Ok(sw),
    }
}

fn fixture1(n: usize) -> Result<Fixture, CliError> {
    Ok(radial_power(2, 1.0, 1.0, 1.0, n)?)
}

fn torsion_cases(n: usize) -> Result<Vec<(Fixture, f64)>, CliError> {
    Ok(vec![(torsion_ball(2, 1.0, 1.0, n)?, 1.0), (torsion_ball(3, 1.0, 2.0, n)?, 2.0)])
}

fn rectangle() -> Result<Fixture, CliError> {
    Ok(antisymmetric_rectangle(1.0, 1.0, 32, 32, 1.0)?)
}

fn rectangle_config() -> SolverConfig {
    SolverConfig { continuation: Continuation { count: 6, ..SCHEDULE }, ..config(1.0) }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn c1_exact_radial() -> Outcome {
    let t = Instant::now();
    let fx = fixture1(512)?;
    let sw = sweep(&fx, 1.0)?;
    let exact = fx.u_exact.as_ref().expect("exact solution");
    let errors: Vec<f64> = sw.solutions.iter().map(|s| s.u.max_distance(exact)).collect::<Result<_, _>>()?;
    let last3 = &errors[errors.len().saturating_sub(3)..];
    let final_eps = *sw.eps_values().last().expect("non-empty sweep");
    // non-increasing up to roundoff in the last digit
    let monotone = last3.len() == 3 && last3.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let elapsed = t.elapsed().as_secs_f64();
    let pass = final_eps <= 1e-4 && errors.last().is_some_and(|&e| e <= 5e-2) && monotone && elapsed <= 60.0;
    Ok((pass, format!("final eps {final_eps:.2e}, last errors {}, {elapsed:.2} s", fmt_list(last3))))
}

fn c2_torsion_plateau() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (fx, m) in torsion_cases(256)? {
        let sw = sweep(&fx, m)?;
        let target = torsion_plateau(fx.grid.dim(), 1.0, m);
        let med = sw.limit.median_where(|k| fx.grid.radius_of(k) < 0.5).unwrap_or(f64::NAN);
        pass &= (med - target).abs() <= 0.1 * target;
        detail.push(format!("N={} median {med:.4} vs {target:.4}", fx.grid.dim()));
    }
    let elapsed = t.elapsed().as_secs_f64();
    pass &= elapsed <= 120.0;
    Ok((pass, format!("{}, {elapsed:.2} s", detail.join("; "))))
}

fn c3_boundary_trace(flip: bool) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (fx, m) in torsion_cases(256)? {
        let cfg = config(m);
        let sw = sweep(&fx, m)?;
        let last = sw.final_solution().expect("non-empty sweep");
        let pair = recover(&sw.limit, &last.params, flip);
        let target = -1.0 / fx.grid.dim() as f64;
        let mean = mean_trace(&pair);
        let checks = boundary_trace_check(&pair, &sw.limit, m, 1e-3, 10.0 * cfg.newton_tol);
        let active: Vec<_> = checks.iter().filter(|c| c.status != TraceStatus::Skipped).collect();
        let signs = !active.is_empty() && active.iter().all(|c| c.trace <= 10.0 * cfg.newton_tol);
        pass &= (mean - target).abs() <= 0.1 * target.abs() && signs;
        detail.push(format!(
            "N={} mean trace {mean:.4} vs {target:.4}, sign ok on {}/{} faces",
            fx.grid.dim(),
            active.len(),
            checks.len()
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn c4_flux_balance(flip: bool) -> Outcome {
    let mut runs: Vec<(String, SweepResult, ScalarField)> = Vec::new();
    let fx = fixture1(512)?;
    runs.push(("radial-power".into(), sweep(&fx, 1.0)?, fx.f));
    for (fx, m) in torsion_cases(256)? {
        runs.push((format!("torsion N={}", fx.grid.dim()), sweep(&fx, m)?, fx.f));
    }
    let fx = rectangle()?;
    let sw = continuation_sweep(&fx.f, &rectangle_config())?;
    runs.push(("rectangle".into(), sw, fx.f));
    let fx = manufactured(Profile::Quartic, 2, 1.0, 1.0, 1e-2, 128, MANUFACTURED_AMPLITUDE)?;
    let cfg = SolverConfig { continuation: Continuation { eps0: 1e-2, factor: 0.5, count: 1 }, ..config(1.0) };
    runs.push(("manufactured".into(), continuation_sweep(&fx.f, &cfg)?, fx.f));
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, sw, f) in &runs {
        let last = sw.final_solution().expect("non-empty sweep");
        let rel = flux_balance(&recover(&sw.limit, &last.params, flip), f).abs() / f.lp_norm(1.0);
        pass &= sw.failure.is_none() && rel <= 1e-2;
        detail.push(format!("{name} {rel:.2e}"));
    }
    Ok((pass, format!("relative imbalance: {}", detail.join(", "))))
}

fn c5_pairing(flip: bool) -> Outcome {
    let fx = fixture1(512)?;
    let sw = sweep(&fx, 1.0)?;
    let phi = default_bump(&fx.grid, 0.8)?;
    let mut gaps = Vec::new();
    let mut worst_one_sided = f64::INFINITY;
    for sol in &sw.solutions {
        let pair = recover(&sol.u, &sol.params, flip);
        let p = pairing_residual(&sol.u, &pair, 0.1, &phi, 1.0)?;
        gaps.push(p.gap);
        worst_one_sided = worst_one_sided.min(p.lhs - p.rhs);
    }
    let last3 = &gaps[gaps.len().saturating_sub(3)..];
    let trend = last3.len() == 3 && last3.windows(2).all(|w| w[1] <= w[0]);
    let final_gap = *gaps.last().expect("non-empty sweep");
    let pass = final_gap <= 0.1 && trend && worst_one_sided >= -1e-3;
    Ok((pass, format!("last gaps {}, min lhs - rhs {worst_one_sided:.3e}", fmt_list(last3))))
}

fn c6_bounds(opts: &SuiteOptions) -> Outcome {
    let mut cases = vec![(fixture1(512)?, 1.0)];
    cases.extend(torsion_cases(256)?);
    let mut pass = true;
    let mut detail = Vec::new();
    for (fx, m) in cases {
        let sw = sweep(&fx, m)?;
        let d = EmbeddingConstants::defaults(fx.grid.dim());
        let consts = EmbeddingConstants { s1: opts.s1.unwrap_or(d.s1), s1_tilde: opts.s1_tilde.unwrap_or(d.s1_tilde) };
        let checks = verify_sweep_bounds(&sw, &fx.f, consts, opts.slack)?;
        let failed: Vec<String> =
            checks.iter().filter(|c| !c.passed()).map(|c| format!("{}@{:?}", c.name, c.eps)).collect();
        let active = checks.iter().filter(|c| c.bound.is_some()).count();
        pass &= failed.is_empty();
        detail.push(format!("{}: {active}/{} checked, failed {:?}", fx.name, checks.len(), failed));
    }
    Ok((pass, detail.join("; ")))
}

fn c7_sign_and_zero() -> Outcome {
    let fx = torsion_ball(2, 1.0, 1.0, 256)?;
    let cfg = config(1.0);
    let sw = sweep(&fx, 1.0)?;
    let min = sw.solutions.iter().map(|s| s.u.min()).fold(f64::INFINITY, f64::min);
    let zero = zero_ball(2, 1.0, 256)?;
    let z = solve_fixed_eps(&zero.f, &cfg, None)?;
    let exact_zero = z.u.values().iter().all(|&v| v == 0.0);
    let pass = min >= -10.0 * cfg.newton_tol && exact_zero && z.iterations == 1;
    Ok((pass, format!("min u {min:.3e}; f = 0: {} iteration(s), exact zero {exact_zero}", z.iterations)))
}

fn c8_uniqueness() -> Outcome {
    let fx = fixture1(512)?;
    let cfg = SolverConfig { params: OperatorParams { m: 1.0, eps: 1e-2, delta: 0.0 }, ..Default::default() };
    let a = solve_fixed_eps(&fx.f, &cfg, None)?;
    let start = ScalarField::from_fn(fx.grid.clone(), |c| 0.25 * (1.0 - c[0] * c[0]) * (3.0 * c[0]).cos())?;
    let b = solve_fixed_eps(&fx.f, &cfg, Some(&start))?;
    let d = a.u.max_distance(&b.u)?;
    Ok((d <= 10.0 * cfg.newton_tol, format!("max difference {d:.3e}")))
}

fn c9_mms_order() -> Outcome {
    let t = Instant::now();
    let cfg = SolverConfig { params: OperatorParams { m: 1.0, eps: 1e-2, delta: 0.0 }, ..Default::default() };
    let mut errors = Vec::new();
    for n in [64, 128, 256] {
        let fx = manufactured(Profile::Quartic, 2, 1.0, 1.0, 1e-2, n, MANUFACTURED_AMPLITUDE)?;
        let sol = solve_fixed_eps(&fx.f, &cfg, None)?;
        errors.push(sol.u.max_distance(fx.u_exact.as_ref().expect("exact"))?);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let elapsed = t.elapsed().as_secs_f64();
    let pass = orders.iter().all(|&p| p >= 1.5) && elapsed <= 60.0;
    Ok((pass, format!("errors {}, orders {}", fmt_list(&errors), fmt_list(&orders))))
}

/// Central-difference Taylor test; the best of a short ladder of steps is kept.
fn jacobian_error(u: &ScalarField, f: &ScalarField, p: &OperatorParams, dir: &[f64]) -> Result<f64, CliError> {
    let jd = jacobian(u, p).apply(dir);
    let mut best = f64::INFINITY;
    for step in [1e-6, 1e-7, 1e-8] {
        best = best.min(central_difference_error(u, f, p, dir, &jd, step)?);
    }
    Ok(best)
}

fn central_difference_error(
    u: &ScalarField,
    f: &ScalarField,
    p: &OperatorParams,
    dir: &[f64],
    jd: &[f64],
    step: f64,
) -> Result<f64, CliError> {
    let shifted = |s: f64| -> Result<Vec<f64>, CliError> {
        let v = u.values().iter().zip(dir).map(|(a, d)| a + s * step * d).collect();
        Ok(residual(&ScalarField::new(u.grid().clone(), v)?, f, p)?.into_values())
    };
    let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
    let num: f64 = plus.iter().zip(&minus).zip(jd).map(|((a, b), j)| ((a - b) / (2.0 * step) - j).powi(2)).sum();
    let den: f64 = jd.iter().map(|j| j * j).sum();
    Ok((num / den).sqrt())
}

fn c10_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(Fixture, f64)> = vec![
        (fixture1(512)?, 1.0),
        (torsion_ball(2, 1.0, 1.0, 256)?, 1.0),
        (torsion_ball(3, 1.0, 2.0, 256)?, 2.0),
        (manufactured(Profile::Quartic, 2, 1.0, 1.0, 1e-2, 256, MANUFACTURED_AMPLITUDE)?, 1.0),
        (rectangle()?, 1.0),
    ];
    let mut worst = 0.0f64;
    for (fx, m) in &cases {
        let p = OperatorParams::new(*m, 1e-2, 0.0)?;
        for _ in 0..10 {
            let vals = (0..fx.grid.num_cells())
                .map(|_| {
                    let v: f64 = rng.gen_range(0.05..1.0);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let u = ScalarField::new(fx.grid.clone(), vals)?;
            let dir: Vec<f64> = (0..fx.grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            worst = worst.max(jacobian_error(&u, &fx.f, &p, &dir)?);
        }
    }
    Ok((worst <= 1e-5, format!("worst relative error {worst:.3e} over {} grids", cases.len())))
}

fn c11_sign_changing() -> Outcome {
    let fx = rectangle()?;
    let cfg = rectangle_config();
    let sw = continuation_sweep(&fx.f, &cfg)?;
    if let Some(fail) = &sw.failure {
        return Ok((false, format!("sweep stopped at eps = {:e}", fail.eps)));
    }
    let g: &Arc<Grid> = &fx.grid;
    let u = sw.limit.values();
    let anti = (0..g.num_cells()).map(|k| (u[k] + u[g.mirror_y(k).expect("rectangle")]).abs()).fold(0.0, f64::max);
    let max = sw.limit.max_abs();
    let overlap = sign_split(&sw.limit, 1e-3).overlap_measure;
    let pass = anti <= 10.0 * cfg.newton_tol && max >= 1e-3 && overlap == 0.0;
    Ok((pass, format!("antisymmetry {anti:.2e}, max |u| {max:.3e}, overlap {overlap}")))
}

fn c12_jumps() -> Outcome {
    let mut fractions = Vec::new();
    for n in [64, 128, 256] {
        let fx = torsion_ball(2, 1.0, 1.0, n)?;
        let sw = sweep(&fx, 1.0)?;
        let mask = interior_mask(&fx.grid, 10);
        fractions.push(jump_concentration(&sw.limit, 1.0, 0.05, Some(&mask as &dyn Fn(usize) -> bool))?);
    }
    let g = Arc::new(Grid::new(GridSpec::radial(2, 1.0, 256))?);
    let step = ScalarField::from_fn(g, |c| if c[0] < 0.5 { 1.0 } else { 0.0 })?;
    let control = jump_concentration(&step, 1.0, 0.05, None)?;
    let pass = fractions.iter().all(|&f| f <= 0.5) && control > 0.9;
    Ok((pass, format!("fractions {} (n = 64, 128, 256), step control {control:.3}", fmt_list(&fractions))))
}

fn c13_determinism(flip: bool) -> Outcome {
    let cfg = RunConfig::for_fixture("torsion-ball:N=2,R=1,m=1,n=64");
    let opts = RunOptions { flip_flux_sign: flip };
    let a = execute(&cfg, opts)?.report.deterministic_json();
    let b = execute(&cfg, opts)?.report.deterministic_json();
    Ok((a == b, format!("report.json identical across two runs: {}", a == b)))
}

type Job = (u32, &'static str, Box<dyn Fn() -> Outcome + Send + Sync>);

fn jobs(opts: &SuiteOptions) -> Vec<Job> {
    let flip = opts.flip_flux_sign;
    let o = opts.clone();
    vec![
        (1, "exact radial solution", Box::new(c1_exact_radial)),
        (2, "torsion plateau", Box::new(c2_torsion_plateau)),
        (3, "boundary trace", Box::new(move || c3_boundary_trace(flip))),
        (4, "flux balance", Box::new(move || c4_flux_balance(flip))),
        (5, "pairing trend", Box::new(move || c5_pairing(flip))),
        (6, "bound suite", Box::new(move || c6_bounds(&o))),
        (7, "sign and triviality", Box::new(c7_sign_and_zero)),
        (8, "uniqueness", Box::new(c8_uniqueness)),
        (9, "manufactured order", Box::new(c9_mms_order)),
        (10, "jacobian check", Box::new(c10_jacobian)),
        (11, "sign-changing structure", Box::new(c11_sign_changing)),
        (12, "jump non-concentration", Box::new(c12_jumps)),
        (13, "runtime and determinism", Box::new(move || c13_determinism(flip))),
    ]
}

/// Runs every criterion; results are ordered by criterion number.
pub fn run_suite(opts: &SuiteOptions) -> Vec<CriterionResult> {
    let start = Instant::now();
    let jobs = jobs(opts);
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    let workers = opts.workers.clamp(1, jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, name, job)) = jobs.get(k) else { break };
                let t = Instant::now();
                let (pass, detail) = match job() {
                    Ok(r) => r,
                    Err(e) => (false, format!("error: {e}")),
                };
                let r = CriterionResult {
                    id: *id,
                    name: name.to_string(),
                    pass,
                    detail,
                    seconds: t.elapsed().as_secs_f64(),
                };
                results.lock().expect("result lock").push(r);
            });
        }
    });
    let mut results = results.into_inner().expect("result lock");
    results.sort_by_key(|r| r.id);
    let total = start.elapsed().as_secs_f64();
    if let Some(last) = results.iter_mut().find(|r| r.id == 13) {
        last.pass &= total <= SUITE_BUDGET_S;
        last.detail = format!("suite {total:.1} s (budget {SUITE_BUDGET_S} s); {}", last.detail);
    }
    results
}
