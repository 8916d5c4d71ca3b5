//! `tmedia run`: delta selection, continuation sweep, diagnostics and output files.

use std::fs;
use std::path::Path;
use std::time::Instant;

use tmedia_core::bounds::{bound_constants, verify_sweep_bounds, EmbeddingConstants};
use tmedia_core::fixtures::ExactKind;
use tmedia_core::flux::{
    boundary_trace_check, default_bump, divergence_residual, eps_gradient, flux_balance, flux_recover,
    jump_concentration, mean_trace, pairing_residual, sign_split, FluxPair, TraceStatus,
};
use tmedia_core::io::write_csv;
use tmedia_core::solver::{continuation_sweep, select_delta, StepKind, SweepResult};
use tmedia_core::{Error, Grid, GridSpec, OperatorParams, ScalarField};

use crate::config::{Problem, RunConfig};
use crate::plot;
use crate::report::{
    Check, Diagnostics, EpsEntry, ExactSummary, JumpSummary, RunReport, RunStatus, SignSplitSummary, SweepSummary,
    Timings, TraceSummary, SCHEMA_VERSION,
};
use crate::CliError;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Negates the recovered flux before the diagnostics (mutation control).
    pub flip_flux_sign: bool,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub problem: Problem,
    pub sweep: Option<SweepResult>,
}

/// `flux_recover`, optionally with the sign of `z` flipped.
pub fn recover(u: &ScalarField, p: &OperatorParams, flip: bool) -> FluxPair {
    let mut pair = flux_recover(u, p);
    if flip {
        pair.z = pair.z.scale(-1.0);
        pair.trace.iter_mut().for_each(|t| *t = -*t);
    }
    pair
}

/// Cells at least `layer` cells away from the boundary.
pub fn interior_mask(grid: &Grid, layer: usize) -> impl Fn(usize) -> bool + '_ {
    move |k| match *grid.spec() {
        GridSpec::RadialBall { cells, .. } => k + layer < cells,
        GridSpec::Rectangle { nx, ny, .. } => {
            let (i, j) = (k % nx, k / nx);
            i >= layer && j >= layer && i + layer < nx && j + layer < ny
        }
    }
}

/// `max |u(x, y) + u(x, Ly - y)|` if `f` is exactly antisymmetric and nonzero.
fn antisymmetry(f: &ScalarField, u: &ScalarField) -> Option<f64> {
    let g = f.grid();
    if g.is_radial() || f.max_abs() == 0.0 {
        return None;
    }
    let mirror = |k: usize| g.mirror_y(k).expect("rectangle");
    let fv = f.values();
    if (0..g.num_cells()).any(|k| fv[k] != -fv[mirror(k)]) {
        return None;
    }
    let uv = u.values();
    Some((0..g.num_cells()).map(|k| (uv[k] + uv[mirror(k)]).abs()).fold(0.0, f64::max))
}

fn radial_inner_median(u: &ScalarField) -> Option<f64> {
    let g = u.grid();
    match *g.spec() {
        GridSpec::RadialBall { radius, .. } => u.median_where(|k| g.radius_of(k) < 0.5 * radius),
        GridSpec::Rectangle { .. } => None,
    }
}

fn core_err(e: Error) -> CliError {
    match e {
        Error::Config(msg) | Error::Parse(msg) => CliError::Config(msg),
        other => CliError::Core(other),
    }
}

fn field_file(k: usize) -> String {
    format!("fields/u_{k:02}.csv")
}

/// Runs everything in memory; no files are written.
pub fn execute(cfg: &RunConfig, opts: RunOptions) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    let problem = cfg.load_problem()?;
    let fixture = problem.fixture.as_ref();
    let mut solver = cfg.effective_solver(fixture.map(|f| &f.meta))?;
    let f = &problem.f;
    let grid = problem.grid.clone();
    let mut timings = Timings::default();

    let t = Instant::now();
    let mut selected_delta = None;
    let mut early_failure = None;
    if solver.params.delta > 0.0 {
        match select_delta(f, &solver) {
            Ok(p) => {
                solver.params = p;
                selected_delta = Some(p.delta);
            }
            Err(e @ (Error::NonConvergence(_) | Error::DeltaSelection { .. } | Error::Singular(_))) => {
                early_failure =
                    Some(tmedia_core::solver::SweepFailure { eps: solver.params.eps, message: e.to_string() })
            }
            Err(e) => return Err(core_err(e)),
        }
    }
    timings.select_delta_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sweep = match early_failure {
        Some(_) => None,
        None => Some(continuation_sweep(f, &solver).map_err(core_err)?),
    };
    timings.sweep_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut checks = Vec::new();
    let mut diagnostics =
        Diagnostics { f_l1: f.lp_norm(1.0), flux_sign_flipped: opts.flip_flux_sign, ..Default::default() };
    let mut entries = Vec::new();
    let mut bounds = None;
    let mut exact = None;
    let consts = {
        let d = EmbeddingConstants::defaults(grid.dim());
        EmbeddingConstants { s1: cfg.s1.unwrap_or(d.s1), s1_tilde: cfg.s1_tilde.unwrap_or(d.s1_tilde) }
    };
    let f_nonneg = f.min() >= 0.0;
    let u_exact = if cfg.diagnostics.exact { fixture.and_then(|fx| fx.u_exact.as_ref()) } else { None };

    if let Some(sw) = &sweep {
        let phi = default_bump(&grid, cfg.bump_fraction).map_err(core_err)?;
        for (k, sol) in sw.solutions.iter().enumerate() {
            let eps = Some(sol.params.eps);
            let pair = recover(&sol.u, &sol.params, opts.flip_flux_sign);
            let divergence = if cfg.diagnostics.divergence {
                let d = divergence_residual(&pair, f, &eps_gradient(&sol.u, sol.params.eps)).map_err(core_err)?;
                checks.push(Check::at_most("divergence_full", eps, d.full, sol.tolerance));
                Some(d)
            } else {
                None
            };
            let pairing = if cfg.diagnostics.pairing {
                let p = pairing_residual(&sol.u, &pair, cfg.pairing_level, &phi, sol.params.m).map_err(core_err)?;
                // the regularized flux may undershoot |grad| by eps |u|^m per unit face measure
                let reg = sol.params.eps
                    * sol.u.max_abs().powf(sol.params.m)
                    * phi.max()
                    * grid.measure()
                    * grid.dim() as f64;
                if f_nonneg {
                    checks.push(Check::at_least("pairing_one_sided", eps, p.lhs - p.rhs, -(cfg.pairing_tol + reg)));
                } else {
                    // a sign-changing jump face carries a zero coefficient
                    checks.push(Check::skipped("pairing_one_sided", eps, p.lhs - p.rhs));
                }
                Some(p)
            } else {
                None
            };
            if f_nonneg {
                checks.push(Check::at_least("nonnegative", eps, sol.u.min(), -10.0 * solver.newton_tol));
            }
            if let Some(a) = antisymmetry(f, &sol.u) {
                checks.push(Check::at_most("antisymmetry", eps, a, 10.0 * solver.newton_tol));
            }
            let count = |kind| sol.trace.iter().filter(|r| r.step == Some(kind)).count();
            entries.push(EpsEntry {
                eps: sol.params.eps,
                delta: sol.params.delta,
                iterations: sol.iterations,
                newton_steps: count(StepKind::Newton),
                picard_steps: count(StepKind::Picard),
                residual_norm: sol.residual_norm,
                tolerance: sol.tolerance,
                energy: sol.energy,
                min: sol.u.min(),
                max: sol.u.max(),
                median: sol.u.median_where(|_| true).unwrap_or(0.0),
                cauchy_gap: k.checked_sub(1).map(|j| sw.cauchy_gaps[j]),
                divergence,
                pairing,
                max_error: u_exact.map(|e| sol.u.max_distance(e)).transpose().map_err(core_err)?,
                l1_error: u_exact.map(|e| sol.u.l1_distance(e)).transpose().map_err(core_err)?,
                field_file: field_file(k),
            });
        }

        if cfg.diagnostics.bounds {
            checks
                .extend(verify_sweep_bounds(sw, f, consts, cfg.slack).map_err(core_err)?.into_iter().map(Check::from));
        }

        if let Some(last) = sw.final_solution() {
            let u = &sw.limit;
            let m = last.params.m;
            let eps = Some(last.params.eps);
            if cfg.diagnostics.bounds {
                bounds = Some(bound_constants(f, m, last.params.eps, consts).map_err(core_err)?);
            }
            let pair = recover(u, &last.params, opts.flip_flux_sign);

            let balance = flux_balance(&pair, f);
            diagnostics.flux_balance = Some(balance);
            checks.push(Check::at_most("flux_balance", eps, balance.abs(), 1e-2 * diagnostics.f_l1));

            if cfg.diagnostics.trace {
                let tc = boundary_trace_check(&pair, u, m, cfg.trace_threshold, 10.0 * solver.newton_tol);
                let active: Vec<_> = tc.iter().filter(|c| c.status != TraceStatus::Skipped).collect();
                let max_trace = active.iter().map(|c| c.trace).fold(f64::NEG_INFINITY, f64::max);
                let worst = active
                    .iter()
                    .map(|c| (c.trace - c.expected).abs() / c.plateau.abs().powf(m))
                    .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
                let n = tc.len().max(1) as f64;
                diagnostics.trace = Some(TraceSummary {
                    threshold: cfg.trace_threshold,
                    faces_checked: active.len(),
                    faces_skipped: tc.len() - active.len(),
                    mean_trace: mean_trace(&pair),
                    max_trace: if active.is_empty() { 0.0 } else { max_trace },
                    mean_plateau: tc.iter().map(|c| c.plateau).sum::<f64>() / n,
                    worst_magnitude_error: worst,
                });
                if f_nonneg && !active.is_empty() {
                    checks.push(Check::at_most("trace_sign", eps, max_trace, 10.0 * solver.newton_tol));
                } else {
                    checks.push(Check::skipped("trace_sign", eps, max_trace.max(0.0)));
                }
                // magnitude is asserted only where the reference limit itself
                // keeps a plateau at the boundary
                let plateau_at_boundary = u_exact.is_some_and(|e| {
                    grid.boundary_faces()
                        .iter()
                        .all(|&b| grid.inward_cell(b, 0).is_some_and(|c| e.values()[c].abs() > cfg.trace_threshold))
                });
                match worst {
                    Some(w) if plateau_at_boundary => checks.push(Check::at_most("trace_magnitude", eps, w, 0.1)),
                    w => checks.push(Check::skipped("trace_magnitude", eps, w.unwrap_or(0.0))),
                }
            }

            if cfg.diagnostics.jump {
                let mask = interior_mask(&grid, cfg.jump_layer);
                let any = (0..grid.num_cells()).any(&mask);
                let fraction = if any {
                    Some(jump_concentration(u, m, cfg.jump_quantile, Some(&mask)).map_err(core_err)?)
                } else {
                    None
                };
                diagnostics.jump =
                    Some(JumpSummary { quantile: cfg.jump_quantile, layer_cells: cfg.jump_layer, fraction });
                match fraction {
                    Some(fr) if f_nonneg => checks.push(Check::at_most("jump_fraction", eps, fr, 0.5)),
                    Some(fr) => checks.push(Check::skipped("jump_fraction", eps, fr)),
                    None => checks.push(Check::skipped("jump_fraction", eps, 0.0)),
                }
            }

            if cfg.diagnostics.sign_split {
                let s = sign_split(u, cfg.trace_threshold);
                checks.push(Check::at_most("sign_split_overlap", eps, s.overlap_measure, 0.0));
                diagnostics.sign_split = Some(SignSplitSummary {
                    threshold: cfg.trace_threshold,
                    overlap_measure: s.overlap_measure,
                    pos_max: s.pos.max(),
                    neg_max: s.neg.max(),
                });
            }

            if let Some(a) = antisymmetry(f, u) {
                diagnostics.antisymmetry = Some(a);
                checks.push(Check::at_least("nontrivial", eps, u.max_abs(), 1e-3));
            }
            if f.max_abs() == 0.0 {
                checks.push(Check::at_most("zero_solution", eps, u.max_abs(), 0.0));
            }

            if let (Some(e), Some(fx)) = (u_exact, fixture) {
                let kind = fx.exact_kind.unwrap_or(ExactKind::LimitSolution);
                let summary = ExactSummary {
                    kind,
                    max_error: u.max_distance(e).map_err(core_err)?,
                    l1_error: u.l1_distance(e).map_err(core_err)?,
                    interior_median: radial_inner_median(u),
                    exact_interior_median: radial_inner_median(e),
                };
                let constant = e.values().iter().all(|&v| v == e.values()[0]) && e.values()[0] != 0.0;
                match (constant, summary.interior_median) {
                    (true, Some(med)) => {
                        let c = e.values()[0];
                        checks.push(Check::at_most("plateau", eps, (med - c).abs(), 0.1 * c.abs()));
                    }
                    _ => checks.push(Check::at_most("max_error", eps, summary.max_error, 5e-2)),
                }
                exact = Some(summary);
            }
        }
    }
    timings.diagnostics_s = t.elapsed().as_secs_f64();

    let failure = early_failure.or_else(|| sweep.as_ref().and_then(|s| s.failure.clone()));
    let status = if failure.is_some() {
        RunStatus::NonConvergence
    } else if checks.iter().any(|c| !c.pass) {
        RunStatus::AssertionFailure
    } else {
        RunStatus::Pass
    };
    let sweep_summary = match &sweep {
        Some(sw) => SweepSummary {
            entries,
            cauchy_tol: sw.cauchy_tol,
            declared_at: sw.declared_at,
            declared_converged: sw.declared_converged,
            failure,
        },
        None => SweepSummary {
            entries,
            cauchy_tol: solver.cauchy_tol_for(&grid),
            declared_at: None,
            declared_converged: false,
            failure,
        },
    };
    timings.total_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        problem: problem.label.clone(),
        config: cfg.clone(),
        solver: solver.clone(),
        selected_delta,
        bounds,
        sweep: sweep_summary,
        diagnostics,
        exact,
        checks,
        status,
        exit_code: status.exit_code(),
        timings,
    };
    Ok(RunOutcome { report, problem, sweep })
}

/// Writes `report.json`, the CSV dumps and (optionally) the plots into `dir`.
pub fn write_outputs(outcome: &mut RunOutcome, dir: &Path, plots: bool) -> Result<(), CliError> {
    let t = Instant::now();
    let fields = dir.join("fields");
    fs::create_dir_all(&fields)?;
    let dump = |name: &str, u: &ScalarField| -> Result<(), CliError> {
        let file = fs::File::create(dir.join(name))?;
        write_csv(u, std::io::BufWriter::new(file)).map_err(CliError::Core)
    };
    dump("fields/f.csv", &outcome.problem.f)?;
    if let Some(e) = outcome.problem.fixture.as_ref().and_then(|fx| fx.u_exact.as_ref()) {
        dump("fields/u_exact.csv", e)?;
    }
    if let Some(sw) = &outcome.sweep {
        for (k, sol) in sw.solutions.iter().enumerate() {
            dump(&field_file(k), &sol.u)?;
        }
        if plots {
            let pdir = dir.join("plots");
            fs::create_dir_all(&pdir)?;
            let exact = outcome.problem.fixture.as_ref().and_then(|fx| fx.u_exact.as_ref());
            if let Some(last) = sw.final_solution() {
                fs::write(pdir.join("solution.svg"), plot::solution_svg(&last.u, exact, &outcome.report.problem))?;
            }
            fs::write(pdir.join("convergence.svg"), plot::convergence_svg(&outcome.report.sweep))?;
        }
    }
    outcome.report.timings.output_s = t.elapsed().as_secs_f64();
    outcome.report.timings.total_s += outcome.report.timings.output_s;
    let json = serde_json::to_string_pretty(&outcome.report)?;
    fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}
