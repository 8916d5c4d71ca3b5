//! Damped Newton solves at fixed `eps`, truncation-level selection and the
//! vanishing-viscosity continuation in `eps`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::banded::SparseOperator;
use crate::calculus::{face_gradient, face_value};
use crate::error::{config_err, Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::operator::{energy_frozen_raw, jacobian_raw, lagrangian, residual_raw, OperatorParams};

/// Geometric schedule `eps_k = eps0 * factor^k`, `k = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub eps0: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for Continuation {
    fn default() -> Self {
        Continuation { eps0: 0.1, factor: 0.5, count: 12 }
    }
}

impl Continuation {
    pub fn schedule(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.eps0 * self.factor.powi(k as i32)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub params: OperatorParams,
    /// Absolute residual target, scaled by `max(|f|_inf, 1)`.
    pub newton_tol: f64,
    /// Multiple of machine epsilon allowed per cell on top of `newton_tol`,
    /// relative to `(|J| |u| + |f|)_i`.
    pub roundoff_factor: f64,
    pub max_newton: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub picard_fallback: bool,
    pub continuation: Continuation,
    /// L1 Cauchy-gap threshold; `None` means `1e-3 |Omega|`.
    pub cauchy_tol: Option<f64>,
    pub max_delta_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            params: OperatorParams { m: 1.0, eps: 0.1, delta: 0.0 },
            newton_tol: 1e-10,
            roundoff_factor: 64.0,
            max_newton: 200,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            picard_fallback: true,
            continuation: Continuation::default(),
            cauchy_tol: None,
            max_delta_rounds: 20,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("newton_tol", self.newton_tol),
            ("roundoff_factor", self.roundoff_factor),
            ("armijo", self.armijo),
            ("continuation.eps0", self.continuation.eps0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return config_err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return config_err(format!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        let g = self.continuation.factor;
        if !(g > 0.0 && g < 1.0) {
            return config_err(format!("continuation factor must lie in (0, 1), got {g}"));
        }
        if self.continuation.count == 0 || self.max_newton == 0 {
            return config_err("continuation.count and max_newton must be at least 1");
        }
        if let Some(t) = self.cauchy_tol {
            if !(t > 0.0) {
                return config_err(format!("cauchy_tol must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn with_params(&self, params: OperatorParams) -> Self {
        SolverConfig { params, ..self.clone() }
    }

    pub fn cauchy_tol_for(&self, grid: &Grid) -> f64 {
        self.cauchy_tol.unwrap_or(1e-3 * grid.measure())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Newton,
    Picard,
}

/// One Newton iteration: the state on entry and the step taken from it, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    pub energy: f64,
    pub step: Option<StepKind>,
    pub alpha: f64,
    /// Frozen-coefficient energy before and after the step (see [`crate::operator::energy_frozen`]).
    pub frozen_energy_before: f64,
    pub frozen_energy_after: f64,
    /// Roundoff allowance on `frozen_energy_after - frozen_energy_before`.
    pub energy_slack: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: ScalarField,
    pub params: OperatorParams,
    /// Newton iterations, counting the one that detected convergence.
    pub iterations: usize,
    pub residual_norm: f64,
    /// Largest per-cell tolerance that was in force at convergence.
    pub tolerance: f64,
    pub energy: f64,
    pub converged: bool,
    pub trace: Vec<IterRecord>,
}

#[derive(Clone, Debug)]
pub struct NonConvergence {
    pub iterate: ScalarField,
    pub params: OperatorParams,
    pub residual_norm: f64,
    pub iterations: usize,
    pub reason: String,
    pub trace: Vec<IterRecord>,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no convergence at eps = {:e} after {} iterations (residual {:e}): {}",
            self.params.eps, self.iterations, self.residual_norm, self.reason
        )
    }
}

/// Multiple of `eps_mach * sum |energy terms|` tolerated as energy increase.
const ENERGY_ROUNDOFF: f64 = 1024.0;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn merit(r: &[f64], vol: &[f64]) -> f64 {
    0.5 * r.iter().zip(vol).map(|(a, w)| a * a * w).sum::<f64>()
}

/// Solves `-eps Lap u = f` with the homogeneous Dirichlet condition.
pub fn eps_laplacian_start(f: &ScalarField, p: &OperatorParams) -> Result<ScalarField> {
    let grid = f.grid();
    let zero = vec![0.0; grid.num_cells()];
    // at u = 0 the coefficient vanishes, leaving eps times the Laplacian stencil
    let lap = jacobian_raw(grid, &zero, p, false);
    ScalarField::new(grid.clone(), lap.solve(f.values())?)
}

struct Step {
    u: Vec<f64>,
    r: Vec<f64>,
    alpha: f64,
    kind: StepKind,
    frozen_after: f64,
}

struct Newton<'a> {
    grid: &'a Grid,
    f: &'a [f64],
    p: OperatorParams,
    cfg: &'a SolverConfig,
}

impl Newton<'_> {
    /// Roundoff allowance when comparing frozen energies at `u`.
    fn energy_slack(&self, u: &[f64]) -> f64 {
        let faces: f64 = self
            .grid
            .faces()
            .iter()
            .map(|face| {
                let s = face_value(face.kind, u);
                let g = face_gradient(face.kind, face.spacing, u);
                lagrangian(s, g, &self.p) * face.measure()
            })
            .sum();
        let load: f64 = u.iter().zip(self.f).zip(self.grid.volumes()).map(|((a, b), w)| (a * b * w).abs()).sum();
        ENERGY_ROUNDOFF * f64::EPSILON * (faces + load)
    }

    /// Newton step accepted when it passes Armijo on the residual merit and
    /// does not raise the frozen-coefficient energy.
    fn newton_step(&self, u: &[f64], r: &[f64], jac: &SparseOperator, e0: f64, slack: f64) -> Option<Step> {
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = jac.solve(&rhs).ok()?;
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        let vol = self.grid.volumes();
        let phi0 = merit(r, vol);
        let mut alpha = 1.0;
        for _ in 0..=self.cfg.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let rt = residual_raw(self.grid, &trial, self.f, &self.p);
            if rt.iter().all(|v| v.is_finite()) && merit(&rt, vol) <= (1.0 - 2.0 * self.cfg.armijo * alpha) * phi0 {
                let frozen_after = energy_frozen_raw(self.grid, u, &trial, self.f, &self.p);
                if frozen_after <= e0 + slack {
                    return Some(Step { u: trial, r: rt, alpha, kind: StepKind::Newton, frozen_after });
                }
            }
            alpha *= self.cfg.backtrack;
        }
        None
    }

    /// Gradient step on the convex frozen-coefficient energy, preconditioned by its Hessian.
    fn picard_step(&self, u: &[f64], r: &[f64], e0: f64) -> Option<Step> {
        let jac = jacobian_raw(self.grid, u, &self.p, false);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = jac.solve(&rhs).ok()?;
        let vol = self.grid.volumes();
        let slope: f64 = r.iter().zip(vol).zip(&d).map(|((a, w), b)| a * w * b).sum();
        if !(slope < 0.0) {
            return None;
        }
        let mut alpha = 1.0;
        for _ in 0..=self.cfg.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let e = energy_frozen_raw(self.grid, u, &trial, self.f, &self.p);
            if e.is_finite() && e <= e0 + self.cfg.armijo * alpha * slope {
                let rt = residual_raw(self.grid, &trial, self.f, &self.p);
                return Some(Step { u: trial, r: rt, alpha, kind: StepKind::Picard, frozen_after: e });
            }
            alpha *= self.cfg.backtrack;
        }
        None
    }
}

/// Damped Newton solve of `-div A(u, grad u) = f` at the configured `eps` and `delta`.
///
/// Convergence is declared cell by cell once
/// `|F_i| <= newton_tol * max(|f|_inf, 1) + roundoff_factor * eps_mach * ((|J| |u|)_i + |f_i|)`.
pub fn solve_fixed_eps(f: &ScalarField, cfg: &SolverConfig, warm_start: Option<&ScalarField>) -> Result<Solution> {
    cfg.validate()?;
    if !f.all_finite() {
        return config_err("right-hand side has non-finite values");
    }
    let p = cfg.params;
    let grid = f.grid().as_ref();
    let mut u = match warm_start {
        Some(w) => {
            w.check_same_grid(f)?;
            w.values().to_vec()
        }
        None => eps_laplacian_start(f, &p)?.into_values(),
    };
    let fv = f.values();
    let tol_abs = cfg.newton_tol * max_abs(fv).max(1.0);
    let solver = Newton { grid, f: fv, p, cfg };
    let mut r = residual_raw(grid, &u, fv, &p);
    let mut trace = Vec::new();

    for iteration in 1..=cfg.max_newton {
        let res_norm = max_abs(&r);
        let jac = jacobian_raw(grid, &u, &p, true);
        let ju = jac.abs_apply(&u);
        let tol: Vec<f64> =
            ju.iter().zip(fv).map(|(a, b)| tol_abs + cfg.roundoff_factor * f64::EPSILON * (a + b.abs())).collect();
        let e0 = energy_frozen_raw(grid, &u, &u, fv, &p);
        let slack = solver.energy_slack(&u);
        let mut rec = IterRecord {
            iteration,
            residual_norm: res_norm,
            energy: e0,
            step: None,
            alpha: 0.0,
            frozen_energy_before: e0,
            frozen_energy_after: e0,
            energy_slack: slack,
        };
        if !res_norm.is_finite() {
            trace.push(rec);
            break;
        }
        if r.iter().zip(&tol).all(|(a, t)| a.abs() <= *t) {
            trace.push(rec);
            return Ok(Solution {
                u: ScalarField::new(f.grid().clone(), u)?,
                params: p,
                iterations: iteration,
                residual_norm: res_norm,
                tolerance: tol.iter().fold(0.0, |m: f64, t| m.max(*t)),
                energy: e0,
                converged: true,
                trace,
            });
        }
        let step = solver.newton_step(&u, &r, &jac, e0, slack).or_else(|| {
            if cfg.picard_fallback {
                solver.picard_step(&u, &r, e0)
            } else {
                None
            }
        });
        let Some(step) = step else {
            trace.push(rec);
            return Err(non_convergence(f, u, p, res_norm, iteration, "line search failed", trace));
        };
        rec.step = Some(step.kind);
        rec.alpha = step.alpha;
        rec.frozen_energy_after = step.frozen_after;
        trace.push(rec);
        u = step.u;
        r = step.r;
    }
    let res_norm = max_abs(&r);
    Err(non_convergence(f, u, p, res_norm, cfg.max_newton, "iteration cap reached", trace))
}

fn non_convergence(
    f: &ScalarField,
    u: Vec<f64>,
    params: OperatorParams,
    residual_norm: f64,
    iterations: usize,
    reason: &str,
    trace: Vec<IterRecord>,
) -> Error {
    let iterate = ScalarField::from_vec(f.grid().clone(), u);
    Error::NonConvergence(Box::new(NonConvergence {
        iterate,
        params,
        residual_norm,
        iterations,
        reason: reason.to_string(),
        trace,
    }))
}

/// `true` when the truncation `T_{1/delta}` clips `u` somewhere.
pub fn truncation_active(u: &ScalarField, p: &OperatorParams) -> bool {
    p.delta > 0.0 && u.max_abs() >= (1.0 - 1e-6) / p.delta
}

/// Solves at `cfg.params`, halving `delta` until the truncation is inactive.
pub fn solve_with_delta(f: &ScalarField, cfg: &SolverConfig, warm_start: Option<&ScalarField>) -> Result<Solution> {
    let mut p = cfg.params;
    let mut rounds = 0;
    loop {
        let sol = solve_fixed_eps(f, &cfg.with_params(p), warm_start)?;
        if !truncation_active(&sol.u, &p) {
            return Ok(sol);
        }
        if rounds == cfg.max_delta_rounds {
            return Err(Error::DeltaSelection { rounds, delta: p.delta });
        }
        rounds += 1;
        p.delta *= 0.5;
    }
}

/// Operator parameters (with the final `delta`) for which the solution at
/// `cfg.params.eps` does not feel the truncation.
pub fn select_delta(f: &ScalarField, cfg: &SolverConfig) -> Result<OperatorParams> {
    Ok(solve_with_delta(f, cfg, None)?.params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// One entry per completed `eps`, strictly decreasing in `eps`.
    pub solutions: Vec<Solution>,
    /// `|u_{k+1} - u_k|_{L1}` for consecutive entries.
    pub cauchy_gaps: Vec<f64>,
    pub cauchy_tol: f64,
    /// Index into `cauchy_gaps` of the first gap below `cauchy_tol`.
    pub declared_at: Option<usize>,
    pub declared_converged: bool,
    /// Last completed iterate (zero if nothing completed).
    pub limit: ScalarField,
    pub failure: Option<SweepFailure>,
}

impl SweepResult {
    pub fn final_solution(&self) -> Option<&Solution> {
        self.solutions.last()
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.solutions.iter().map(|s| s.params.eps).collect()
    }
}

/// Warm-started solves along the geometric `eps` schedule.
///
/// `cfg.params.eps` is ignored in favour of the schedule. A failed solve is
/// retried once through the intermediate value `eps_prev * sqrt(factor)`
/// before the sweep stops; the partial result is returned with `failure` set.
pub fn continuation_sweep(f: &ScalarField, cfg: &SolverConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = f.grid().clone();
    let mut params = cfg.params;
    let mut solutions: Vec<Solution> = Vec::new();
    let mut failure = None;
    for eps in cfg.continuation.schedule() {
        let warm = solutions.last().map(|s| s.u.clone());
        let attempt = |p: OperatorParams, warm: Option<&ScalarField>| solve_with_delta(f, &cfg.with_params(p), warm);
        let result = match attempt(params.with_eps(eps), warm.as_ref()) {
            Ok(sol) => Ok(sol),
            Err(Error::Config(msg)) => return Err(Error::Config(msg)),
            Err(first) => match solutions.last() {
                Some(prev) => {
                    let mid = prev.params.eps * cfg.continuation.factor.sqrt();
                    attempt(params.with_eps(mid), warm.as_ref())
                        .and_then(|bridge| attempt(bridge.params.with_eps(eps), Some(&bridge.u)))
                }
                None => Err(first),
            },
        };
        match result {
            Ok(sol) => {
                params = sol.params;
                solutions.push(sol);
            }
            Err(e) => {
                failure = Some(SweepFailure { eps, message: e.to_string() });
                break;
            }
        }
    }
    let cauchy_gaps: Vec<f64> = solutions.windows(2).map(|w| w[1].u.l1_distance(&w[0].u)).collect::<Result<_>>()?;
    let cauchy_tol = cfg.cauchy_tol_for(&grid);
    let declared_at = cauchy_gaps.iter().position(|&g| g <= cauchy_tol);
    let limit = solutions.last().map(|s| s.u.clone()).unwrap_or_else(|| ScalarField::zeros(grid));
    Ok(SweepResult {
        solutions,
        cauchy_gaps,
        cauchy_tol,
        declared_converged: declared_at.is_some(),
        declared_at,
        limit,
        failure,
    })
}
