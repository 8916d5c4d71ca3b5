//! Explicit a-priori constants and the checks that compare discrete solutions
//! against them.

use serde::{Deserialize, Serialize};

use crate::calculus::total_variation;
use crate::error::{config_err, Result};
use crate::field::ScalarField;
use crate::grid::unit_ball_volume;
use crate::rearrangement::weak_lorentz_norm;
use crate::solver::SweepResult;

/// `1 / (N omega_N^{1/N})`, the isoperimetric constant of `BV -> L^{1*}`.
pub fn default_s1(dim: usize) -> f64 {
    1.0 / (dim as f64 * unit_ball_volume(dim).powf(1.0 / dim as f64))
}

/// Default for the Lorentz-space Sobolev constant; the same isoperimetric
/// value as [`default_s1`].
pub fn default_s1_tilde(dim: usize) -> f64 {
    default_s1(dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    pub s1: f64,
    pub s1_tilde: f64,
}

impl EmbeddingConstants {
    pub fn defaults(dim: usize) -> Self {
        EmbeddingConstants { s1: default_s1(dim), s1_tilde: default_s1_tilde(dim) }
    }
}

/// The `tau` grid over which the composite `L^inf` bound is minimized.
pub fn tau_grid() -> Vec<f64> {
    (1..=19).map(|k| 0.05 * k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub dim: usize,
    pub m: f64,
    pub eps: f64,
    pub measure: f64,
    pub m_tilde: f64,
    pub one_star: f64,
    pub f_norm_mtilde: f64,
    pub f_norm_weak: f64,
    pub s1: f64,
    pub s1_tilde: f64,
    /// `None` when the denominator of `C_eps` is not positive (eps too large).
    pub c_eps: Option<f64>,
    /// `k_{0,tau}` at the minimizing `tau`.
    pub k0_tau: f64,
    pub tau: f64,
    /// `min_tau k_{0,tau} + (S1 eps / tau) 2^N |Omega|^{1/N}`.
    pub linfty_eps_bound: f64,
    pub linfty_limit_bound: f64,
    pub bv_limit_bound: f64,
    pub lstar_limit_bound: f64,
}

impl BoundReport {
    /// `|Omega|^{1 - m/((m+1) 1*)}`.
    fn volume_factor(&self) -> f64 {
        self.measure.powf(1.0 - self.m / ((self.m + 1.0) * self.one_star))
    }

    /// `C_eps^{m+1}`, the bound on `|u^{m+1}|_{L^{1*}}`.
    pub fn lstar_eps_bound(&self) -> Option<f64> {
        self.c_eps.map(|c| c.powf(self.m + 1.0))
    }

    /// `(m+1) (eps |Omega|^{...} C^m + |f| C)`, the bound on `|u^{m+1}|_{BV}`.
    pub fn bv_eps_bound(&self) -> Option<f64> {
        let v = self.volume_factor();
        self.c_eps.map(|c| (self.m + 1.0) * (self.eps * v * c.powf(self.m) + self.f_norm_mtilde * c))
    }
}

/// `k_{0,tau} = (S~ |f|_{N,inf} / (1 - tau))^{1/m}`.
pub fn k0_tau(s1_tilde_f_weak: f64, tau: f64, m: f64) -> f64 {
    (s1_tilde_f_weak / (1.0 - tau)).powf(1.0 / m)
}

pub fn bound_constants(f: &ScalarField, m: f64, eps: f64, consts: EmbeddingConstants) -> Result<BoundReport> {
    if !(m > 0.0) || !(eps > 0.0) {
        return config_err(format!("bound constants need m > 0 and eps > 0, got m = {m}, eps = {eps}"));
    }
    if !(consts.s1 > 0.0 && consts.s1_tilde > 0.0) {
        return config_err("embedding constants must be positive");
    }
    let grid = f.grid();
    let n = grid.dim() as f64;
    let measure = grid.measure();
    let m_tilde = n * (m + 1.0) / (n * m + 1.0);
    let one_star = n / (n - 1.0);
    let f_norm_mtilde = f.lp_norm(m_tilde);
    let f_norm_weak = weak_lorentz_norm(f, n)?;
    let EmbeddingConstants { s1, s1_tilde } = consts;

    let c_eps = if f_norm_mtilde == 0.0 {
        Some(0.0)
    } else {
        let vf = measure.powf(1.0 - m / ((m + 1.0) * one_star));
        let den = 1.0 / (s1 * (m + 1.0)) - eps * vf / (0.5 * (s1 * (m + 1.0) * f_norm_mtilde).powf(1.0 / m));
        (den > 0.0).then(|| (f_norm_mtilde / den).powf(1.0 / m))
    };

    let sf = s1_tilde * f_norm_weak;
    let tail = |tau: f64| s1 * eps / tau * 2f64.powf(n) * measure.powf(1.0 / n);
    let (tau, linfty_eps_bound) = tau_grid()
        .into_iter()
        .map(|t| (t, k0_tau(sf, t, m) + tail(t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty tau grid");

    let lf = s1 * (m + 1.0) * f_norm_mtilde;
    Ok(BoundReport {
        dim: grid.dim(),
        m,
        eps,
        measure,
        m_tilde,
        one_star,
        f_norm_mtilde,
        f_norm_weak,
        s1,
        s1_tilde,
        c_eps,
        k0_tau: k0_tau(sf, tau, m),
        tau,
        linfty_eps_bound,
        linfty_limit_bound: sf.powf(1.0 / m),
        bv_limit_bound: s1.powf(1.0 / m) * ((m + 1.0) * f_norm_mtilde).powf((m + 1.0) / m),
        lstar_limit_bound: lf.powf((m + 1.0) / m),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub eps: Option<f64>,
    pub computed: f64,
    pub bound: Option<f64>,
    pub slack: f64,
    pub status: CheckStatus,
}

impl BoundCheck {
    fn new(name: &str, eps: Option<f64>, computed: f64, bound: Option<f64>, slack: f64) -> Self {
        let status = match bound {
            None => CheckStatus::Skipped,
            Some(b) if computed <= b * slack => CheckStatus::Pass,
            Some(_) => CheckStatus::Fail,
        };
        BoundCheck { name: name.to_string(), eps, computed, bound, slack, status }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// `|u|^{m+1}`.
fn power_field(u: &ScalarField, m: f64) -> ScalarField {
    u.map(|v| v.abs().powf(m + 1.0))
}

fn check_slack(slack: f64) -> Result<()> {
    if !(slack >= 1.0) {
        return config_err(format!("slack must be at least 1, got {slack}"));
    }
    Ok(())
}

/// Checks a solution at the report's `eps` against the `L^{1*}`, BV and
/// composite `L^inf` estimates.
pub fn verify_solution_bounds(u: &ScalarField, report: &BoundReport, slack: f64) -> Result<Vec<BoundCheck>> {
    check_slack(slack)?;
    let eps = Some(report.eps);
    let v = power_field(u, report.m);
    Ok(vec![
        BoundCheck::new("lstar_eps", eps, v.lp_norm(report.one_star), report.lstar_eps_bound(), slack),
        BoundCheck::new("bv_eps", eps, total_variation(&v, None), report.bv_eps_bound(), slack),
        BoundCheck::new("linfty_eps", eps, u.max_abs(), Some(report.linfty_eps_bound), slack),
    ])
}

/// Checks the limit iterate against the `eps`-independent estimates.
pub fn verify_limit_bounds(u: &ScalarField, report: &BoundReport, slack: f64) -> Result<Vec<BoundCheck>> {
    check_slack(slack)?;
    let v = power_field(u, report.m);
    Ok(vec![
        BoundCheck::new("linfty_limit", None, u.max_abs(), Some(report.linfty_limit_bound), slack),
        BoundCheck::new("bv_limit", None, total_variation(&v, None), Some(report.bv_limit_bound), slack),
        BoundCheck::new("lstar_limit", None, v.lp_norm(report.one_star), Some(report.lstar_limit_bound), slack),
    ])
}

/// Per-`eps` checks for every solution of a sweep followed by the limit checks.
pub fn verify_sweep_bounds(
    sweep: &SweepResult,
    f: &ScalarField,
    consts: EmbeddingConstants,
    slack: f64,
) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    let mut last = None;
    for sol in &sweep.solutions {
        let report = bound_constants(f, sol.params.m, sol.params.eps, consts)?;
        out.extend(verify_solution_bounds(&sol.u, &report, slack)?);
        last = Some(report);
    }
    if let Some(report) = last {
        out.extend(verify_limit_bounds(&sweep.limit, &report, slack)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn disk(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(GridSpec::radial(2, 1.0, n)).unwrap())
    }

    #[test]
    fn default_constants() {
        assert_relative_eq!(default_s1(2), 1.0 / (2.0 * PI.sqrt()), max_relative = 1e-15);
        assert_relative_eq!(default_s1_tilde(2), 1.0 / (2.0 * PI.sqrt()), max_relative = 1e-15);
        let w3 = 4.0 * PI / 3.0;
        assert_relative_eq!(default_s1_tilde(3), 1.0 / (3.0 * w3.powf(1.0 / 3.0)), max_relative = 1e-15);
    }

    #[test]
    fn m_tilde_and_k0() {
        let f = ScalarField::constant(disk(16), 1.0);
        let r = bound_constants(&f, 1.0, 0.01, EmbeddingConstants::defaults(2)).unwrap();
        assert_relative_eq!(r.m_tilde, 4.0 / 3.0, max_relative = 1e-15);
        assert_eq!(r.one_star, 2.0);
        assert_eq!(k0_tau(1.0, 0.5, 1.0), 2.0);
        assert_eq!(tau_grid().len(), 19);
    }

    #[test]
    fn c_eps_tends_to_its_limit() {
        let f = ScalarField::constant(disk(32), 1.0);
        let consts = EmbeddingConstants::defaults(2);
        let r = bound_constants(&f, 1.0, 1e-12, consts).unwrap();
        let limit = ((1.0 + 1.0) * consts.s1 * r.f_norm_mtilde).powf(1.0);
        assert_relative_eq!(r.c_eps.unwrap(), limit, max_relative = 1e-6);
        let big = bound_constants(&f, 1.0, 1e3, consts).unwrap();
        assert_eq!(big.c_eps, None);
        assert_eq!(big.bv_eps_bound(), None);
    }

    #[test]
    fn zero_data_passes_trivially() {
        let g = disk(16);
        let z = ScalarField::zeros(g);
        let r = bound_constants(&z, 1.0, 0.1, EmbeddingConstants::defaults(2)).unwrap();
        assert_eq!(r.c_eps, Some(0.0));
        for c in verify_solution_bounds(&z, &r, 1.1).unwrap().iter().chain(&verify_limit_bounds(&z, &r, 1.1).unwrap()) {
            assert_eq!(c.status, CheckStatus::Pass, "{}", c.name);
            assert_eq!(c.computed, 0.0);
        }
        assert!(verify_solution_bounds(&z, &r, 0.9).is_err());
    }
}
