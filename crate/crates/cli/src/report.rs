//! `report.json` layout.
//!
//! Everything except the `timings` object is a deterministic function of the
//! configuration.

use serde::{Deserialize, Serialize};
use tmedia_core::bounds::{BoundCheck, BoundReport, CheckStatus};
use tmedia_core::fixtures::ExactKind;
use tmedia_core::flux::{DivergenceResidual, PairingResidual};
use tmedia_core::solver::SweepFailure;
use tmedia_core::SolverConfig;

use crate::config::RunConfig;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `computed <= bound * slack`
    AtMost,
    /// `computed >= bound`
    AtLeast,
}

/// One named assertion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub eps: Option<f64>,
    pub computed: f64,
    pub bound: Option<f64>,
    pub slack: f64,
    pub relation: Relation,
    pub status: CheckStatus,
    pub pass: bool,
}

impl Check {
    fn build(name: &str, eps: Option<f64>, computed: f64, bound: Option<f64>, slack: f64, relation: Relation) -> Check {
        let status = match bound {
            None => CheckStatus::Skipped,
            Some(b) => {
                let ok = match relation {
                    Relation::AtMost => computed <= b * slack,
                    Relation::AtLeast => computed >= b,
                };
                if ok {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                }
            }
        };
        Check { name: name.into(), eps, computed, bound, slack, relation, status, pass: status != CheckStatus::Fail }
    }

    pub fn at_most(name: &str, eps: Option<f64>, computed: f64, bound: f64) -> Check {
        Check::build(name, eps, computed, Some(bound), 1.0, Relation::AtMost)
    }

    pub fn at_least(name: &str, eps: Option<f64>, computed: f64, bound: f64) -> Check {
        Check::build(name, eps, computed, Some(bound), 1.0, Relation::AtLeast)
    }

    pub fn skipped(name: &str, eps: Option<f64>, computed: f64) -> Check {
        Check::build(name, eps, computed, None, 1.0, Relation::AtMost)
    }
}

impl From<BoundCheck> for Check {
    fn from(b: BoundCheck) -> Check {
        let mut c = Check::build(&format!("bound_{}", b.name), b.eps, b.computed, b.bound, b.slack, Relation::AtMost);
        c.status = b.status;
        c.pass = b.passed();
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsEntry {
    pub eps: f64,
    pub delta: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub picard_steps: usize,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub energy: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// `|u_eps - u_prev|_{L1}`; absent for the first entry.
    pub cauchy_gap: Option<f64>,
    pub divergence: Option<DivergenceResidual>,
    pub pairing: Option<PairingResidual>,
    pub max_error: Option<f64>,
    pub l1_error: Option<f64>,
    pub field_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub entries: Vec<EpsEntry>,
    pub cauchy_tol: f64,
    pub declared_at: Option<usize>,
    pub declared_converged: bool,
    pub failure: Option<SweepFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub threshold: f64,
    pub faces_checked: usize,
    pub faces_skipped: usize,
    /// Area-weighted mean of `[z, nu]` over all boundary faces.
    pub mean_trace: f64,
    pub max_trace: f64,
    pub mean_plateau: f64,
    /// Largest `|trace - expected| / |plateau|^m` over checked faces.
    pub worst_magnitude_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSummary {
    pub quantile: f64,
    pub layer_cells: usize,
    pub fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignSplitSummary {
    pub threshold: f64,
    pub overlap_measure: f64,
    pub pos_max: f64,
    pub neg_max: f64,
}

/// Diagnostics of the last iterate. `None` marks a diagnostic that was disabled
/// or not applicable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub flux_balance: Option<f64>,
    pub f_l1: f64,
    pub trace: Option<TraceSummary>,
    pub jump: Option<JumpSummary>,
    pub sign_split: Option<SignSplitSummary>,
    /// `max |u(x, y) + u(x, Ly - y)|` when the data is antisymmetric in `y`.
    pub antisymmetry: Option<f64>,
    pub flux_sign_flipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub kind: ExactKind,
    pub max_error: f64,
    pub l1_error: f64,
    /// Median over `{r < R/2}` for radial grids.
    pub interior_median: Option<f64>,
    pub exact_interior_median: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    AssertionFailure,
    NonConvergence,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::AssertionFailure => 1,
            RunStatus::NonConvergence => 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub select_delta_s: f64,
    pub sweep_s: f64,
    pub diagnostics_s: f64,
    pub output_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub problem: String,
    pub config: RunConfig,
    pub solver: SolverConfig,
    pub selected_delta: Option<f64>,
    /// Constants and bounds at the final `eps`.
    pub bounds: Option<BoundReport>,
    pub sweep: SweepSummary,
    pub diagnostics: Diagnostics,
    pub exact: Option<ExactSummary>,
    pub checks: Vec<Check>,
    pub status: RunStatus,
    pub exit_code: i32,
    pub timings: Timings,
}

impl RunReport {
    /// The report as JSON with the `timings` object removed.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        v
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", None, 1.0, 1.0).pass);
        assert!(!Check::at_most("a", None, 1.1, 1.0).pass);
        assert!(Check::at_least("a", None, 0.0, -1e-9).pass);
        assert!(!Check::at_least("a", None, -1.0, 0.0).pass);
        let s = Check::skipped("a", None, 3.0);
        assert_eq!(s.status, CheckStatus::Skipped);
        assert!(s.pass);
    }
}
