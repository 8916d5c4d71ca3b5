//! Run configuration: one flat JSON document.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tmedia_core::fixtures::{parse_fixture, Fixture, FixtureMeta};
use tmedia_core::io::read_csv;
use tmedia_core::solver::Continuation;
use tmedia_core::{Grid, GridSpec, ScalarField, SolverConfig};

use crate::CliError;

/// Schedule used by runs that do not override `solver.continuation`.
pub const RUN_CONTINUATION: Continuation = Continuation { eps0: 0.05, factor: 0.5, count: 14 };

pub fn run_solver_defaults() -> SolverConfig {
    SolverConfig { continuation: RUN_CONTINUATION, ..Default::default() }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn solver_overrides<'de, D: serde::Deserializer<'de>>(d: D) -> Result<SolverConfig, D::Error> {
    use serde::de::Error;
    let patch = serde_json::Value::deserialize(d)?;
    let mut base = serde_json::to_value(run_solver_defaults()).map_err(D::Error::custom)?;
    merge(&mut base, patch);
    SolverConfig::deserialize(base).map_err(D::Error::custom)
}

/// Right-hand side given inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FSpec {
    Constant(f64),
    /// `(r, value)` pairs with increasing `r`, interpolated linearly and held
    /// constant beyond the end points. Radial grids only.
    RadialTable(Vec<(f64, f64)>),
    /// A CSV written by `tmedia_core::io::write_csv` on the same grid; relative
    /// paths resolve against the config file.
    Csv(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InlineData {
    pub grid: GridSpec,
    pub f: FSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticToggles {
    pub bounds: bool,
    pub divergence: bool,
    pub pairing: bool,
    pub trace: bool,
    pub jump: bool,
    pub sign_split: bool,
    pub exact: bool,
}

impl Default for DiagnosticToggles {
    fn default() -> Self {
        DiagnosticToggles {
            bounds: true,
            divergence: true,
            pairing: true,
            trace: true,
            jump: true,
            sign_split: true,
            exact: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fixture: Option<String>,
    pub data: Option<InlineData>,
    /// Exponent `m`; taken from the fixture when absent, else 1.
    pub m: Option<f64>,
    /// Partial overrides, merged field by field onto [`run_solver_defaults`].
    #[serde(deserialize_with = "solver_overrides")]
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticToggles,
    pub slack: f64,
    pub s1: Option<f64>,
    pub s1_tilde: Option<f64>,
    /// Level `a` of the pairing test.
    pub pairing_level: f64,
    /// Support radius of the pairing bump as a fraction of the domain size.
    pub bump_fraction: f64,
    /// One-sided pairing tolerance.
    pub pairing_tol: f64,
    /// Plateaus at or below this value skip the boundary trace test.
    pub trace_threshold: f64,
    pub jump_quantile: f64,
    /// Width of the masked boundary layer in cells.
    pub jump_layer: usize,
    pub output_dir: Option<PathBuf>,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fixture: None,
            data: None,
            m: None,
            solver: run_solver_defaults(),
            diagnostics: DiagnosticToggles::default(),
            slack: 1.1,
            s1: None,
            s1_tilde: None,
            pairing_level: 0.1,
            bump_fraction: 0.8,
            pairing_tol: 1e-3,
            trace_threshold: 0.05,
            jump_quantile: 0.05,
            jump_layer: 10,
            output_dir: None,
            plots: true,
        }
    }
}

/// Data a run operates on.
pub struct Problem {
    pub label: String,
    pub grid: Arc<Grid>,
    pub f: ScalarField,
    pub fixture: Option<Fixture>,
}

impl RunConfig {
    pub fn for_fixture(name: &str) -> Self {
        RunConfig { fixture: Some(name.to_string()), ..Default::default() }
    }

    /// Reads a config file; relative CSV paths are made absolute against its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(InlineData { f: FSpec::Csv(p), .. }) = cfg.data.as_mut() {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (&self.fixture, &self.data) {
            (Some(_), Some(_)) => return bad("give either 'fixture' or 'data', not both".into()),
            (None, None) => return bad("no data source: set 'fixture' or 'data'".into()),
            _ => {}
        }
        if !(self.slack >= 1.0) {
            return bad(format!("slack must be at least 1, got {}", self.slack));
        }
        for (name, v) in [("s1", self.s1), ("s1_tilde", self.s1_tilde), ("m", self.m)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if !(self.pairing_level > 0.0) || !(self.pairing_tol >= 0.0) {
            return bad("pairing_level must be positive and pairing_tol nonnegative".into());
        }
        if !(self.bump_fraction > 0.0 && self.bump_fraction <= 1.0) {
            return bad(format!("bump_fraction must lie in (0, 1], got {}", self.bump_fraction));
        }
        if !(self.trace_threshold > 0.0) {
            return bad(format!("trace_threshold must be positive, got {}", self.trace_threshold));
        }
        if !(self.jump_quantile > 0.0 && self.jump_quantile < 1.0) {
            return bad(format!("jump_quantile must lie in (0, 1), got {}", self.jump_quantile));
        }
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(dir) = &self.output_dir {
            if dir.exists() && !dir.is_dir() {
                return bad(format!("output path {} is not a directory", dir.display()));
            }
        }
        Ok(())
    }

    pub fn load_problem(&self) -> Result<Problem, CliError> {
        if let Some(name) = &self.fixture {
            let fx = parse_fixture(name).map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(Problem { label: fx.name.clone(), grid: fx.grid.clone(), f: fx.f.clone(), fixture: Some(fx) });
        }
        let data = self.data.as_ref().ok_or_else(|| CliError::Config("no data source".into()))?;
        let grid = Arc::new(Grid::new(data.grid.clone()).map_err(|e| CliError::Config(e.to_string()))?);
        let f = match &data.f {
            FSpec::Constant(c) => ScalarField::constant(grid.clone(), *c),
            FSpec::RadialTable(table) => radial_table(&grid, table)?,
            FSpec::Csv(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
                read_csv(grid.clone(), file).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        if !f.all_finite() {
            return Err(CliError::Config("right-hand side has non-finite values".into()));
        }
        Ok(Problem { label: "inline".into(), grid, f, fixture: None })
    }

    /// `m` and solver settings after merging the fixture metadata.
    pub fn effective_solver(&self, meta: Option<&FixtureMeta>) -> Result<SolverConfig, CliError> {
        let from_fixture = meta.and_then(|m| m.m);
        let m = match (self.m, from_fixture) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!("m = {a} conflicts with the fixture's m = {b}")))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => 1.0,
        };
        let mut cfg = self.solver.clone();
        cfg.params.m = m;
        if let Some(eps) = meta.and_then(|m| m.eps) {
            // fixed-eps manufactured data: a single solve at its own eps
            cfg.continuation = Continuation { eps0: eps, factor: cfg.continuation.factor, count: 1 };
        }
        cfg.params.eps = cfg.continuation.eps0;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

fn radial_table(grid: &Arc<Grid>, table: &[(f64, f64)]) -> Result<ScalarField, CliError> {
    if !grid.is_radial() {
        return Err(CliError::Config("radial_table needs a radial_ball grid".into()));
    }
    if table.is_empty() || table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(CliError::Config("radial_table needs strictly increasing radii".into()));
    }
    let eval = |r: f64| {
        let k = table.partition_point(|p| p.0 <= r);
        match k {
            0 => table[0].1,
            k if k == table.len() => table[k - 1].1,
            k => {
                let (a, b) = (table[k - 1], table[k]);
                a.1 + (b.1 - a.1) * (r - a.0) / (b.0 - a.0)
            }
        }
    };
    ScalarField::from_fn(grid.clone(), |c| eval(c[0])).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_one_source() {
        let mut cfg = RunConfig::for_fixture("zero:n=8");
        assert!(cfg.validate().is_ok());
        cfg.data = Some(InlineData { grid: GridSpec::radial(2, 1.0, 8), f: FSpec::Constant(0.0) });
        assert!(cfg.validate().is_err());
        cfg.fixture = None;
        assert!(cfg.validate().is_ok());
        cfg.data = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_documented_shapes() {
        let text = r#"{
            "data": {"grid": {"kind": "radial_ball", "dim": 2, "radius": 1.0, "cells": 8},
                     "f": {"radial_table": [[0.0, 1.0], [1.0, 3.0]]}},
            "m": 2.0,
            "solver": {"newton_tol": 1e-9, "continuation": {"eps0": 0.1, "factor": 0.5, "count": 3}},
            "plots": false
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        let p = cfg.load_problem().unwrap();
        assert!((p.f.values()[0] - (1.0 + 2.0 * 0.0625)).abs() < 1e-15);
        let s = cfg.effective_solver(None).unwrap();
        assert_eq!((s.params.m, s.params.eps, s.newton_tol), (2.0, 0.1, 1e-9));
        let partial: RunConfig =
            serde_json::from_str(r#"{"fixture": "zero", "solver": {"newton_tol": 1e-8}}"#).unwrap();
        assert_eq!(partial.solver, SolverConfig { newton_tol: 1e-8, ..run_solver_defaults() });
        assert_eq!(partial, serde_json::from_str(&serde_json::to_string(&partial).unwrap()).unwrap());
        assert!(serde_json::from_str::<RunConfig>(r#"{"fixtur": "zero"}"#).is_err());
    }

    #[test]
    fn fixture_metadata_sets_m_and_eps() {
        let cfg = RunConfig::for_fixture("manufactured:m=1.5,eps=0.02,n=16");
        let p = cfg.load_problem().unwrap();
        let s = cfg.effective_solver(Some(&p.fixture.unwrap().meta)).unwrap();
        assert_eq!((s.params.m, s.params.eps, s.continuation.count), (1.5, 0.02, 1));
        let cfg = RunConfig { m: Some(2.0), ..RunConfig::for_fixture("torsion-ball:m=1,n=16") };
        let p = cfg.load_problem().unwrap();
        assert!(cfg.effective_solver(Some(&p.fixture.unwrap().meta)).is_err());
    }
}
