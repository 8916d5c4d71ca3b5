//! The regularized, truncated flux law and its discrete residual, Jacobian and
//! Lagrangian.
//!
//! `A(s, g) = T_{1/delta}(|s|)^m g / |g|_eps + eps g` with `|g|_eps = sqrt(g^2 + eps^2)`.
//! On every face the flux is evaluated from the face value `s` (mean of the two
//! cells inside, the adjacent cell on the boundary) and the two-point normal
//! gradient `g`.

use serde::{Deserialize, Serialize};

use crate::banded::SparseOperator;
use crate::calculus::{face_gradient, face_value, net_outflow, trunc};
use crate::error::{config_err, Result};
use crate::field::ScalarField;
use crate::grid::{FaceKind, Grid};

/// Below this `|s|` the s-derivative of the coefficient is left out of the Jacobian.
pub const S_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub m: f64,
    pub eps: f64,
    /// Truncation level; `0` disables truncation.
    pub delta: f64,
}

impl OperatorParams {
    pub fn new(m: f64, eps: f64, delta: f64) -> Result<Self> {
        let p = OperatorParams { m, eps, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return config_err(format!("m must be positive, got {}", self.m));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return config_err(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return config_err(format!("delta must be nonnegative, got {}", self.delta));
        }
        Ok(())
    }

    pub fn with_eps(self, eps: f64) -> Self {
        OperatorParams { eps, ..self }
    }

    /// `1/delta`, or infinity when truncation is off.
    pub fn cap(&self) -> f64 {
        if self.delta > 0.0 {
            1.0 / self.delta
        } else {
            f64::INFINITY
        }
    }

    /// `T_{1/delta}(|s|)^m`.
    #[inline]
    pub fn coefficient(&self, s: f64) -> f64 {
        trunc(s.abs(), f64::NEG_INFINITY, self.cap()).powf(self.m)
    }

    /// `d/ds T_{1/delta}(|s|)^m`, zero where truncation is active and below [`S_FLOOR`].
    #[inline]
    pub fn coefficient_slope(&self, s: f64) -> f64 {
        let a = s.abs();
        if a < S_FLOOR || a > self.cap() {
            0.0
        } else {
            self.m * a.powf(self.m - 1.0) * s.signum()
        }
    }

    #[inline]
    pub fn reg_norm(&self, g: f64) -> f64 {
        g.hypot(self.eps)
    }
}

/// Scalar flux `A(s, g)` along a face normal.
#[inline]
pub fn flux(s: f64, g: f64, p: &OperatorParams) -> f64 {
    p.coefficient(s) * g / p.reg_norm(g) + p.eps * g
}

/// Vector flux `A(s, xi)` for a full gradient.
pub fn flux_vec(s: f64, xi: [f64; 2], p: &OperatorParams) -> [f64; 2] {
    let norm = (xi[0] * xi[0] + xi[1] * xi[1] + p.eps * p.eps).sqrt();
    let c = p.coefficient(s) / norm;
    [c * xi[0] + p.eps * xi[0], c * xi[1] + p.eps * xi[1]]
}

/// Lagrangian `L(s, g) = T_{1/delta}(|s|)^m |g|_eps + eps g^2 / 2`.
#[inline]
pub fn lagrangian(s: f64, g: f64, p: &OperatorParams) -> f64 {
    p.coefficient(s) * p.reg_norm(g) + 0.5 * p.eps * g * g
}

/// Face values `s` and normal gradients `g` of `u`.
pub(crate) fn face_state(grid: &Grid, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    grid.faces().iter().map(|f| (face_value(f.kind, u), face_gradient(f.kind, f.spacing, u))).unzip()
}

/// Residual without the field wrappers: `-div A(s, grad u) - f`.
pub(crate) fn residual_raw(grid: &Grid, u: &[f64], f: &[f64], p: &OperatorParams) -> Vec<f64> {
    let (s, g) = face_state(grid, u);
    let q: Vec<f64> = s.iter().zip(&g).map(|(&s, &g)| flux(s, g, p)).collect();
    let out = net_outflow(grid, &q);
    out.iter().zip(grid.volumes()).zip(f).map(|((o, v), fi)| -o / v - fi).collect()
}

pub fn residual(u: &ScalarField, f: &ScalarField, p: &OperatorParams) -> Result<ScalarField> {
    u.check_same_grid(f)?;
    p.validate()?;
    let r = residual_raw(u.grid(), u.values(), f.values(), p);
    ScalarField::new(u.grid().clone(), r)
}

pub(crate) fn jacobian_raw(grid: &Grid, u: &[f64], p: &OperatorParams, s_coupling: bool) -> SparseOperator {
    let mut jac = SparseOperator::zeros(grid.num_cells(), grid.bandwidth());
    let vol = grid.volumes();
    for face in grid.faces() {
        let s = face_value(face.kind, u);
        let g = face_gradient(face.kind, face.spacing, u);
        let ge = p.reg_norm(g);
        let da_dg = p.coefficient(s) * p.eps * p.eps / (ge * ge * ge) + p.eps;
        let da_ds = if s_coupling { p.coefficient_slope(s) * g / ge } else { 0.0 };
        let h = face.spacing;
        let a = face.area;
        match face.kind {
            FaceKind::Interior { lo, hi } => {
                // dA/du_lo and dA/du_hi
                let d_lo = -da_dg / h + 0.5 * da_ds;
                let d_hi = da_dg / h + 0.5 * da_ds;
                // F_lo gets -a A / vol_lo, F_hi gets +a A / vol_hi
                jac.add(lo, lo, -a * d_lo / vol[lo]);
                jac.add(lo, hi, -a * d_hi / vol[lo]);
                jac.add(hi, lo, a * d_lo / vol[hi]);
                jac.add(hi, hi, a * d_hi / vol[hi]);
            }
            FaceKind::Boundary { cell, outward } => {
                let d = -2.0 * outward * da_dg / h + da_ds;
                jac.add(cell, cell, -outward * a * d / vol[cell]);
            }
            FaceKind::Axis { .. } => {}
        }
    }
    jac
}

/// Exact linearization of [`residual`] with respect to the cell values.
pub fn jacobian(u: &ScalarField, p: &OperatorParams) -> SparseOperator {
    jacobian_raw(u.grid(), u.values(), p, true)
}

/// Linearization in the gradient only, with the coefficient `T(|s|)^m` frozen.
/// This is the Picard operator; scaled by the cell volumes it is symmetric
/// positive definite.
pub fn jacobian_frozen(u: &ScalarField, p: &OperatorParams) -> SparseOperator {
    jacobian_raw(u.grid(), u.values(), p, false)
}

/// Discrete energy with the coefficient taken from `coeff_from` and the
/// gradient from `v`: `sum_faces L(s(coeff_from), g(v)) |face| - sum_cells f v vol`.
///
/// In `v` this is convex and its gradient is `residual(v) * vol` whenever
/// `coeff_from = v`.
pub(crate) fn energy_frozen_raw(grid: &Grid, coeff_from: &[f64], v: &[f64], f: &[f64], p: &OperatorParams) -> f64 {
    let faces: f64 = grid
        .faces()
        .iter()
        .map(|face| {
            let s = face_value(face.kind, coeff_from);
            let g = face_gradient(face.kind, face.spacing, v);
            lagrangian(s, g, p) * face.measure()
        })
        .sum();
    let load: f64 = v.iter().zip(f).zip(grid.volumes()).map(|((a, b), w)| a * b * w).sum();
    faces - load
}

pub fn energy_frozen(coeff_from: &ScalarField, v: &ScalarField, f: &ScalarField, p: &OperatorParams) -> Result<f64> {
    coeff_from.check_same_grid(v)?;
    v.check_same_grid(f)?;
    Ok(energy_frozen_raw(v.grid(), coeff_from.values(), v.values(), f.values(), p))
}

/// `sum_faces L(s_face, g_face) |face| - sum_cells f u vol`.
pub fn energy(u: &ScalarField, f: &ScalarField, p: &OperatorParams) -> Result<f64> {
    energy_frozen(u, u, f, p)
}
