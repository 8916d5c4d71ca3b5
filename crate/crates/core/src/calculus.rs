//! Discrete differential operators, truncations and total variation.
//!
//! The homogeneous Dirichlet condition enters through the ghost reflection
//! `u_ghost = -u_adjacent`, so a boundary face carries the gradient
//! `-2 u_adjacent / h` (times the outward sign). With the face weights of
//! [`Face::dual_length`](crate::grid::Face::dual_length) the divergence is
//! exactly the negative adjoint of the gradient.

use crate::error::{config_err, Result};
use crate::field::{FaceField, ScalarField};
use crate::grid::{FaceKind, Grid};

/// Two-point gradient on a single face.
#[inline]
pub(crate) fn face_gradient(kind: FaceKind, spacing: f64, u: &[f64]) -> f64 {
    match kind {
        FaceKind::Interior { lo, hi } => (u[hi] - u[lo]) / spacing,
        FaceKind::Boundary { cell, outward } => -2.0 * outward * u[cell] / spacing,
        FaceKind::Axis { .. } => 0.0,
    }
}

/// Face value of a cell field: arithmetic mean inside, the adjacent cell
/// value on boundary and axis faces.
#[inline]
pub(crate) fn face_value(kind: FaceKind, u: &[f64]) -> f64 {
    match kind {
        FaceKind::Interior { lo, hi } => 0.5 * (u[lo] + u[hi]),
        FaceKind::Boundary { cell, .. } | FaceKind::Axis { cell } => u[cell],
    }
}

pub fn gradient(u: &ScalarField) -> FaceField {
    let grid = u.grid();
    let vals = u.values();
    let g = grid.faces().iter().map(|f| face_gradient(f.kind, f.spacing, vals)).collect();
    FaceField::from_vec(grid.clone(), g)
}

/// Face averages of a cell field (see [`face_value`]).
pub fn face_average(u: &ScalarField) -> FaceField {
    let vals = u.values();
    let g = u.grid().faces().iter().map(|f| face_value(f.kind, vals)).collect();
    FaceField::from_vec(u.grid().clone(), g)
}

/// Accumulates `(outgoing flux - incoming flux)` per cell, before division by volume.
pub(crate) fn net_outflow(grid: &Grid, q: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; grid.num_cells()];
    for (f, &qf) in grid.faces().iter().zip(q) {
        let flow = f.area * qf;
        match f.kind {
            FaceKind::Interior { lo, hi } => {
                acc[lo] += flow;
                acc[hi] -= flow;
            }
            FaceKind::Boundary { cell, outward } => acc[cell] += outward * flow,
            FaceKind::Axis { .. } => {}
        }
    }
    acc
}

pub fn divergence(q: &FaceField) -> ScalarField {
    let grid = q.grid();
    let mut acc = net_outflow(grid, q.values());
    for (a, v) in acc.iter_mut().zip(grid.volumes()) {
        *a /= v;
    }
    ScalarField::from_vec(grid.clone(), acc)
}

/// `T_a^b(s) = max(min(b, s), a)`.
#[inline]
pub fn trunc(s: f64, a: f64, b: f64) -> f64 {
    s.min(b).max(a)
}

/// `G_k(s) = s - T_k(s)` with the symmetric truncation `T_k = T_{-k}^{k}`.
#[inline]
pub fn g_trunc_scalar(s: f64, k: f64) -> f64 {
    s - trunc(s, -k, k)
}

/// Pointwise `T_a^b(u)`; `a` may be `-inf` and `b` may be `+inf`.
pub fn truncate(u: &ScalarField, a: f64, b: f64) -> Result<ScalarField> {
    if a.is_nan() || b.is_nan() || a >= b {
        return config_err(format!("truncation needs a < b, got a = {a}, b = {b}"));
    }
    Ok(u.map(|s| trunc(s, a, b)))
}

/// Pointwise `G_k(u) = u - T_k(u)`.
pub fn g_trunc(u: &ScalarField, k: f64) -> Result<ScalarField> {
    if !(k > 0.0) {
        return config_err(format!("G_k needs k > 0, got {k}"));
    }
    Ok(u.map(|s| g_trunc_scalar(s, k)))
}

/// Discrete total variation `sum |grad u| * face measure`.
///
/// Without a mask every face counts, including boundary faces, which gives the
/// BV norm `int_{dOmega} |u| + int_Omega |Du|` (a boundary face contributes
/// `|u_adjacent| * area`). With a mask only interior faces whose two cells
/// both satisfy the predicate are summed.
pub fn total_variation(u: &ScalarField, mask: Option<&dyn Fn(usize) -> bool>) -> f64 {
    let vals = u.values();
    u.grid()
        .faces()
        .iter()
        .filter(|f| match (mask, f.kind) {
            (None, _) => true,
            (Some(m), FaceKind::Interior { lo, hi }) => m(lo) && m(hi),
            (Some(_), _) => false,
        })
        .map(|f| face_gradient(f.kind, f.spacing, vals).abs() * f.measure())
        .sum()
}
