//! Decreasing rearrangement and the weak Lorentz norm `L^{p,inf}`.
//!
//! A cell field is a step function, so its rearrangement `u*` is a step
//! function too: sort the cells by `|u|` (descending) and lay their volumes
//! end to end on `(0, |Omega|)`.

use crate::error::{config_err, Result};
use crate::field::ScalarField;

/// Step representation of `u*`: on `[ends[k-1], ends[k])` the value is `levels[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rearrangement {
    pub levels: Vec<f64>,
    pub ends: Vec<f64>,
}

impl Rearrangement {
    pub fn of(u: &ScalarField) -> Rearrangement {
        let vals = u.values();
        let vols = u.grid().volumes();
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
        let mut acc = 0.0;
        let mut levels = Vec::with_capacity(order.len());
        let mut ends = Vec::with_capacity(order.len());
        for i in order {
            acc += vols[i];
            levels.push(vals[i].abs());
            ends.push(acc);
        }
        Rearrangement { levels, ends }
    }

    /// `u*(s)`; zero for `s` beyond the total measure.
    pub fn eval(&self, s: f64) -> f64 {
        // first step whose right end lies strictly beyond s
        let k = self.ends.partition_point(|&e| e <= s);
        self.levels.get(k).copied().unwrap_or(0.0)
    }

    /// Measure of `{u* > t}`.
    pub fn distribution(&self, t: f64) -> f64 {
        let k = self.levels.partition_point(|&v| v > t);
        if k == 0 {
            0.0
        } else {
            self.ends[k - 1]
        }
    }

    pub fn total_measure(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }
}

/// Samples `u*` at the midpoints of `samples` equal subintervals of `(0, |Omega|)`.
pub fn decreasing_rearrangement(u: &ScalarField, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples == 0 {
        return config_err("rearrangement needs at least one sample");
    }
    let r = Rearrangement::of(u);
    let total = u.grid().measure();
    Ok((0..samples)
        .map(|k| {
            let s = (k as f64 + 0.5) * total / samples as f64;
            (s, r.eval(s))
        })
        .collect())
}

/// `sup_s s^{1/p} u*(s)`, exact for step data: on each step the supremum is
/// approached at the step's right end.
pub fn weak_lorentz_norm(u: &ScalarField, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return config_err(format!("weak Lorentz norm needs p > 1, got {p}"));
    }
    let r = Rearrangement::of(u);
    Ok(r.levels.iter().zip(&r.ends).fold(0.0, |m, (&v, &s)| m.max(s.powf(1.0 / p) * v)))
}
