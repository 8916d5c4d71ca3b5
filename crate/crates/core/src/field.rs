//! Cell- and face-centered fields.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One real value per cell.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// One real value per face. On rectangles the value is the component along
/// the face's axis.
#[derive(Clone, Debug)]
pub struct FaceField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, value: values[index] }),
        None => Ok(()),
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.spec() == b.spec()
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Config(format!("expected {} cell values, got {}", grid.num_cells(), values.len())));
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    /// Internal constructor for values known to be well formed.
    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_cells());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.num_cells();
        Self::from_vec(grid, vec![0.0; n])
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.num_cells();
        Self::from_vec(grid, vec![c; n])
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(|&c| f(c)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec(self.grid.clone(), values))
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(sum |u|^p vol)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().zip(self.grid.volumes()).map(|(v, w)| v.abs().powf(p) * w).sum();
        s.powf(1.0 / p)
    }

    /// `sum u vol`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.grid.volumes()).map(|(v, w)| v * w).sum()
    }

    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).zip(self.grid.volumes()).map(|((a, b), w)| (a - b).abs() * w).sum())
    }

    pub fn max_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Median of the cell values selected by `keep` (plain, not volume weighted).
    pub fn median_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let mut v: Vec<f64> = (0..self.len()).filter(|&i| keep(i)).map(|i| self.values[i]).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let k = v.len();
        Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl FaceField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.faces().len() {
            return Err(Error::Config(format!("expected {} face values, got {}", grid.faces().len(), values.len())));
        }
        check_finite(&values)?;
        Ok(FaceField { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.faces().len());
        FaceField { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.faces().len();
        Self::from_vec(grid, vec![0.0; n])
    }

    /// Samples `f` at every face center.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = grid.faces().iter().map(|face| f(face.center)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zip_map(&self, other: &FaceField, f: impl Fn(f64, f64) -> f64) -> Result<FaceField> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec(self.grid.clone(), values))
    }

    pub fn scale(&self, c: f64) -> FaceField {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }
}
