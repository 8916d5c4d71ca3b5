//! CSV and JSON serialization of cell fields.
//!
//! Both formats round-trip bit-exactly: floats are written in shortest
//! round-trip form and parsed with correct rounding.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid, GridSpec};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    value: f64,
}

/// One row per cell: `x,y,value` (`x` is the radius on radial grids, `y` is 0).
pub fn write_csv<W: Write>(u: &ScalarField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (c, &value) in u.grid().centers().iter().zip(u.values()) {
        w.serialize(Row { x: c[0], y: c[1], value })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] back onto `grid`, checking the cell coordinates.
pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let mut values = Vec::with_capacity(grid.num_cells());
    for (k, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        let Some(c) = grid.centers().get(k) else {
            return Err(Error::Parse(format!("more rows than the {} grid cells", grid.num_cells())));
        };
        let tol = 1e-9 * grid.min_spacing();
        if (row.x - c[0]).abs() > tol || (row.y - c[1]).abs() > tol {
            return Err(Error::Parse(format!("row {k} at ({}, {}) does not match cell center {c:?}", row.x, row.y)));
        }
        values.push(row.value);
    }
    ScalarField::new(grid, values)
}

/// JSON container `{grid_spec, values}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub grid_spec: GridSpec,
    pub values: Vec<f64>,
}

impl FieldDocument {
    pub fn from_field(u: &ScalarField) -> Self {
        FieldDocument { grid_spec: u.grid().spec().clone(), values: u.values().to_vec() }
    }

    pub fn into_field(self) -> Result<ScalarField> {
        let grid = Arc::new(Grid::new(self.grid_spec)?);
        ScalarField::new(grid, self.values)
    }
}

pub fn to_json(u: &ScalarField) -> Result<String> {
    Ok(serde_json::to_string(&FieldDocument::from_field(u))?)
}

pub fn from_json(text: &str) -> Result<ScalarField> {
    serde_json::from_str::<FieldDocument>(text)?.into_field()
}
