//! Cell-centered finite-volume grids.
//!
//! Two geometries are supported: the radial reduction of an `N`-ball
//! (cells are spherical shells, `r_i = (i - 1/2) h`) and a uniform 2D
//! tensor rectangle. Both expose the same face list so that gradient,
//! divergence and assembly code is written once.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Smallest admissible cell count along any axis.
pub const MIN_CELLS: usize = 4;

/// Serializable description of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    RadialBall { dim: usize, radius: f64, cells: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

impl GridSpec {
    pub fn radial(dim: usize, radius: f64, cells: usize) -> Self {
        GridSpec::RadialBall { dim, radius, cells }
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        GridSpec::Rectangle { lx, ly, nx, ny }
    }
}

/// How a face connects to the cells around it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceKind {
    /// `lo` sits on the negative side of the face along its axis, `hi` on the positive side.
    Interior { lo: usize, hi: usize },
    /// Face on the domain boundary. `outward` is the sign of the outward normal
    /// relative to the face axis.
    Boundary { cell: usize, outward: f64 },
    /// The degenerate `r = 0` face of a radial grid (zero area).
    Axis { cell: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// 0 for the radial / x direction, 1 for y.
    pub axis: usize,
    pub area: f64,
    /// Cell spacing along the face axis.
    pub spacing: f64,
    pub center: [f64; 2],
}

impl Face {
    /// Length of the dual segment the two-point difference spans: `h` between
    /// two cell centers, `h/2` between a boundary cell center and the boundary.
    pub fn dual_length(&self) -> f64 {
        match self.kind {
            FaceKind::Interior { .. } => self.spacing,
            FaceKind::Boundary { .. } => 0.5 * self.spacing,
            FaceKind::Axis { .. } => 0.0,
        }
    }

    /// Volume of the dual cell attached to this face (`area * dual_length`).
    pub fn measure(&self) -> f64 {
        self.area * self.dual_length()
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, FaceKind::Boundary { .. })
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    dim: usize,
    centers: Vec<[f64; 2]>,
    volumes: Vec<f64>,
    faces: Vec<Face>,
    boundary_faces: Vec<usize>,
    measure: f64,
    perimeter: f64,
    bandwidth: usize,
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = omega_{n-2} * 2 pi / n
    let (mut w, start) = if n.is_multiple_of(2) { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        match spec {
            GridSpec::RadialBall { dim, radius, cells } => Self::radial(dim, radius, cells),
            GridSpec::Rectangle { lx, ly, nx, ny } => Self::rectangle(lx, ly, nx, ny),
        }
    }

    fn radial(dim: usize, radius: f64, n: usize) -> Result<Grid> {
        if dim < 2 {
            return config_err(format!("radial grid needs dimension >= 2, got {dim}"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return config_err(format!("radius must be positive, got {radius}"));
        }
        if n < MIN_CELLS {
            return config_err(format!("need at least {MIN_CELLS} cells, got {n}"));
        }
        let h = radius / n as f64;
        let omega = unit_ball_volume(dim);
        let sigma = dim as f64 * omega;
        let face_r = |i: usize| if i == n { radius } else { i as f64 * h };
        let centers = (0..n).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect();
        let volumes = (0..n).map(|i| omega * (face_r(i + 1).powi(dim as i32) - face_r(i).powi(dim as i32))).collect();

        let mut faces = Vec::with_capacity(n + 1);
        faces.push(Face { kind: FaceKind::Axis { cell: 0 }, axis: 0, area: 0.0, spacing: h, center: [0.0, 0.0] });
        for i in 1..n {
            let r = face_r(i);
            faces.push(Face {
                kind: FaceKind::Interior { lo: i - 1, hi: i },
                axis: 0,
                area: sigma * r.powi(dim as i32 - 1),
                spacing: h,
                center: [r, 0.0],
            });
        }
        let perimeter = sigma * radius.powi(dim as i32 - 1);
        faces.push(Face {
            kind: FaceKind::Boundary { cell: n - 1, outward: 1.0 },
            axis: 0,
            area: perimeter,
            spacing: h,
            center: [radius, 0.0],
        });

        Ok(Grid {
            spec: GridSpec::RadialBall { dim, radius, cells: n },
            dim,
            centers,
            volumes,
            boundary_faces: vec![n],
            faces,
            measure: omega * radius.powi(dim as i32),
            perimeter,
            bandwidth: 1,
        })
    }

    fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Grid> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return config_err(format!("rectangle extents must be positive, got {lx} x {ly}"));
        }
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return config_err(format!("need at least {MIN_CELLS} cells per axis, got {nx} x {ny}"));
        }
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let idx = |i: usize, j: usize| j * nx + i;
        let mut centers = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                centers.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
            }
        }
        let volumes = vec![hx * hy; nx * ny];

        let mut faces = Vec::with_capacity((nx + 1) * ny + nx * (ny + 1));
        let mut boundary_faces = Vec::new();
        // x-normal faces
        for j in 0..ny {
            let y = (j as f64 + 0.5) * hy;
            for k in 0..=nx {
                let kind = if k == 0 {
                    FaceKind::Boundary { cell: idx(0, j), outward: -1.0 }
                } else if k == nx {
                    FaceKind::Boundary { cell: idx(nx - 1, j), outward: 1.0 }
                } else {
                    FaceKind::Interior { lo: idx(k - 1, j), hi: idx(k, j) }
                };
                if matches!(kind, FaceKind::Boundary { .. }) {
                    boundary_faces.push(faces.len());
                }
                faces.push(Face { kind, axis: 0, area: hy, spacing: hx, center: [k as f64 * hx, y] });
            }
        }
        // y-normal faces
        for k in 0..=ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) * hx;
                let kind = if k == 0 {
                    FaceKind::Boundary { cell: idx(i, 0), outward: -1.0 }
                } else if k == ny {
                    FaceKind::Boundary { cell: idx(i, ny - 1), outward: 1.0 }
                } else {
                    FaceKind::Interior { lo: idx(i, k - 1), hi: idx(i, k) }
                };
                if matches!(kind, FaceKind::Boundary { .. }) {
                    boundary_faces.push(faces.len());
                }
                faces.push(Face { kind, axis: 1, area: hx, spacing: hy, center: [x, k as f64 * hy] });
            }
        }

        Ok(Grid {
            spec: GridSpec::Rectangle { lx, ly, nx, ny },
            dim: 2,
            centers,
            volumes,
            faces,
            boundary_faces,
            measure: lx * ly,
            perimeter: 2.0 * (lx + ly),
            bandwidth: nx,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Spatial dimension `N` of the underlying domain.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary_faces
    }

    /// `|Omega|`.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// `Per(Omega)`.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Half-bandwidth of any operator coupling face neighbours.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.spec, GridSpec::RadialBall { .. })
    }

    /// Distance from the cell center to the origin (radial) or its `(x, y)` pair.
    pub fn radius_of(&self, cell: usize) -> f64 {
        let [x, y] = self.centers[cell];
        if self.is_radial() {
            x
        } else {
            x.hypot(y)
        }
    }

    /// Smallest spacing along any axis.
    pub fn min_spacing(&self) -> f64 {
        match self.spec {
            GridSpec::RadialBall { radius, cells, .. } => radius / cells as f64,
            GridSpec::Rectangle { lx, ly, nx, ny } => (lx / nx as f64).min(ly / ny as f64),
        }
    }

    /// Cell reached by stepping `depth` cells inward from the cell adjacent to
    /// boundary face `face` (depth 0 is the adjacent cell itself).
    pub fn inward_cell(&self, face: usize, depth: usize) -> Option<usize> {
        let f = &self.faces[face];
        let FaceKind::Boundary { cell, outward } = f.kind else {
            return None;
        };
        match self.spec {
            GridSpec::RadialBall { .. } => cell.checked_sub(depth),
            GridSpec::Rectangle { nx, ny, .. } => {
                let (i, j) = (cell % nx, cell / nx);
                let (len, pos) = if f.axis == 0 { (nx, i) } else { (ny, j) };
                let step = if outward > 0.0 { pos.checked_sub(depth)? } else { pos + depth };
                if step >= len {
                    return None;
                }
                Some(if f.axis == 0 { j * nx + step } else { step * nx + i })
            }
        }
    }

    /// Index of the cell mirrored across `y = Ly/2` (rectangles only).
    pub fn mirror_y(&self, cell: usize) -> Option<usize> {
        match self.spec {
            GridSpec::Rectangle { nx, ny, .. } => {
                let (i, j) = (cell % nx, cell / nx);
                Some((ny - 1 - j) * nx + i)
            }
            GridSpec::RadialBall { .. } => None,
        }
    }
}
