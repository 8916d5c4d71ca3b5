//! Exact and manufactured solutions used as ground truth.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKind {
    LimitSolution,
    FixedEpsManufactured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `c (1 - (r/R)^2)^2`
    Quartic,
    /// `c (exp(-2 (r/R)^2) - exp(-2))`
    Gaussianish,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub m: Option<f64>,
    pub theta: Option<f64>,
    pub eps: Option<f64>,
    pub amplitude: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub grid: Arc<Grid>,
    pub f: ScalarField,
    pub u_exact: Option<ScalarField>,
    pub exact_kind: Option<ExactKind>,
    pub meta: FixtureMeta,
}

fn radial_grid(dim: usize, radius: f64, n: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::new(GridSpec::radial(dim, radius, n))?))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} must be positive, got {v}"))
    }
}

/// Plateau value `(R/N)^{1/m} = (|B_R| / Per(B_R))^{1/m}` of the torsion problem.
pub fn torsion_plateau(dim: usize, radius: f64, m: f64) -> f64 {
    (radius / dim as f64).powf(1.0 / m)
}

/// `f = 1` on a ball; the limit solution is the constant [`torsion_plateau`].
pub fn torsion_ball(dim: usize, radius: f64, m: f64, n: usize) -> Result<Fixture> {
    positive("m", m)?;
    let grid = radial_grid(dim, radius, n)?;
    let c = torsion_plateau(dim, radius, m);
    Ok(Fixture {
        name: format!("torsion-ball:N={dim},R={radius},m={m},n={n}"),
        f: ScalarField::constant(grid.clone(), 1.0),
        u_exact: Some(ScalarField::constant(grid.clone(), c)),
        exact_kind: Some(ExactKind::LimitSolution),
        meta: FixtureMeta { m: Some(m), ..Default::default() },
        grid,
    })
}

/// `u(r) = (R^theta - r^theta) / R^theta`.
pub fn radial_power_u(r: f64, radius: f64, theta: f64) -> f64 {
    let rt = radius.powf(theta);
    (rt - r.powf(theta)) / rt
}

/// Right-hand side `u^{m-1} (R^theta (N-1) - r^theta (N-1+m theta)) / (R^theta r)`
/// evaluated as one product.
pub fn radial_power_f(r: f64, dim: usize, radius: f64, m: f64, theta: f64) -> f64 {
    let n1 = dim as f64 - 1.0;
    let rt = radius.powf(theta);
    let u = radial_power_u(r, radius, theta);
    u.powf(m - 1.0) * (rt * n1 - r.powf(theta) * (n1 + m * theta)) / (rt * r)
}

pub fn radial_power(dim: usize, radius: f64, m: f64, theta: f64, n: usize) -> Result<Fixture> {
    positive("m", m)?;
    positive("theta", theta)?;
    let grid = radial_grid(dim, radius, n)?;
    let f = ScalarField::from_fn(grid.clone(), |c| radial_power_f(c[0], dim, radius, m, theta))?;
    let u = ScalarField::from_fn(grid.clone(), |c| radial_power_u(c[0], radius, theta))?;
    Ok(Fixture {
        name: format!("radial-power:N={dim},R={radius},m={m},theta={theta},n={n}"),
        f,
        u_exact: Some(u),
        exact_kind: Some(ExactKind::LimitSolution),
        meta: FixtureMeta { m: Some(m), theta: Some(theta), ..Default::default() },
        grid,
    })
}

const GAUSS_RATE: f64 = 2.0;

/// `(u, u', u'')` of a manufactured profile at radius `r`.
pub fn profile_derivatives(profile: Profile, amplitude: f64, radius: f64, r: f64) -> [f64; 3] {
    let rho = r / radius;
    let c = amplitude;
    match profile {
        Profile::Quartic => {
            let q = 1.0 - rho * rho;
            [c * q * q, -4.0 * c * rho * q / radius, -4.0 * c * (1.0 - 3.0 * rho * rho) / (radius * radius)]
        }
        Profile::Gaussianish => {
            let a = GAUSS_RATE;
            let e = (-a * rho * rho).exp();
            [
                c * (e - (-a).exp()),
                -2.0 * c * a * rho * e / radius,
                -2.0 * c * a * e * (1.0 - 2.0 * a * rho * rho) / (radius * radius),
            ]
        }
    }
}

/// Radial flux `q = |u|^m u'/|u'|_eps + eps u'` of a profile.
pub fn manufactured_flux(profile: Profile, amplitude: f64, radius: f64, m: f64, eps: f64, r: f64) -> f64 {
    let [u, du, _] = profile_derivatives(profile, amplitude, radius, r);
    u.abs().powf(m) * du / du.hypot(eps) + eps * du
}

/// `f = -q' - (N-1) q / r` with `q'` in closed form.
pub fn manufactured_rhs(profile: Profile, amplitude: f64, dim: usize, radius: f64, m: f64, eps: f64, r: f64) -> f64 {
    let [u, du, ddu] = profile_derivatives(profile, amplitude, radius, r);
    let ge = du.hypot(eps);
    let coeff = u.abs().powf(m);
    let dcoeff = if u == 0.0 { 0.0 } else { m * u.abs().powf(m - 1.0) * u.signum() };
    let q = coeff * du / ge + eps * du;
    let dq = dcoeff * du * du / ge + coeff * ddu * eps * eps / (ge * ge * ge) + eps * ddu;
    -dq - (dim as f64 - 1.0) * q / r
}

/// Default amplitude of the manufactured profiles.
pub const MANUFACTURED_AMPLITUDE: f64 = 0.05;

pub fn manufactured(
    profile: Profile,
    dim: usize,
    radius: f64,
    m: f64,
    eps: f64,
    n: usize,
    amplitude: f64,
) -> Result<Fixture> {
    positive("m", m)?;
    positive("eps", eps)?;
    if !amplitude.is_finite() {
        return config_err("amplitude must be finite");
    }
    let grid = radial_grid(dim, radius, n)?;
    let f = ScalarField::from_fn(grid.clone(), |c| manufactured_rhs(profile, amplitude, dim, radius, m, eps, c[0]))?;
    let u = ScalarField::from_fn(grid.clone(), |c| profile_derivatives(profile, amplitude, radius, c[0])[0])?;
    let tag = match profile {
        Profile::Quartic => "quartic",
        Profile::Gaussianish => "gaussianish",
    };
    Ok(Fixture {
        name: format!("manufactured:profile={tag},N={dim},R={radius},m={m},eps={eps},n={n},c={amplitude}"),
        f,
        u_exact: Some(u),
        exact_kind: Some(ExactKind::FixedEpsManufactured),
        meta: FixtureMeta { m: Some(m), eps: Some(eps), amplitude: Some(amplitude), ..Default::default() },
        grid,
    })
}

/// `f(x, y) = c sin(pi x / Lx) sign(y - Ly/2)` on a rectangle, built so that the
/// values at mirrored cells are exact negatives. `ny` must be even.
pub fn antisymmetric_rectangle(lx: f64, ly: f64, nx: usize, ny: usize, amplitude: f64) -> Result<Fixture> {
    if !ny.is_multiple_of(2) {
        return config_err(format!("antisymmetric fixture needs an even ny, got {ny}"));
    }
    let grid = Arc::new(Grid::new(GridSpec::rectangle(lx, ly, nx, ny))?);
    let mut vals = vec![0.0; nx * ny];
    for (k, c) in grid.centers().iter().enumerate() {
        let j = k / nx;
        if j >= ny / 2 {
            let v = amplitude * (std::f64::consts::PI * c[0] / lx).sin();
            vals[k] = v;
            vals[grid.mirror_y(k).expect("rectangle")] = -v;
        }
    }
    Ok(Fixture {
        name: format!("antisymmetric:Lx={lx},Ly={ly},nx={nx},ny={ny},c={amplitude}"),
        f: ScalarField::new(grid.clone(), vals)?,
        u_exact: None,
        exact_kind: None,
        meta: FixtureMeta { amplitude: Some(amplitude), ..Default::default() },
        grid,
    })
}

/// `f = 0` on a ball; the solution is zero at every `eps`.
pub fn zero_ball(dim: usize, radius: f64, n: usize) -> Result<Fixture> {
    let grid = radial_grid(dim, radius, n)?;
    Ok(Fixture {
        name: format!("zero:N={dim},R={radius},n={n}"),
        f: ScalarField::zeros(grid.clone()),
        u_exact: Some(ScalarField::zeros(grid.clone())),
        exact_kind: Some(ExactKind::LimitSolution),
        meta: FixtureMeta::default(),
        grid,
    })
}

struct Args {
    kind: String,
    values: BTreeMap<String, String>,
}

impl Args {
    fn parse(name: &str) -> Result<Args> {
        let (kind, rest) = name.split_once(':').unwrap_or((name, ""));
        let mut values = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in fixture name, got '{item}'")))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Args { kind: kind.trim().to_string(), values })
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T> {
        match self.values.remove(key) {
            Some(v) => v.parse().map_err(|_| Error::Parse(format!("bad value '{v}' for '{key}'"))),
            None => default.ok_or_else(|| Error::Parse(format!("fixture '{}' needs '{key}'", self.kind))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(Error::Parse(format!("unknown key '{k}' for fixture '{}'", self.kind))),
            None => Ok(()),
        }
    }
}

/// Builds a fixture from a name such as `torsion-ball:N=2,R=1,m=1,n=256`.
///
/// Recognized kinds: `torsion-ball`, `radial-power`, `manufactured`,
/// `antisymmetric` and `zero`.
pub fn parse_fixture(name: &str) -> Result<Fixture> {
    let mut a = Args::parse(name)?;
    let fixture = match a.kind.as_str() {
        "torsion-ball" => {
            let dim = a.num("N", Some(2))?;
            let radius = a.num("R", Some(1.0))?;
            let m = a.num("m", Some(1.0))?;
            let n = a.num("n", Some(256))?;
            torsion_ball(dim, radius, m, n)?
        }
        "radial-power" => {
            let dim = a.num("N", Some(2))?;
            let radius = a.num("R", Some(1.0))?;
            let m = a.num("m", Some(1.0))?;
            let theta = a.num("theta", Some(1.0))?;
            let n = a.num("n", Some(512))?;
            radial_power(dim, radius, m, theta, n)?
        }
        "manufactured" => {
            let profile = match a.values.remove("profile").as_deref() {
                None | Some("quartic") => Profile::Quartic,
                Some("gaussianish") => Profile::Gaussianish,
                Some(other) => return Err(Error::Parse(format!("unknown profile '{other}'"))),
            };
            let dim = a.num("N", Some(2))?;
            let radius = a.num("R", Some(1.0))?;
            let m = a.num("m", Some(1.0))?;
            let eps = a.num("eps", Some(1e-2))?;
            let n = a.num("n", Some(128))?;
            let c = a.num("c", Some(MANUFACTURED_AMPLITUDE))?;
            manufactured(profile, dim, radius, m, eps, n, c)?
        }
        "antisymmetric" => {
            let lx = a.num("Lx", Some(1.0))?;
            let ly = a.num("Ly", Some(1.0))?;
            let nx = a.num("nx", Some(32))?;
            let ny = a.num("ny", Some(32))?;
            let c = a.num("c", Some(1.0))?;
            antisymmetric_rectangle(lx, ly, nx, ny, c)?
        }
        "zero" => {
            let dim = a.num("N", Some(2))?;
            let radius = a.num("R", Some(1.0))?;
            let n = a.num("n", Some(64))?;
            zero_ball(dim, radius, n)?
        }
        other => return Err(Error::Parse(format!("unknown fixture kind '{other}'"))),
    };
    a.finish()?;
    Ok(fixture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn torsion_plateaus() {
        assert_eq!(torsion_plateau(2, 1.0, 1.0), 0.5);
        assert_relative_eq!(torsion_plateau(3, 1.0, 2.0), 0.577350269189626, max_relative = 1e-12);
        assert_eq!(torsion_plateau(2, 2.0, 1.0), 1.0);
    }

    #[test]
    fn torsion_plateau_matches_grid_geometry() {
        for (dim, m) in [(2, 1.0), (3, 2.0), (4, 0.5)] {
            let fx = torsion_ball(dim, 1.3, m, 64).unwrap();
            let geometric = (fx.grid.measure() / fx.grid.perimeter()).powf(1.0 / m);
            assert_relative_eq!(fx.u_exact.unwrap().values()[0], geometric, max_relative = 1e-10);
        }
    }

    #[test]
    fn radial_power_specialization() {
        assert_eq!(radial_power_f(0.5, 2, 1.0, 1.0, 1.0), 0.0);
        assert_eq!(radial_power_u(0.5, 1.0, 1.0), 0.5);
        assert!(radial_power_f(0.7, 2, 1.0, 1.0, 1.0) < 0.0);
        assert!(radial_power_f(0.3, 2, 1.0, 1.0, 1.0) > 0.0);
        assert_eq!(radial_power_u(2.0, 2.0, 0.7), 0.0);
        let fx = radial_power(2, 1.0, 1.0, 1.0, 64).unwrap();
        for (c, f) in fx.grid.centers().iter().zip(fx.f.values()) {
            assert_relative_eq!(*f, 1.0 / c[0] - 2.0, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_manufactured() {
        let fx = manufactured(Profile::Gaussianish, 2, 1.0, 1.0, 1e-2, 32, 0.0).unwrap();
        assert_eq!(fx.f.max_abs(), 0.0);
        assert_eq!(fx.u_exact.unwrap().max_abs(), 0.0);
    }

    #[test]
    fn antisymmetric_mirror() {
        let fx = antisymmetric_rectangle(2.0, 1.0, 8, 6, 1.5).unwrap();
        for k in 0..fx.grid.num_cells() {
            let j = fx.grid.mirror_y(k).unwrap();
            assert_eq!(fx.f.values()[k], -fx.f.values()[j]);
        }
        assert!(antisymmetric_rectangle(1.0, 1.0, 8, 5, 1.0).is_err());
    }

    #[test]
    fn parse_names() {
        let fx = parse_fixture("torsion-ball:N=3,R=1,m=2,n=64").unwrap();
        assert_eq!(fx.grid.spec(), &GridSpec::radial(3, 1.0, 64));
        assert_eq!(fx.meta.m, Some(2.0));
        let fx = parse_fixture("radial-power:N=2,m=1,theta=1,R=1,n=512").unwrap();
        assert_eq!(fx.grid.num_cells(), 512);
        assert!(parse_fixture("manufactured:profile=gaussianish,n=32").is_ok());
        assert!(parse_fixture("antisymmetric:nx=8,ny=8").is_ok());
        assert!(parse_fixture("zero").is_ok());
        assert!(matches!(parse_fixture("torsion-ball:N=2,q=1"), Err(Error::Parse(_))));
        assert!(matches!(parse_fixture("torsion-ball:N=two"), Err(Error::Parse(_))));
        assert!(matches!(parse_fixture("nope"), Err(Error::Parse(_))));
        assert!(matches!(parse_fixture("torsion-ball:n=2"), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_generation() {
        let a = parse_fixture("manufactured:n=64").unwrap();
        let b = parse_fixture("manufactured:n=64").unwrap();
        assert_eq!(a.f.values(), b.f.values());
    }
}
