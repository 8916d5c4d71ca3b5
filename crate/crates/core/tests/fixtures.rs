use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmedia_core::fixtures::{
    antisymmetric_rectangle, manufactured, manufactured_flux, manufactured_rhs, parse_fixture, profile_derivatives,
    radial_power, radial_power_f, radial_power_u, torsion_ball, torsion_plateau, ExactKind, Profile,
    MANUFACTURED_AMPLITUDE,
};
use tmedia_core::operator::residual;
use tmedia_core::{Error, OperatorParams};

#[test]
fn torsion_plateau_values() {
    assert_relative_eq!(torsion_plateau(2, 1.0, 1.0), 0.5, max_relative = 1e-15);
    assert_relative_eq!(torsion_plateau(3, 1.0, 2.0), 0.577350269189626, max_relative = 1e-12);
    assert_eq!(torsion_plateau(2, 2.0, 1.0), 1.0);
}

#[test]
fn torsion_plateau_matches_grid_geometry() {
    for (dim, radius, m) in [(2, 1.0, 1.0), (3, 1.0, 2.0), (4, 2.5, 0.7)] {
        let fx = torsion_ball(dim, radius, m, 100).unwrap();
        let ratio = fx.grid.measure() / fx.grid.perimeter();
        assert_relative_eq!(torsion_plateau(dim, radius, m), ratio.powf(1.0 / m), max_relative = 1e-10);
        let vol: f64 = fx.grid.volumes().iter().sum();
        assert_relative_eq!(vol, fx.grid.measure(), max_relative = 1e-12);
        assert_eq!(fx.exact_kind, Some(ExactKind::LimitSolution));
        assert!(fx.f.values().iter().all(|&v| v == 1.0));
    }
}

#[test]
fn radial_power_special_case() {
    assert_eq!(radial_power_f(0.5, 2, 1.0, 1.0, 1.0), 0.0);
    assert_eq!(radial_power_u(0.5, 1.0, 1.0), 0.5);
    assert!(radial_power_f(0.75, 2, 1.0, 1.0, 1.0) < 0.0);
    assert!(radial_power_f(0.25, 2, 1.0, 1.0, 1.0) > 0.0);
    for (r, radius, theta) in [(1.0, 1.0, 1.0), (2.0, 2.0, 0.5), (3.0, 3.0, 2.5)] {
        assert_eq!(radial_power_u(r, radius, theta), 0.0);
    }
    let fx = radial_power(2, 1.0, 1.0, 1.0, 64).unwrap();
    for (c, &f) in fx.grid.centers().iter().zip(fx.f.values()) {
        assert_relative_eq!(f, 1.0 / c[0] - 2.0, max_relative = 1e-12, epsilon = 1e-12);
    }
}

#[test]
fn radial_power_satisfies_its_equation_pointwise() {
    // -(u^m u'/|u'|)' - (N-1)/r u^m u'/|u'| with u' < 0 gives
    // m u^{m-1} u' + (N-1) u^m / r
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let dim = rng.gen_range(2..=5);
        let radius = rng.gen_range(0.5..3.0);
        let m = rng.gen_range(0.3..3.0);
        let theta = rng.gen_range(0.3..3.0);
        let r = rng.gen_range(0.05..0.95) * radius;
        let u = radial_power_u(r, radius, theta);
        let du = -theta * r.powf(theta - 1.0) / radius.powf(theta);
        let lhs = m * u.powf(m - 1.0) * du + (dim as f64 - 1.0) * u.powf(m) / r;
        let f = radial_power_f(r, dim, radius, m, theta);
        assert_relative_eq!(lhs, f, max_relative = 1e-10, epsilon = 1e-10);
    }
}

#[test]
fn radial_power_is_finite_for_small_m() {
    let fx = radial_power(3, 1.0, 0.5, 1.0, 128).unwrap();
    assert!(fx.f.all_finite());
    assert!(fx.u_exact.unwrap().all_finite());
}

fn fd_derivative(g: impl Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    (g(r - 2.0 * h) - 8.0 * g(r - h) + 8.0 * g(r + h) - g(r + 2.0 * h)) / (12.0 * h)
}

#[test]
fn manufactured_rhs_matches_numerical_flux_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for profile in [Profile::Quartic, Profile::Gaussianish] {
        for (dim, m, eps) in [(2, 1.0, 1e-2), (3, 2.0, 0.05), (2, 0.5, 0.1)] {
            for _ in 0..20 {
                let r = rng.gen_range(0.05..0.95);
                let flux = |s: f64| manufactured_flux(profile, 1.0, 1.0, m, eps, s);
                let div = fd_derivative(flux, r, 1e-4) + (dim as f64 - 1.0) / r * flux(r);
                let f = manufactured_rhs(profile, 1.0, dim, 1.0, m, eps, r);
                assert!((f + div).abs() <= 1e-8 * (1.0 + f.abs()), "{profile:?} r = {r}: {f} vs {}", -div);
            }
        }
    }
}

#[test]
fn profile_derivatives_match_finite_differences() {
    for profile in [Profile::Quartic, Profile::Gaussianish] {
        for r in [0.1, 0.4, 0.9] {
            let d = profile_derivatives(profile, 0.3, 1.3, r);
            let u = |s: f64| profile_derivatives(profile, 0.3, 1.3, s)[0];
            let du = |s: f64| profile_derivatives(profile, 0.3, 1.3, s)[1];
            assert_relative_eq!(d[1], fd_derivative(u, r, 1e-4), max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(d[2], fd_derivative(du, r, 1e-4), max_relative = 1e-9, epsilon = 1e-12);
        }
        assert_eq!(profile_derivatives(profile, 1.0, 1.0, 1.0)[0].abs(), 0.0);
        assert_eq!(profile_derivatives(profile, 1.0, 1.0, 0.0)[1], 0.0);
    }
}

#[test]
fn zero_amplitude_gives_zero_data() {
    let fx = manufactured(Profile::Quartic, 2, 1.0, 1.0, 1e-2, 32, 0.0).unwrap();
    assert!(fx.f.values().iter().all(|&v| v == 0.0));
    assert!(fx.u_exact.unwrap().values().iter().all(|&v| v == 0.0));
}

#[test]
fn sampled_manufactured_solution_has_second_order_residual() {
    // the outermost cell sees the ghost-cell closure and is left out
    let p = OperatorParams::new(1.0, 1e-2, 0.0).unwrap();
    let mut prev: Option<f64> = None;
    for n in [64, 128, 256, 512] {
        let fx = manufactured(Profile::Quartic, 2, 1.0, 1.0, 1e-2, n, MANUFACTURED_AMPLITUDE).unwrap();
        let r = residual(fx.u_exact.as_ref().unwrap(), &fx.f, &p).unwrap();
        let err = r.values()[..n - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if let Some(e) = prev {
            assert!((e / err).log2() > 1.8, "{e} -> {err}");
        }
        prev = Some(err);
    }
}

#[test]
fn antisymmetric_data_mirrors_exactly() {
    let fx = antisymmetric_rectangle(2.0, 1.0, 10, 8, 1.5).unwrap();
    let f = fx.f.values();
    for k in 0..fx.grid.num_cells() {
        assert_eq!(f[k], -f[fx.grid.mirror_y(k).unwrap()]);
    }
    assert!(fx.f.max_abs() > 1.0);
    assert!(antisymmetric_rectangle(1.0, 1.0, 4, 5, 1.0).is_err());
}

#[test]
fn fixtures_are_deterministic() {
    for name in [
        "torsion-ball:N=3,R=1,m=2,n=50",
        "radial-power:N=2,R=1,m=1,theta=1,n=77",
        "manufactured:profile=gaussianish,N=2,m=1.5,eps=0.02,n=40",
        "antisymmetric:Lx=1,Ly=2,nx=6,ny=10,c=0.5",
        "zero:N=4,R=2,n=10",
    ] {
        let a = parse_fixture(name).unwrap();
        let b = parse_fixture(name).unwrap();
        assert_eq!(a.name, b.name);
        assert!(a.f.values().iter().zip(b.f.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        if let (Some(x), Some(y)) = (&a.u_exact, &b.u_exact) {
            assert!(x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert_eq!(parse_fixture(&a.name).unwrap().name, a.name);
    }
}

#[test]
fn fixture_names_are_validated() {
    assert!(matches!(parse_fixture("torsion-ball:N=2,q=1"), Err(Error::Parse(_))));
    assert!(matches!(parse_fixture("torsion-ball:N=two"), Err(Error::Parse(_))));
    assert!(matches!(parse_fixture("nonsense"), Err(Error::Parse(_))));
    assert!(matches!(parse_fixture("torsion-ball:N"), Err(Error::Parse(_))));
    assert!(parse_fixture("torsion-ball:m=-1").is_err());
    let fx = parse_fixture("torsion-ball").unwrap();
    assert_eq!(fx.grid.num_cells(), 256);
}
