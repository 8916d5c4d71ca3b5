use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmedia_core::operator::{energy, energy_frozen, flux, flux_vec, jacobian, jacobian_frozen, residual};
use tmedia_core::{Grid, GridSpec, OperatorParams, ScalarField, SparseOperator};

fn params(m: f64, eps: f64, delta: f64) -> OperatorParams {
    OperatorParams::new(m, eps, delta).unwrap()
}

fn grid(spec: GridSpec) -> Arc<Grid> {
    Arc::new(Grid::new(spec).unwrap())
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

proptest! {
    #[test]
    fn flux_is_coercive(s in -3.0f64..3.0, x in -50.0f64..50.0, y in -50.0f64..50.0,
                        m in 0.2f64..3.0, eps in 1e-4f64..0.5) {
        let p = params(m, eps, 0.0);
        let xi = [x, y];
        prop_assert!(dot(flux_vec(s, xi, &p), xi) >= eps * dot(xi, xi) * (1.0 - 1e-12));
        prop_assert!(flux(s, x, &p) * x >= eps * x * x * (1.0 - 1e-12));
    }

    #[test]
    fn normalized_part_stays_below_coefficient(s in -3.0f64..3.0, x in -1e3f64..1e3, y in -1e3f64..1e3,
                                               m in 0.2f64..3.0, eps in 1e-4f64..0.5, delta in 0.0f64..2.0) {
        let p = params(m, eps, delta);
        let xi = [x, y];
        let a = flux_vec(s, xi, &p);
        let part = [a[0] - eps * x, a[1] - eps * y];
        let c = p.coefficient(s);
        prop_assert!(dot(part, part).sqrt() <= c);
        if c > 0.0 {
            prop_assert!(dot(part, part).sqrt() < c);
            // |xi|_eps-inequality: A(s, xi) . xi / c >= |xi| - eps
            prop_assert!(dot(a, xi) / c >= dot(xi, xi).sqrt() - eps - 1e-12 * (1.0 + dot(xi, xi)));
        }
    }

    #[test]
    fn flux_is_strictly_monotone(s in -3.0f64..3.0, a in prop::array::uniform2(-20.0f64..20.0),
                                 b in prop::array::uniform2(-20.0f64..20.0), m in 0.2f64..3.0, eps in 1e-3f64..0.5) {
        prop_assume!(a != b);
        let p = params(m, eps, 0.0);
        let fa = flux_vec(s, a, &p);
        let fb = flux_vec(s, b, &p);
        let d = [a[0] - b[0], a[1] - b[1]];
        prop_assert!(dot([fa[0] - fb[0], fa[1] - fb[1]], d) > 0.0);
    }

    #[test]
    fn flux_is_odd(s in -3.0f64..3.0, g in -20.0f64..20.0, m in 0.2f64..3.0) {
        let p = params(m, 0.01, 0.0);
        prop_assert_eq!(flux(-s, -g, &p), -flux(s, g, &p));
    }
}

fn random_state(g: &Arc<Grid>, rng: &mut ChaCha8Rng, positive: bool) -> ScalarField {
    let vals = (0..g.num_cells())
        .map(|_| {
            let mag = rng.gen_range(0.05..1.0);
            if positive || rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    ScalarField::new(g.clone(), vals).unwrap()
}

fn fd_check(jac: &SparseOperator, u: &ScalarField, f: &ScalarField, p: &OperatorParams, dir: &[f64]) -> f64 {
    let step = 1e-6;
    let shifted = |sgn: f64| {
        let v: Vec<f64> = u.values().iter().zip(dir).map(|(a, d)| a + sgn * step * d).collect();
        residual(&ScalarField::new(u.grid().clone(), v).unwrap(), f, p).unwrap()
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    let fd: Vec<f64> = plus.values().iter().zip(minus.values()).map(|(a, b)| (a - b) / (2.0 * step)).collect();
    let jd = jac.apply(dir);
    let num = fd.iter().zip(&jd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = jd.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (GridSpec::radial(2, 1.0, 24), params(1.0, 0.05, 0.0), false),
        (GridSpec::radial(3, 1.0, 20), params(2.0, 0.02, 0.0), false),
        (GridSpec::radial(2, 1.0, 16), params(0.5, 0.1, 0.0), true),
        (GridSpec::rectangle(1.0, 2.0, 7, 6), params(1.5, 0.05, 0.0), false),
    ];
    for (spec, p, positive) in cases {
        let g = grid(spec);
        let f = ScalarField::constant(g.clone(), 0.3);
        for _ in 0..10 {
            let u = random_state(&g, &mut rng, positive);
            let dir: Vec<f64> = (0..g.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rel = fd_check(&jacobian(&u, &p), &u, &f, &p, &dir);
            assert!(rel <= 1e-5, "relative error {rel:e} on {:?}", g.spec());
        }
    }
}

#[test]
fn truncated_jacobian_matches_finite_differences_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = grid(GridSpec::radial(2, 1.0, 20));
    let p = params(2.0, 0.05, 1.0 / 0.6);
    let f = ScalarField::zeros(g.clone());
    for _ in 0..10 {
        // values far from the cap 0.6 in face averages
        let vals = (0..20).map(|i| if i < 10 { rng.gen_range(0.8..1.0) } else { rng.gen_range(0.1..0.3) }).collect();
        let u = ScalarField::new(g.clone(), vals).unwrap();
        let dir: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(fd_check(&jacobian(&u, &p), &u, &f, &p, &dir) <= 1e-5);
    }
}

fn volume_weighted_dense(j: &SparseOperator, g: &Grid) -> DMatrix<f64> {
    let n = g.num_cells();
    DMatrix::from_fn(n, n, |i, k| g.volumes()[i] * j.get(i, k))
}

#[test]
fn frozen_jacobian_is_symmetric_in_the_volume_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in [GridSpec::radial(2, 1.0, 16), GridSpec::radial(3, 1.0, 16), GridSpec::rectangle(1.0, 1.0, 6, 6)] {
        let g = grid(spec);
        let u = random_state(&g, &mut rng, false);
        let p = params(1.0, 0.03, 0.0);
        let jf = jacobian_frozen(&u, &p);
        let dense = volume_weighted_dense(&jf, &g);
        let asym = (&dense - dense.transpose()).amax();
        assert!(asym <= 1e-12 * dense.amax(), "asymmetry {asym:e}");
        if !g.is_radial() {
            // uniform cells: the operator itself is symmetric
            assert!(jf.asymmetry() <= 1e-12 * jf.max_abs());
        }
    }
}

#[test]
fn frozen_jacobian_dominates_eps_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for spec in [GridSpec::radial(2, 1.0, 32), GridSpec::radial(3, 1.0, 24), GridSpec::rectangle(1.0, 1.0, 5, 6)] {
        let g = grid(spec);
        let p = params(1.0, 0.05, 0.0);
        let lap = volume_weighted_dense(&jacobian_frozen(&ScalarField::zeros(g.clone()), &p), &g);
        let lam_lap = SymmetricEigen::new(lap.clone()).eigenvalues.min();
        assert!(lam_lap > 0.0);
        for _ in 0..3 {
            let u = random_state(&g, &mut rng, false);
            let jf = volume_weighted_dense(&jacobian_frozen(&u, &p), &g);
            let sym = (&jf + jf.transpose()) * 0.5;
            let lam = SymmetricEigen::new(sym.clone()).eigenvalues.min();
            assert!(lam >= lam_lap * (1.0 - 1e-10), "{lam} < {lam_lap}");
            let excess = SymmetricEigen::new(sym - &lap).eigenvalues.min();
            assert!(excess >= -1e-10 * lap.amax());
        }
    }
}

#[test]
fn zero_state_jacobian_is_eps_laplacian_for_m_at_least_one() {
    let g = grid(GridSpec::radial(2, 1.0, 10));
    let z = ScalarField::zeros(g.clone());
    let base = jacobian(&z, &params(1.0, 1.0, 0.0));
    for m in [1.0, 2.0, 3.5] {
        for eps in [0.1, 0.01] {
            let j = jacobian(&z, &params(m, eps, 0.0));
            for i in 0..10 {
                for k in 0..10 {
                    assert!((j.get(i, k) - eps * base.get(i, k)).abs() <= 1e-14 * base.max_abs());
                }
            }
        }
    }
}

#[test]
fn frozen_energy_gradient_is_residual_times_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for spec in [GridSpec::radial(2, 1.0, 16), GridSpec::rectangle(1.0, 1.0, 5, 4)] {
        let g = grid(spec);
        let p = params(1.0, 0.05, 0.0);
        let u = random_state(&g, &mut rng, false);
        let f = random_state(&g, &mut rng, false);
        let r = residual(&u, &f, &p).unwrap();
        let h = 1e-6;
        for i in 0..g.num_cells() {
            let e = |sgn: f64| {
                let mut v = u.values().to_vec();
                v[i] += sgn * h;
                energy_frozen(&u, &ScalarField::new(g.clone(), v).unwrap(), &f, &p).unwrap()
            };
            let fd = (e(1.0) - e(-1.0)) / (2.0 * h);
            let exact = r.values()[i] * g.volumes()[i];
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "cell {i}: {fd} vs {exact}");
        }
    }
}

#[test]
fn energy_of_zero_state_vanishes() {
    let g = grid(GridSpec::radial(3, 1.0, 12));
    let z = ScalarField::zeros(g.clone());
    let f = ScalarField::constant(g, 2.0);
    for m in [0.5, 1.0, 2.0] {
        assert_eq!(energy(&z, &f, &params(m, 0.1, 0.0)).unwrap(), 0.0);
    }
}
