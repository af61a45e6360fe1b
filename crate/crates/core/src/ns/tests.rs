use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problems::{pressflux, trig, trig_essential};
use super::*;
use crate::mesh::{generate_cubic_mesh, generate_tet_mesh};
use crate::quadrature::cell_rule;

type V3 = Vector3<f64>;

fn random(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn stokes() -> NewtonOptions {
    NewtonOptions {
        convection: false,
        ..NewtonOptions::default()
    }
}

#[test]
fn trilinear_is_skew_and_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (mesh, k) in [(generate_cubic_mesh(1), 0), (generate_tet_mesh(1), 1)] {
        let dd = DdrComplex::new(mesh.clone(), k).unwrap();
        let sys = NsSystem::new(&dd, &trig(1.0, 1.0)).unwrap();
        let n = dd.n_dofs(SpaceKind::Curl);
        for _ in 0..10 {
            let u = random(&mut rng, n);
            let scale = u.norm().powi(3);
            assert!(sys.trilinear(&u, &u, &u).abs() < 1e-12 * scale.max(1.0));
            let v = random(&mut rng, n);
            assert_eq!(sys.trilinear(&DVector::zeros(n), &u, &v), 0.0);
        }

        let [a, b, v] = [0, 1, 2].map(|_| dd.vector(SpaceKind::Curl, random(&mut rng, n)).unwrap());
        let ca = dd.global_curl(&a);
        let direct: f64 = (0..mesh.n_cells())
            .map(|c| {
                let co = dd.cell(c);
                let rule = cell_rule(&mesh, c, 3 * k + 3);
                let vals = co.vk.eval(&rule.points);
                let field = |coef: DVector<f64>| -> Vec<V3> {
                    let comps: Vec<DVector<f64>> = vals.iter().map(|m| m.tr_mul(&coef)).collect();
                    (0..rule.weights.len()).map(|q| V3::new(comps[0][q], comps[1][q], comps[2][q])).collect()
                };
                let (h, pb, pv) = (
                    field(dd.cell_potential_div(c, &ca)),
                    field(dd.cell_potential_curl(c, &b)),
                    field(dd.cell_potential_curl(c, &v)),
                );
                (0..rule.weights.len()).map(|q| rule.weights[q] * h[q].cross(&pb[q]).dot(&pv[q])).sum::<f64>()
            })
            .sum();
        let got = sys.trilinear(&a.values, &b.values, &v.values);
        assert!((got - direct).abs() < 1e-11 * direct.abs().max(1.0), "{got} {direct}");
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dd = DdrComplex::new(generate_cubic_mesh(1), 1).unwrap();
    let sys = NsSystem::new(&dd, &trig(1.0, 1.0)).unwrap();
    let x = random(&mut rng, sys.n_unknowns());
    let d = random(&mut rng, sys.n_unknowns());
    let jd = sys.jacobian(&x, Linearisation::Newton).mul_vec(&d);
    let r0 = sys.residual(&x, true);
    let errs: Vec<f64> = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| ((sys.residual(&(&x + &d * eps), true) - &r0) / eps - &jd).norm())
        .collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log10();
        assert!((slope - 1.0).abs() < 0.1, "{errs:?}");
    }
}

#[test]
fn condensed_and_full_steps_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in [trig(1.0, 1.0), trig_essential(1.0, 1.0)] {
        let dd = DdrComplex::new(generate_cubic_mesh(2), 1).unwrap();
        let sys = NsSystem::new(&dd, &spec).unwrap();
        let mut x = random(&mut rng, sys.n_unknowns()) * 0.1;
        for i in 0..x.len() {
            if sys.is_fixed(i) {
                x[i] = sys.lifting()[i];
            }
        }
        let full = NewtonOptions {
            condense: false,
            ..NewtonOptions::default()
        };
        let a = sys.newton_step(&x, Linearisation::Newton, &NewtonOptions::default()).unwrap();
        let b = sys.newton_step(&x, Linearisation::Newton, &full).unwrap();
        assert!((&a - &b).amax() < 1e-9 * b.amax(), "{}", (&a - &b).amax());
        assert!(sys.n_condensed() < sys.n_free());
    }
}

#[test]
fn stokes_limit_is_a_single_linear_solve() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 0).unwrap();
    let spec = trig(1.0, 1.0);
    let sol = newton_solve(&dd, &spec, &stokes()).unwrap();
    let d = &sol.diagnostics;
    assert!(d.converged && d.iterations == 0, "{d:?}");
    let sys = NsSystem::new(&dd, &spec).unwrap();
    let x = pack_state(&sol.velocity, &sol.pressure, Some(sol.multiplier));
    assert!(sys.free_norm(&sys.residual(&x, false)) < 1e-10 * d.reference_residual);
}

#[test]
fn trig_problem_converges_quickly() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 0).unwrap();
    let spec = trig(1.0, 1.0);
    let sol = newton_solve(&dd, &spec, &NewtonOptions::default()).unwrap();
    let d = &sol.diagnostics;
    assert!(d.converged && d.iterations <= 8, "{d:?}");
    assert!(d.damping_history.iter().all(|&a| a > 0.0 && a <= 1.0));

    // energy identity with homogeneous natural conditions
    let cu = dd.global_curl(&sol.velocity);
    let f = dd.interpolate_curl(|x| (spec.forcing)(x));
    let lhs = spec.nu * dd.l2_product(&cu, &cu);
    let rhs = dd.l2_product(&f, &sol.velocity);
    assert!((lhs - rhs).abs() < 1e-8 * lhs, "{lhs} {rhs}");

    // zero mean pressure
    let one = dd.interpolate_grad(|_| 1.0);
    assert!(dd.l2_product(&sol.pressure, &one).abs() < 1e-10);
}

#[test]
fn essential_data_is_reproduced_on_the_boundary() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 0).unwrap();
    let spec = trig_essential(1.0, 1.0);
    let sol = newton_solve(&dd, &spec, &NewtonOptions::default()).unwrap();
    assert!(sol.diagnostics.converged, "{:?}", sol.diagnostics);
    let mask = dd.boundary_mask(&spec.boundary).unwrap();
    let iu = dd.interpolate_curl(|x| (spec.exact_velocity.as_ref().unwrap())(x));
    let ip = dd.interpolate_grad(|x| (spec.exact_pressure.as_ref().unwrap())(x));
    for (i, _) in mask.curl.iter().enumerate().filter(|(_, &m)| m) {
        assert_eq!(sol.velocity.values[i], iu.values[i]);
    }
    for (i, _) in mask.grad.iter().enumerate().filter(|(_, &m)| m) {
        assert_eq!(sol.pressure.values[i], ip.values[i]);
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let dd = DdrComplex::new(generate_tet_mesh(1), 1).unwrap();
    let mut spec = pressflux(100.0);
    spec.normal_flux = None;
    spec.essential_pressure = None;
    let sol = newton_solve(&dd, &spec, &NewtonOptions::default()).unwrap();
    assert!(sol.velocity.values.amax() == 0.0 && sol.pressure.values.amax() == 0.0);
    assert_eq!(sol.diagnostics.reference_residual, 0.0);
}

#[test]
fn flux_patch_enters_the_mass_rows() {
    // q vanishes on the essential patch; the flux patch on x = 1 has area 1/16
    let cases: [(usize, fn(&V3) -> f64, f64); 2] = [(0, |x| x.x, 1.0 / 16.0), (1, |x| x.x * (1.0 + x.y), 1.125 / 16.0)];
    for (k, q, expected) in cases {
        let dd = DdrComplex::new(generate_cubic_mesh(4), k).unwrap();
        let mut spec = pressflux(100.0);
        spec.essential_pressure = None;
        let sys = NsSystem::new(&dd, &spec).unwrap();
        let r = sys.residual(&DVector::zeros(sys.n_unknowns()), false);
        let (ru, rp, _) = sys.split(&r);
        assert_eq!(ru.amax(), 0.0);
        let q = dd.interpolate_grad(q);
        assert!((rp.dot(&q.values) - expected).abs() < 1e-13, "k={k}");
    }
}

#[test]
fn viscosity_must_be_positive() {
    let dd = DdrComplex::new(generate_cubic_mesh(1), 0).unwrap();
    let spec = trig(1.0, -1.0);
    assert!(matches!(NsSystem::new(&dd, &spec), Err(NsError::InvalidViscosity(_))));
}

/// Outward unit normal of the unit cube at a boundary point.
fn cube_normal(x: &V3) -> V3 {
    let tol = 1e-12;
    (0..3)
        .find_map(|i| {
            if x[i] < tol {
                Some(-V3::ith(i, 1.0))
            } else if x[i] > 1.0 - tol {
                Some(V3::ith(i, 1.0))
            } else {
                None
            }
        })
        .expect("boundary point")
}

/// Divergence-free polynomial velocity of degree `k ≤ 1` and a linear
/// pressure, with the forcing and the natural data they induce.
fn polynomial_problem(k: usize, boundary: crate::ddr::BoundarySpec) -> ProblemSpec {
    let kk = k as f64;
    let u = move |x: &V3| V3::new(0.5, -1.0, 0.25) + V3::new(x.y + x.z, 2.0 * x.x - x.z, x.x - 0.5 * x.y) * kk;
    let curl = move |_: &V3| V3::new(-0.5 + 1.0, 1.0 - 1.0, 2.0 - 1.0) * kk;
    let p = |x: &V3| x.x - 2.0 * x.y + 0.5 * x.z;
    let gp = V3::new(1.0, -2.0, 0.5);
    let nu = 0.7;
    ProblemSpec {
        nu,
        forcing: std::sync::Arc::new(move |x| curl(x).cross(&u(x)) + gp),
        boundary,
        normal_flux: Some(std::sync::Arc::new(move |x| u(x).dot(&cube_normal(x)))),
        vorticity: Some(std::sync::Arc::new(move |x| curl(x).cross(&cube_normal(x)))),
        essential_velocity: Some(std::sync::Arc::new(u)),
        essential_pressure: Some(std::sync::Arc::new(p)),
        exact_velocity: Some(std::sync::Arc::new(u)),
        exact_pressure: Some(std::sync::Arc::new(p)),
    }
}

#[test]
fn polynomial_solutions_are_reproduced_exactly() {
    use crate::ddr::{BoundaryKind, BoundarySpec};
    for k in 0..=1 {
        let dd = DdrComplex::new(generate_cubic_mesh(2), k).unwrap();
        let half = || BoundarySpec::mixed(|_, f| Some(if f.center.x < 1e-12 { BoundaryKind::Essential } else { BoundaryKind::Natural }));
        for boundary in [BoundarySpec::Natural, BoundarySpec::Essential, half()] {
            let spec = polynomial_problem(k, boundary);
            let sol = newton_solve(&dd, &spec, &NewtonOptions::default()).unwrap();
            assert!(sol.diagnostics.converged, "{:?}", sol.diagnostics);
            let iu = dd.interpolate_curl(|x| (spec.exact_velocity.as_ref().unwrap())(x));
            let ip = dd.interpolate_grad(|x| (spec.exact_pressure.as_ref().unwrap())(x));
            let du = (&sol.velocity.values - &iu.values).amax();
            let dp = dd.global_gradient(&dd.vector(SpaceKind::Grad, &sol.pressure.values - &ip.values).unwrap());
            assert!(du < 1e-9 && dp.values.amax() < 1e-9, "k={k}: {du} {}", dp.values.amax());
        }
    }
}
