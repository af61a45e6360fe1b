use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mesh::{generate_cubic_mesh, generate_tet_mesh};
use crate::ns::problems::trig;
use crate::ns::{newton_solve, NewtonOptions};
use crate::Mesh;

type V3 = Vector3<f64>;

fn cubic(n: usize) -> MeshCase {
    MeshCase {
        family: "cubic".into(),
        n,
        mesh: generate_cubic_mesh(n),
    }
}

#[test]
fn interpolates_have_zero_discrete_error() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 1).unwrap();
    let exact = ExactSolution::trig(3.0);
    let u = dd.interpolate_curl(|x| (exact.velocity)(x));
    let p = dd.interpolate_grad(|x| (exact.pressure)(x));
    let r = compute_errors(&dd, &u, &p, &exact);
    assert_eq!((r.e_du(), r.e_dp()), (0.0, 0.0));
    assert!(r.e_pu() > 0.0 && r.e_pp() > 0.0);
}

#[test]
fn potential_errors_vanish_on_polynomials() {
    let mesh = crate::mesh::random_projective_image(&generate_tet_mesh(1), 3);
    for k in 0..=2 {
        let dd = DdrComplex::new(mesh.clone(), k).unwrap();
        let kk = k as f64;
        let a = V3::new(0.3, -1.0, 2.0);
        // affine velocity for k ≥ 1, constant for k = 0; the pressure gradient has degree ≤ k
        let exact = ExactSolution {
            velocity: Arc::new(move |x| a + V3::new(x.y, 0.0, x.x) * kk),
            curl_velocity: Arc::new(move |_| V3::new(0.0, -1.0, -1.0) * kk),
            pressure: Arc::new(move |x| x.x - 2.0 * x.z + kk.min(1.0) * x.x * x.y),
            grad_pressure: Arc::new(move |x| V3::new(1.0 + kk.min(1.0) * x.y, kk.min(1.0) * x.x, -2.0)),
        };
        let u = dd.interpolate_curl(|x| (exact.velocity)(x));
        let p = dd.interpolate_grad(|x| (exact.pressure)(x));
        let r = compute_errors(&dd, &u, &p, &exact);
        assert!(r.e_pu() < 1e-9 && r.e_pp() < 1e-9, "k={k} {r:?}");
    }
}

#[test]
fn rates_and_csv_layout() {
    assert!((eoc(0.5, 4.0, 0.25, 1.0) - 2.0).abs() < 1e-15);
    let reports = with_rates(vec![
        ErrorReport {
            h: 0.5,
            dim_condensed: 10,
            errors: [1.0, 2.0, 3.0, 4.0],
            eoc: None,
        },
        ErrorReport {
            h: 0.25,
            dim_condensed: 80,
            errors: [0.5, 0.5, 3.0, 1.0],
            eoc: None,
        },
    ]);
    assert_eq!(reports[1].eoc, Some([1.0, 2.0, 0.0, 2.0]));
    let mut buf = Vec::new();
    write_error_csv(&mut buf, &reports).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "MeshSize,DimCondensed,E^d_u,E^p_u,E^d_p,E^p_p,EOC_E^d_u,EOC_E^p_u,EOC_E^d_p,EOC_E^p_p"
    );
    assert!(lines[1].ends_with(",,,,"));
    assert!(lines[2].ends_with("1.0000,2.0000,0.0000,2.0000"));
}

#[test]
fn discrete_velocity_error_converges_at_first_order() {
    let spec = trig(1.0, 1.0);
    let exact = ExactSolution::trig(1.0);
    let reports: Vec<ErrorReport> = [2, 4]
        .iter()
        .map(|&n| {
            let dd = DdrComplex::new(generate_cubic_mesh(n), 0).unwrap();
            let sol = newton_solve(&dd, &spec, &NewtonOptions::default()).unwrap();
            assert!(sol.diagnostics.converged);
            compute_errors(&dd, &sol.velocity, &sol.pressure, &exact)
        })
        .collect();
    let rates = with_rates(reports)[1].eoc.unwrap();
    assert!((0.7..=1.5).contains(&rates[0]), "{rates:?}");
}

#[test]
fn exactness_ranks_on_a_single_cube() {
    for k in 0..=1 {
        let dd = DdrComplex::new(generate_cubic_mesh(1), k).unwrap();
        let r = check_exactness(&dd, DEFAULT_DENSE_CAP).unwrap();
        assert!(r.is_exact(), "k={k} {r:?}");
        assert_eq!(r.kernel_grad(), 1);
        let g = dd.global_gradient(&dd.interpolate_grad(|_| 1.0));
        assert!(g.values.amax() < 1e-13);
    }
    let dd = DdrComplex::new(generate_cubic_mesh(1), 0).unwrap();
    assert!(matches!(check_exactness(&dd, 5), Err(VerifyError::DimensionCap { .. })));
}

#[test]
fn poincare_constant_bounds_the_complement() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 0).unwrap();
    let spec = CurlSpectrum::new(&dd, DEFAULT_DENSE_CAP).unwrap();
    let cp = spec.poincare();
    assert!(cp.is_finite() && cp > 0.0);
    let m = dd.mass_matrix(SpaceKind::Curl);
    let g = dd.gradient_matrix().to_dense();
    // the retained vectors are orthogonal to every discrete gradient
    let ortho = spec.vectors.transpose() * m.to_dense() * &g;
    assert!(ortho.amax() < 1e-9, "{}", ortho.amax());
    // the quotient of random complement vectors never exceeds the constant
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut best: f64 = 0.0;
    for _ in 0..50 {
        let y = DVector::from_fn(spec.vectors.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let v = dd.vector(SpaceKind::Curl, &spec.vectors * y).unwrap();
        best = best.max(dd.l2_norm(&v) / dd.l2_norm(&dd.global_curl(&v)));
    }
    assert!(best <= cp * (1.0 + 1e-10));
    let v = dd.vector(SpaceKind::Curl, spec.vectors.column(0).into_owned()).unwrap();
    let attained = dd.l2_norm(&v) / dd.l2_norm(&dd.global_curl(&v));
    assert!((attained - cp).abs() < 1e-8 * cp);
}

#[test]
fn inverse_iteration_matches_the_dense_poincare_constant() {
    for (mesh, k) in [(generate_cubic_mesh(2), 0), (generate_cubic_mesh(2), 1), (generate_tet_mesh(1), 1)] {
        let dd = DdrComplex::new(mesh, k).unwrap();
        let dense = estimate_poincare(&dd, DEFAULT_DENSE_CAP).unwrap();
        let iterative = estimate_poincare_iterative(&dd, 1e-13, 500).unwrap();
        assert!((dense - iterative).abs() < 1e-6 * dense, "k={k}: {dense} {iterative}");
    }
}

#[test]
fn poincare_constant_decreases_towards_the_continuous_value() {
    let value = |n: usize, k: usize| estimate_poincare(&DdrComplex::new(generate_cubic_mesh(n), k).unwrap(), DEFAULT_DENSE_CAP).unwrap();
    let single = value(1, 0);
    assert!(single.is_finite() && single > 0.0);
    // lowest curl-curl eigenvalue on the unit cube with u·n = 0 is 2π²
    let continuous = 1.0 / (2.0f64.sqrt() * std::f64::consts::PI);
    let levels: Vec<f64> = (2..=5).map(|n| value(n, 0)).collect();
    assert!(levels.windows(2).all(|w| w[1] < w[0] && w[1] > continuous), "{levels:?}");
    assert!((levels[2] - levels[3]).abs() / levels[2] < 0.2, "{levels:?}");
    let c = value(2, 1);
    assert!(c / levels[0] < 2.0 && levels[0] / c < 2.0, "{levels:?} {c}");
}

#[test]
fn sobolev_bound_is_positive_monotone_and_stable() {
    let dd = DdrComplex::new(generate_cubic_mesh(2), 0).unwrap();
    let few = estimate_sobolev_lower_bound(&dd, 2, 10, 5, DEFAULT_DENSE_CAP).unwrap();
    let more = estimate_sobolev_lower_bound(&dd, 5, 10, 5, DEFAULT_DENSE_CAP).unwrap();
    assert!(few > 0.0 && more >= few);
    let fine = estimate_sobolev_lower_bound(&DdrComplex::new(generate_cubic_mesh(3), 0).unwrap(), 5, 10, 5, DEFAULT_DENSE_CAP).unwrap();
    assert!(fine / more < 2.0 && more / fine < 2.0, "{more} {fine}");
}

#[test]
fn continuity_constants_do_not_exceed_one() {
    let dd = DdrComplex::new(crate::mesh::random_projective_image(&generate_cubic_mesh(2), 1), 1).unwrap();
    let (cc, cd) = continuity_constants(&dd);
    assert!(cc > 0.5 && cc <= 1.0 + 1e-12, "{cc}");
    assert!(cd > 0.5 && cd <= 1.0 + 1e-12, "{cd}");
}

#[test]
fn property_suite_passes_on_a_cube_mesh() {
    let report = run_property_suite(&[cubic(2)], &[0], &SuiteOptions::default());
    let failures: Vec<_> = report.failures().collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(report.checks.iter().all(|c| c.status == CheckStatus::Pass));
}

fn corrupt_boundary_orientation(mesh: &Mesh) -> Mesh {
    let mut bad = mesh.clone();
    let local = mesh.cell(0).faces.iter().position(|&(f, _)| mesh.is_boundary_face(f)).unwrap();
    bad.corrupt_cell_face_orientation(0, local);
    bad
}

#[test]
fn orientation_fault_flips_only_the_closure_check() {
    let opts = SuiteOptions {
        samples: 5,
        solver_checks: false,
        ..SuiteOptions::default()
    };
    let clean = cubic(1);
    let bad = MeshCase {
        mesh: corrupt_boundary_orientation(&clean.mesh),
        ..cubic(1)
    };
    let a = run_property_suite(&[clean], &[0], &opts);
    let b = run_property_suite(&[bad], &[0], &opts);
    assert!(a.all_pass() && !b.all_pass());
    let failed: Vec<&str> = b.failures().map(|c| c.name).collect();
    assert_eq!(failed, ["divergence_closure"]);
}
