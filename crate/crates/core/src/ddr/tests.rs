use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mesh::{generate_cubic_mesh, generate_tet_mesh, random_projective_image};
use crate::quadrature::{cell_rule, face_rule};

type V3 = Vector3<f64>;

/// `x^a y^b z^c` and its gradient.
fn mono(e: [i32; 3]) -> impl Fn(&V3) -> f64 + Sync + Copy {
    move |x: &V3| (0..3).map(|i| if e[i] > 0 { x[i].powi(e[i]) } else { 1.0 }).product()
}

fn dmono(e: [i32; 3], axis: usize) -> impl Fn(&V3) -> f64 + Sync + Copy {
    move |x: &V3| {
        if e[axis] == 0 {
            return 0.0;
        }
        let mut f = e;
        f[axis] -= 1;
        e[axis] as f64 * mono(f)(x)
    }
}

fn exponents(deg: i32) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for a in 0..=deg {
        for b in 0..=deg - a {
            for c in 0..=deg - a - b {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn meshes() -> Vec<Mesh> {
    vec![
        random_projective_image(&generate_cubic_mesh(1), 7),
        random_projective_image(&generate_tet_mesh(1), 11),
    ]
}

#[test]
fn non_ddr_configuration_is_rejected() {
    let m = generate_cubic_mesh(1);
    let mut cfg = SerendipityConfig::ddr_mode(&m, 1);
    cfg.eta_faces[0] = 3;
    assert!(matches!(DdrComplex::with_config(m, cfg), Err(DdrError::NotDdrMode)));
}

#[test]
fn gradient_side_reproduces_polynomials() {
    for mesh in meshes() {
        for k in 0..=2 {
            let dd = DdrComplex::new(mesh.clone(), k).unwrap();
            for e in exponents(k as i32 + 1) {
                let q = mono(e);
                let grad = move |x: &V3| V3::new(dmono(e, 0)(x), dmono(e, 1)(x), dmono(e, 2)(x));
                let iq = dd.interpolate_grad(q);
                for f in 0..mesh.n_faces() {
                    let fo = dd.face(f);
                    let rule = face_rule(&mesh, f, 2 * k + 4);
                    assert!(rel(&dd.face_trace(f, &iq), &fo.pk1.project_scalar(&rule, q)) < 1e-10);
                    assert!(rel(&dd.face_gradient(f, &iq), &fo.vk.project_vector(&rule, grad)) < 1e-10, "G_F k={k} {e:?}");
                }
                for c in 0..mesh.n_cells() {
                    let co = dd.cell(c);
                    let rule = cell_rule(&mesh, c, 2 * k + 4);
                    assert!(rel(&dd.cell_potential_grad(c, &iq), &co.pk1.project_scalar(&rule, q)) < 1e-10);
                    assert!(rel(&dd.cell_gradient(c, &iq), &co.vk.project_vector(&rule, grad)) < 1e-10);
                }
                let lhs = dd.global_gradient(&iq);
                let rhs = dd.interpolate_curl(grad);
                assert!(rel(&lhs.values, &rhs.values) < 1e-11, "uG commutation k={k} {e:?}");
            }
        }
    }
}

#[test]
fn curl_side_reproduces_polynomials() {
    for mesh in meshes() {
        for k in 0..=2 {
            let dd = DdrComplex::new(mesh.clone(), k).unwrap();
            for e in exponents(k as i32 + 1) {
                for axis in 0..3 {
                    let v = move |x: &V3| V3::ith(axis, mono(e)(x));
                    // curl(m e_a) = ∇m × e_a
                    let curl = move |x: &V3| V3::new(dmono(e, 0)(x), dmono(e, 1)(x), dmono(e, 2)(x)).cross(&V3::ith(axis, 1.0));
                    let iv = dd.interpolate_curl(v);
                    let low = e.iter().sum::<i32>() <= k as i32;
                    for f in 0..mesh.n_faces() {
                        let fo = dd.face(f);
                        let n = mesh.face(f).normal;
                        let rule = face_rule(&mesh, f, 2 * k + 4);
                        let cf = fo.pk.project_scalar(&rule, |x| curl(x).dot(&n));
                        assert!(rel(&dd.face_curl(f, &iv), &cf) < 1e-10, "C_F k={k} {e:?} {axis}");
                        if low {
                            let t = dd.face_tangential_trace(f, &iv);
                            assert!(rel(&t, &fo.vk.project_vector(&rule, v)) < 1e-10, "γ_t k={k} {e:?}");
                        }
                    }
                    for c in 0..mesh.n_cells() {
                        let co = dd.cell(c);
                        let rule = cell_rule(&mesh, c, 2 * k + 4);
                        assert!(rel(&dd.cell_curl(c, &iv), &co.vk.project_vector(&rule, curl)) < 1e-10, "C_T k={k}");
                        if low {
                            assert!(rel(&dd.cell_potential_curl(c, &iv), &co.vk.project_vector(&rule, v)) < 1e-10, "P_curl k={k}");
                        }
                    }
                    let lhs = dd.global_curl(&iv);
                    let rhs = dd.interpolate_div(curl);
                    assert!(rel(&lhs.values, &rhs.values) < 1e-11, "uC commutation k={k} {e:?}");
                }
            }
        }
    }
}

#[test]
fn divergence_side_reproduces_polynomials() {
    for mesh in meshes() {
        for k in 0..=2 {
            let dd = DdrComplex::new(mesh.clone(), k).unwrap();
            for e in exponents(k as i32 + 1) {
                for axis in 0..3 {
                    let w = move |x: &V3| V3::ith(axis, mono(e)(x));
                    let iw = dd.interpolate_div(w);
                    for c in 0..mesh.n_cells() {
                        let co = dd.cell(c);
                        let rule = cell_rule(&mesh, c, 2 * k + 4);
                        let div = co.pk.project_scalar(&rule, dmono(e, axis));
                        assert!(rel(&dd.cell_divergence(c, &iw), &div) < 1e-10, "D_T k={k}");
                        if e.iter().sum::<i32>() <= k as i32 {
                            assert!(rel(&dd.cell_potential_div(c, &iw), &co.vk.project_vector(&rule, w)) < 1e-10, "P_div k={k}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn complex_property_and_curl_potential_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for mesh in [generate_cubic_mesh(2), random_projective_image(&generate_tet_mesh(1), 5)] {
        for k in 0..=2 {
            let dd = DdrComplex::new(mesh.clone(), k).unwrap();
            let q = DVector::from_fn(dd.n_dofs(SpaceKind::Grad), |_, _| rng.random::<f64>() - 0.5);
            let q = dd.vector(SpaceKind::Grad, q).unwrap();
            let cq = dd.global_curl(&dd.global_gradient(&q));
            assert!(cq.values.amax() < 1e-12 * q.values.amax().max(1.0) * 1e2, "k={k}: {}", cq.values.amax());
            for c in 0..mesh.n_cells() {
                let co = dd.cell(c);
                assert!((&co.ch - &co.curl).amax() < 1e-10 * co.curl.amax().max(1.0));
            }
        }
    }
}

#[test]
fn masses_are_spd_and_exact_on_polynomials() {
    let mesh = random_projective_image(&generate_cubic_mesh(2), 4);
    for k in 0..=1 {
        let dd = DdrComplex::new(mesh.clone(), k).unwrap();
        for kind in [SpaceKind::Grad, SpaceKind::Curl, SpaceKind::Div] {
            for c in 0..mesh.n_cells() {
                let m = dd.cell_mass(kind, c);
                assert!((m - m.transpose()).amax() < 1e-13 * m.amax());
                let ev = m.clone().symmetric_eigen().eigenvalues;
                assert!(ev.min() > 1e-10 * ev.max(), "{kind:?} {}", ev.min() / ev.max());
            }
        }
        let v = |x: &V3| V3::new(1.0 + x.y * (k as f64), -0.5, x.z * (k as f64));
        let iv = dd.interpolate_curl(v);
        let exact: f64 = (0..mesh.n_cells())
            .map(|c| cell_rule(&mesh, c, 4).integrate(|x| v(x).norm_squared()))
            .sum();
        let got = dd.l2_product(&iv, &iv);
        assert!((got - exact).abs() < 1e-10 * exact, "k={k} {got} {exact}");
    }
}

#[test]
fn dof_vectors_round_trip_and_reject_foreign_layouts() {
    let dd = DdrComplex::new(generate_cubic_mesh(1), 1).unwrap();
    let x = dd.interpolate_curl(|p| p.cross(&V3::new(1.0, 2.0, 3.0)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.bin");
    x.save(&path).unwrap();
    let y = DofVector::load(&path, dd.layout(SpaceKind::Curl).clone()).unwrap();
    assert_eq!(x.values, y.values);
    assert!(matches!(
        DofVector::load(&path, dd.layout(SpaceKind::Grad).clone()),
        Err(DdrError::LayoutMismatch { .. })
    ));
}

#[test]
fn essential_masks_match_cube_combinatorics() {
    let dd = DdrComplex::new(generate_cubic_mesh(1), 0).unwrap();
    assert_eq!(dd.boundary_mask(&BoundarySpec::Natural).unwrap().n_grad(), 0);
    let m = dd.boundary_mask(&BoundarySpec::Essential).unwrap();
    assert_eq!((m.n_grad(), m.n_curl()), (8, 12));
    let unclassified = BoundarySpec::mixed(|f, _| (f != 0).then_some(BoundaryKind::Natural));
    assert!(matches!(dd.boundary_mask(&unclassified), Err(DdrError::UnclassifiedFace(0))));
}
