//! Quadrature on edges, polygonal faces and polyhedral cells.
//!
//! Edges use Gauss–Legendre rules. Simplices use collapsed (Stroud conical
//! product) rules built from Gauss–Jacobi nodes; faces are fanned into
//! triangles around `x_F` and cells are coned into tetrahedra around `x_T`.

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::mesh::Mesh;
use crate::num::Real;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("degenerate simplex with measure {0:e}")]
    Degenerate(f64),
}

#[derive(Clone, Debug)]
pub struct QuadratureRule<T: Real> {
    pub points: Vec<Vector3<T>>,
    pub weights: Vec<T>,
    pub exactness_degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    fn empty(exactness_degree: usize) -> Self {
        QuadratureRule {
            points: Vec::new(),
            weights: Vec::new(),
            exactness_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of the weights, i.e. the measure of the integration domain.
    pub fn measure(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn integrate(&self, f: impl Fn(&Vector3<T>) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (x, &w)| acc + w * f(x))
    }

    fn append(&mut self, other: QuadratureRule<T>) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// A mesh entity that carries a quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Edge(usize),
    Face(usize),
    Cell(usize),
}

/// Gauss–Jacobi nodes and weights on `[0, 1]` for the weight `(1 − t)^alpha`,
/// computed with the Golub–Welsch algorithm.
pub fn gauss_jacobi(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let a = alpha as f64;
    // three-term recurrence of the monic Jacobi polynomials, beta = 0, on [-1, 1]
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let s = 2.0 * i as f64 + a;
        jac[(i, i)] = if i == 0 {
            -a / (a + 2.0)
        } else {
            -a * a / (s * (s + 2.0))
        };
        if i + 1 < n {
            let m = (i + 1) as f64;
            let s = 2.0 * m + a;
            let b = 4.0 * m * (m + a) * m * (m + a) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(i, i + 1)] = b.sqrt();
            jac[(i + 1, i)] = b.sqrt();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            ((eig.eigenvalues[i] + 1.0) / 2.0, mu0 * v0 * v0 / 2f64.powi(alpha as i32 + 1))
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

fn points_for(degree: usize) -> usize {
    (degree + 1).div_ceil(2)
}

/// Gauss–Legendre rule on the segment `[a, b]`.
pub fn segment_rule<T: Real>(a: Vector3<T>, b: Vector3<T>, degree: usize) -> QuadratureRule<T> {
    let (t, w) = gauss_jacobi(points_for(degree), 0);
    let len = (b - a).norm();
    QuadratureRule {
        points: t.iter().map(|&t| a + (b - a) * T::lit(t)).collect(),
        weights: w.iter().map(|&w| T::lit(w) * len).collect(),
        exactness_degree: degree,
    }
}

/// Collapsed Gauss rule on a triangle.
pub fn triangle_rule<T: Real>(v: [Vector3<T>; 3], degree: usize) -> Result<QuadratureRule<T>, QuadratureError> {
    let area = (v[1] - v[0]).cross(&(v[2] - v[0])).norm() * T::lit(0.5);
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm());
    if area <= T::DEGENERACY_TOL * scale * scale {
        return Err(QuadratureError::Degenerate(area.to_f64_lossy()));
    }
    let n = points_for(degree);
    let (u, wu) = gauss_jacobi(n, 1);
    let (s, ws) = gauss_jacobi(n, 0);
    let mut rule = QuadratureRule::empty(degree);
    for (&ui, &wi) in u.iter().zip(&wu) {
        for (&sj, &wj) in s.iter().zip(&ws) {
            let (l1, l2) = (ui, sj * (1.0 - ui));
            rule.points
                .push(v[0] + (v[1] - v[0]) * T::lit(l1) + (v[2] - v[0]) * T::lit(l2));
            rule.weights.push(T::lit(2.0 * wi * wj) * area);
        }
    }
    Ok(rule)
}

/// Collapsed Gauss rule on a tetrahedron.
pub fn tetrahedron_rule<T: Real>(v: [Vector3<T>; 4], degree: usize) -> Result<QuadratureRule<T>, QuadratureError> {
    let vol = (v[1] - v[0]).dot(&(v[2] - v[0]).cross(&(v[3] - v[0]))).abs() / T::lit(6.0);
    let scale = (1..4).map(|i| (v[i] - v[0]).norm()).fold(T::zero(), |a, b| a.max(b));
    if vol <= T::DEGENERACY_TOL * scale * scale * scale {
        return Err(QuadratureError::Degenerate(vol.to_f64_lossy()));
    }
    let n = points_for(degree);
    let (u, wu) = gauss_jacobi(n, 2);
    let (s, ws) = gauss_jacobi(n, 1);
    let (r, wr) = gauss_jacobi(n, 0);
    let mut rule = QuadratureRule::empty(degree);
    for (&ui, &wi) in u.iter().zip(&wu) {
        for (&sj, &wj) in s.iter().zip(&ws) {
            for (&rl, &wl) in r.iter().zip(&wr) {
                let l1 = ui;
                let l2 = sj * (1.0 - ui);
                let l3 = rl * (1.0 - sj) * (1.0 - ui);
                rule.points.push(
                    v[0] + (v[1] - v[0]) * T::lit(l1) + (v[2] - v[0]) * T::lit(l2) + (v[3] - v[0]) * T::lit(l3),
                );
                rule.weights.push(T::lit(6.0 * wi * wj * wl) * vol);
            }
        }
    }
    Ok(rule)
}

/// Triangles `(x_F, v_i, v_{i+1})` of the fan decomposition of a face.
pub fn face_triangles<T: Real>(mesh: &Mesh<T>, face: usize) -> Vec<[Vector3<T>; 3]> {
    let f = mesh.face(face);
    let m = f.vertices.len();
    (0..m)
        .map(|i| {
            [
                f.center,
                mesh.vertex(f.vertices[i]).coords,
                mesh.vertex(f.vertices[(i + 1) % m]).coords,
            ]
        })
        .collect()
}

/// Tetrahedra `(x_T, x_F, v_i, v_{i+1})` of the cone decomposition of a cell.
pub fn cell_tetrahedra<T: Real>(mesh: &Mesh<T>, cell: usize) -> Vec<[Vector3<T>; 4]> {
    let c = mesh.cell(cell);
    let mut tets = Vec::new();
    for &(f, _) in &c.faces {
        for [a, b, d] in face_triangles(mesh, f) {
            tets.push([c.center, a, b, d]);
        }
    }
    tets
}

pub fn rule_for<T: Real>(mesh: &Mesh<T>, entity: Entity, degree: usize) -> Result<QuadratureRule<T>, QuadratureError> {
    match entity {
        Entity::Edge(e) => {
            let [a, b] = mesh.edge(e).vertices;
            Ok(segment_rule(mesh.vertex(a).coords, mesh.vertex(b).coords, degree))
        }
        Entity::Face(f) => {
            let mut rule = QuadratureRule::empty(degree);
            for tri in face_triangles(mesh, f) {
                rule.append(triangle_rule(tri, degree)?);
            }
            Ok(rule)
        }
        Entity::Cell(c) => {
            let mut rule = QuadratureRule::empty(degree);
            for tet in cell_tetrahedra(mesh, c) {
                rule.append(tetrahedron_rule(tet, degree)?);
            }
            Ok(rule)
        }
    }
}

/// Shorthand for rules on entities of a validated mesh, where degenerate
/// sub-simplices cannot occur.
pub fn edge_rule<T: Real>(mesh: &Mesh<T>, e: usize, degree: usize) -> QuadratureRule<T> {
    rule_for(mesh, Entity::Edge(e), degree).expect("validated mesh")
}

pub fn face_rule<T: Real>(mesh: &Mesh<T>, f: usize, degree: usize) -> QuadratureRule<T> {
    rule_for(mesh, Entity::Face(f), degree).expect("validated mesh")
}

pub fn cell_rule<T: Real>(mesh: &Mesh<T>, c: usize, degree: usize) -> QuadratureRule<T> {
    rule_for(mesh, Entity::Cell(c), degree).expect("validated mesh")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cubic_mesh;

    #[test]
    fn jacobi_weights_integrate_weight_function() {
        for alpha in 0..3 {
            for n in 1..8 {
                let (t, w) = gauss_jacobi(n, alpha);
                // ∫₀¹ t^m (1−t)^α dt = m! α! / (m+α+1)!
                for m in 0..2 * n {
                    let exact = beta_int(m as u32, alpha);
                    let approx: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(m as i32)).sum();
                    assert!((approx - exact).abs() < 1e-14, "alpha {alpha} n {n} m {m}");
                }
            }
        }
    }

    fn beta_int(m: u32, a: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|i| i as f64).product::<f64>();
        f(m) * f(a) / f(m + a + 1)
    }

    #[test]
    fn unit_edge_cubic() {
        let r = segment_rule::<f64>(Vector3::zeros(), Vector3::x(), 3);
        assert_eq!(r.len(), 2);
        let v = r.integrate(|x| x.x.powi(3));
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unit_square_and_cube() {
        let m = generate_cubic_mesh::<f64>(1);
        let bottom = (0..6).find(|&f| m.face(f).center.z.abs() < 1e-14).unwrap();
        let r = face_rule(&m, bottom, 4);
        assert!((r.integrate(|x| x.x * x.x * x.y * x.y) - 1.0 / 9.0).abs() < 1e-14);
        let r = cell_rule(&m, 0, 6);
        assert!((r.integrate(|x| (x.x * x.y * x.z).powi(2)) - 1.0 / 27.0).abs() < 1e-13);
        assert!((r.measure() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let z = Vector3::<f64>::zeros();
        assert!(triangle_rule([z, Vector3::x(), Vector3::x() * 2.0], 2).is_err());
    }
}
