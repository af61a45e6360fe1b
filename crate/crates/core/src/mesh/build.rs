use std::collections::HashMap;

use nalgebra::Vector3;

use super::{Cell, Edge, Face, Mesh, MeshError, Orientation, Vertex};
use crate::num::Real;

/// Minimal polyhedral description: everything else is derived.
#[derive(Clone, Debug, Default)]
pub struct PolyhedralDescription<T: Real> {
    pub vertices: Vec<Vector3<T>>,
    /// Faces as vertex loops; the loop orientation fixes the sign of `n_F`.
    pub faces: Vec<Vec<usize>>,
    /// Cells as lists of face ids.
    pub cells: Vec<Vec<usize>>,
}

// Generic ray directions for the point-in-polyhedron parity test.
const RAY_DIRECTIONS: [[f64; 3]; 3] = [
    [0.537_700_615, 0.321_710_839, 0.779_331_612],
    [-0.612_178_893, 0.703_518_201, 0.360_814_027],
    [0.281_924_601, -0.897_011_527, 0.340_193_117],
];

impl<T: Real> Mesh<T> {
    /// Builds and validates a mesh from vertex loops and face lists.
    pub fn from_polyhedra(desc: PolyhedralDescription<T>) -> Result<Self, MeshError> {
        let PolyhedralDescription {
            vertices: coords,
            faces: loops,
            cells: cell_faces,
        } = desc;

        for (i, x) in coords.iter().enumerate() {
            if !x.iter().all(|c| c.is_finite()) {
                return Err(MeshError::NonFiniteVertex(i));
            }
        }
        let vertices: Vec<Vertex<T>> = coords.iter().map(|&coords| Vertex { coords }).collect();

        // Edges in order of first appearance along the face loops.
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge<T>> = Vec::new();
        for (fi, lp) in loops.iter().enumerate() {
            if lp.len() < 3 {
                return Err(MeshError::InvalidFace {
                    face: fi,
                    reason: format!("loop has {} vertices", lp.len()),
                });
            }
            for i in 0..lp.len() {
                let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
                if a >= coords.len() || b >= coords.len() {
                    return Err(MeshError::InvalidFace {
                        face: fi,
                        reason: "vertex index out of range".into(),
                    });
                }
                if a == b {
                    return Err(MeshError::InvalidFace {
                        face: fi,
                        reason: "repeated consecutive vertex".into(),
                    });
                }
                let key = (a.min(b), a.max(b));
                if !edge_ids.contains_key(&key) {
                    let d = coords[key.1] - coords[key.0];
                    let length = d.norm();
                    if length <= T::zero() {
                        return Err(MeshError::Degenerate(format!("edge {:?} has zero length", key)));
                    }
                    edge_ids.insert(key, edges.len());
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        tangent: d / length,
                        length,
                        midpoint: (coords[key.0] + coords[key.1]) * T::lit(0.5),
                    });
                }
            }
        }

        let mut faces = Vec::with_capacity(loops.len());
        for (fi, lp) in loops.iter().enumerate() {
            faces.push(build_face(fi, lp, &coords, &edges, &edge_ids)?);
        }

        let mut cells = Vec::with_capacity(cell_faces.len());
        for (ci, fl) in cell_faces.iter().enumerate() {
            cells.push(build_cell(ci, fl, &coords, &faces, &edges)?);
        }

        for (ci, c) in cells.iter().enumerate() {
            for &(f, _) in &c.faces {
                faces[f].cells.push(ci);
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            match f.cells.len() {
                1 => {}
                2 => {
                    let o = |c: usize| {
                        cells[c]
                            .faces
                            .iter()
                            .find(|(ff, _)| *ff == fi)
                            .map(|&(_, o)| o)
                            .unwrap()
                    };
                    if o(f.cells[0]) == o(f.cells[1]) {
                        return Err(MeshError::InconsistentInteriorFace(fi));
                    }
                }
                count => return Err(MeshError::BadFaceIncidence { face: fi, count }),
            }
        }

        let mut boundary_vertices = vec![false; vertices.len()];
        let mut boundary_edges = vec![false; edges.len()];
        let mut boundary_faces = vec![false; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            if f.cells.len() == 1 {
                boundary_faces[fi] = true;
                for &(e, _) in &f.edges {
                    boundary_edges[e] = true;
                }
                for &v in &f.vertices {
                    boundary_vertices[v] = true;
                }
            }
        }

        let h = cells
            .iter()
            .map(|c| c.diameter)
            .fold(T::zero(), |a, b| a.max(b));

        Ok(Mesh {
            vertices,
            edges,
            faces,
            cells,
            boundary_vertices,
            boundary_edges,
            boundary_faces,
            h,
        })
    }
}

fn diameter<T: Real>(points: impl Iterator<Item = Vector3<T>> + Clone) -> T {
    let pts: Vec<_> = points.collect();
    let mut d = T::zero();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

fn build_face<T: Real>(
    fi: usize,
    lp: &[usize],
    coords: &[Vector3<T>],
    edges: &[Edge<T>],
    edge_ids: &HashMap<(usize, usize), usize>,
) -> Result<Face<T>, MeshError> {
    let m = lp.len();
    let pts: Vec<Vector3<T>> = lp.iter().map(|&v| coords[v]).collect();
    let diameter = diameter(pts.iter().copied());

    // Newell's formula
    let mut newell: Vector3<T> = Vector3::zeros();
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        newell.x += (a.y - b.y) * (a.z + b.z);
        newell.y += (a.z - b.z) * (a.x + b.x);
        newell.z += (a.x - b.x) * (a.y + b.y);
    }
    let nn = newell.norm();
    if nn <= T::DEGENERACY_TOL * diameter * diameter {
        return Err(MeshError::InvalidFace {
            face: fi,
            reason: "zero area".into(),
        });
    }
    let normal = newell / nn;

    let avg = pts.iter().fold(Vector3::zeros(), |s, p| s + p) / T::of_usize(m);
    let deviation = pts
        .iter()
        .map(|p| (p - avg).dot(&normal).abs())
        .fold(T::zero(), |a, b| a.max(b));
    if deviation > T::PLANARITY_TOL * diameter {
        return Err(MeshError::NonPlanarFace {
            face: fi,
            deviation: deviation.to_f64_lossy(),
        });
    }

    // area centroid through a fan around the vertex average
    let mut area = T::zero();
    let mut moment = Vector3::zeros();
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        let tri = (a - avg).cross(&(b - avg)).dot(&normal) * T::lit(0.5);
        area += tri;
        moment += (avg + a + b) * (tri / T::lit(3.0));
    }
    if area <= T::zero() {
        return Err(MeshError::InvalidFace {
            face: fi,
            reason: "non-positive area".into(),
        });
    }
    let center = moment / area;

    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        let tri = (a - center).cross(&(b - center)).dot(&normal) * T::lit(0.5);
        if tri <= T::DEGENERACY_TOL * diameter * diameter {
            return Err(MeshError::FaceNotStarShaped(fi));
        }
    }

    let e1 = {
        let d: Vector3<T> = pts[1] - pts[0];
        let d: Vector3<T> = d - normal * d.dot(&normal);
        d / d.norm()
    };
    let e2 = normal.cross(&e1);

    let mut face_edges = Vec::with_capacity(m);
    let mut edge_normals = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = (lp[i], lp[(i + 1) % m]);
        let e = edge_ids[&(a.min(b), a.max(b))];
        let edge = &edges[e];
        let n_fe = normal.cross(&edge.tangent);
        // the loop runs counter-clockwise, so n_F × (loop direction) points inwards
        let orientation = if edge.vertices[0] == a {
            Orientation::Negative
        } else {
            Orientation::Positive
        };
        let outward = (edge.midpoint - center).dot(&n_fe) * orientation.sign::<T>();
        if outward <= T::zero() {
            return Err(MeshError::InvalidFace {
                face: fi,
                reason: format!("edge {} normal orientation check failed", e),
            });
        }
        face_edges.push((e, orientation));
        edge_normals.push(n_fe);
    }

    Ok(Face {
        vertices: lp.to_vec(),
        edges: face_edges,
        normal,
        edge_normals,
        center,
        diameter,
        area,
        frame: [e1, e2],
        cells: Vec::new(),
    })
}

fn ray_hits_triangle<T: Real>(origin: &Vector3<T>, dir: &Vector3<T>, tri: [Vector3<T>; 3]) -> bool {
    // Möller–Trumbore
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= T::default_epsilon() * e1.norm() * e2.norm() {
        return false;
    }
    let inv = T::one() / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if u < T::zero() || u > T::one() {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < T::zero() || u + v > T::one() {
        return false;
    }
    e2.dot(&q) * inv > T::zero()
}

fn point_in_polyhedron<T: Real>(point: &Vector3<T>, cell_faces: &[usize], coords: &[Vector3<T>], faces: &[Face<T>]) -> bool {
    let mut votes = 0;
    for d in RAY_DIRECTIONS {
        let dir = Vector3::new(T::lit(d[0]), T::lit(d[1]), T::lit(d[2]));
        let mut crossings = 0usize;
        for &f in cell_faces {
            let face = &faces[f];
            let m = face.vertices.len();
            for i in 0..m {
                let a = coords[face.vertices[i]];
                let b = coords[face.vertices[(i + 1) % m]];
                if ray_hits_triangle(point, &dir, [face.center, a, b]) {
                    crossings += 1;
                }
            }
        }
        if crossings % 2 == 1 {
            votes += 1;
        }
    }
    votes >= 2
}

/// Determines `ω_TF` by locating `x_F ± ε n_F` relative to the polyhedron
/// bounded by `cell_faces`, with `ε = 1e-6 h_T`.
pub fn orientation_sign<T: Real>(
    cell_faces: &[usize],
    face: usize,
    coords: &[Vector3<T>],
    faces: &[Face<T>],
    cell_diameter: T,
) -> Result<Orientation, String> {
    let f = &faces[face];
    let eps = T::lit(1e-6) * cell_diameter;
    let plus = point_in_polyhedron(&(f.center + f.normal * eps), cell_faces, coords, faces);
    let minus = point_in_polyhedron(&(f.center - f.normal * eps), cell_faces, coords, faces);
    match (plus, minus) {
        (false, true) => Ok(Orientation::Positive),
        (true, false) => Ok(Orientation::Negative),
        (true, true) => Err("both sides of the face test inside".into()),
        (false, false) => Err("both sides of the face test outside".into()),
    }
}

fn build_cell<T: Real>(
    ci: usize,
    face_list: &[usize],
    coords: &[Vector3<T>],
    faces: &[Face<T>],
    edges: &[Edge<T>],
) -> Result<Cell<T>, MeshError> {
    if face_list.len() < 4 {
        return Err(MeshError::InvalidCell {
            cell: ci,
            reason: format!("only {} faces", face_list.len()),
        });
    }
    if let Some(&f) = face_list.iter().find(|&&f| f >= faces.len()) {
        return Err(MeshError::InvalidCell {
            cell: ci,
            reason: format!("face index {} out of range", f),
        });
    }

    // closed boundary: each edge used by exactly two faces of the cell
    let mut edge_count: Vec<(usize, usize)> = Vec::new();
    for &f in face_list {
        for &(e, _) in &faces[f].edges {
            match edge_count.iter_mut().find(|(ee, _)| *ee == e) {
                Some(entry) => entry.1 += 1,
                None => edge_count.push((e, 1)),
            }
        }
    }
    if let Some(&(e, n)) = edge_count.iter().find(|(_, n)| *n != 2) {
        return Err(MeshError::InvalidCell {
            cell: ci,
            reason: format!("boundary not closed: edge {} shared by {} faces", e, n),
        });
    }
    let cell_edges: Vec<usize> = edge_count.iter().map(|&(e, _)| e).collect();
    let mut cell_vertices: Vec<usize> = Vec::new();
    for &e in &cell_edges {
        for v in edges[e].vertices {
            if !cell_vertices.contains(&v) {
                cell_vertices.push(v);
            }
        }
    }

    let diameter = diameter(cell_vertices.iter().map(|&v| coords[v]));

    let mut oriented = Vec::with_capacity(face_list.len());
    for &f in face_list {
        let o = orientation_sign(face_list, f, coords, faces, diameter)
            .map_err(|reason| MeshError::AmbiguousOrientation { cell: ci, face: f, reason })?;
        oriented.push((f, o));
    }

    // volume and centroid from outward-oriented cone tetrahedra
    let avg = cell_vertices
        .iter()
        .fold(Vector3::zeros(), |s, &v| s + coords[v])
        / T::of_usize(cell_vertices.len());
    let six = T::lit(6.0);
    let mut volume = T::zero();
    let mut moment = Vector3::zeros();
    for_each_cone_tet(&oriented, coords, faces, avg, |p, vol| {
        volume += vol;
        moment += p * vol;
    });
    if volume <= T::DEGENERACY_TOL * diameter * diameter * diameter {
        return Err(MeshError::InvalidCell {
            cell: ci,
            reason: "non-positive volume".into(),
        });
    }
    let center = moment / volume;
    let mut star = true;
    for_each_cone_tet(&oriented, coords, faces, center, |_, vol| {
        if vol <= T::DEGENERACY_TOL * diameter * diameter * diameter / six {
            star = false;
        }
    });
    if !star {
        return Err(MeshError::CellNotStarShaped(ci));
    }

    let cell = Cell {
        faces: oriented,
        edges: cell_edges,
        vertices: cell_vertices,
        center,
        diameter,
        volume,
    };

    // cross-check against the divergence theorem
    let mut flux = T::zero();
    for &(f, o) in &cell.faces {
        let face = &faces[f];
        flux += o.sign::<T>() * (face.center - cell.center).dot(&face.normal) * face.area;
    }
    let three_v = T::lit(3.0) * volume;
    if (flux - three_v).abs() > T::CLOSURE_TOL * three_v {
        return Err(MeshError::AmbiguousOrientation {
            cell: ci,
            face: cell.faces[0].0,
            reason: "point-in-polyhedron orientations violate divergence closure".into(),
        });
    }
    Ok(cell)
}

/// Visits the tetrahedra `(apex, x_F, v_i, v_{i+1})`, reporting their centroid
/// and signed volume (positive when the face is oriented outwards).
fn for_each_cone_tet<T: Real>(
    oriented: &[(usize, Orientation)],
    coords: &[Vector3<T>],
    faces: &[Face<T>],
    apex: Vector3<T>,
    mut visit: impl FnMut(Vector3<T>, T),
) {
    let six = T::lit(6.0);
    for &(f, o) in oriented {
        let face = &faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let a = coords[face.vertices[i]];
            let b = coords[face.vertices[(i + 1) % m]];
            let vol = (face.center - apex).dot(&(a - apex).cross(&(b - apex))) / six * o.sign::<T>();
            visit((apex + face.center + a + b) / T::lit(4.0), vol);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> PolyhedralDescription<f64> {
        let mut v = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    v.push(Vector3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| i + 2 * j + 4 * k;
        let faces = vec![
            vec![id(0, 0, 0), id(0, 1, 0), id(0, 1, 1), id(0, 0, 1)],
            vec![id(1, 0, 0), id(1, 1, 0), id(1, 1, 1), id(1, 0, 1)],
            vec![id(0, 0, 0), id(0, 0, 1), id(1, 0, 1), id(1, 0, 0)],
            vec![id(0, 1, 0), id(0, 1, 1), id(1, 1, 1), id(1, 1, 0)],
            vec![id(0, 0, 0), id(1, 0, 0), id(1, 1, 0), id(0, 1, 0)],
            vec![id(0, 0, 1), id(1, 0, 1), id(1, 1, 1), id(0, 1, 1)],
        ];
        PolyhedralDescription {
            vertices: v,
            faces,
            cells: vec![(0..6).collect()],
        }
    }

    #[test]
    fn unit_cube_geometry() {
        let mesh = Mesh::from_polyhedra(unit_cube()).unwrap();
        assert_eq!(mesh.n_edges(), 12);
        let c = mesh.cell(0);
        assert!((c.volume - 1.0).abs() < 1e-14);
        assert!((c.center - Vector3::repeat(0.5)).norm() < 1e-14);
        assert!((c.diameter - 3f64.sqrt()).abs() < 1e-14);
        // top face has n_F = +e_z and points out of the cube
        let top = mesh.face(5);
        assert!((top.normal - Vector3::z()).norm() < 1e-14);
        assert_eq!(mesh.cell_face_orientation(0, 5), Some(Orientation::Positive));
        // the bottom loop is counter-clockwise seen from above, so n_F points inwards
        assert_eq!(mesh.cell_face_orientation(0, 4), Some(Orientation::Negative));
        for f in mesh.faces() {
            for (i, &(e, o)) in f.edges.iter().enumerate() {
                let t = mesh.edge(e).tangent;
                // right-handed (t_E, n_FE, n_F)
                assert!((t.cross(&f.edge_normals[i]) - f.normal).norm() < 1e-14);
                let out = (mesh.edge(e).midpoint - f.center).dot(&f.edge_normals[i]) * o.sign::<f64>();
                assert!(out > 0.0);
            }
            assert!((f.frame[0].cross(&f.frame[1]) - f.normal).norm() < 1e-14);
        }
        assert!(mesh.check().all_pass());
    }

    #[test]
    fn non_planar_face_rejected() {
        let mut d = unit_cube();
        d.vertices[7].z = 1.05;
        match Mesh::from_polyhedra(d) {
            Err(MeshError::NonPlanarFace { .. }) => {}
            other => panic!("expected planarity error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn open_cell_rejected() {
        let mut d = unit_cube();
        d.cells[0].pop();
        assert!(matches!(Mesh::from_polyhedra(d), Err(MeshError::InvalidCell { .. })));
    }

    #[test]
    fn l_shaped_face_not_star_shaped_about_centroid() {
        // An L-shaped prism: the centroid of a thin L lies outside the face.
        let l = [
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 0.1),
            (0.1, 0.1),
            (0.1, 1.0),
            (0.0, 1.0),
        ];
        let mut vertices = Vec::new();
        for z in [0.0, 1.0] {
            for &(x, y) in &l {
                vertices.push(Vector3::new(x, y, z));
            }
        }
        let mut faces = vec![(0..6).rev().collect::<Vec<_>>(), (6..12).collect()];
        for i in 0..6 {
            let j = (i + 1) % 6;
            faces.push(vec![i, j, j + 6, i + 6]);
        }
        let d = PolyhedralDescription {
            vertices,
            faces,
            cells: vec![(0..8).collect()],
        };
        assert!(matches!(Mesh::from_polyhedra(d), Err(MeshError::FaceNotStarShaped(_))));
    }
}
