//! Polyhedral meshes: entities, incidence, orientations and geometric anchors.
//!
//! A mesh is built from a minimal description (vertex coordinates, faces as
//! vertex loops, cells as face lists). Edges, normals, tangents and every
//! relative orientation are derived and validated during construction, see
//! [`Mesh::from_polyhedra`]. Once built, a mesh is immutable.

mod build;
mod generate;
mod poly3;

pub use build::{orientation_sign, PolyhedralDescription};
pub use generate::{generate_cubic_mesh, generate_tet_mesh, map_vertices, random_projective_image};
pub use poly3::{parse_poly3, read_mesh, write_poly3};

use nalgebra::Vector3;
use thiserror::Error;

use crate::num::Real;

/// Relative orientation of two incident entities (`ω_TF`, `ω_FE`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Positive => T::one(),
            Orientation::Negative => -T::one(),
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Orientation::Positive => 1,
            Orientation::Negative => -1,
        }
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(usize),
    #[error("face {face}: {reason}")]
    InvalidFace { face: usize, reason: String },
    #[error("face {face} is not planar (deviation {deviation:e} exceeds tolerance)")]
    NonPlanarFace { face: usize, deviation: f64 },
    #[error("face {0}: anchor point is not a star centre of the face")]
    FaceNotStarShaped(usize),
    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: usize, reason: String },
    #[error("cell {0}: anchor point is not a star centre of the cell")]
    CellNotStarShaped(usize),
    #[error("cell {cell}, face {face}: orientation is ambiguous ({reason})")]
    AmbiguousOrientation {
        cell: usize,
        face: usize,
        reason: String,
    },
    #[error("face {face} has {count} incident cells")]
    BadFaceIncidence { face: usize, count: usize },
    #[error("interior face {0} has equal orientation in both incident cells")]
    InconsistentInteriorFace(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

#[derive(Clone, Debug)]
pub struct Vertex<T: Real> {
    pub coords: Vector3<T>,
}

#[derive(Clone, Debug)]
pub struct Edge<T: Real> {
    /// Endpoints; the tangent points from `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    pub tangent: Vector3<T>,
    pub length: T,
    pub midpoint: Vector3<T>,
}

#[derive(Clone, Debug)]
pub struct Face<T: Real> {
    /// Vertex loop, counter-clockwise when seen from the side `normal` points to.
    pub vertices: Vec<usize>,
    /// Boundary edges with `ω_FE`, listed in loop order.
    pub edges: Vec<(usize, Orientation)>,
    pub normal: Vector3<T>,
    /// In-plane unit normals `n_FE` such that `(t_E, n_FE, n_F)` is right-handed.
    pub edge_normals: Vec<Vector3<T>>,
    /// Anchor point `x_F` (area centroid).
    pub center: Vector3<T>,
    pub diameter: T,
    pub area: T,
    /// Orthonormal tangent frame with `frame[0] × frame[1] = normal`.
    pub frame: [Vector3<T>; 2],
    /// Incident cells (one on the boundary, two inside).
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Cell<T: Real> {
    /// Boundary faces with `ω_TF`.
    pub faces: Vec<(usize, Orientation)>,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    /// Anchor point `x_T` (volume centroid).
    pub center: Vector3<T>,
    pub diameter: T,
    pub volume: T,
}

#[derive(Clone, Debug)]
pub struct Mesh<T: Real> {
    pub(crate) vertices: Vec<Vertex<T>>,
    pub(crate) edges: Vec<Edge<T>>,
    pub(crate) faces: Vec<Face<T>>,
    pub(crate) cells: Vec<Cell<T>>,
    pub(crate) boundary_vertices: Vec<bool>,
    pub(crate) boundary_edges: Vec<bool>,
    pub(crate) boundary_faces: Vec<bool>,
    pub(crate) h: T,
}

impl<T: Real> Mesh<T> {
    pub fn vertices(&self) -> &[Vertex<T>] {
        &self.vertices
    }
    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }
    pub fn faces(&self) -> &[Face<T>] {
        &self.faces
    }
    pub fn cells(&self) -> &[Cell<T>] {
        &self.cells
    }
    pub fn vertex(&self, i: usize) -> &Vertex<T> {
        &self.vertices[i]
    }
    pub fn edge(&self, i: usize) -> &Edge<T> {
        &self.edges[i]
    }
    pub fn face(&self, i: usize) -> &Face<T> {
        &self.faces[i]
    }
    pub fn cell(&self, i: usize) -> &Cell<T> {
        &self.cells[i]
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }
    /// Largest cell diameter.
    pub fn h(&self) -> T {
        self.h
    }
    pub fn is_boundary_vertex(&self, i: usize) -> bool {
        self.boundary_vertices[i]
    }
    pub fn is_boundary_edge(&self, i: usize) -> bool {
        self.boundary_edges[i]
    }
    pub fn is_boundary_face(&self, i: usize) -> bool {
        self.boundary_faces[i]
    }

    /// `ω_TF` for a face of a cell, or `None` when the face does not bound the cell.
    pub fn cell_face_orientation(&self, cell: usize, face: usize) -> Option<Orientation> {
        self.cells[cell]
            .faces
            .iter()
            .find(|(f, _)| *f == face)
            .map(|&(_, o)| o)
    }

    /// Outward unit normal of a boundary face.
    pub fn outward_normal(&self, face: usize) -> Vector3<T> {
        let f = &self.faces[face];
        let o = self.cell_face_orientation(f.cells[0], face).expect("incident");
        f.normal * o.sign::<T>()
    }

    /// Ratio `min_T (2 · dist(x_T, ∂T) / h_T)`, a lower bound proxy for the
    /// inscribed-ball regularity parameter.
    pub fn regularity(&self) -> T {
        let mut worst = T::max_value().unwrap_or_else(T::one);
        for cell in &self.cells {
            let mut dist = T::max_value().unwrap_or_else(T::one);
            for &(f, _) in &cell.faces {
                let face = &self.faces[f];
                let d = (cell.center - face.center).dot(&face.normal).abs();
                dist = dist.min(d);
            }
            worst = worst.min(T::lit(2.0) * dist / cell.diameter);
        }
        worst
    }

    /// Recomputes the divergence-theorem closure residual
    /// `|Σ_F ω_TF ∫_F (x − x_T)·n_F − 3|T|| / (3|T|)` from the stored orientations.
    pub fn closure_defect(&self, cell: usize) -> T {
        let c = &self.cells[cell];
        let mut flux = T::zero();
        for &(f, o) in &c.faces {
            let face = &self.faces[f];
            flux += o.sign::<T>() * (face.center - c.center).dot(&face.normal) * face.area;
        }
        let three_v = T::lit(3.0) * c.volume;
        (flux - three_v).abs() / three_v
    }

    /// `|Σ_E ω_FE ∫_E (x − x_F)·n_FE − 2|F|| / (2|F|)` for one face.
    pub fn face_closure_defect(&self, face: usize) -> T {
        let f = &self.faces[face];
        let mut flux = T::zero();
        for (i, &(e, o)) in f.edges.iter().enumerate() {
            let edge = &self.edges[e];
            flux += o.sign::<T>() * (edge.midpoint - f.center).dot(&f.edge_normals[i]) * edge.length;
        }
        let two_a = T::lit(2.0) * f.area;
        (flux - two_a).abs() / two_a
    }

    /// Test hook: flips one stored `ω_TF` without re-validating.
    #[doc(hidden)]
    pub fn corrupt_cell_face_orientation(&mut self, cell: usize, local_face: usize) {
        let entry = &mut self.cells[cell].faces[local_face];
        entry.1 = entry.1.flipped();
    }
}

/// Outcome of the post-construction integrity checks.
#[derive(Clone, Debug, Default)]
pub struct MeshCheckReport {
    pub divergence_closure: bool,
    pub face_closure: bool,
    pub interior_orientation: bool,
    pub diameter_ordering: bool,
    pub unit_vectors: bool,
}

impl MeshCheckReport {
    pub fn all_pass(&self) -> bool {
        self.divergence_closure
            && self.face_closure
            && self.interior_orientation
            && self.diameter_ordering
            && self.unit_vectors
    }
}

impl<T: Real> Mesh<T> {
    /// Re-runs the mesh invariants on the stored data.
    pub fn check(&self) -> MeshCheckReport {
        let divergence_closure = (0..self.n_cells()).all(|c| self.closure_defect(c) <= T::CLOSURE_TOL);
        let face_closure = (0..self.n_faces()).all(|f| self.face_closure_defect(f) <= T::CLOSURE_TOL);
        let interior_orientation = self.faces.iter().enumerate().all(|(i, f)| {
            if f.cells.len() != 2 {
                return f.cells.len() == 1;
            }
            let a = self.cell_face_orientation(f.cells[0], i);
            let b = self.cell_face_orientation(f.cells[1], i);
            matches!((a, b), (Some(a), Some(b)) if a != b)
        });
        let slack = T::one() + T::lit(1e-12);
        let diameter_ordering = self.cells.iter().all(|c| {
            c.faces.iter().all(|&(f, _)| {
                let face = &self.faces[f];
                face.diameter <= c.diameter * slack
                    && face
                        .edges
                        .iter()
                        .all(|&(e, _)| self.edges[e].length <= face.diameter * slack)
            })
        });
        let tol = T::lit(1e4) * T::default_epsilon();
        let unit = |v: &Vector3<T>| (v.norm() - T::one()).abs() <= tol;
        let unit_vectors = self.edges.iter().all(|e| unit(&e.tangent))
            && self
                .faces
                .iter()
                .all(|f| unit(&f.normal) && f.edge_normals.iter().all(unit));
        MeshCheckReport {
            divergence_closure,
            face_closure,
            interior_orientation,
            diameter_ordering,
            unit_vectors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_orientation_signs() {
        let mesh = generate_cubic_mesh::<f64>(2);
        // find the face z = 0.5 between cells (0,0,0) and (0,0,1)
        let (fid, face) = mesh
            .faces()
            .iter()
            .enumerate()
            .find(|(_, f)| {
                (f.center - Vector3::new(0.25, 0.25, 0.5)).norm() < 1e-12
            })
            .unwrap();
        assert!((face.normal - Vector3::z()).norm() < 1e-14);
        assert_eq!(face.cells.len(), 2);
        for &c in &face.cells {
            let o = mesh.cell_face_orientation(c, fid).unwrap();
            let below = mesh.cell(c).center.z < 0.5;
            assert_eq!(o, if below { Orientation::Positive } else { Orientation::Negative });
        }
    }

    #[test]
    fn corrupted_orientation_breaks_only_closure() {
        let mut mesh = generate_cubic_mesh::<f64>(2);
        assert!(mesh.check().all_pass());
        // pick a boundary face of cell 0
        let local = mesh
            .cell(0)
            .faces
            .iter()
            .position(|&(f, _)| mesh.is_boundary_face(f))
            .unwrap();
        mesh.corrupt_cell_face_orientation(0, local);
        let report = mesh.check();
        assert!(!report.divergence_closure);
        assert!(report.face_closure && report.interior_orientation);
        assert!(report.diameter_ordering && report.unit_vectors);
    }

    #[test]
    fn regularity_is_reported() {
        let mesh = generate_cubic_mesh::<f64>(3);
        let r = mesh.regularity();
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }
}
