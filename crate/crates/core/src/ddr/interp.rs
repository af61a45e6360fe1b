//! Interpolators onto the three discrete spaces. Entity moments are `L²`
//! projections onto the orthonormal DoF bases, computed with quadrature of
//! degree [`DdrComplex::data_degree`].

use nalgebra::{DVector, Vector3};
use rayon::prelude::*;

use super::{DdrComplex, DofVector, EntityDim, SpaceKind};
use crate::quadrature::{cell_rule, edge_rule, face_rule};

type V3 = Vector3<f64>;

impl DdrComplex {
    fn fill(&self, kind: SpaceKind, blocks: [Vec<DVector<f64>>; 4]) -> DofVector {
        let mut out = self.zeros(kind);
        let layout = out.layout.clone();
        let dims = [EntityDim::Vertex, EntityDim::Edge, EntityDim::Face, EntityDim::Cell];
        for (dim, values) in dims.into_iter().zip(blocks) {
            for (id, v) in values.iter().enumerate() {
                let range = layout.block(dim, id);
                debug_assert_eq!(range.len(), v.len());
                out.values.rows_mut(range.start, range.len()).copy_from(v);
            }
        }
        out
    }

    fn none(n: usize) -> Vec<DVector<f64>> {
        vec![DVector::zeros(0); n]
    }

    /// Vertex values and the edge, face and cell moments of `q`.
    pub fn interpolate_grad(&self, q: impl Fn(&V3) -> f64 + Sync) -> DofVector {
        let mesh = self.mesh();
        let deg = self.data_degree;
        let vertices = mesh.vertices().iter().map(|v| DVector::from_element(1, q(&v.coords))).collect();
        let edges = (0..mesh.n_edges())
            .into_par_iter()
            .map(|e| self.edges[e].moment_basis.project_scalar(&edge_rule(mesh, e, deg), &q))
            .collect();
        let faces = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| self.faces[f].moment_basis.project_scalar(&face_rule(mesh, f, deg), &q))
            .collect();
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| self.cells[c].moment_basis.project_scalar(&cell_rule(mesh, c, deg), &q))
            .collect();
        self.fill(SpaceKind::Grad, [vertices, edges, faces, cells])
    }

    /// Tangential edge moments, then the `R`/`Rᶜ` projections of the
    /// tangential face component and of the field on cells.
    pub fn interpolate_curl(&self, v: impl Fn(&V3) -> V3 + Sync) -> DofVector {
        let mesh = self.mesh();
        let deg = self.data_degree;
        let edges = (0..mesh.n_edges())
            .into_par_iter()
            .map(|e| {
                let t = mesh.edge(e).tangent;
                self.edges[e].tangent_basis.project_scalar(&edge_rule(mesh, e, deg), |x| v(x).dot(&t))
            })
            .collect();
        let faces = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| {
                let fo = &self.faces[f];
                let rule = face_rule(mesh, f, deg);
                let a = fo.r.project_vector(&rule, &v);
                let b = fo.rc.project_vector(&rule, &v);
                DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
            })
            .collect();
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let co = &self.cells[c];
                let rule = cell_rule(mesh, c, deg);
                let a = co.r.project_vector(&rule, &v);
                let b = co.rc.project_vector(&rule, &v);
                DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
            })
            .collect();
        self.fill(SpaceKind::Curl, [Self::none(mesh.n_vertices()), edges, faces, cells])
    }

    /// Normal face moments and the `G`/`Gᶜ` projections on cells.
    pub fn interpolate_div(&self, w: impl Fn(&V3) -> V3 + Sync) -> DofVector {
        let mesh = self.mesh();
        let deg = self.data_degree;
        let faces = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| {
                let n = mesh.face(f).normal;
                self.faces[f].pk.project_scalar(&face_rule(mesh, f, deg), |x| w(x).dot(&n))
            })
            .collect();
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let co = &self.cells[c];
                let rule = cell_rule(mesh, c, deg);
                let a = co.g.project_vector(&rule, &w);
                let b = co.gc.project_vector(&rule, &w);
                DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
            })
            .collect();
        self.fill(
            SpaceKind::Div,
            [Self::none(mesh.n_vertices()), Self::none(mesh.n_edges()), faces, cells],
        )
    }
}
