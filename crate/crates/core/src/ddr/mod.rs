//! Discrete de Rham complex `X_grad → X_curl → X_div` in DDR mode: DoF
//! layouts, interpolators, local and global operators, discrete L² products
//! and norms.

mod interp;
pub mod layout;
pub mod local;
mod mask;
mod products;
pub mod sparse;

use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{DofLayout, EntityDim, SerendipityConfig, SpaceKind};
pub use local::{CellOps, EdgeOps, FaceOps};
pub use mask::{BoundaryKind, BoundaryMask, BoundarySpec};
pub use sparse::{Csr, Triplets};

use crate::polyspaces::BasisError;
use crate::Mesh;
use local::Layouts;

#[derive(Debug, Error)]
pub enum DdrError {
    #[error("only DDR mode (η_Y = 2 on every face and cell) is implemented")]
    NotDdrMode,
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("singular {what} system on entity {entity}")]
    SingularSystem { what: &'static str, entity: usize },
    #[error("vector of length {found} does not match a layout with {expected} DoFs")]
    LengthMismatch { expected: usize, found: usize },
    #[error("layout hash mismatch: stored {stored}, expected {expected}")]
    LayoutMismatch { stored: String, expected: String },
    #[error("boundary face {0} is not classified by the boundary predicate")]
    UnclassifiedFace(usize),
    #[error("norm exponent must satisfy s >= 1, got {0}")]
    BadExponent(f64),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

/// Coefficients of a discrete field in the entity-local orthonormal bases.
#[derive(Clone, Debug)]
pub struct DofVector {
    pub layout: Arc<DofLayout>,
    pub values: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: SpaceKind,
    k: usize,
    n_dofs: usize,
    layout_hash: String,
}

impl DofVector {
    pub fn new(layout: Arc<DofLayout>, values: DVector<f64>) -> Result<Self, DdrError> {
        if values.len() != layout.n_dofs() {
            return Err(DdrError::LengthMismatch {
                expected: layout.n_dofs(),
                found: values.len(),
            });
        }
        Ok(DofVector { layout, values })
    }

    pub fn zeros(layout: Arc<DofLayout>) -> Self {
        let n = layout.n_dofs();
        DofVector {
            layout,
            values: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at the given global indices, in that order.
    pub fn gather(&self, indices: &[usize]) -> DVector<f64> {
        DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.values[i]))
    }

    /// Writes `values` at the given global indices.
    pub fn scatter(&mut self, indices: &[usize], values: &DVector<f64>) {
        for (&i, &v) in indices.iter().zip(values.iter()) {
            self.values[i] = v;
        }
    }

    /// Little-endian doubles at `path` plus a JSON sidecar next to it
    /// (`path` with extension `json`) carrying the layout hash.
    pub fn save(&self, path: &Path) -> Result<(), DdrError> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes)?;
        let sidecar = Sidecar {
            kind: self.layout.kind,
            k: self.layout.k,
            n_dofs: self.len(),
            layout_hash: self.layout.hash(),
        };
        fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path, layout: Arc<DofLayout>) -> Result<Self, DdrError> {
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
        let expected = layout.hash();
        if sidecar.layout_hash != expected {
            return Err(DdrError::LayoutMismatch {
                stored: sidecar.layout_hash,
                expected,
            });
        }
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * layout.n_dofs() {
            return Err(DdrError::LengthMismatch {
                expected: layout.n_dofs(),
                found: bytes.len() / 8,
            });
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        Ok(DofVector {
            values: DVector::from_iterator(layout.n_dofs(), values),
            layout,
        })
    }
}

/// The three discrete spaces on one mesh together with every local operator,
/// the global gradient and curl, and the local discrete L² products.
pub struct DdrComplex {
    mesh: Mesh,
    config: SerendipityConfig,
    layouts: [Arc<DofLayout>; 3],
    edges: Vec<EdgeOps>,
    faces: Vec<FaceOps>,
    cells: Vec<CellOps>,
    grad_matrix: Csr,
    curl_matrix: Csr,
    /// Quadrature degree used to project non-polynomial data.
    pub data_degree: usize,
}

fn kind_index(kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::Grad => 0,
        SpaceKind::Curl => 1,
        SpaceKind::Div => 2,
    }
}

impl DdrComplex {
    pub fn new(mesh: Mesh, k: usize) -> Result<Self, DdrError> {
        let config = SerendipityConfig::ddr_mode(&mesh, k);
        Self::with_config(mesh, config)
    }

    pub fn with_config(mesh: Mesh, config: SerendipityConfig) -> Result<Self, DdrError> {
        if !config.is_ddr_mode() {
            return Err(DdrError::NotDdrMode);
        }
        let k = config.k;
        let layouts = [SpaceKind::Grad, SpaceKind::Curl, SpaceKind::Div].map(|s| Arc::new(DofLayout::new(&mesh, s, &config)));
        let refs = Layouts {
            grad: &layouts[0],
            curl: &layouts[1],
            div: &layouts[2],
        };
        let degree = 2 * k + 4;
        let edges = (0..mesh.n_edges())
            .into_par_iter()
            .map(|e| local::build_edge(&mesh, &refs, e, k))
            .collect::<Result<Vec<_>, _>>()?;
        let faces = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| local::build_face(&mesh, &refs, &edges, f, k, degree))
            .collect::<Result<Vec<_>, _>>()?;
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| local::build_cell(&mesh, &refs, &edges, &faces, c, k, degree))
            .collect::<Result<Vec<_>, _>>()?;

        let (grad, curl, div) = (&layouts[0], &layouts[1], &layouts[2]);
        let mut ug = Triplets::new(curl.n_dofs(), grad.n_dofs());
        let mut uc = Triplets::new(div.n_dofs(), curl.n_dofs());
        for eo in &edges {
            ug.add_block(&eo.curl_dofs, &eo.grad_dofs, &eo.gradient);
        }
        for (f, fo) in faces.iter().enumerate() {
            let rows: Vec<usize> = curl.block(EntityDim::Face, f).collect();
            ug.add_block(&rows, &fo.grad_dofs, &fo.ug);
            let rows: Vec<usize> = div.block(EntityDim::Face, f).collect();
            uc.add_block(&rows, &fo.curl_dofs, &fo.curl);
        }
        for (c, co) in cells.iter().enumerate() {
            // the cell block is the tail of the cell-local ordering
            let rows: Vec<usize> = curl.block(EntityDim::Cell, c).collect();
            let tail = co.ug.rows(co.ug.nrows() - rows.len(), rows.len()).into_owned();
            ug.add_block(&rows, &co.grad_dofs, &tail);
            let rows: Vec<usize> = div.block(EntityDim::Cell, c).collect();
            let tail = co.uc.rows(co.uc.nrows() - rows.len(), rows.len()).into_owned();
            uc.add_block(&rows, &co.curl_dofs, &tail);
        }

        Ok(DdrComplex {
            config,
            grad_matrix: Csr::from_triplets(&ug),
            curl_matrix: Csr::from_triplets(&uc),
            layouts,
            edges,
            faces,
            cells,
            data_degree: 2 * k + 8,
            mesh,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn config(&self) -> &SerendipityConfig {
        &self.config
    }

    pub fn layout(&self, kind: SpaceKind) -> &Arc<DofLayout> {
        &self.layouts[kind_index(kind)]
    }

    pub fn n_dofs(&self, kind: SpaceKind) -> usize {
        self.layout(kind).n_dofs()
    }

    pub fn zeros(&self, kind: SpaceKind) -> DofVector {
        DofVector::zeros(self.layout(kind).clone())
    }

    pub fn vector(&self, kind: SpaceKind, values: DVector<f64>) -> Result<DofVector, DdrError> {
        DofVector::new(self.layout(kind).clone(), values)
    }

    pub fn edge(&self, e: usize) -> &EdgeOps {
        &self.edges[e]
    }

    pub fn face(&self, f: usize) -> &FaceOps {
        &self.faces[f]
    }

    pub fn cell(&self, c: usize) -> &CellOps {
        &self.cells[c]
    }

    /// Global indices of the DoFs attached to a cell and its sub-entities,
    /// in the cell-local order used by every cell operator.
    pub fn cell_dofs(&self, kind: SpaceKind, c: usize) -> &[usize] {
        let co = &self.cells[c];
        match kind {
            SpaceKind::Grad => &co.grad_dofs,
            SpaceKind::Curl => &co.curl_dofs,
            SpaceKind::Div => &co.div_dofs,
        }
    }

    /// Same for a face; DIV has no face-local operators, so only its own block is returned.
    pub fn face_dofs(&self, kind: SpaceKind, f: usize) -> Vec<usize> {
        let fo = &self.faces[f];
        match kind {
            SpaceKind::Grad => fo.grad_dofs.clone(),
            SpaceKind::Curl => fo.curl_dofs.clone(),
            SpaceKind::Div => self.layout(SpaceKind::Div).block(EntityDim::Face, f).collect(),
        }
    }

    /// Local DoFs of `x` on a cell.
    pub fn restrict_cell(&self, x: &DofVector, c: usize) -> DVector<f64> {
        x.gather(self.cell_dofs(x.layout.kind, c))
    }

    pub fn restrict_face(&self, x: &DofVector, f: usize) -> DVector<f64> {
        x.gather(&self.face_dofs(x.layout.kind, f))
    }

    /// `uG`, CURL × GRAD.
    pub fn gradient_matrix(&self) -> &Csr {
        &self.grad_matrix
    }

    /// `uC`, DIV × CURL.
    pub fn curl_matrix(&self) -> &Csr {
        &self.curl_matrix
    }

    pub fn global_gradient(&self, q: &DofVector) -> DofVector {
        assert_eq!(q.layout.kind, SpaceKind::Grad);
        DofVector {
            layout: self.layout(SpaceKind::Curl).clone(),
            values: self.grad_matrix.mul_vec(&q.values),
        }
    }

    pub fn global_curl(&self, v: &DofVector) -> DofVector {
        assert_eq!(v.layout.kind, SpaceKind::Curl);
        DofVector {
            layout: self.layout(SpaceKind::Div).clone(),
            values: self.curl_matrix.mul_vec(&v.values),
        }
    }

    pub fn face_gradient(&self, f: usize, q: &DofVector) -> DVector<f64> {
        &self.faces[f].gradient * self.restrict_face(q, f)
    }

    pub fn face_trace(&self, f: usize, q: &DofVector) -> DVector<f64> {
        &self.faces[f].trace * self.restrict_face(q, f)
    }

    pub fn face_curl(&self, f: usize, v: &DofVector) -> DVector<f64> {
        &self.faces[f].curl * self.restrict_face(v, f)
    }

    pub fn face_tangential_trace(&self, f: usize, v: &DofVector) -> DVector<f64> {
        &self.faces[f].tangential_trace * self.restrict_face(v, f)
    }

    pub fn cell_gradient(&self, c: usize, q: &DofVector) -> DVector<f64> {
        &self.cells[c].gradient * self.restrict_cell(q, c)
    }

    pub fn cell_potential_grad(&self, c: usize, q: &DofVector) -> DVector<f64> {
        &self.cells[c].potential_grad * self.restrict_cell(q, c)
    }

    pub fn cell_curl(&self, c: usize, v: &DofVector) -> DVector<f64> {
        &self.cells[c].curl * self.restrict_cell(v, c)
    }

    pub fn cell_potential_curl(&self, c: usize, v: &DofVector) -> DVector<f64> {
        &self.cells[c].potential_curl * self.restrict_cell(v, c)
    }

    pub fn cell_divergence(&self, c: usize, w: &DofVector) -> DVector<f64> {
        &self.cells[c].divergence * self.restrict_cell(w, c)
    }

    pub fn cell_potential_div(&self, c: usize, w: &DofVector) -> DVector<f64> {
        &self.cells[c].potential_div * self.restrict_cell(w, c)
    }
}

#[cfg(test)]
mod tests;
