//! Boundary subspaces for essential conditions: which GRAD and CURL DoFs are
//! fixed by the data on essential boundary faces.

use std::fmt;

use super::{DdrComplex, DdrError, EntityDim, SpaceKind};
use crate::mesh::Face;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Natural,
    Essential,
}

type Classifier = Box<dyn Fn(usize, &Face<f64>) -> Option<BoundaryKind> + Send + Sync>;

/// How each boundary face is treated. `Mixed` classifies faces one by one;
/// returning `None` for a boundary face is an error.
pub enum BoundarySpec {
    Natural,
    Essential,
    Mixed(Classifier),
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Natural => f.write_str("Natural"),
            BoundarySpec::Essential => f.write_str("Essential"),
            BoundarySpec::Mixed(_) => f.write_str("Mixed(..)"),
        }
    }
}

impl BoundarySpec {
    pub fn mixed(classify: impl Fn(usize, &Face<f64>) -> Option<BoundaryKind> + Send + Sync + 'static) -> Self {
        BoundarySpec::Mixed(Box::new(classify))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryMask {
    /// Per face: `Some(kind)` on the boundary, `None` inside.
    pub faces: Vec<Option<BoundaryKind>>,
    pub grad: Vec<bool>,
    pub curl: Vec<bool>,
}

impl BoundaryMask {
    pub fn n_grad(&self) -> usize {
        self.grad.iter().filter(|&&m| m).count()
    }

    pub fn n_curl(&self) -> usize {
        self.curl.iter().filter(|&&m| m).count()
    }

    pub fn is_essential(&self, f: usize) -> bool {
        self.faces[f] == Some(BoundaryKind::Essential)
    }

    pub fn is_natural(&self, f: usize) -> bool {
        self.faces[f] == Some(BoundaryKind::Natural)
    }

    pub fn has_essential(&self) -> bool {
        self.faces.iter().any(|k| *k == Some(BoundaryKind::Essential))
    }
}

impl DdrComplex {
    /// Marks the face, edge and vertex GRAD blocks and the face and edge CURL
    /// blocks that lie on essential boundary faces.
    pub fn boundary_mask(&self, spec: &BoundarySpec) -> Result<BoundaryMask, DdrError> {
        let mesh = self.mesh();
        let faces = (0..mesh.n_faces())
            .map(|f| {
                if !mesh.is_boundary_face(f) {
                    return Ok(None);
                }
                match spec {
                    BoundarySpec::Natural => Ok(Some(BoundaryKind::Natural)),
                    BoundarySpec::Essential => Ok(Some(BoundaryKind::Essential)),
                    BoundarySpec::Mixed(classify) => classify(f, mesh.face(f)).map(Some).ok_or(DdrError::UnclassifiedFace(f)),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let grad_layout = self.layout(SpaceKind::Grad);
        let curl_layout = self.layout(SpaceKind::Curl);
        let mut grad = vec![false; grad_layout.n_dofs()];
        let mut curl = vec![false; curl_layout.n_dofs()];
        for (f, kind) in faces.iter().enumerate() {
            if *kind != Some(BoundaryKind::Essential) {
                continue;
            }
            let face = mesh.face(f);
            for &v in &face.vertices {
                grad[grad_layout.block(EntityDim::Vertex, v)].fill(true);
            }
            for &(e, _) in &face.edges {
                grad[grad_layout.block(EntityDim::Edge, e)].fill(true);
                curl[curl_layout.block(EntityDim::Edge, e)].fill(true);
            }
            grad[grad_layout.block(EntityDim::Face, f)].fill(true);
            curl[curl_layout.block(EntityDim::Face, f)].fill(true);
        }
        Ok(BoundaryMask { faces, grad, curl })
    }
}
