//! Entity-blocked DoF numbering of the three discrete spaces.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::polyspaces::{dim_poly, space_dim, Selector, Shape};
use crate::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    Grad,
    Curl,
    Div,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Grad => "GRAD",
            SpaceKind::Curl => "CURL",
            SpaceKind::Div => "DIV",
        }
    }
}

/// Number of boundary edges (faces) selected on each face (cell). The face
/// and cell moment degrees are `ℓ_Y = k + 1 − η_Y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerendipityConfig {
    pub k: usize,
    pub eta_faces: Vec<usize>,
    pub eta_cells: Vec<usize>,
}

impl SerendipityConfig {
    /// `η_Y = 2` everywhere, which gives back the full DDR spaces.
    pub fn ddr_mode(mesh: &Mesh, k: usize) -> Self {
        SerendipityConfig {
            k,
            eta_faces: vec![2; mesh.n_faces()],
            eta_cells: vec![2; mesh.n_cells()],
        }
    }

    pub fn ell_face(&self, f: usize) -> isize {
        self.k as isize + 1 - self.eta_faces[f] as isize
    }

    pub fn ell_cell(&self, c: usize) -> isize {
        self.k as isize + 1 - self.eta_cells[c] as isize
    }

    pub fn is_ddr_mode(&self) -> bool {
        self.eta_faces.iter().chain(&self.eta_cells).all(|&e| e == 2)
    }
}

/// Dimension of the entity, used to index the per-dimension block tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntityDim {
    Vertex = 0,
    Edge = 1,
    Face = 2,
    Cell = 3,
}

/// Global numbering: all vertex blocks, then edges, faces and cells, each in
/// mesh order and contiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub kind: SpaceKind,
    pub k: usize,
    sizes: [Vec<usize>; 4],
    offsets: [Vec<usize>; 4],
    total: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh, kind: SpaceKind, config: &SerendipityConfig) -> Self {
        let k = config.k as isize;
        let vec2 = |sel, l| space_dim(2, Shape::Vector, sel, l);
        let vec3 = |sel, l| space_dim(3, Shape::Vector, sel, l);
        let (nv, ne) = match kind {
            SpaceKind::Grad => (1, k as usize),
            SpaceKind::Curl => (0, k as usize + 1),
            SpaceKind::Div => (0, 0),
        };
        let face = |f: usize| {
            let l = config.ell_face(f);
            match kind {
                SpaceKind::Grad => dim_poly(2, l),
                SpaceKind::Curl => vec2(Selector::R, k - 1) + vec2(Selector::Rc, l + 1),
                SpaceKind::Div => dim_poly(2, k),
            }
        };
        let cell = |c: usize| {
            let l = config.ell_cell(c);
            match kind {
                SpaceKind::Grad => dim_poly(3, l),
                SpaceKind::Curl => vec3(Selector::R, k - 1) + vec3(Selector::Rc, l + 1),
                SpaceKind::Div => vec3(Selector::G, k - 1) + vec3(Selector::Gc, k),
            }
        };
        let sizes = [
            vec![nv; mesh.n_vertices()],
            vec![ne; mesh.n_edges()],
            (0..mesh.n_faces()).map(face).collect(),
            (0..mesh.n_cells()).map(cell).collect(),
        ];
        let mut total = 0;
        let offsets = sizes.clone().map(|s| {
            s.iter()
                .map(|&n| {
                    total += n;
                    total - n
                })
                .collect()
        });
        DofLayout {
            kind,
            k: config.k,
            sizes,
            offsets,
            total,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.total
    }

    pub fn block(&self, dim: EntityDim, id: usize) -> Range<usize> {
        let d = dim as usize;
        let start = self.offsets[d][id];
        start..start + self.sizes[d][id]
    }

    pub fn block_size(&self, dim: EntityDim, id: usize) -> usize {
        self.sizes[dim as usize][id]
    }

    /// First DoF attached to a cell; cell blocks fill the tail of the numbering.
    pub fn cell_start(&self) -> usize {
        self.offsets[3].first().copied().unwrap_or(self.total)
    }

    /// SHA-256 of the kind, degree and every block size, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.name().as_bytes());
        h.update((self.k as u64).to_le_bytes());
        for s in &self.sizes {
            h.update((s.len() as u64).to_le_bytes());
            for &n in s {
                h.update((n as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Global indices of the blocks attached to `Y` and its sub-entities, in
    /// the order vertices, edges, faces, self (as listed by the mesh).
    pub fn gather_indices(&self, vertices: &[usize], edges: &[usize], faces: &[usize], cell: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        for &v in vertices {
            out.extend(self.block(EntityDim::Vertex, v));
        }
        for &e in edges {
            out.extend(self.block(EntityDim::Edge, e));
        }
        for &f in faces {
            out.extend(self.block(EntityDim::Face, f));
        }
        if let Some(c) = cell {
            out.extend(self.block(EntityDim::Cell, c));
        }
        out
    }

    /// Local-to-global map of a face.
    pub fn face_indices(&self, mesh: &Mesh, f: usize) -> Vec<usize> {
        let face = mesh.face(f);
        let edges: Vec<usize> = face.edges.iter().map(|&(e, _)| e).collect();
        self.gather_indices(&face.vertices, &edges, &[f], None)
    }

    /// Local-to-global map of a cell.
    pub fn cell_indices(&self, mesh: &Mesh, c: usize) -> Vec<usize> {
        let cell = mesh.cell(c);
        let faces: Vec<usize> = cell.faces.iter().map(|&(f, _)| f).collect();
        self.gather_indices(&cell.vertices, &cell.edges, &faces, Some(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cubic_mesh, generate_tet_mesh};

    fn dims(mesh: &Mesh, k: usize) -> [usize; 3] {
        let cfg = SerendipityConfig::ddr_mode(mesh, k);
        [SpaceKind::Grad, SpaceKind::Curl, SpaceKind::Div].map(|s| DofLayout::new(mesh, s, &cfg).n_dofs())
    }

    #[test]
    fn lowest_order_counts_are_entity_counts() {
        let m = generate_cubic_mesh::<f64>(2);
        assert_eq!(dims(&m, 0), [m.n_vertices(), m.n_edges(), m.n_faces()]);
    }

    #[test]
    fn closed_form_counts() {
        // k = 1: GRAD 1 | 1 | 1 | 1, CURL 2 | 2+1 | 3+1, DIV 3 | 3+3
        // k = 2: GRAD 1 | 2 | 3 | 4, CURL 3 | 5+3 | 11+4, DIV 6 | 9+11
        let expect = |m: &Mesh, k: usize| -> [usize; 3] {
            let (v, e, f, c) = (m.n_vertices(), m.n_edges(), m.n_faces(), m.n_cells());
            match k {
                1 => [v + e + f + c, 2 * e + 3 * f + 4 * c, 3 * f + 6 * c],
                2 => [v + 2 * e + 3 * f + 4 * c, 3 * e + 8 * f + 15 * c, 6 * f + 20 * c],
                _ => unreachable!(),
            }
        };
        for m in [generate_cubic_mesh::<f64>(2), generate_tet_mesh::<f64>(1)] {
            for k in 1..=2 {
                assert_eq!(dims(&m, k), expect(&m, k), "k={k}");
            }
        }
    }

    #[test]
    fn blocks_tile_the_range_and_hash_tracks_degree() {
        let m = generate_tet_mesh::<f64>(1);
        let cfg = SerendipityConfig::ddr_mode(&m, 1);
        let l = DofLayout::new(&m, SpaceKind::Curl, &cfg);
        let mut seen = vec![false; l.n_dofs()];
        for c in 0..m.n_cells() {
            for i in l.cell_indices(&m, c) {
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let l2 = DofLayout::new(&m, SpaceKind::Curl, &SerendipityConfig::ddr_mode(&m, 2));
        assert_ne!(l.hash(), l2.hash());
        assert_eq!(l.hash(), DofLayout::new(&m, SpaceKind::Curl, &cfg).hash());
    }
}
