use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, MeshError, PolyhedralDescription};
use crate::num::Real;

fn lattice<T: Real>(n: usize) -> (Vec<Vector3<T>>, impl Fn(usize, usize, usize) -> usize) {
    let m = n + 1;
    let nt = T::of_usize(n);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(Vector3::new(
                    T::of_usize(i) / nt,
                    T::of_usize(j) / nt,
                    T::of_usize(k) / nt,
                ));
            }
        }
    }
    (vertices, move |i, j, k| i + m * (j + m * k))
}

/// `n³` axis-aligned cubes tiling the unit cube.
pub fn generate_cubic_mesh<T: Real>(n: usize) -> Mesh<T> {
    assert!(n >= 1, "subdivision count must be positive");
    let (vertices, id) = lattice::<T>(n);
    let mut faces = Vec::with_capacity(3 * n * n * (n + 1));
    let mut xface = HashMap::new();
    let mut yface = HashMap::new();
    let mut zface = HashMap::new();

    for i in 0..=n {
        for j in 0..n {
            for k in 0..n {
                xface.insert((i, j, k), faces.len());
                faces.push(vec![id(i, j, k), id(i, j + 1, k), id(i, j + 1, k + 1), id(i, j, k + 1)]);
            }
        }
    }
    for j in 0..=n {
        for i in 0..n {
            for k in 0..n {
                yface.insert((i, j, k), faces.len());
                faces.push(vec![id(i, j, k), id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j, k)]);
            }
        }
    }
    for k in 0..=n {
        for i in 0..n {
            for j in 0..n {
                zface.insert((i, j, k), faces.len());
                faces.push(vec![id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k)]);
            }
        }
    }

    let mut cells = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                cells.push(vec![
                    xface[&(i, j, k)],
                    xface[&(i + 1, j, k)],
                    yface[&(i, j, k)],
                    yface[&(i, j + 1, k)],
                    zface[&(i, j, k)],
                    zface[&(i, j, k + 1)],
                ]);
            }
        }
    }

    Mesh::from_polyhedra(PolyhedralDescription { vertices, faces, cells })
        .expect("Cartesian mesh is valid by construction")
}

/// Kuhn subdivision: every cube of the `n³` lattice split into six tetrahedra
/// sharing the main diagonal.
pub fn generate_tet_mesh<T: Real>(n: usize) -> Mesh<T> {
    assert!(n >= 1, "subdivision count must be positive");
    let (vertices, id) = lattice::<T>(n);
    const PERMUTATIONS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];

    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut face_ids: HashMap<[usize; 3], usize> = HashMap::new();
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMUTATIONS {
                    let mut p = [i, j, k];
                    let mut tet = [id(p[0], p[1], p[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[step + 1] = id(p[0], p[1], p[2]);
                    }
                    let mut cell = Vec::with_capacity(4);
                    for skip in 0..4 {
                        let mut key = [0; 3];
                        let mut c = 0;
                        for (l, &v) in tet.iter().enumerate() {
                            if l != skip {
                                key[c] = v;
                                c += 1;
                            }
                        }
                        key.sort_unstable();
                        let f = *face_ids.entry(key).or_insert_with(|| {
                            faces.push(key.to_vec());
                            faces.len() - 1
                        });
                        cell.push(f);
                    }
                    cells.push(cell);
                }
            }
        }
    }

    Mesh::from_polyhedra(PolyhedralDescription { vertices, faces, cells })
        .expect("Kuhn mesh is valid by construction")
}

/// Rebuilds `mesh` with every vertex moved by `f`; the map must keep faces
/// planar (affine and projective maps do).
pub fn map_vertices<T: Real>(mesh: &Mesh<T>, f: impl Fn(&Vector3<T>) -> Vector3<T>) -> Result<Mesh<T>, MeshError> {
    Mesh::from_polyhedra(PolyhedralDescription {
        vertices: mesh.vertices().iter().map(|v| f(&v.coords)).collect(),
        faces: mesh.faces().iter().map(|face| face.vertices.clone()).collect(),
        cells: mesh.cells().iter().map(|c| c.faces.iter().map(|&(f, _)| f).collect()).collect(),
    })
}

/// A random projective image `x ↦ (A x + b) / (1 + c·x)` of a mesh, close
/// enough to the identity that no cell degenerates. Faces stay planar while
/// cells lose every symmetry of the lattice.
pub fn random_projective_image(mesh: &Mesh<f64>, seed: u64) -> Mesh<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
    let a = Matrix3::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } + u(0.25));
    let b = Vector3::new(u(0.5), u(0.5), u(0.5));
    let c = Vector3::new(u(0.2), u(0.2), u(0.2));
    map_vertices(mesh, |x| (a * x + b) / (1.0 + c.dot(x))).expect("small projective perturbation keeps the mesh valid")
}
