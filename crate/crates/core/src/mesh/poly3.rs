//! The POLY3 text format.
//!
//! ```text
//! POLY3 1
//! nV nF nT
//! x y z            (nV lines)
//! m v1 ... vm      (nF lines, counter-clockwise seen from the n_F side)
//! m f1 ... fm      (nT lines)
//! ```
//!
//! Ids are 0-based, tokens are whitespace-separated, and `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{Mesh, MeshError, PolyhedralDescription};
use crate::num::Real;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-empty line with comments stripped, as tokens.
    fn next_tokens(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok((i + 1, tokens));
            }
        }
        Err(MeshError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {}", what),
        })
    }
}

fn parse_num<N: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<N, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid {} '{}'", what, tok),
    })
}

fn parse_list(line: usize, tokens: &[&str], what: &str, bound: usize) -> Result<Vec<usize>, MeshError> {
    let m: usize = parse_num(tokens[0], line, "count")?;
    if tokens.len() != m + 1 {
        return Err(MeshError::Parse {
            line,
            message: format!("{} declares {} entries but lists {}", what, m, tokens.len() - 1),
        });
    }
    tokens[1..]
        .iter()
        .map(|t| {
            let id: usize = parse_num(t, line, "index")?;
            if id >= bound {
                return Err(MeshError::Parse {
                    line,
                    message: format!("{} index {} out of range (< {})", what, id, bound),
                });
            }
            Ok(id)
        })
        .collect()
}

/// Parses POLY3 text into a validated mesh.
pub fn parse_poly3<T: Real>(text: &str) -> Result<Mesh<T>, MeshError> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.next_tokens("header")?;
    if header != ["POLY3", "1"] {
        return Err(MeshError::Parse {
            line: ln,
            message: "expected header 'POLY3 1'".into(),
        });
    }
    let (ln, counts) = lines.next_tokens("entity counts")?;
    if counts.len() != 3 {
        return Err(MeshError::Parse {
            line: ln,
            message: "expected 'nV nF nT'".into(),
        });
    }
    let nv: usize = parse_num(counts[0], ln, "vertex count")?;
    let nf: usize = parse_num(counts[1], ln, "face count")?;
    let nt: usize = parse_num(counts[2], ln, "cell count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, tok) = lines.next_tokens("vertex")?;
        if tok.len() != 3 {
            return Err(MeshError::Parse {
                line: ln,
                message: format!("vertex needs 3 coordinates, found {}", tok.len()),
            });
        }
        let mut x = [T::zero(); 3];
        for (slot, t) in x.iter_mut().zip(&tok) {
            let v: f64 = parse_num(t, ln, "coordinate")?;
            *slot = T::lit(v);
        }
        vertices.push(Vector3::new(x[0], x[1], x[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, tok) = lines.next_tokens("face")?;
        faces.push(parse_list(ln, &tok, "face", nv)?);
    }
    let mut cells = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, tok) = lines.next_tokens("cell")?;
        cells.push(parse_list(ln, &tok, "cell", nf)?);
    }
    if let Ok((ln, _)) = lines.next_tokens("") {
        return Err(MeshError::Parse {
            line: ln,
            message: "trailing content after the last cell".into(),
        });
    }

    Mesh::from_polyhedra(PolyhedralDescription { vertices, faces, cells })
}

pub fn read_mesh<T: Real>(path: impl AsRef<Path>) -> Result<Mesh<T>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_poly3(&text)
}

/// Serialises a mesh so that [`parse_poly3`] rebuilds it with the same ids.
pub fn write_poly3<T: Real>(mesh: &Mesh<T>) -> String {
    let mut out = String::new();
    writeln!(out, "POLY3 1").unwrap();
    writeln!(out, "{} {} {}", mesh.n_vertices(), mesh.n_faces(), mesh.n_cells()).unwrap();
    for v in mesh.vertices() {
        let c = v.coords;
        writeln!(
            out,
            "{:e} {:e} {:e}",
            c.x.to_f64_lossy(),
            c.y.to_f64_lossy(),
            c.z.to_f64_lossy()
        )
        .unwrap();
    }
    for f in mesh.faces() {
        write!(out, "{}", f.vertices.len()).unwrap();
        for v in &f.vertices {
            write!(out, " {}", v).unwrap();
        }
        out.push('\n');
    }
    for c in mesh.cells() {
        write!(out, "{}", c.faces.len()).unwrap();
        for (f, _) in &c.faces {
            write!(out, " {}", f).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cubic_mesh;

    #[test]
    fn round_trip_preserves_ids() {
        let m = generate_cubic_mesh::<f64>(2);
        let back: Mesh<f64> = parse_poly3(&write_poly3(&m)).unwrap();
        assert_eq!(back.n_edges(), m.n_edges());
        for (a, b) in m.cells().iter().zip(back.cells()) {
            assert_eq!(a.faces, b.faces);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let text = "POLY3 1\n# comment\n1 0 0\n0.0 zero 0.0\n";
        match parse_poly3::<f64>(text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
        match parse_poly3::<f64>("POLY3 2\n") {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn truncated_file() {
        let text = "POLY3 1\n3 0 0\n0 0 0\n1 0 0\n";
        assert!(matches!(parse_poly3::<f64>(text), Err(MeshError::Parse { line: 5, .. })));
    }
}
