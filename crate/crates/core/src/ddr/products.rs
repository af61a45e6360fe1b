//! Discrete L² products and the `Lˢ`-like norms on the curl space.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{Csr, DdrComplex, DdrError, DofVector, EntityDim, SpaceKind, Triplets};
use crate::polyspaces::PolynomialBasis;
use crate::quadrature::{cell_rule, edge_rule, face_rule, QuadratureRule};

/// Values of `Σ_i coeffs_i b_i` per frame component at the rule points.
fn field(basis: &PolynomialBasis<f64>, coeffs: &DVector<f64>, points: &[Vector3<f64>]) -> Vec<DVector<f64>> {
    basis.eval(points).iter().map(|m| m.tr_mul(coeffs)).collect()
}

fn add(a: Vec<DVector<f64>>, b: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    a.into_iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: Vec<DVector<f64>>, b: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    a.into_iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `∫ |v|^s` with the Euclidean norm of the components.
fn power_integral(comps: &[DVector<f64>], rule: &QuadratureRule<f64>, s: f64) -> f64 {
    rule.weights
        .iter()
        .enumerate()
        .map(|(q, &w)| {
            let n2: f64 = comps.iter().map(|c| c[q] * c[q]).sum();
            w * n2.sqrt().powf(s)
        })
        .sum()
}

fn split(v: &DVector<f64>, at: usize) -> (DVector<f64>, DVector<f64>) {
    (v.rows(0, at).into_owned(), v.rows(at, v.len() - at).into_owned())
}

/// `∫_Y |·|^s` contributions of one cell: the cell term, then `(h_F, ∫_F)`
/// per face and `(h_E, ∫_E)` per edge.
struct CellTerms {
    cell: f64,
    faces: Vec<(f64, f64)>,
    edges: Vec<(f64, f64)>,
}

impl DdrComplex {
    pub fn cell_mass(&self, kind: SpaceKind, c: usize) -> &DMatrix<f64> {
        let co = &self.cells[c];
        match kind {
            SpaceKind::Grad => &co.mass_grad,
            SpaceKind::Curl => &co.mass_curl,
            SpaceKind::Div => &co.mass_div,
        }
    }

    /// Global matrix of `(·,·)_{•,h}`.
    pub fn mass_matrix(&self, kind: SpaceKind) -> Csr {
        let n = self.n_dofs(kind);
        let mut t = Triplets::new(n, n);
        for c in 0..self.mesh().n_cells() {
            let dofs = self.cell_dofs(kind, c);
            t.add_block(dofs, dofs, self.cell_mass(kind, c));
        }
        Csr::from_triplets(&t)
    }

    pub fn l2_product(&self, x: &DofVector, y: &DofVector) -> f64 {
        let kind = x.layout.kind;
        assert_eq!(kind, y.layout.kind);
        (0..self.mesh().n_cells())
            .map(|c| {
                let (xl, yl) = (self.restrict_cell(x, c), self.restrict_cell(y, c));
                xl.dot(&(self.cell_mass(kind, c) * yl))
            })
            .sum()
    }

    /// `‖x‖_{•,h}`.
    pub fn l2_norm(&self, x: &DofVector) -> f64 {
        self.l2_product(x, x).max(0.0).sqrt()
    }

    /// `(‖v‖²_{CURL,h} + ‖uC v‖²_{DIV,h})^{1/2}`.
    pub fn graph_norm_u(&self, v: &DofVector) -> f64 {
        let cv = self.global_curl(v);
        (self.l2_product(v, v) + self.l2_product(&cv, &cv)).max(0.0).sqrt()
    }

    fn potential_terms(&self, c: usize, w: &DofVector, s: f64) -> CellTerms {
        let mesh = self.mesh();
        let deg = self.data_degree;
        let co = &self.cells[c];
        let p = self.cell_potential_curl(c, w);
        let rule = cell_rule(mesh, c, deg);
        let cell = power_integral(&field(&co.vk, &p, &rule.points), &rule, s);
        let faces = mesh
            .cell(c)
            .faces
            .iter()
            .map(|&(f, _)| {
                let fo = &self.faces[f];
                let face = mesh.face(f);
                let rule = face_rule(mesh, f, deg);
                let pv = field(&co.vk, &p, &rule.points);
                let pt: Vec<DVector<f64>> = face
                    .frame
                    .iter()
                    .map(|a| &pv[0] * a.x + &pv[1] * a.y + &pv[2] * a.z)
                    .collect();
                let gt = field(&fo.vk, &self.face_tangential_trace(f, w), &rule.points);
                (face.diameter, power_integral(&sub(pt, gt), &rule, s))
            })
            .collect();
        let edges = mesh
            .cell(c)
            .edges
            .iter()
            .map(|&e| {
                let edge = mesh.edge(e);
                let rule = edge_rule(mesh, e, deg);
                let t = edge.tangent;
                let pv = field(&co.vk, &p, &rule.points);
                let pt = &pv[0] * t.x + &pv[1] * t.y + &pv[2] * t.z;
                let we = w.gather(&self.edges[e].curl_dofs);
                let ve = field(&self.edges[e].tangent_basis, &we, &rule.points).swap_remove(0);
                (edge.length, power_integral(&[pt - ve], &rule, s))
            })
            .collect();
        CellTerms { cell, faces, edges }
    }

    fn component_terms(&self, c: usize, w: &DofVector, s: f64) -> CellTerms {
        let mesh = self.mesh();
        let deg = self.data_degree;
        let layout = self.layout(SpaceKind::Curl);
        let co = &self.cells[c];
        let rule = cell_rule(mesh, c, deg);
        let (a, b) = split(&w.gather(&layout.block(EntityDim::Cell, c).collect::<Vec<_>>()), co.r.dim());
        let cell = power_integral(&add(field(&co.r, &a, &rule.points), field(&co.rc, &b, &rule.points)), &rule, s);
        let faces = mesh
            .cell(c)
            .faces
            .iter()
            .map(|&(f, _)| {
                let fo = &self.faces[f];
                let rule = face_rule(mesh, f, deg);
                let (a, b) = split(&w.gather(&layout.block(EntityDim::Face, f).collect::<Vec<_>>()), fo.r.dim());
                let v = add(field(&fo.r, &a, &rule.points), field(&fo.rc, &b, &rule.points));
                (mesh.face(f).diameter, power_integral(&v, &rule, s))
            })
            .collect();
        let edges = mesh
            .cell(c)
            .edges
            .iter()
            .map(|&e| {
                let rule = edge_rule(mesh, e, deg);
                let we = w.gather(&self.edges[e].curl_dofs);
                let v = field(&self.edges[e].tangent_basis, &we, &rule.points);
                (mesh.edge(e).length, power_integral(&v, &rule, s))
            })
            .collect();
        CellTerms { cell, faces, edges }
    }

    fn check_exponent(s: f64) -> Result<(), DdrError> {
        if s >= 1.0 && s.is_finite() {
            Ok(())
        } else {
            Err(DdrError::BadExponent(s))
        }
    }

    /// `‖w‖_{s,CURL,h}`: powered sum of the potential and of its
    /// face/edge trace defects weighted by `h_F` and `h_E²`.
    pub fn ls_curl_norm(&self, s: f64, w: &DofVector) -> Result<f64, DdrError> {
        Self::check_exponent(s)?;
        let total: f64 = (0..self.mesh().n_cells())
            .map(|c| {
                let t = self.potential_terms(c, w, s);
                t.cell + t.faces.iter().map(|(h, i)| h * i).sum::<f64>() + t.edges.iter().map(|(h, i)| h * h * i).sum::<f64>()
            })
            .sum();
        Ok(total.powf(1.0 / s))
    }

    /// Cellwise potential norm `‖P w‖ + Σ_F h_F^{1/s}‖(P w)_t − γ_t w‖ + Σ_E h_E^{2/s}‖P w·t_E − w_E‖`,
    /// combined in `ℓˢ` over cells.
    pub fn potential_norm_curl(&self, s: f64, w: &DofVector) -> Result<f64, DdrError> {
        Self::check_exponent(s)?;
        Ok(self.combine(s, |c| self.potential_terms(c, w, s)))
    }

    /// Component norm: the `Lˢ` norms of the polynomial unknowns on each
    /// entity of the cell, weighted by `h^{codim/s}`, combined in `ℓˢ` over cells.
    pub fn component_norm_curl(&self, s: f64, w: &DofVector) -> Result<f64, DdrError> {
        Self::check_exponent(s)?;
        Ok(self.combine(s, |c| self.component_terms(c, w, s)))
    }

    /// Per-cell component norms, used by the local boundedness studies.
    pub fn cell_component_norm_curl(&self, s: f64, c: usize, w: &DofVector) -> f64 {
        Self::local_norm(s, &self.component_terms(c, w, s))
    }

    pub fn cell_potential_norm_curl(&self, s: f64, c: usize, w: &DofVector) -> f64 {
        Self::local_norm(s, &self.potential_terms(c, w, s))
    }

    /// `‖P_curl,T w‖_{Lˢ(T)}`.
    pub fn cell_potential_ls_norm(&self, s: f64, c: usize, w: &DofVector) -> f64 {
        self.potential_terms(c, w, s).cell.powf(1.0 / s)
    }

    fn local_norm(s: f64, t: &CellTerms) -> f64 {
        let r = 1.0 / s;
        t.cell.powf(r)
            + t.faces.iter().map(|(h, i)| h.powf(r) * i.powf(r)).sum::<f64>()
            + t.edges.iter().map(|(h, i)| h.powf(2.0 * r) * i.powf(r)).sum::<f64>()
    }

    fn combine(&self, s: f64, terms: impl Fn(usize) -> CellTerms) -> f64 {
        (0..self.mesh().n_cells())
            .map(|c| Self::local_norm(s, &terms(c)).powf(s))
            .sum::<f64>()
            .powf(1.0 / s)
    }
}
