//! Per-entity operators: edge skeleton, face gradient/trace/curl/tangential
//! trace, cell gradient/curl/divergence with their potentials, and the local
//! discrete L² products.
//!
//! All polynomial images are stored as coefficient matrices in orthonormal
//! bases, so every right-hand side of a "find `X` such that `∫ X·v = …` for
//! all `v` in the full space" system is already the answer.

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector3};

use super::layout::{DofLayout, EntityDim};
use super::DdrError;
use crate::polyspaces::{PolyContext, PolyFamily, PolynomialBasis, Selector};
use crate::quadrature::{edge_rule, face_rule, Entity, QuadratureRule};
use crate::Mesh;

type M = DMatrix<f64>;

pub(crate) struct Layouts<'a> {
    pub grad: &'a DofLayout,
    pub curl: &'a DofLayout,
    pub div: &'a DofLayout,
}

/// Index of every entry of `child` inside `parent`.
pub(crate) fn positions(parent: &[usize], child: &[usize]) -> Vec<usize> {
    let lookup: HashMap<usize, usize> = parent.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    child.iter().map(|g| lookup[g]).collect()
}

fn block_positions(parent: &[usize], layout: &DofLayout, dim: EntityDim, id: usize) -> Vec<usize> {
    let block: Vec<usize> = layout.block(dim, id).collect();
    positions(parent, &block)
}

fn scatter_cols(dst: &mut M, src: &M, cols: &[usize]) {
    assert_eq!(src.ncols(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        let mut d = dst.column_mut(c);
        d += src.column(j);
    }
}

fn scatter_block(dst: &mut M, src: &M, rows: &[usize], cols: &[usize]) {
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            dst[(i, j)] += src[(a, b)];
        }
    }
}

fn identity_at(nrows: usize, ncols: usize, cols: &[usize]) -> M {
    assert_eq!(nrows, cols.len());
    let mut m = M::zeros(nrows, ncols);
    for (i, &c) in cols.iter().enumerate() {
        m[(i, c)] = 1.0;
    }
    m
}

fn vstack(a: &M, b: &M) -> M {
    let mut out = M::zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Members `skip..` of a family.
fn tail(fam: &PolyFamily<f64>, skip: usize) -> PolyFamily<f64> {
    PolyFamily {
        coeffs: fam.coeffs.rows(skip, fam.len() - skip).into_owned(),
        ..fam.clone()
    }
}

/// Family values at physical points, one (members × points) matrix per
/// frame component, with every column scaled by the quadrature weight.
fn weighted_values(ctx: &PolyContext<f64>, fam: &PolyFamily<f64>, rule: &QuadratureRule<f64>) -> Vec<M> {
    let phi = ctx.frame.monomials(fam.degree, &rule.points);
    let mut vals = fam.eval(&phi);
    for v in &mut vals {
        for (q, &w) in rule.weights.iter().enumerate() {
            v.column_mut(q).scale_mut(w);
        }
    }
    vals
}

/// Basis values transposed to (points × members).
fn values_t(basis: &PolynomialBasis<f64>, points: &[Vector3<f64>]) -> Vec<M> {
    basis.eval(points).into_iter().map(|m| m.transpose()).collect()
}

fn solve(a: M, rhs: M, what: &'static str, entity: usize) -> Result<M, DdrError> {
    a.lu().solve(&rhs).ok_or(DdrError::SingularSystem { what, entity })
}

pub struct EdgeOps {
    /// Global GRAD indices in edge-local order `[V0, V1, moments]`.
    pub grad_dofs: Vec<usize>,
    pub curl_dofs: Vec<usize>,
    /// `𝒫^{k+1}(E)`.
    pub skeleton_basis: PolynomialBasis<f64>,
    /// `𝒫^k(E)`, the CURL edge unknowns.
    pub tangent_basis: PolynomialBasis<f64>,
    /// `𝒫^{k−1}(E)`, the GRAD edge unknowns.
    pub moment_basis: PolynomialBasis<f64>,
    /// Edge-local GRAD DoFs to the coefficients of `q_{ℰh}|_E`.
    pub skeleton: M,
    /// Edge-local GRAD DoFs to the coefficients of `(q_{ℰh}|_E)'` in `𝒫^k(E)`.
    pub gradient: M,
}

pub(crate) fn build_edge(mesh: &Mesh, layouts: &Layouts, e: usize, k: usize) -> Result<EdgeOps, DdrError> {
    let k = k as isize;
    let ctx = PolyContext::new(mesh, Entity::Edge(e), (k + 1) as usize);
    let pk1 = ctx.scalar(k + 1);
    let pk = ctx.scalar(k);
    let pkm1 = ctx.scalar(k - 1);
    let [a, b] = mesh.edge(e).vertices;
    let ends = pk1.eval(&[mesh.vertex(a).coords, mesh.vertex(b).coords]).swap_remove(0);

    let n = pk1.dim();
    let mut sys = M::zeros(n, n);
    sys.row_mut(0).copy_from(&ends.column(0).transpose());
    sys.row_mut(1).copy_from(&ends.column(1).transpose());
    sys.rows_mut(2, n - 2).copy_from(&ctx.inner(&pkm1.family, &pk1.family));
    let skeleton = sys.try_inverse().ok_or(DdrError::SingularSystem {
        what: "edge skeleton",
        entity: e,
    })?;
    let derivative = pk1.family.partial(0, ctx.frame.inv_scale());
    let gradient = ctx.inner(&pk.family, &derivative) * &skeleton;

    let mut grad_dofs = vec![layouts.grad.block(EntityDim::Vertex, a).start, layouts.grad.block(EntityDim::Vertex, b).start];
    grad_dofs.extend(layouts.grad.block(EntityDim::Edge, e));
    Ok(EdgeOps {
        grad_dofs,
        curl_dofs: layouts.curl.block(EntityDim::Edge, e).collect(),
        skeleton_basis: pk1,
        tangent_basis: pk,
        moment_basis: pkm1,
        skeleton,
        gradient,
    })
}

pub struct FaceOps {
    pub ctx: PolyContext<f64>,
    /// Face-local GRAD order: loop vertices, edges (loop order), face moments.
    pub grad_dofs: Vec<usize>,
    /// Face-local CURL order: edges (loop order), then the `R`, `Rᶜ` face block.
    pub curl_dofs: Vec<usize>,
    pub moment_basis: PolynomialBasis<f64>,
    /// `𝒫^k(F)`: DIV face unknowns and the range of `C_F`.
    pub pk: PolynomialBasis<f64>,
    /// `𝒫^{k+1}(F)`: range of `γ_F`.
    pub pk1: PolynomialBasis<f64>,
    /// `𝒫^k(F)²`: range of `G_F` and `γ_{t,F}`.
    pub vk: PolynomialBasis<f64>,
    pub r: PolynomialBasis<f64>,
    pub rc: PolynomialBasis<f64>,
    pub gradient: M,
    pub trace: M,
    pub curl: M,
    pub tangential_trace: M,
    /// Face block of the global gradient.
    pub ug: M,
}

struct EdgeSample {
    omega: f64,
    rule: QuadratureRule<f64>,
    /// `n_FE` in face frame components.
    normal: [f64; 2],
    /// Skeleton values (points × edge-local GRAD DoFs).
    skeleton: M,
    /// `𝒫^k(E)` values (points × CURL edge DoFs).
    tangent: M,
    grad_cols: Vec<usize>,
    curl_cols: Vec<usize>,
}

pub(crate) fn build_face(
    mesh: &Mesh,
    layouts: &Layouts,
    edges: &[EdgeOps],
    f: usize,
    k: usize,
    degree: usize,
) -> Result<FaceOps, DdrError> {
    let face = mesh.face(f);
    let ki = k as isize;
    let ctx = PolyContext::new(mesh, Entity::Face(f), k + 2);
    let inv = ctx.frame.inv_scale();
    let moment_basis = ctx.scalar(ki - 1);
    let pk = ctx.scalar(ki);
    let pk1 = ctx.scalar(ki + 1);
    let vk = ctx.vector(ki);
    let r = ctx.subspace(Selector::R, ki - 1)?;
    let rc = ctx.subspace(Selector::Rc, ki)?;

    let grad_dofs = layouts.grad.face_indices(mesh, f);
    let curl_dofs = layouts.curl.face_indices(mesh, f);
    let (ng, nc) = (grad_dofs.len(), curl_dofs.len());
    let own_grad = block_positions(&grad_dofs, layouts.grad, EntityDim::Face, f);
    let own_curl = block_positions(&curl_dofs, layouts.curl, EntityDim::Face, f);
    let (own_r, own_rc) = own_curl.split_at(r.dim());

    let samples: Vec<EdgeSample> = face
        .edges
        .iter()
        .zip(&face.edge_normals)
        .map(|(&(e, o), n)| {
            let ops = &edges[e];
            let rule = edge_rule(mesh, e, degree);
            let c = ctx.frame.components(n);
            EdgeSample {
                omega: o.sign(),
                normal: [c[0], c[1]],
                skeleton: values_t(&ops.skeleton_basis, &rule.points).swap_remove(0) * &ops.skeleton,
                tangent: values_t(&ops.tangent_basis, &rule.points).swap_remove(0),
                grad_cols: positions(&grad_dofs, &ops.grad_dofs),
                curl_cols: positions(&curl_dofs, &ops.curl_dofs),
                rule,
            }
        })
        .collect();

    // Σ_E ω_FE ∫_E q_{ℰh} (v·n_FE) for every member v of a 2-component family
    let edge_flux = |fam: &PolyFamily<f64>| {
        let mut out = M::zeros(fam.len(), ng);
        for s in &samples {
            let v = weighted_values(&ctx, fam, &s.rule);
            let vn = (&v[0] * s.normal[0] + &v[1] * s.normal[1]) * s.omega;
            scatter_cols(&mut out, &(vn * &s.skeleton), &s.grad_cols);
        }
        out
    };
    // Σ_E ω_FE ∫_E v_E r for every member r of a scalar family
    let edge_scalar = |fam: &PolyFamily<f64>| {
        let mut out = M::zeros(fam.len(), nc);
        for s in &samples {
            let v = weighted_values(&ctx, fam, &s.rule).swap_remove(0) * s.omega;
            scatter_cols(&mut out, &(v * &s.tangent), &s.curl_cols);
        }
        out
    };

    let mut gradient = edge_flux(&vk.family);
    scatter_cols(&mut gradient, &(-ctx.inner(&vk.family.div(inv), &moment_basis.family)), &own_grad);

    let w = ctx.subspace(Selector::Rc, ki + 2)?;
    let a = ctx.inner(&w.family.div(inv), &pk1.family);
    let rhs = edge_flux(&w.family) - ctx.inner(&w.family, &vk.family) * &gradient;
    let trace = solve(a, rhs, "face trace", f)?;

    let mut curl = -edge_scalar(&pk.family);
    scatter_cols(&mut curl, &ctx.inner(&pk.family.rot2(inv), &r.family), own_r);

    let q = tail(&pk1.family, 1);
    let a = vstack(&ctx.inner(&q.rot2(inv), &vk.family), &ctx.inner(&rc.family, &vk.family));
    let top = ctx.inner(&q, &pk.family) * &curl + edge_scalar(&q);
    let rhs = vstack(&top, &identity_at(rc.dim(), nc, own_rc));
    let tangential_trace = solve(a, rhs, "face tangential trace", f)?;

    let ug = vstack(&ctx.inner(&r.family, &vk.family), &ctx.inner(&rc.family, &vk.family)) * &gradient;

    Ok(FaceOps {
        grad_dofs,
        curl_dofs,
        moment_basis,
        pk,
        pk1,
        vk,
        r,
        rc,
        gradient,
        trace,
        curl,
        tangential_trace,
        ug,
        ctx,
    })
}

pub struct CellOps {
    pub ctx: PolyContext<f64>,
    pub grad_dofs: Vec<usize>,
    pub curl_dofs: Vec<usize>,
    pub div_dofs: Vec<usize>,
    pub moment_basis: PolynomialBasis<f64>,
    pub pk: PolynomialBasis<f64>,
    pub pk1: PolynomialBasis<f64>,
    pub vk: PolynomialBasis<f64>,
    pub r: PolynomialBasis<f64>,
    pub rc: PolynomialBasis<f64>,
    pub g: PolynomialBasis<f64>,
    pub gc: PolynomialBasis<f64>,
    pub gradient: M,
    pub potential_grad: M,
    pub curl: M,
    pub potential_curl: M,
    pub divergence: M,
    pub potential_div: M,
    /// Cell-local global gradient (CURL local × GRAD local).
    pub ug: M,
    /// Cell-local global curl (DIV local × CURL local).
    pub uc: M,
    /// `P_div ∘ uC` restricted to the cell.
    pub ch: M,
    pub mass_grad: M,
    pub mass_curl: M,
    pub mass_div: M,
}

struct FaceSample {
    omega: f64,
    normal: Vector3<f64>,
    h: f64,
    rule: QuadratureRule<f64>,
    /// `γ_F` values (points × cell GRAD local).
    gamma: M,
    /// `γ_{t,F}` as a 3D field, per Cartesian component (points × cell CURL local).
    gamma_t: [M; 3],
    /// `γ_{t,F}` in face frame components.
    gamma_t_frame: [M; 2],
    frame: [Vector3<f64>; 2],
    /// `w_F` values (points × cell DIV local).
    normal_trace: M,
}

pub(crate) fn build_cell(
    mesh: &Mesh,
    layouts: &Layouts,
    edges: &[EdgeOps],
    faces: &[FaceOps],
    c: usize,
    k: usize,
    degree: usize,
) -> Result<CellOps, DdrError> {
    let cell = mesh.cell(c);
    let ki = k as isize;
    let ctx = PolyContext::new(mesh, Entity::Cell(c), k + 2);
    let inv = ctx.frame.inv_scale();
    let moment_basis = ctx.scalar(ki - 1);
    let pk = ctx.scalar(ki);
    let pk1 = ctx.scalar(ki + 1);
    let vk = ctx.vector(ki);
    let r = ctx.subspace(Selector::R, ki - 1)?;
    let rc = ctx.subspace(Selector::Rc, ki)?;
    let g = ctx.subspace(Selector::G, ki - 1)?;
    let gc = ctx.subspace(Selector::Gc, ki)?;

    let grad_dofs = layouts.grad.cell_indices(mesh, c);
    let curl_dofs = layouts.curl.cell_indices(mesh, c);
    let div_dofs = layouts.div.cell_indices(mesh, c);
    let (ng, nc, nd) = (grad_dofs.len(), curl_dofs.len(), div_dofs.len());
    let own_grad = block_positions(&grad_dofs, layouts.grad, EntityDim::Cell, c);
    let own_curl = block_positions(&curl_dofs, layouts.curl, EntityDim::Cell, c);
    let own_div = block_positions(&div_dofs, layouts.div, EntityDim::Cell, c);
    let (own_r, own_rc) = own_curl.split_at(r.dim());
    let (own_g, own_gc) = own_div.split_at(g.dim());

    let samples: Vec<FaceSample> = cell
        .faces
        .iter()
        .map(|&(f, o)| {
            let fo = &faces[f];
            let face = mesh.face(f);
            let rule = face_rule(mesh, f, degree);
            let nq = rule.len();
            let mut gamma = M::zeros(nq, ng);
            let cols = positions(&grad_dofs, &fo.grad_dofs);
            scatter_cols(&mut gamma, &(values_t(&fo.pk1, &rule.points).swap_remove(0) * &fo.trace), &cols);
            let cols = positions(&curl_dofs, &fo.curl_dofs);
            let vt = values_t(&fo.vk, &rule.points);
            let gamma_t_frame = [0, 1].map(|a| {
                let mut m = M::zeros(nq, nc);
                scatter_cols(&mut m, &(&vt[a] * &fo.tangential_trace), &cols);
                m
            });
            let gamma_t = [0, 1, 2].map(|x| &gamma_t_frame[0] * face.frame[0][x] + &gamma_t_frame[1] * face.frame[1][x]);
            let mut normal_trace = M::zeros(nq, nd);
            let cols = block_positions(&div_dofs, layouts.div, EntityDim::Face, f);
            scatter_cols(&mut normal_trace, &values_t(&fo.pk, &rule.points).swap_remove(0), &cols);
            FaceSample {
                omega: o.sign(),
                normal: face.normal,
                h: face.diameter,
                frame: face.frame,
                rule,
                gamma,
                gamma_t,
                gamma_t_frame,
                normal_trace,
            }
        })
        .collect();

    // Σ_F ω_TF ∫_F γ_F (v·n_F)
    let face_flux = |fam: &PolyFamily<f64>| {
        let mut out = M::zeros(fam.len(), ng);
        for s in &samples {
            let v = weighted_values(&ctx, fam, &s.rule);
            let vn = (&v[0] * s.normal.x + &v[1] * s.normal.y + &v[2] * s.normal.z) * s.omega;
            out += vn * &s.gamma;
        }
        out
    };
    // Σ_F ω_TF ∫_F γ_{t,F}·(w × n_F) = Σ_F ω_TF ∫_F w·(n_F × γ_{t,F})
    let face_rotated = |fam: &PolyFamily<f64>| {
        let mut out = M::zeros(fam.len(), nc);
        for s in &samples {
            let v = weighted_values(&ctx, fam, &s.rule);
            let (n, gt) = (&s.normal, &s.gamma_t);
            let cross = [
                &gt[2] * n.y - &gt[1] * n.z,
                &gt[0] * n.z - &gt[2] * n.x,
                &gt[1] * n.x - &gt[0] * n.y,
            ];
            out += (&v[0] * &cross[0] + &v[1] * &cross[1] + &v[2] * &cross[2]) * s.omega;
        }
        out
    };
    // Σ_F ω_TF ∫_F w_F q
    let face_scalar = |fam: &PolyFamily<f64>| {
        let mut out = M::zeros(fam.len(), nd);
        for s in &samples {
            let v = weighted_values(&ctx, fam, &s.rule).swap_remove(0) * s.omega;
            out += v * &s.normal_trace;
        }
        out
    };

    let mut gradient = face_flux(&vk.family);
    scatter_cols(&mut gradient, &(-ctx.inner(&vk.family.div(inv), &moment_basis.family)), &own_grad);
    let w = ctx.subspace(Selector::Rc, ki + 2)?;
    let a = ctx.inner(&w.family.div(inv), &pk1.family);
    let rhs = face_flux(&w.family) - ctx.inner(&w.family, &vk.family) * &gradient;
    let potential_grad = solve(a, rhs, "cell gradient potential", c)?;

    let mut curl = face_rotated(&vk.family);
    scatter_cols(&mut curl, &ctx.inner(&vk.family.curl3(inv), &r.family), own_r);
    let w = ctx.subspace(Selector::Gc, ki + 1)?;
    let a = vstack(&ctx.inner(&w.family.curl3(inv), &vk.family), &ctx.inner(&rc.family, &vk.family));
    let top = ctx.inner(&w.family, &vk.family) * &curl - face_rotated(&w.family);
    let rhs = vstack(&top, &identity_at(rc.dim(), nc, own_rc));
    let potential_curl = solve(a, rhs, "cell curl potential", c)?;

    let mut divergence = face_scalar(&pk.family);
    scatter_cols(&mut divergence, &(-ctx.inner(&pk.family.grad(inv), &g.family)), own_g);
    let q = tail(&pk1.family, 1);
    let a = vstack(&ctx.inner(&q.grad(inv), &vk.family), &ctx.inner(&gc.family, &vk.family));
    let top = face_scalar(&q) - ctx.inner(&q, &pk.family) * &divergence;
    let rhs = vstack(&top, &identity_at(gc.dim(), nd, own_gc));
    let potential_div = solve(a, rhs, "cell divergence potential", c)?;

    let mut ug = M::zeros(nc, ng);
    for &e in &cell.edges {
        let eo = &edges[e];
        let rows = positions(&curl_dofs, &eo.curl_dofs);
        let cols = positions(&grad_dofs, &eo.grad_dofs);
        scatter_block(&mut ug, &eo.gradient, &rows, &cols);
    }
    let mut uc = M::zeros(nd, nc);
    for &(f, _) in &cell.faces {
        let fo = &faces[f];
        let cols = positions(&grad_dofs, &fo.grad_dofs);
        let rows = block_positions(&curl_dofs, layouts.curl, EntityDim::Face, f);
        scatter_block(&mut ug, &fo.ug, &rows, &cols);
        let cols = positions(&curl_dofs, &fo.curl_dofs);
        let rows = block_positions(&div_dofs, layouts.div, EntityDim::Face, f);
        scatter_block(&mut uc, &fo.curl, &rows, &cols);
    }
    let all_grad: Vec<usize> = (0..ng).collect();
    let all_curl: Vec<usize> = (0..nc).collect();
    let cell_ug = vstack(&ctx.inner(&r.family, &vk.family), &ctx.inner(&rc.family, &vk.family)) * &gradient;
    scatter_block(&mut ug, &cell_ug, &own_curl, &all_grad);
    let cell_uc = vstack(&ctx.inner(&g.family, &vk.family), &ctx.inner(&gc.family, &vk.family)) * &curl;
    scatter_block(&mut uc, &cell_uc, &own_div, &all_curl);
    let ch = &potential_div * &uc;

    // discrete L² products: consistency term plus the displayed stabilisations
    let sym = |m: M| (&m + m.transpose()) * 0.5;
    let weighted_gram = |b: &M, w: &[f64], scale: f64| {
        let mut bw = b.clone();
        for (q, &wq) in w.iter().enumerate() {
            bw.row_mut(q).scale_mut(wq * scale);
        }
        b.transpose() * bw
    };

    let mut mass_grad = potential_grad.transpose() * &potential_grad;
    let mut mass_curl = potential_curl.transpose() * &potential_curl;
    let mut mass_div = potential_div.transpose() * &potential_div;
    for s in &samples {
        let pts = &s.rule.points;
        let w = &s.rule.weights;
        let b = values_t(&pk1, pts).swap_remove(0) * &potential_grad - &s.gamma;
        mass_grad += weighted_gram(&b, w, s.h);
        let pv: Vec<M> = values_t(&vk, pts).iter().map(|v| v * &potential_curl).collect();
        for a in 0..2 {
            let t = s.frame[a];
            let b = &pv[0] * t.x + &pv[1] * t.y + &pv[2] * t.z - &s.gamma_t_frame[a];
            mass_curl += weighted_gram(&b, w, s.h);
        }
        let pv: Vec<M> = values_t(&vk, pts).iter().map(|v| v * &potential_div).collect();
        let n = s.normal;
        let b = &pv[0] * n.x + &pv[1] * n.y + &pv[2] * n.z - &s.normal_trace;
        mass_div += weighted_gram(&b, w, s.h);
    }
    for &e in &cell.edges {
        let eo = &edges[e];
        let edge = mesh.edge(e);
        let rule = edge_rule(mesh, e, degree);
        let (pts, w) = (&rule.points, &rule.weights);
        let h2 = edge.length * edge.length;
        let mut b = values_t(&pk1, pts).swap_remove(0) * &potential_grad;
        let skel = values_t(&eo.skeleton_basis, pts).swap_remove(0) * &eo.skeleton;
        scatter_cols(&mut b, &(-skel), &positions(&grad_dofs, &eo.grad_dofs));
        mass_grad += weighted_gram(&b, w, h2);
        let t = edge.tangent;
        let pv: Vec<M> = values_t(&vk, pts).iter().map(|v| v * &potential_curl).collect();
        let mut b = &pv[0] * t.x + &pv[1] * t.y + &pv[2] * t.z;
        let tang = values_t(&eo.tangent_basis, pts).swap_remove(0);
        scatter_cols(&mut b, &(-tang), &positions(&curl_dofs, &eo.curl_dofs));
        mass_curl += weighted_gram(&b, w, h2);
    }

    Ok(CellOps {
        grad_dofs,
        curl_dofs,
        div_dofs,
        moment_basis,
        pk,
        pk1,
        vk,
        r,
        rc,
        g,
        gc,
        gradient,
        potential_grad,
        curl,
        potential_curl,
        divergence,
        potential_div,
        ug,
        uc,
        ch,
        mass_grad: sym(mass_grad),
        mass_curl: sym(mass_curl),
        mass_div: sym(mass_div),
        ctx,
    })
}
