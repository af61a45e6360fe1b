//! Cell-local residual and Jacobian, static condensation and global solves.
//!
//! Unknowns are ordered `[u (CURL), p (GRAD), μ]`, the multiplier being
//! present only when no pressure is prescribed. Every term of the scheme is
//! a sum of cell contributions over cell-local DoFs, except the natural
//! boundary data, which only touch skeleton DoFs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Linearisation, NewtonOptions, NsError, ProblemSpec};
use crate::ddr::{BoundaryMask, Csr, DdrComplex, SpaceKind, Triplets};
use crate::quadrature::{cell_rule, face_rule};

type M = DMatrix<f64>;
type V = DVector<f64>;

struct CellData {
    /// System indices of the local unknowns `[u_T, p_T, μ]`.
    dofs: Vec<usize>,
    nc: usize,
    /// Jacobian of the linear terms.
    linear: M,
    /// Residual at the zero state (minus the local forcing).
    load: V,
    /// `P_curl` and `C_h` per Cartesian component at quadrature points
    /// (points × local CURL DoFs).
    phi: [M; 3],
    psi: [M; 3],
    weights: Vec<f64>,
}

/// Pointwise `(a × b)` for fields stored per component.
fn cross(a: &[V; 3], b: &[V; 3]) -> [V; 3] {
    [
        a[1].component_mul(&b[2]) - a[2].component_mul(&b[1]),
        a[2].component_mul(&b[0]) - a[0].component_mul(&b[2]),
        a[0].component_mul(&b[1]) - a[1].component_mul(&b[0]),
    ]
}

fn scale_rows(m: &M, s: &V) -> M {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= s[i];
    }
    out
}

impl CellData {
    fn fields(&self, u: &V) -> ([V; 3], [V; 3]) {
        let p = [0, 1, 2].map(|c| &self.phi[c] * u);
        let h = [0, 1, 2].map(|c| &self.psi[c] * u);
        (h, p)
    }

    /// Local `t(a; b, ·)`.
    fn trilinear(&self, a: &V, b: &V) -> V {
        let (ha, _) = self.fields(a);
        let (_, pb) = self.fields(b);
        let w = V::from_column_slice(&self.weights);
        let x = cross(&ha, &pb);
        (0..3).map(|c| self.phi[c].tr_mul(&x[c].component_mul(&w))).fold(V::zeros(self.nc), |acc, v| acc + v)
    }

    /// Derivative of `u ↦ t(u; u, ·)`: `t(δ; u, ·) + t(u; δ, ·)`.
    fn trilinear_jacobian(&self, u: &V) -> M {
        let (a, b) = self.fields(u);
        let w = V::from_column_slice(&self.weights);
        let mut out = M::zeros(self.nc, self.nc);
        for c in 0..3 {
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            // (ψδ × b)·φ_i = ψδ·(b × φ_i),   (a × φδ)·φ_i = φδ·(φ_i × a)
            let g = scale_rows(&self.phi[c2], &b[c1]) - scale_rows(&self.phi[c1], &b[c2]);
            let h = scale_rows(&self.phi[c1], &a[c2]) - scale_rows(&self.phi[c2], &a[c1]);
            out += g.tr_mul(&scale_rows(&self.psi[c], &w)) + h.tr_mul(&scale_rows(&self.phi[c], &w));
        }
        out
    }

    fn local(&self, x: &V) -> V {
        V::from_iterator(self.dofs.len(), self.dofs.iter().map(|&i| x[i]))
    }

    fn residual(&self, x: &V, convection: bool) -> V {
        let z = self.local(x);
        let mut r = &self.linear * &z + &self.load;
        if convection {
            let u = z.rows(0, self.nc).into_owned();
            let mut head = r.rows_mut(0, self.nc);
            head += self.trilinear(&u, &u);
        }
        r
    }

    fn jacobian(&self, x: &V, lin: Linearisation) -> M {
        let mut j = self.linear.clone();
        if lin == Linearisation::Newton {
            let u = self.local(x).rows(0, self.nc).into_owned();
            let mut block = j.view_mut((0, 0), (self.nc, self.nc));
            block += self.trilinear_jacobian(&u);
        }
        j
    }
}

/// Assembled data of one problem on one complex.
pub struct NsSystem<'a> {
    dd: &'a DdrComplex,
    mask: BoundaryMask,
    n_curl: usize,
    n_grad: usize,
    multiplier: bool,
    cells: Vec<CellData>,
    /// Natural boundary contributions to the residual.
    boundary_load: V,
    lifting: V,
    fixed: Vec<bool>,
    /// Condensed index of every free skeleton unknown.
    condensed: Vec<Option<usize>>,
    n_condensed: usize,
    /// Index among all free unknowns.
    free: Vec<Option<usize>>,
    n_free: usize,
}

impl<'a> NsSystem<'a> {
    pub fn new(dd: &'a DdrComplex, spec: &ProblemSpec) -> Result<Self, NsError> {
        spec.validate()?;
        let mesh = dd.mesh();
        let k = dd.k();
        let mask = dd.boundary_mask(&spec.boundary)?;
        let multiplier = !mask.has_essential();
        let n_curl = dd.n_dofs(SpaceKind::Curl);
        let n_grad = dd.n_dofs(SpaceKind::Grad);
        let n = n_curl + n_grad + usize::from(multiplier);
        let mu = n_curl + n_grad;

        let forcing = dd.interpolate_curl(|x| (spec.forcing)(x));
        let one = dd.interpolate_grad(|_| 1.0);
        let nu = spec.nu;
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let co = dd.cell(c);
                let (nc, ng) = (co.curl_dofs.len(), co.grad_dofs.len());
                let nl = nc + ng + usize::from(multiplier);
                let mut dofs: Vec<usize> = co.curl_dofs.clone();
                dofs.extend(co.grad_dofs.iter().map(|&g| n_curl + g));
                if multiplier {
                    dofs.push(mu);
                }
                let mc = dd.cell_mass(SpaceKind::Curl, c);
                let md = dd.cell_mass(SpaceKind::Div, c);
                let stiffness = co.uc.transpose() * md * &co.uc * nu;
                let b = mc * &co.ug;
                let mut linear = M::zeros(nl, nl);
                linear.view_mut((0, 0), (nc, nc)).copy_from(&stiffness);
                linear.view_mut((0, nc), (nc, ng)).copy_from(&b);
                linear.view_mut((nc, 0), (ng, nc)).copy_from(&(-b.transpose()));
                if multiplier {
                    let m = dd.cell_mass(SpaceKind::Grad, c) * dd.restrict_cell(&one, c);
                    linear.view_mut((nc, nl - 1), (ng, 1)).copy_from(&m);
                    linear.view_mut((nl - 1, nc), (1, ng)).copy_from(&m.transpose());
                }
                let mut load = V::zeros(nl);
                load.rows_mut(0, nc).copy_from(&(-(mc * dd.restrict_cell(&forcing, c))));

                let rule = cell_rule(mesh, c, (3 * k).max(1));
                let vals = co.vk.eval(&rule.points);
                let phi = [0, 1, 2].map(|x| vals[x].transpose() * &co.potential_curl);
                let psi = [0, 1, 2].map(|x| vals[x].transpose() * &co.ch);
                CellData {
                    dofs,
                    nc,
                    linear,
                    load,
                    phi,
                    psi,
                    weights: rule.weights,
                }
            })
            .collect();

        let mut boundary_load = V::zeros(n);
        let degree = dd.data_degree;
        for f in 0..mesh.n_faces() {
            if !mask.is_natural(f) {
                continue;
            }
            let fo = dd.face(f);
            let rule = face_rule(mesh, f, degree);
            if let Some(g) = &spec.normal_flux {
                // + ∫_F g γ_F q on the mass rows
                let vals = fo.pk1.eval(&rule.points).swap_remove(0);
                let gw = V::from_iterator(rule.weights.len(), rule.points.iter().zip(&rule.weights).map(|(x, w)| g(x) * w));
                let load = fo.trace.tr_mul(&(vals * gw));
                for (&i, v) in fo.grad_dofs.iter().zip(load.iter()) {
                    boundary_load[n_curl + i] += v;
                }
            }
            if let Some(beta) = &spec.vorticity {
                // − ν ∫_F β·γ_t v on the momentum rows
                let moments = fo.vk.project_vector(&rule, |x| beta(x));
                let load = fo.tangential_trace.tr_mul(&moments) * (-nu);
                for (&i, v) in fo.curl_dofs.iter().zip(load.iter()) {
                    boundary_load[i] += v;
                }
            }
        }

        let mut fixed = vec![false; n];
        let mut lifting = V::zeros(n);
        let curl_data = spec.essential_velocity.as_ref().map(|u| dd.interpolate_curl(|x| u(x)));
        let grad_data = spec.essential_pressure.as_ref().map(|p| dd.interpolate_grad(|x| p(x)));
        for (i, &m) in mask.curl.iter().enumerate() {
            if m {
                fixed[i] = true;
                lifting[i] = curl_data.as_ref().map_or(0.0, |d| d.values[i]);
            }
        }
        for (i, &m) in mask.grad.iter().enumerate() {
            if m {
                fixed[n_curl + i] = true;
                lifting[n_curl + i] = grad_data.as_ref().map_or(0.0, |d| d.values[i]);
            }
        }

        let curl_start = dd.layout(SpaceKind::Curl).cell_start();
        let grad_start = dd.layout(SpaceKind::Grad).cell_start();
        let is_interior = |i: usize| (i >= curl_start && i < n_curl) || (i >= n_curl + grad_start && i < mu);
        let mut condensed = vec![None; n];
        let mut free = vec![None; n];
        let (mut nc, mut nf) = (0, 0);
        for i in 0..n {
            if fixed[i] {
                continue;
            }
            free[i] = Some(nf);
            nf += 1;
            if !is_interior(i) {
                condensed[i] = Some(nc);
                nc += 1;
            }
        }

        Ok(NsSystem {
            dd,
            mask,
            n_curl,
            n_grad,
            multiplier,
            cells,
            boundary_load,
            lifting,
            fixed,
            condensed,
            n_condensed: nc,
            free,
            n_free: nf,
        })
    }

    pub fn complex(&self) -> &DdrComplex {
        self.dd
    }

    pub fn mask(&self) -> &BoundaryMask {
        &self.mask
    }

    pub fn n_unknowns(&self) -> usize {
        self.fixed.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_condensed(&self) -> usize {
        self.n_condensed
    }

    pub fn has_multiplier(&self) -> bool {
        self.multiplier
    }

    /// Zero state with the essential data in place.
    pub fn lifting(&self) -> &V {
        &self.lifting
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    pub fn split(&self, x: &V) -> (V, V, f64) {
        let u = x.rows(0, self.n_curl).into_owned();
        let p = x.rows(self.n_curl, self.n_grad).into_owned();
        let mu = if self.multiplier { x[self.n_curl + self.n_grad] } else { 0.0 };
        (u, p, mu)
    }

    /// `t(a; b, v)` for global CURL vectors.
    pub fn trilinear(&self, a: &V, b: &V, v: &V) -> f64 {
        self.cells
            .iter()
            .map(|cd| {
                let idx = &cd.dofs[..cd.nc];
                let g = |x: &V| V::from_iterator(cd.nc, idx.iter().map(|&i| x[i]));
                cd.trilinear(&g(a), &g(b)).dot(&g(v))
            })
            .sum()
    }

    /// Full residual; rows of fixed unknowns are zero.
    pub fn residual(&self, x: &V, convection: bool) -> V {
        let parts: Vec<V> = self.cells.par_iter().map(|cd| cd.residual(x, convection)).collect();
        let mut r = self.boundary_load.clone();
        for (cd, rl) in self.cells.iter().zip(&parts) {
            for (&i, v) in cd.dofs.iter().zip(rl.iter()) {
                r[i] += v;
            }
        }
        for (i, &f) in self.fixed.iter().enumerate() {
            if f {
                r[i] = 0.0;
            }
        }
        r
    }

    pub fn free_norm(&self, r: &V) -> f64 {
        r.norm()
    }

    /// Full Jacobian over all unknowns, fixed ones included.
    pub fn jacobian(&self, x: &V, lin: Linearisation) -> Csr {
        let n = self.n_unknowns();
        let parts: Vec<M> = self.cells.par_iter().map(|cd| cd.jacobian(x, lin)).collect();
        let mut t = Triplets::new(n, n);
        for (cd, j) in self.cells.iter().zip(&parts) {
            t.add_block(&cd.dofs, &cd.dofs, j);
        }
        Csr::from_triplets(&t)
    }

    /// Correction `δ` with `J δ = −r` on the free unknowns, `J` being the
    /// chosen linearisation of the residual at `x`.
    pub fn newton_step(&self, x: &V, lin: Linearisation, opts: &NewtonOptions) -> Result<V, NsError> {
        if x.len() != self.n_unknowns() {
            return Err(NsError::StateLength {
                expected: self.n_unknowns(),
                found: x.len(),
            });
        }
        if opts.condense {
            self.condensed_step(x, lin, opts)
        } else {
            self.full_step(x, lin, opts)
        }
    }

    fn full_step(&self, x: &V, lin: Linearisation, opts: &NewtonOptions) -> Result<V, NsError> {
        let convection = lin == Linearisation::Newton;
        let r = self.residual(x, convection);
        let j = self.jacobian(x, lin);
        let mut t = Triplets::new(self.n_free, self.n_free);
        for (i, col, v) in j.triplets() {
            if let (Some(a), Some(b)) = (self.free[i], self.free[col]) {
                t.push(a, b, v);
            }
        }
        let mut rhs = V::zeros(self.n_free);
        for (i, slot) in self.free.iter().enumerate() {
            if let Some(a) = slot {
                rhs[*a] = -r[i];
            }
        }
        let y = opts.solver.solve(&Csr::from_triplets(&t), &rhs)?;
        let mut step = V::zeros(self.n_unknowns());
        for (i, slot) in self.free.iter().enumerate() {
            if let Some(a) = slot {
                step[i] = y[*a];
            }
        }
        Ok(step)
    }

    fn condensed_step(&self, x: &V, lin: Linearisation, opts: &NewtonOptions) -> Result<V, NsError> {
        let convection = lin == Linearisation::Newton;
        struct Local {
            skel: Vec<usize>,
            interior: Vec<usize>,
            schur: M,
            rhs: V,
            /// `J_II⁻¹ [J_IS | r_I]`.
            elim: M,
        }
        let locals = self
            .cells
            .par_iter()
            .enumerate()
            .map(|(c, cd)| {
                let j = cd.jacobian(x, lin);
                let r = cd.residual(x, convection);
                let mut ip = Vec::new();
                let mut sp = Vec::new();
                for (a, &i) in cd.dofs.iter().enumerate() {
                    if self.fixed[i] {
                        continue;
                    }
                    if self.condensed[i].is_some() {
                        sp.push(a);
                    } else {
                        ip.push(a);
                    }
                }
                let sub = |rows: &[usize], cols: &[usize]| M::from_fn(rows.len(), cols.len(), |a, b| j[(rows[a], cols[b])]);
                let (ni, ns) = (ip.len(), sp.len());
                let mut block = M::zeros(ni, ns + 1);
                block.view_mut((0, 0), (ni, ns)).copy_from(&sub(&ip, &sp));
                for (a, &i) in ip.iter().enumerate() {
                    block[(a, ns)] = r[i];
                }
                let elim = if ni == 0 {
                    block
                } else {
                    sub(&ip, &ip).lu().solve(&block).ok_or(NsError::SingularCell(c))?
                };
                let jsi = sub(&sp, &ip);
                let schur = sub(&sp, &sp) - &jsi * elim.columns(0, ns);
                let rs = V::from_iterator(ns, sp.iter().map(|&a| r[a])) - &jsi * elim.column(ns);
                Ok(Local {
                    skel: sp.iter().map(|&a| cd.dofs[a]).collect(),
                    interior: ip.iter().map(|&a| cd.dofs[a]).collect(),
                    schur,
                    rhs: rs,
                    elim,
                })
            })
            .collect::<Result<Vec<Local>, NsError>>()?;

        let nc = self.n_condensed;
        let mut t = Triplets::new(nc, nc);
        let mut rhs = V::zeros(nc);
        for (i, slot) in self.condensed.iter().enumerate() {
            if let Some(a) = slot {
                rhs[*a] = -self.boundary_load[i];
            }
        }
        for l in &locals {
            let idx: Vec<usize> = l.skel.iter().map(|&i| self.condensed[i].expect("skeleton unknown")).collect();
            t.add_block(&idx, &idx, &l.schur);
            for (&a, v) in idx.iter().zip(l.rhs.iter()) {
                rhs[a] -= v;
            }
        }
        let y = opts.solver.solve(&Csr::from_triplets(&t), &rhs)?;

        let mut step = V::zeros(self.n_unknowns());
        for (i, slot) in self.condensed.iter().enumerate() {
            if let Some(a) = slot {
                step[i] = y[*a];
            }
        }
        for l in &locals {
            let ns = l.skel.len();
            let ys = V::from_iterator(ns, l.skel.iter().map(|&i| step[i]));
            let yi = -(l.elim.column(ns) + l.elim.columns(0, ns) * ys);
            for (&i, v) in l.interior.iter().zip(yi.iter()) {
                step[i] = *v;
            }
        }
        Ok(step)
    }
}
