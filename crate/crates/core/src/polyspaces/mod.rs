//! Orthonormal polynomial bases on mesh entities and the Koszul-type
//! subspaces `G`, `Gᶜ`, `R`, `Rᶜ`.
//!
//! Every entity carries a [`LocalFrame`]: polynomials are written in scaled
//! monomials of `ξ = A (x − x_Y) / r_Y`, where the rows of `A` are the entity
//! axes (the tangent on edges, the tangent frame on faces, the Cartesian axes
//! on cells) and `r_Y` is the largest distance from `x_Y` to a vertex of `Y`.
//! Face vector fields therefore have two components, expressed in the face
//! tangent frame. A [`PolyContext`] caches the monomial Gram matrix of one
//! entity, so that building bases and mass matrices is pure coefficient
//! algebra.

pub mod family;
pub mod monomial;

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

pub use family::PolyFamily;
pub use monomial::{dim_poly, n_monomials};

use crate::mesh::Mesh;
use crate::num::Real;
use crate::quadrature::{rule_for, Entity, QuadratureRule};

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("generating family has numerical rank {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("Gram matrix is numerically singular")]
    Singular,
}

#[derive(Clone, Debug)]
pub struct LocalFrame<T: Real> {
    pub origin: Vector3<T>,
    pub scale: T,
    pub axes: Vec<Vector3<T>>,
}

impl<T: Real> LocalFrame<T> {
    fn radius<'a>(origin: &Vector3<T>, pts: impl Iterator<Item = &'a Vector3<T>>) -> T
    where
        T: 'a,
    {
        pts.map(|p| (p - origin).norm()).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn edge(mesh: &Mesh<T>, e: usize) -> Self {
        let edge = mesh.edge(e);
        LocalFrame {
            origin: edge.midpoint,
            scale: edge.length * T::lit(0.5),
            axes: vec![edge.tangent],
        }
    }

    pub fn face(mesh: &Mesh<T>, f: usize) -> Self {
        let face = mesh.face(f);
        let scale = Self::radius(&face.center, face.vertices.iter().map(|&v| &mesh.vertex(v).coords));
        LocalFrame {
            origin: face.center,
            scale,
            axes: face.frame.to_vec(),
        }
    }

    pub fn cell(mesh: &Mesh<T>, c: usize) -> Self {
        let cell = mesh.cell(c);
        let scale = Self::radius(&cell.center, cell.vertices.iter().map(|&v| &mesh.vertex(v).coords));
        LocalFrame {
            origin: cell.center,
            scale,
            axes: vec![Vector3::x(), Vector3::y(), Vector3::z()],
        }
    }

    pub fn for_entity(mesh: &Mesh<T>, entity: Entity) -> Self {
        match entity {
            Entity::Edge(e) => Self::edge(mesh, e),
            Entity::Face(f) => Self::face(mesh, f),
            Entity::Cell(c) => Self::cell(mesh, c),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn inv_scale(&self) -> T {
        T::one() / self.scale
    }

    pub fn local(&self, x: &Vector3<T>) -> [T; 3] {
        let d = (x - self.origin) / self.scale;
        let mut out = [T::zero(); 3];
        for (o, a) in out.iter_mut().zip(&self.axes) {
            *o = a.dot(&d);
        }
        out
    }

    /// Monomial value table (monomials × points) at physical points.
    pub fn monomials(&self, degree: usize, points: &[Vector3<T>]) -> DMatrix<T> {
        let xi: Vec<[T; 3]> = points.iter().map(|x| self.local(x)).collect();
        monomial::monomial_values(self.dim(), degree, &xi)
    }

    /// Components of a 3D vector along the frame axes.
    pub fn components(&self, v: &Vector3<T>) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (o, a) in out.iter_mut().zip(&self.axes) {
            *o = a.dot(v);
        }
        out
    }
}

/// Which polynomial space a basis spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Selector {
    /// `𝒫^l` (scalar) or `𝒫^l` to the power of the entity dimension (vector).
    Full,
    G,
    Gc,
    R,
    Rc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    Vector,
}

/// Closed-form dimension of the space selected on an entity of dimension `dim`.
pub fn space_dim(dim: usize, shape: Shape, selector: Selector, l: isize) -> usize {
    let p = |m: isize| dim_poly(dim, m);
    match (shape, selector) {
        (Shape::Scalar, _) => p(l),
        (Shape::Vector, Selector::Full) => dim * p(l),
        (Shape::Vector, Selector::G) => p(l + 1).saturating_sub(1),
        (Shape::Vector, Selector::Rc) => p(l - 1),
        (Shape::Vector, Selector::R) if dim == 2 => p(l + 1).saturating_sub(1),
        (Shape::Vector, Selector::Gc) if dim == 2 => p(l - 1),
        (Shape::Vector, Selector::R) => 3 * p(l) - p(l - 1),
        (Shape::Vector, Selector::Gc) => (3 * p(l) + 1).saturating_sub(p(l + 1)),
    }
}

/// Orthonormal basis of a polynomial space on one entity.
#[derive(Clone, Debug)]
pub struct PolynomialBasis<T: Real> {
    pub frame: LocalFrame<T>,
    pub shape: Shape,
    pub selector: Selector,
    pub degree: isize,
    pub family: PolyFamily<T>,
}

impl<T: Real> PolynomialBasis<T> {
    pub fn dim(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_empty()
    }

    /// Values per frame component (functions × points).
    pub fn eval(&self, points: &[Vector3<T>]) -> Vec<DMatrix<T>> {
        let phi = self.frame.monomials(self.family.degree, points);
        self.family.eval(&phi)
    }

    /// Values of a vector basis as 3D fields, one matrix per Cartesian component.
    pub fn eval_3d(&self, points: &[Vector3<T>]) -> [DMatrix<T>; 3] {
        assert_eq!(self.shape, Shape::Vector);
        let comps = self.eval(points);
        let mut out: [DMatrix<T>; 3] = std::array::from_fn(|_| DMatrix::zeros(self.dim(), points.len()));
        for (c, axis) in self.frame.axes.iter().enumerate() {
            for (x, o) in out.iter_mut().enumerate() {
                if axis[x] != T::zero() {
                    *o += &comps[c] * axis[x];
                }
            }
        }
        out
    }

    /// L²-orthogonal projection of a scalar field, as coefficients.
    pub fn project_scalar(&self, rule: &QuadratureRule<T>, f: impl Fn(&Vector3<T>) -> T) -> DVector<T> {
        assert_eq!(self.shape, Shape::Scalar);
        let vals = &self.eval(&rule.points)[0];
        let mut out = DVector::zeros(self.dim());
        for (q, (x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fx = f(x) * w;
            for i in 0..self.dim() {
                out[i] += vals[(i, q)] * fx;
            }
        }
        out
    }

    /// L²-orthogonal projection of a vector field (tangential part on faces).
    pub fn project_vector(&self, rule: &QuadratureRule<T>, f: impl Fn(&Vector3<T>) -> Vector3<T>) -> DVector<T> {
        assert_eq!(self.shape, Shape::Vector);
        let vals = self.eval(&rule.points);
        let mut out = DVector::zeros(self.dim());
        for (q, (x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fc = self.frame.components(&f(x));
            for (c, v) in vals.iter().enumerate() {
                let fx = fc[c] * w;
                for i in 0..self.dim() {
                    out[i] += v[(i, q)] * fx;
                }
            }
        }
        out
    }
}

/// Entity-level cache of the scaled-monomial Gram matrix.
#[derive(Clone, Debug)]
pub struct PolyContext<T: Real> {
    pub frame: LocalFrame<T>,
    pub max_degree: usize,
    gram: DMatrix<T>,
}

impl<T: Real> PolyContext<T> {
    /// Integrates all monomial products up to `max_degree` on the entity.
    pub fn new(mesh: &Mesh<T>, entity: Entity, max_degree: usize) -> Self {
        let frame = LocalFrame::for_entity(mesh, entity);
        let rule = rule_for(mesh, entity, 2 * max_degree).expect("validated mesh");
        let phi = frame.monomials(max_degree, &rule.points);
        let mut weighted = phi.clone();
        for (q, &w) in rule.weights.iter().enumerate() {
            weighted.column_mut(q).scale_mut(w);
        }
        let gram = &weighted * phi.transpose();
        PolyContext {
            frame,
            max_degree,
            gram,
        }
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// `∫_Y a_i · b_j` for two families written in this entity's frame.
    pub fn inner(&self, a: &PolyFamily<T>, b: &PolyFamily<T>) -> DMatrix<T> {
        assert_eq!(a.ncomp, b.ncomp);
        assert!(a.degree <= self.max_degree && b.degree <= self.max_degree);
        let (na, nb) = (a.n_mono(), b.n_mono());
        let m = self.gram.view((0, 0), (na, nb));
        let mut out = DMatrix::zeros(a.len(), b.len());
        for c in 0..a.ncomp {
            out += a.coeffs.columns(c * na, na) * m * b.coeffs.columns(c * nb, nb).transpose();
        }
        out
    }

    /// Mass matrix between two bases on this entity.
    pub fn mass(&self, a: &PolynomialBasis<T>, b: &PolynomialBasis<T>) -> DMatrix<T> {
        self.inner(&a.family, &b.family)
    }

    fn orthonormalize(&self, mut fam: PolyFamily<T>, expected: usize, graded: bool) -> Result<PolyFamily<T>, BasisError> {
        if expected == 0 {
            return Ok(PolyFamily::empty(fam.dim, fam.ncomp, fam.degree));
        }
        if !graded {
            // rank extraction in coefficient space; monomials are independent,
            // so this is the rank of the family as functions
            let svd = fam.coeffs.clone().svd(false, true);
            let smax = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > T::RANK_TOL * smax)
                .collect();
            if keep.len() != expected {
                return Err(BasisError::RankMismatch {
                    expected,
                    found: keep.len(),
                });
            }
            let vt = svd.v_t.expect("requested");
            fam.coeffs = DMatrix::from_fn(keep.len(), vt.ncols(), |i, j| vt[(keep[i], j)]);
        } else if fam.len() != expected {
            return Err(BasisError::RankMismatch {
                expected,
                found: fam.len(),
            });
        }
        // Cholesky–Gram–Schmidt, repeated once to restore orthonormality lost
        // to rounding; the lower-triangular transform keeps graded families nested
        for _ in 0..2 {
            let g = self.inner(&fam, &fam);
            fam.coeffs = match g.clone().cholesky() {
                Some(ch) if well_conditioned(&ch.l()) => {
                    ch.l().solve_lower_triangular(&fam.coeffs).ok_or(BasisError::Singular)?
                }
                _ => {
                    let eig = g.symmetric_eigen();
                    let lmax = eig.eigenvalues.max();
                    if eig.eigenvalues.min() <= T::RANK_TOL * T::RANK_TOL * lmax {
                        return Err(BasisError::Singular);
                    }
                    let scaled = DMatrix::from_fn(fam.len(), fam.len(), |i, j| {
                        eig.eigenvectors[(j, i)] / eig.eigenvalues[i].sqrt()
                    });
                    scaled * &fam.coeffs
                }
            };
        }
        Ok(fam)
    }

    fn generating_family(&self, shape: Shape, selector: Selector, l: isize) -> PolyFamily<T> {
        let d = self.dim();
        let inv = self.frame.inv_scale();
        let full = |m: isize| PolyFamily::<T>::scalar_full(d, m.max(0) as usize);
        let vfull = |m: isize| PolyFamily::<T>::vector_full(d, d, m.max(0) as usize);
        match (shape, selector) {
            (Shape::Scalar, Selector::Full) => full(l),
            (Shape::Scalar, s) => panic!("selector {s:?} needs a vector shape"),
            (Shape::Vector, Selector::Full) => vfull(l),
            (Shape::Vector, Selector::G) => full(l + 1).grad(inv),
            (Shape::Vector, Selector::R) if d == 2 => full(l + 1).rot2(inv),
            (Shape::Vector, Selector::R) => vfull(l + 1).curl3(inv),
            (Shape::Vector, Selector::Gc) if d == 2 => full(l - 1).koszul_perp(),
            (Shape::Vector, Selector::Gc) => vfull(l - 1).koszul_cross(),
            (Shape::Vector, Selector::Rc) => full(l - 1).koszul(),
        }
    }

    /// Orthonormal basis of the selected space of degree `l` (empty for `l < 0`
    /// or whenever the space is trivial).
    pub fn basis(&self, shape: Shape, selector: Selector, l: isize) -> Result<PolynomialBasis<T>, BasisError> {
        let d = self.dim();
        let expected = space_dim(d, shape, selector, l);
        let ncomp = if shape == Shape::Scalar { 1 } else { d };
        let family = if expected == 0 {
            PolyFamily::empty(d, ncomp, l.max(0) as usize)
        } else {
            let gen = self.generating_family(shape, selector, l);
            let graded = selector == Selector::Full;
            self.orthonormalize(gen, expected, graded)?
        };
        Ok(PolynomialBasis {
            frame: self.frame.clone(),
            shape,
            selector,
            degree: l,
            family,
        })
    }

    pub fn scalar(&self, l: isize) -> PolynomialBasis<T> {
        self.basis(Shape::Scalar, Selector::Full, l).expect("full space")
    }

    pub fn vector(&self, l: isize) -> PolynomialBasis<T> {
        self.basis(Shape::Vector, Selector::Full, l).expect("full space")
    }

    pub fn subspace(&self, selector: Selector, l: isize) -> Result<PolynomialBasis<T>, BasisError> {
        self.basis(Shape::Vector, selector, l)
    }

    /// Orthonormalises an arbitrary family of known rank in this entity's frame.
    pub fn orthonormal_span(&self, fam: PolyFamily<T>, expected: usize) -> Result<PolyFamily<T>, BasisError> {
        self.orthonormalize(fam, expected, false)
    }
}

fn well_conditioned<T: Real>(l: &DMatrix<T>) -> bool {
    let diag = l.diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    lo > T::zero() && (hi / lo) * (hi / lo) < T::lit(1e12)
}

pub fn build_scalar_basis<T: Real>(mesh: &Mesh<T>, entity: Entity, l: isize) -> PolynomialBasis<T> {
    PolyContext::new(mesh, entity, l.max(0) as usize).scalar(l)
}

pub fn build_subspace<T: Real>(
    mesh: &Mesh<T>,
    entity: Entity,
    selector: Selector,
    l: isize,
) -> Result<PolynomialBasis<T>, BasisError> {
    PolyContext::new(mesh, entity, (l + 1).max(0) as usize).subspace(selector, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cubic_mesh, generate_tet_mesh};
    use crate::quadrature::cell_rule;

    fn gram_defect(ctx: &PolyContext<f64>, b: &PolynomialBasis<f64>) -> f64 {
        let g = ctx.mass(b, b);
        (g - DMatrix::identity(b.dim(), b.dim())).amax()
    }

    #[test]
    fn dimensions_and_orthonormality() {
        let m = generate_cubic_mesh::<f64>(1);
        let ctx = PolyContext::new(&m, Entity::Cell(0), 4);
        let b = ctx.scalar(2);
        assert_eq!(b.dim(), 10);
        assert!(gram_defect(&ctx, &b) < 1e-12);
        for l in -1..=3 {
            for sel in [Selector::G, Selector::Gc, Selector::R, Selector::Rc] {
                let s = ctx.subspace(sel, l).unwrap();
                assert_eq!(s.dim(), space_dim(3, Shape::Vector, sel, l));
                assert!(gram_defect(&ctx, &s) < 1e-12);
            }
        }
        assert_eq!(ctx.subspace(Selector::G, 0).unwrap().dim(), 3);
        assert_eq!(ctx.subspace(Selector::Rc, 1).unwrap().dim(), 1);

        let fctx = PolyContext::new(&m, Entity::Face(0), 4);
        assert_eq!(fctx.scalar(1).dim(), 3);
        assert_eq!(fctx.subspace(Selector::R, -1).unwrap().dim(), 0);
        let ectx = PolyContext::new(&m, Entity::Edge(0), 2);
        let e0 = ectx.scalar(0);
        // ≡ 1/√|E| on the unit edge
        let v = e0.eval(&[Vector3::new(0.3, 0.0, 0.0)]);
        assert!((v[0][(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rot_is_tangent_on_faces() {
        let m = generate_tet_mesh::<f64>(1);
        let f = 3;
        let ctx = PolyContext::new(&m, Entity::Face(f), 4);
        let r = ctx.subspace(Selector::R, 2).unwrap();
        let pts = [m.face(f).center, m.vertex(m.face(f).vertices[0]).coords];
        let v = r.eval_3d(&pts);
        let n = m.face(f).normal;
        for i in 0..r.dim() {
            for q in 0..pts.len() {
                let dot = v[0][(i, q)] * n.x + v[1][(i, q)] * n.y + v[2][(i, q)] * n.z;
                assert!(dot.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn koszul_decompositions_are_direct() {
        let m = generate_tet_mesh::<f64>(1);
        for entity in [Entity::Cell(2), Entity::Face(5)] {
            let ctx = PolyContext::new(&m, entity, 5);
            let d = ctx.dim();
            for l in 0..=4 {
                for (a, b) in [(Selector::G, Selector::Gc), (Selector::R, Selector::Rc)] {
                    let fa = ctx.subspace(a, l).unwrap().family;
                    let fb = ctx.subspace(b, l).unwrap().family;
                    let both = fa.stack(&fb);
                    let rank = both.coeffs.rank(1e-10);
                    assert_eq!(rank, d * dim_poly(d, l), "{a:?}/{b:?} l={l}");
                }
            }
        }
    }

    #[test]
    fn projection_of_quadratic_matches_normal_equations() {
        let m = generate_cubic_mesh::<f64>(1);
        let ctx = PolyContext::new(&m, Entity::Cell(0), 2);
        let b = ctx.scalar(1);
        let rule = cell_rule(&m, 0, 4);
        let coef = b.project_scalar(&rule, |x| x.x * x.x);
        // oracle: least-squares fit by 1, x, y, z on the unit cube
        let moments = |f: &dyn Fn(&Vector3<f64>) -> f64| rule.integrate(f);
        let basis: [&dyn Fn(&Vector3<f64>) -> f64; 4] = [&|_| 1.0, &|x| x.x, &|x| x.y, &|x| x.z];
        let a = DMatrix::from_fn(4, 4, |i, j| moments(&|x| basis[i](x) * basis[j](x)));
        let rhs = DVector::from_fn(4, |i, _| moments(&|x| basis[i](x) * x.x * x.x));
        let c = a.lu().solve(&rhs).unwrap();
        for x in [Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.9, 0.5, 0.7)] {
            let vals = &b.eval(&[x])[0];
            let ours: f64 = (0..b.dim()).map(|i| coef[i] * vals[(i, 0)]).sum();
            let theirs: f64 = (0..4).map(|i| c[i] * basis[i](&x)).sum();
            assert!((ours - theirs).abs() < 1e-13);
        }
    }

    #[test]
    fn full_bases_are_nested() {
        let m = generate_cubic_mesh::<f64>(1);
        let ctx = PolyContext::new(&m, Entity::Cell(0), 3);
        let b1 = ctx.scalar(1);
        let b3 = ctx.scalar(3);
        let cross = ctx.inner(&b1.family, &b3.family);
        assert!((cross.columns(0, 4) - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }
}
