//! Finite families of (possibly vector-valued) polynomials stored as
//! coefficient matrices over scaled monomials.

use nalgebra::DMatrix;

use super::monomial::{derivative_matrix, multiplication_matrix, n_monomials};
use crate::num::Real;

/// Row `i` of `coeffs` holds member `i`; component `c` occupies the column
/// block `c * n_monomials(dim, degree) ..`.
#[derive(Clone, Debug)]
pub struct PolyFamily<T: Real> {
    pub dim: usize,
    pub ncomp: usize,
    pub degree: usize,
    pub coeffs: DMatrix<T>,
}

impl<T: Real> PolyFamily<T> {
    pub fn n_mono(&self) -> usize {
        n_monomials(self.dim, self.degree)
    }

    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn empty(dim: usize, ncomp: usize, degree: usize) -> Self {
        PolyFamily {
            dim,
            ncomp,
            degree,
            coeffs: DMatrix::zeros(0, ncomp * n_monomials(dim, degree)),
        }
    }

    pub fn scalar_full(dim: usize, degree: usize) -> Self {
        let n = n_monomials(dim, degree);
        PolyFamily {
            dim,
            ncomp: 1,
            degree,
            coeffs: DMatrix::identity(n, n),
        }
    }

    /// `ncomp` copies of the scalar monomials, component-major.
    pub fn vector_full(dim: usize, ncomp: usize, degree: usize) -> Self {
        let n = ncomp * n_monomials(dim, degree);
        PolyFamily {
            dim,
            ncomp,
            degree,
            coeffs: DMatrix::identity(n, n),
        }
    }

    pub fn component(&self, c: usize) -> DMatrix<T> {
        let n = self.n_mono();
        self.coeffs.columns(c * n, n).into_owned()
    }

    pub fn from_components(dim: usize, degree: usize, comps: &[DMatrix<T>]) -> Self {
        let n = n_monomials(dim, degree);
        let rows = comps.first().map_or(0, |c| c.nrows());
        let mut coeffs = DMatrix::zeros(rows, comps.len() * n);
        for (c, m) in comps.iter().enumerate() {
            assert_eq!(m.ncols(), n);
            coeffs.columns_mut(c * n, n).copy_from(m);
        }
        PolyFamily {
            dim,
            ncomp: comps.len(),
            degree,
            coeffs,
        }
    }

    fn map_components(&self, degree: usize, f: impl Fn(DMatrix<T>) -> DMatrix<T>) -> Self {
        let comps: Vec<_> = (0..self.ncomp).map(|c| f(self.component(c))).collect();
        Self::from_components(self.dim, degree, &comps)
    }

    /// Same polynomials over monomials of a higher degree.
    pub fn elevate(&self, degree: usize) -> Self {
        assert!(degree >= self.degree);
        if degree == self.degree {
            return self.clone();
        }
        let n = n_monomials(self.dim, degree);
        let old = self.n_mono();
        self.map_components(degree, |m| {
            let mut out = DMatrix::zeros(m.nrows(), n);
            out.columns_mut(0, old).copy_from(&m);
            out
        })
    }

    /// Keeps only the monomials of degree `≤ degree`; the dropped coefficients
    /// must vanish.
    pub fn truncate(&self, degree: usize) -> Self {
        assert!(degree <= self.degree);
        let n = n_monomials(self.dim, degree);
        self.map_components(degree, |m| m.columns(0, n).into_owned())
    }

    /// Componentwise `∂_axis`, with the chain-rule factor `inv_scale`.
    pub fn partial(&self, axis: usize, inv_scale: T) -> Self {
        let d = derivative_matrix::<T>(self.dim, self.degree, axis) * inv_scale;
        self.map_components(self.degree, |m| m * &d)
    }

    /// Componentwise multiplication by the local coordinate `ξ_axis`.
    pub fn times_xi(&self, axis: usize) -> Self {
        let mm = multiplication_matrix::<T>(self.dim, self.degree, axis);
        self.map_components(self.degree + 1, |m| m * &mm)
    }

    fn scalar_parts(&self) -> DMatrix<T> {
        assert_eq!(self.ncomp, 1, "scalar family expected");
        self.coeffs.clone()
    }

    pub fn grad(&self, inv_scale: T) -> Self {
        let s = Self::from_components(self.dim, self.degree, &[self.scalar_parts()]);
        let comps: Vec<_> = (0..self.dim)
            .map(|a| s.partial(a, inv_scale).coeffs)
            .collect();
        Self::from_components(self.dim, self.degree, &comps).truncate(self.degree.saturating_sub(1))
    }

    /// Planar rotor `rot r = (∂₂ r, −∂₁ r)`.
    pub fn rot2(&self, inv_scale: T) -> Self {
        assert_eq!(self.dim, 2);
        let g = self.grad(inv_scale);
        Self::from_components(2, g.degree, &[g.component(1), -g.component(0)])
    }

    /// Scalar planar rotor `rot v = ∂₁ v₂ − ∂₂ v₁`.
    pub fn rot2_scalar(&self, inv_scale: T) -> Self {
        assert_eq!((self.dim, self.ncomp), (2, 2));
        let a = self.partial(0, inv_scale).component(1);
        let b = self.partial(1, inv_scale).component(0);
        Self::from_components(2, self.degree, &[a - b]).truncate(self.degree.saturating_sub(1))
    }

    pub fn curl3(&self, inv_scale: T) -> Self {
        assert_eq!((self.dim, self.ncomp), (3, 3));
        let d = |a: usize, c: usize| self.partial(a, inv_scale).component(c);
        let comps = [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)];
        Self::from_components(3, self.degree, &comps).truncate(self.degree.saturating_sub(1))
    }

    pub fn div(&self, inv_scale: T) -> Self {
        assert_eq!(self.ncomp, self.dim);
        let mut acc = self.partial(0, inv_scale).component(0);
        for a in 1..self.dim {
            acc += self.partial(a, inv_scale).component(a);
        }
        Self::from_components(self.dim, self.degree, &[acc]).truncate(self.degree.saturating_sub(1))
    }

    /// `q ↦ ξ q` (vector-valued).
    pub fn koszul(&self) -> Self {
        let s = Self::from_components(self.dim, self.degree, &[self.scalar_parts()]);
        let comps: Vec<_> = (0..self.dim).map(|a| s.times_xi(a).coeffs).collect();
        Self::from_components(self.dim, self.degree + 1, &comps)
    }

    /// `q ↦ ξ^⊥ q` in the plane, with `(a, b)^⊥ = (b, −a)`.
    pub fn koszul_perp(&self) -> Self {
        assert_eq!(self.dim, 2);
        let k = self.koszul();
        Self::from_components(2, k.degree, &[k.component(1), -k.component(0)])
    }

    /// `v ↦ ξ × v`.
    pub fn koszul_cross(&self) -> Self {
        assert_eq!((self.dim, self.ncomp), (3, 3));
        let x = |a: usize, c: usize| {
            Self::from_components(3, self.degree, &[self.component(c)])
                .times_xi(a)
                .coeffs
        };
        let comps = [
            x(1, 2) - x(2, 1),
            x(2, 0) - x(0, 2),
            x(0, 1) - x(1, 0),
        ];
        Self::from_components(3, self.degree + 1, &comps)
    }

    /// Concatenates the members of two families with matching shape.
    pub fn stack(&self, other: &Self) -> Self {
        assert_eq!((self.dim, self.ncomp), (other.dim, other.ncomp));
        let degree = self.degree.max(other.degree);
        let (a, b) = (self.elevate(degree), other.elevate(degree));
        let mut coeffs = DMatrix::zeros(a.len() + b.len(), a.coeffs.ncols());
        coeffs.rows_mut(0, a.len()).copy_from(&a.coeffs);
        coeffs.rows_mut(a.len(), b.len()).copy_from(&b.coeffs);
        PolyFamily {
            dim: self.dim,
            ncomp: self.ncomp,
            degree,
            coeffs,
        }
    }

    /// Left-multiplies the coefficients: member `i` of the result is
    /// `Σ_j m[i, j] · member_j`.
    pub fn combine(&self, m: &DMatrix<T>) -> Self {
        PolyFamily {
            coeffs: m * &self.coeffs,
            ..self.clone()
        }
    }

    /// Values per component (members × points) from a monomial value table
    /// of degree at least `self.degree`.
    pub fn eval(&self, phi: &DMatrix<T>) -> Vec<DMatrix<T>> {
        let n = self.n_mono();
        (0..self.ncomp)
            .map(|c| self.coeffs.columns(c * n, n) * phi.rows(0, n))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyspaces::monomial::{monomial_index, monomial_values};

    #[test]
    fn curl_of_gradient_vanishes() {
        let p = PolyFamily::<f64>::scalar_full(3, 4);
        let c = p.grad(2.0).curl3(2.0);
        assert!(c.coeffs.amax() == 0.0);
    }

    #[test]
    fn koszul_cross_is_orthogonal_to_position() {
        let v = PolyFamily::<f64>::vector_full(3, 3, 2).koszul_cross();
        let xi = [[0.3, -0.2, 0.7], [-0.5, 0.1, 0.4]];
        let vals = v.eval(&monomial_values(3, 3, &xi));
        for i in 0..v.len() {
            for (q, x) in xi.iter().enumerate() {
                let dot: f64 = (0..3).map(|c| vals[c][(i, q)] * x[c]).sum();
                assert!(dot.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rot_of_perp_koszul_is_scaled_identity() {
        // rot(ξ^⊥ q) = −(2 + deg) q for homogeneous q
        let q = PolyFamily::<f64>::scalar_full(2, 1);
        let r = q.koszul_perp().rot2_scalar(1.0);
        let idx = monomial_index(2, [1, 0, 0]);
        assert!((r.coeffs[(idx, idx)] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluation_matches_pointwise() {
        let v = PolyFamily::<f64>::scalar_full(2, 2).koszul();
        let xi = [[0.3, -0.2, 0.0]];
        let vals = v.eval(&monomial_values(2, 3, &xi));
        // member 3 is ξ₀² (index of [2,0]) → ξ ξ₀² first component ξ₀³
        let m = monomial_index(2, [2, 0, 0]);
        assert!((vals[0][(m, 0)] - 0.027).abs() < 1e-15);
        assert!((vals[1][(m, 0)] - 0.09 * -0.2).abs() < 1e-15);
    }
}
