//! Graded monomial bookkeeping in one, two or three variables.
//!
//! Monomials are ordered by total degree; inside one degree the exponent of
//! the first variable decreases first, then the second. Because the order is
//! graded, the monomials of degree `≤ d` are a prefix of those of degree
//! `≤ d + 1`.

use nalgebra::DMatrix;

use crate::num::Real;

pub type Exponent = [u8; 3];

/// Number of monomials of total degree at most `degree` in `dim` variables.
pub fn n_monomials(dim: usize, degree: usize) -> usize {
    match dim {
        1 => degree + 1,
        2 => (degree + 1) * (degree + 2) / 2,
        3 => (degree + 1) * (degree + 2) * (degree + 3) / 6,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// `dim 𝒫^l` with the convention `𝒫^{-1} = {0}` (and below).
pub fn dim_poly(dim: usize, l: isize) -> usize {
    if l < 0 {
        0
    } else {
        n_monomials(dim, l as usize)
    }
}

pub fn exponents(dim: usize, degree: usize) -> Vec<Exponent> {
    let mut out = Vec::with_capacity(n_monomials(dim, degree));
    for d in 0..=degree as u8 {
        match dim {
            1 => out.push([d, 0, 0]),
            2 => {
                for a in (0..=d).rev() {
                    out.push([a, d - a, 0]);
                }
            }
            3 => {
                for a in (0..=d).rev() {
                    for b in (0..=d - a).rev() {
                        out.push([a, b, d - a - b]);
                    }
                }
            }
            _ => panic!("unsupported dimension {dim}"),
        }
    }
    out
}

pub fn monomial_index(dim: usize, e: Exponent) -> usize {
    let d = (e[0] + e[1] + e[2]) as usize;
    let offset = if d == 0 { 0 } else { n_monomials(dim, d - 1) };
    match dim {
        1 => d,
        2 => offset + e[1] as usize,
        3 => {
            let j = (e[1] + e[2]) as usize;
            offset + j * (j + 1) / 2 + e[2] as usize
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Values of all monomials of degree `≤ degree` at local points: one row
/// per monomial, one column per point.
pub fn monomial_values<T: Real>(dim: usize, degree: usize, xi: &[[T; 3]]) -> DMatrix<T> {
    let exps = exponents(dim, degree);
    let mut out = DMatrix::zeros(exps.len(), xi.len());
    let mut powers = vec![[T::one(); 3]; degree + 1];
    for (q, x) in xi.iter().enumerate() {
        for p in 1..=degree {
            for a in 0..dim {
                powers[p][a] = powers[p - 1][a] * x[a];
            }
        }
        for (i, e) in exps.iter().enumerate() {
            let mut v = T::one();
            for a in 0..dim {
                v *= powers[e[a] as usize][a];
            }
            out[(i, q)] = v;
        }
    }
    out
}

/// Matrix `D` with `c · D` the coefficients of `∂_axis p` when `c` holds those
/// of `p`, both over monomials of degree `≤ degree`.
pub fn derivative_matrix<T: Real>(dim: usize, degree: usize, axis: usize) -> DMatrix<T> {
    let exps = exponents(dim, degree);
    let mut d = DMatrix::zeros(exps.len(), exps.len());
    for (j, e) in exps.iter().enumerate() {
        let total = (e[0] + e[1] + e[2]) as usize;
        if total < degree {
            let mut up = *e;
            up[axis] += 1;
            d[(monomial_index(dim, up), j)] = T::of_usize(up[axis] as usize);
        }
    }
    d
}

/// Matrix `M` with `c · M` the coefficients (degree `≤ degree + 1`) of `ξ_axis p`.
pub fn multiplication_matrix<T: Real>(dim: usize, degree: usize, axis: usize) -> DMatrix<T> {
    let exps = exponents(dim, degree);
    let mut m = DMatrix::zeros(exps.len(), n_monomials(dim, degree + 1));
    for (i, e) in exps.iter().enumerate() {
        let mut up = *e;
        up[axis] += 1;
        m[(i, monomial_index(dim, up))] = T::one();
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_enumeration() {
        for dim in 1..=3 {
            for deg in 0..6 {
                let exps = exponents(dim, deg);
                assert_eq!(exps.len(), n_monomials(dim, deg));
                for (i, e) in exps.iter().enumerate() {
                    assert_eq!(monomial_index(dim, *e), i);
                }
            }
        }
    }

    #[test]
    fn derivative_of_cubic() {
        // p = ξ₀² ξ₁ in 2D, ∂₀ p = 2 ξ₀ ξ₁
        let n = n_monomials(2, 3);
        let mut c = DMatrix::<f64>::zeros(1, n);
        c[(0, monomial_index(2, [2, 1, 0]))] = 1.0;
        let dc = c * derivative_matrix::<f64>(2, 3, 0);
        for (i, e) in exponents(2, 3).iter().enumerate() {
            let expected = if *e == [1, 1, 0] { 2.0 } else { 0.0 };
            assert_eq!(dc[(0, i)], expected);
        }
    }
}
