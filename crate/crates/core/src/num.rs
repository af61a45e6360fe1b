//! Scalar abstraction for the geometric and polynomial layers.

use nalgebra as na;
use num_traits as nt;

/// Floating point type usable by the mesh, quadrature and polynomial code.
///
/// The discrete operators and the nonlinear solver are written for `f64`
/// only; everything below them is generic so that geometry can be checked in
/// single precision as well.
pub trait Real:
    Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + na::RealField + na::Scalar
{
    /// Relative tolerance for coplanarity of face loops.
    const PLANARITY_TOL: Self;
    /// Relative tolerance for divergence-theorem closure checks.
    const CLOSURE_TOL: Self;
    /// Minimum relative measure of a sub-simplex before it counts as degenerate.
    const DEGENERACY_TOL: Self;
    /// Singular values below this fraction of the largest count as zero.
    const RANK_TOL: Self;

    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("integer representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as nt::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const PLANARITY_TOL: Self = 1e-12;
    const CLOSURE_TOL: Self = 1e-10;
    const DEGENERACY_TOL: Self = 1e-13;
    const RANK_TOL: Self = 1e-10;
}

impl Real for f32 {
    const PLANARITY_TOL: Self = 1e-5;
    const CLOSURE_TOL: Self = 1e-4;
    const DEGENERACY_TOL: Self = 1e-6;
    const RANK_TOL: Self = 1e-4;
}
