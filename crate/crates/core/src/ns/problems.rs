//! Preset boundary value problems used by the tests and the command line.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;

use super::{ProblemSpec, ScalarField, VectorField};
use crate::ddr::{BoundaryKind, BoundarySpec};

type V3 = Vector3<f64>;

/// Manufactured solution on the unit cube with `p = λ sin(2πx) sin(2πy) sin(2πz)` and
///
/// ```text
/// u = (½ sin(2πx) cos(2πy) cos(2πz), ½ cos(2πx) sin(2πy) cos(2πz), −cos(2πx) cos(2πy) sin(2πz))
/// ```
///
/// which is divergence free and satisfies `curl curl u = 12π² u`.
pub struct TrigSolution {
    pub lambda: f64,
}

fn sc(x: &V3) -> ([f64; 3], [f64; 3]) {
    let a = x * (2.0 * PI);
    ([a.x.sin(), a.y.sin(), a.z.sin()], [a.x.cos(), a.y.cos(), a.z.cos()])
}

impl TrigSolution {
    pub fn velocity(x: &V3) -> V3 {
        let (s, c) = sc(x);
        V3::new(0.5 * s[0] * c[1] * c[2], 0.5 * c[0] * s[1] * c[2], -c[0] * c[1] * s[2])
    }

    pub fn curl_velocity(x: &V3) -> V3 {
        let (s, c) = sc(x);
        V3::new(c[0] * s[1] * s[2], -s[0] * c[1] * s[2], 0.0) * (3.0 * PI)
    }

    pub fn curl_curl_velocity(x: &V3) -> V3 {
        Self::velocity(x) * (12.0 * PI * PI)
    }

    pub fn pressure(&self, x: &V3) -> f64 {
        let (s, _) = sc(x);
        self.lambda * s[0] * s[1] * s[2]
    }

    pub fn grad_pressure(&self, x: &V3) -> V3 {
        let (s, c) = sc(x);
        V3::new(c[0] * s[1] * s[2], s[0] * c[1] * s[2], s[0] * s[1] * c[2]) * (2.0 * PI * self.lambda)
    }

    /// `ν curl curl u + curl u × u`, the part of the forcing that only
    /// depends on the velocity.
    pub fn velocity_forcing(nu: f64, x: &V3) -> V3 {
        Self::curl_curl_velocity(x) * nu + Self::curl_velocity(x).cross(&Self::velocity(x))
    }

    pub fn forcing(&self, nu: f64, x: &V3) -> V3 {
        Self::velocity_forcing(nu, x) + self.grad_pressure(x)
    }
}

fn exact(lambda: f64) -> (VectorField, ScalarField) {
    let sol = TrigSolution { lambda };
    (Arc::new(TrigSolution::velocity), Arc::new(move |x: &V3| sol.pressure(x)))
}

fn reynolds_to_nu(re: f64) -> f64 {
    1.0 / re
}

/// The trigonometric problem with homogeneous natural conditions, which the
/// exact solution satisfies on the unit cube.
pub fn trig(lambda: f64, re: f64) -> ProblemSpec {
    let nu = reynolds_to_nu(re);
    let sol = TrigSolution { lambda };
    let (u, p) = exact(lambda);
    ProblemSpec {
        nu,
        forcing: Arc::new(move |x: &V3| sol.forcing(nu, x)),
        boundary: BoundarySpec::Natural,
        normal_flux: None,
        vorticity: None,
        essential_velocity: None,
        essential_pressure: None,
        exact_velocity: Some(u),
        exact_pressure: Some(p),
    }
}

/// Same solution, with `u × n` and `p` imposed on the whole boundary.
pub fn trig_essential(lambda: f64, re: f64) -> ProblemSpec {
    let mut spec = trig(lambda, re);
    spec.boundary = BoundarySpec::Essential;
    spec.essential_velocity = spec.exact_velocity.clone();
    spec.essential_pressure = spec.exact_pressure.clone();
    spec
}

fn in_corner(x: &V3) -> bool {
    x.y < 0.25 && x.z < 0.25
}

/// Flow driven by a pressure patch `p = −z` (with `u × n = 0`) on the corner
/// `{0} × (0, ¼)²` and an outflow `u·n = 1` on `{1} × (0, ¼)²`; homogeneous
/// natural conditions on the rest of the unit cube, no forcing.
///
/// Faces are assigned by their centre, so the patches are resolved exactly
/// on cubic meshes with `n` divisible by 4.
pub fn pressflux(re: f64) -> ProblemSpec {
    let tol = 1e-9;
    ProblemSpec {
        nu: reynolds_to_nu(re),
        forcing: Arc::new(|_: &V3| V3::zeros()),
        boundary: BoundarySpec::mixed(move |_, face| {
            let x = face.center;
            let kind = if x.x < tol && in_corner(&x) { BoundaryKind::Essential } else { BoundaryKind::Natural };
            Some(kind)
        }),
        normal_flux: Some(Arc::new(move |x: &V3| if x.x > 1.0 - tol && in_corner(x) { 1.0 } else { 0.0 })),
        vorticity: None,
        essential_velocity: None,
        essential_pressure: Some(Arc::new(|x: &V3| -x.z)),
        exact_velocity: None,
        exact_pressure: None,
    }
}
