//! The discrete Navier–Stokes problem in curl–curl (Bernoulli) form:
//! find `(u, p)` with
//!
//! ```text
//! ν (uC u, uC v)_DIV + t(u; u, v) + (uG p, v)_CURL = (I f, v)_CURL
//!                                  −(u, uG q)_CURL = 0
//! ```
//!
//! where `t(a; b, v) = ∫ (C_h a × P b)·P v`, with natural, essential or mixed
//! boundary conditions and a zero-mean multiplier when no pressure value is
//! prescribed.

pub mod problems;
mod system;
#[cfg(test)]
mod tests;

use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::ddr::{BoundarySpec, DdrComplex, DdrError, DofVector, SpaceKind};
use crate::linalg::{LinalgError, LinearSolver, SparseLu};
pub use system::NsSystem;

pub type ScalarField = Arc<dyn Fn(&Vector3<f64>) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync>;

#[derive(Debug, Error)]
pub enum NsError {
    #[error(transparent)]
    Ddr(#[from] DdrError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("viscosity must be positive and finite, got {0}")]
    InvalidViscosity(f64),
    #[error("cell {0}: interior block of the Jacobian is singular")]
    SingularCell(usize),
    #[error("state has {found} entries, system has {expected}")]
    StateLength { expected: usize, found: usize },
}

/// Data of one boundary value problem. Boundary functions are only sampled
/// on the faces the [`BoundarySpec`] assigns to them.
pub struct ProblemSpec {
    pub nu: f64,
    pub forcing: VectorField,
    pub boundary: BoundarySpec,
    /// `u·n` on natural faces (outward normal); zero when absent.
    pub normal_flux: Option<ScalarField>,
    /// `curl u × n` on natural faces; zero when absent.
    pub vorticity: Option<VectorField>,
    /// Velocity whose tangential trace is imposed on essential faces.
    pub essential_velocity: Option<VectorField>,
    /// Pressure imposed on essential faces.
    pub essential_pressure: Option<ScalarField>,
    pub exact_velocity: Option<VectorField>,
    pub exact_pressure: Option<ScalarField>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), NsError> {
        if self.nu > 0.0 && self.nu.is_finite() {
            Ok(())
        } else {
            Err(NsError::InvalidViscosity(self.nu))
        }
    }
}

/// Which part of the convective derivative enters the linear systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linearisation {
    /// No convection.
    Stokes,
    /// `t(δ; u, ·) + t(u; δ, ·)`.
    Newton,
}

#[derive(Clone)]
pub struct NewtonOptions {
    /// Stop when the free residual drops below `tol` times the residual of
    /// the lifted zero state.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Eliminate cell unknowns before the global solve.
    pub condense: bool,
    /// `false` drops the trilinear term (Stokes).
    pub convection: bool,
    pub solver: Arc<dyn LinearSolver>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 50,
            max_halvings: 6,
            condense: true,
            convection: true,
            solver: Arc::new(SparseLu),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Free residual norm after the Stokes guess and after every Newton step.
    pub residual_history: Vec<f64>,
    pub damping_history: Vec<f64>,
    pub reference_residual: f64,
    /// Size of the globally coupled (condensed) system.
    pub dim_condensed: usize,
}

pub struct Solution {
    pub velocity: DofVector,
    pub pressure: DofVector,
    pub multiplier: f64,
    pub diagnostics: Diagnostics,
}

/// Stokes guess followed by damped Newton iterations.
pub fn newton_solve(dd: &DdrComplex, spec: &ProblemSpec, opts: &NewtonOptions) -> Result<Solution, NsError> {
    spec.validate()?;
    let sys = NsSystem::new(dd, spec)?;
    let mut diag = Diagnostics {
        dim_condensed: if opts.condense { sys.n_condensed() } else { sys.n_free() },
        ..Diagnostics::default()
    };
    let mut x = sys.lifting().clone();
    let r0 = sys.residual(&x, false);
    diag.reference_residual = sys.free_norm(&r0);
    let target = opts.tol * diag.reference_residual;

    let step = sys.newton_step(&x, Linearisation::Stokes, opts)?;
    x += step;
    let mut r = sys.residual(&x, opts.convection);
    let mut norm = sys.free_norm(&r);
    diag.residual_history.push(norm);

    while norm > target && diag.iterations < opts.max_iter && opts.convection {
        let step = sys.newton_step(&x, Linearisation::Newton, opts)?;
        let mut alpha = 1.0;
        let mut trial = &x + &step;
        r = sys.residual(&trial, true);
        let mut trial_norm = sys.free_norm(&r);
        let mut halvings = 0;
        while !(trial_norm < norm) && halvings < opts.max_halvings {
            alpha *= 0.5;
            halvings += 1;
            trial = &x + &step * alpha;
            r = sys.residual(&trial, true);
            trial_norm = sys.free_norm(&r);
        }
        x = trial;
        norm = trial_norm;
        diag.iterations += 1;
        diag.damping_history.push(alpha);
        diag.residual_history.push(norm);
        if !norm.is_finite() {
            break;
        }
    }
    diag.converged = norm <= target || (target == 0.0 && norm == 0.0);
    let (velocity, pressure, multiplier) = sys.split(&x);
    Ok(Solution {
        velocity: dd.vector(SpaceKind::Curl, velocity)?,
        pressure: dd.vector(SpaceKind::Grad, pressure)?,
        multiplier,
        diagnostics: diag,
    })
}

/// Stacks velocity, pressure and multiplier into the system unknown.
pub fn pack_state(u: &DofVector, p: &DofVector, multiplier: Option<f64>) -> DVector<f64> {
    let extra = usize::from(multiplier.is_some());
    let mut x = DVector::zeros(u.len() + p.len() + extra);
    x.rows_mut(0, u.len()).copy_from(&u.values);
    x.rows_mut(u.len(), p.len()).copy_from(&p.values);
    if let Some(m) = multiplier {
        x[u.len() + p.len()] = m;
    }
    x
}
