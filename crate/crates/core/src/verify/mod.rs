//! Error measures, convergence rates, discrete constants and the property
//! suite.

mod checks;
mod constants;
mod properties;

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ddr::{DdrComplex, DdrError, DofVector, SpaceKind};
use crate::ns::problems::TrigSolution;
use crate::ns::{NsError, ScalarField, VectorField};
use crate::quadrature::cell_rule;

pub use checks::{
    appendix_ratios, commutation_defect, complex_defect, consistency_defect, jacobian_slopes, trilinear_skew_defect,
    AppendixRatios, Bracket,
};
pub use constants::{
    check_exactness, continuity_constants, estimate_constants, estimate_poincare, estimate_poincare_iterative,
    estimate_sobolev_lower_bound,
    ConstantsReport, CurlSpectrum, ExactnessReport, DEFAULT_DENSE_CAP,
};
pub use properties::{run_property_suite, CheckStatus, MeshCase, PropertyCheck, PropertyReport, SuiteOptions};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Ddr(#[from] DdrError),
    #[error(transparent)]
    Ns(#[from] NsError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("dense study of dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("mass matrix is not positive definite")]
    IndefiniteMass,
    #[error("the curl has no positive spectrum on the complement of the gradients")]
    EmptyComplement,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Closed-form solution with the derivatives the error measures need.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorField,
    pub curl_velocity: VectorField,
    pub pressure: ScalarField,
    pub grad_pressure: VectorField,
}

impl ExactSolution {
    pub fn trig(lambda: f64) -> Self {
        let (a, b) = (TrigSolution { lambda }, TrigSolution { lambda });
        ExactSolution {
            velocity: Arc::new(TrigSolution::velocity),
            curl_velocity: Arc::new(TrigSolution::curl_velocity),
            pressure: Arc::new(move |x| a.pressure(x)),
            grad_pressure: Arc::new(move |x| b.grad_pressure(x)),
        }
    }
}

/// Discrete errors (against interpolates) and potential-based errors
/// (against the exact fields), in the order `E^d_u, E^p_u, E^d_p, E^p_p`.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub h: f64,
    pub dim_condensed: usize,
    pub errors: [f64; 4],
    pub eoc: Option<[f64; 4]>,
}

pub const ERROR_NAMES: [&str; 4] = ["E^d_u", "E^p_u", "E^d_p", "E^p_p"];

impl ErrorReport {
    pub fn e_du(&self) -> f64 {
        self.errors[0]
    }
    pub fn e_pu(&self) -> f64 {
        self.errors[1]
    }
    pub fn e_dp(&self) -> f64 {
        self.errors[2]
    }
    pub fn e_pp(&self) -> f64 {
        self.errors[3]
    }

    /// Fills `eoc` from the previous (coarser) level.
    pub fn with_rates_from(mut self, coarser: &ErrorReport) -> Self {
        self.eoc = Some(std::array::from_fn(|i| eoc(coarser.h, coarser.errors[i], self.h, self.errors[i])));
        self
    }
}

/// Observed order between two levels.
pub fn eoc(h_coarse: f64, e_coarse: f64, h_fine: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Adds rates to a sequence of reports ordered from coarse to fine.
pub fn with_rates(reports: Vec<ErrorReport>) -> Vec<ErrorReport> {
    let mut out: Vec<ErrorReport> = Vec::with_capacity(reports.len());
    for r in reports {
        let r = match out.last() {
            Some(prev) => r.with_rates_from(prev),
            None => r,
        };
        out.push(r);
    }
    out
}

fn sq_dist(vals: &[nalgebra::DMatrix<f64>], coef: &DVector<f64>, exact: &[Vector3<f64>], weights: &[f64]) -> f64 {
    let comps: Vec<DVector<f64>> = vals.iter().map(|m| m.tr_mul(coef)).collect();
    weights
        .iter()
        .enumerate()
        .map(|(q, w)| w * (Vector3::new(comps[0][q], comps[1][q], comps[2][q]) - exact[q]).norm_squared())
        .sum()
}

pub fn compute_errors(dd: &DdrComplex, u_h: &DofVector, p_h: &DofVector, exact: &ExactSolution) -> ErrorReport {
    let mesh = dd.mesh();
    let iu = dd.interpolate_curl(|x| (exact.velocity)(x));
    let ip = dd.interpolate_grad(|x| (exact.pressure)(x));
    let du = dd.vector(SpaceKind::Curl, &u_h.values - &iu.values).expect("curl layout");
    let dp = dd.vector(SpaceKind::Grad, &p_h.values - &ip.values).expect("grad layout");
    let e_du = dd.graph_norm_u(&du);
    let e_dp = dd.l2_norm(&dd.global_gradient(&dp));

    // collected before summing so the result does not depend on the thread split
    let per_cell: Vec<(f64, f64)> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let co = dd.cell(c);
            let rule = cell_rule(mesh, c, dd.data_degree);
            let vals = co.vk.eval(&rule.points);
            let at = |f: &VectorField| -> Vec<Vector3<f64>> { rule.points.iter().map(|x| f(x)).collect() };
            let ut = dd.restrict_cell(u_h, c);
            let pt = dd.restrict_cell(p_h, c);
            let u = sq_dist(&vals, &(&co.potential_curl * &ut), &at(&exact.velocity), &rule.weights)
                + sq_dist(&vals, &(&co.ch * &ut), &at(&exact.curl_velocity), &rule.weights);
            let p = sq_dist(&vals, &(&co.potential_curl * (&co.ug * pt)), &at(&exact.grad_pressure), &rule.weights);
            (u, p)
        })
        .collect();
    let (pu, pp) = per_cell.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

    ErrorReport {
        h: mesh.h(),
        dim_condensed: 0,
        errors: [e_du, pu.sqrt(), e_dp, pp.sqrt()],
        eoc: None,
    }
}

/// Writes the reports as CSV with columns `MeshSize, DimCondensed`, the four
/// errors and their rates (empty on the first level).
pub fn write_error_csv<W: Write>(out: W, reports: &[ErrorReport]) -> Result<(), VerifyError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["MeshSize".to_string(), "DimCondensed".to_string()];
    header.extend(ERROR_NAMES.iter().map(|s| s.to_string()));
    header.extend(ERROR_NAMES.iter().map(|s| format!("EOC_{s}")));
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![format!("{:e}", r.h), r.dim_condensed.to_string()];
        row.extend(r.errors.iter().map(|e| format!("{e:e}")));
        match r.eoc {
            Some(rates) => row.extend(rates.iter().map(|e| format!("{e:.4}"))),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
