//! Opaque factor/solve interface for the condensed Newton systems.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;
use thiserror::Error;

use crate::ddr::Csr;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("factorisation failed: {0}")]
    Factorisation(String),
    #[error("solution contains non-finite entries")]
    NonFinite,
}

/// A direct solver for one square sparse system.
pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, a: &Csr, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError>;
}

fn check(a: &Csr) -> Result<(), LinalgError> {
    if a.nrows != a.ncols {
        return Err(LinalgError::NotSquare(a.nrows, a.ncols));
    }
    Ok(())
}

fn finite(x: DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Sparse LU with partial pivoting.
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseLu;

impl LinearSolver for SparseLu {
    fn name(&self) -> &'static str {
        "sparse-lu"
    }

    fn solve(&self, a: &Csr, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if a.nrows == 0 && a.ncols == 0 {
            return Ok(DVector::zeros(0));
        }
        SparseLuFactor::new(a)?.solve(b)
    }
}

/// A sparse LU factorisation kept for repeated solves.
pub struct SparseLuFactor {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLuFactor {
    pub fn new(a: &Csr) -> Result<Self, LinalgError> {
        check(a)?;
        let n = a.nrows;
        let entries: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        Ok(SparseLuFactor { n, lu })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        finite(DVector::from_fn(self.n, |i, _| x[i]))
    }
}

/// Dense LU, for small systems and as an independent reference.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseLu;

impl LinearSolver for DenseLu {
    fn name(&self) -> &'static str {
        "dense-lu"
    }

    fn solve(&self, a: &Csr, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        check(a)?;
        let x = a
            .to_dense()
            .lu()
            .solve(b)
            .ok_or_else(|| LinalgError::Factorisation("singular matrix".into()))?;
        finite(x)
    }
}
