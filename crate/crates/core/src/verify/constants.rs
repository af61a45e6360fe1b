//! Dense spectral studies of the discrete curl: exactness ranks, the
//! Poincaré and continuity constants and a lower bound on the discrete
//! Sobolev constant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::VerifyError;
use crate::ddr::{Csr, DdrComplex, SpaceKind, Triplets};
use crate::linalg::SparseLuFactor;
use crate::quadrature::cell_rule;

/// Largest number of unknowns handled by the dense studies.
pub const DEFAULT_DENSE_CAP: usize = 4000;

const RANK_TOL: f64 = 1e-10;

fn check_cap(dim: usize, cap: usize) -> Result<(), VerifyError> {
    if dim > cap {
        Err(VerifyError::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub n_grad: usize,
    pub n_curl: usize,
    pub rank_grad: usize,
    pub rank_curl: usize,
}

impl ExactnessReport {
    pub fn kernel_grad(&self) -> usize {
        self.n_grad - self.rank_grad
    }

    pub fn kernel_curl(&self) -> usize {
        self.n_curl - self.rank_curl
    }

    /// Constants span the kernel of the gradient and gradients span the
    /// kernel of the curl.
    pub fn is_exact(&self) -> bool {
        self.kernel_grad() == 1 && self.kernel_curl() == self.rank_grad
    }
}

pub fn check_exactness(dd: &DdrComplex, cap: usize) -> Result<ExactnessReport, VerifyError> {
    let (n_grad, n_curl) = (dd.n_dofs(SpaceKind::Grad), dd.n_dofs(SpaceKind::Curl));
    check_cap(n_curl.max(dd.n_dofs(SpaceKind::Div)), cap)?;
    Ok(ExactnessReport {
        n_grad,
        n_curl,
        rank_grad: numerical_rank(&dd.gradient_matrix().to_dense()),
        rank_curl: numerical_rank(&dd.curl_matrix().to_dense()),
    })
}

/// Generalised eigenpairs of `(uCᵀ M_DIV uC, M_CURL)` restricted to the
/// `(·,·)_{CURL,h}`-orthogonal complement of the gradients.
///
/// On an exact complex the kernel of the curl is the image of the gradient,
/// so the complement is spanned by the eigenvectors of positive eigenvalue;
/// the `rank(uG)` smallest eigenvalues are discarded.
pub struct CurlSpectrum {
    /// Ascending.
    pub values: DVector<f64>,
    /// `M_CURL`-orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub rank_grad: usize,
}

impl CurlSpectrum {
    pub fn new(dd: &DdrComplex, cap: usize) -> Result<Self, VerifyError> {
        let n = dd.n_dofs(SpaceKind::Curl);
        check_cap(n, cap)?;
        let m = dd.mass_matrix(SpaceKind::Curl).to_dense();
        let c = dd.curl_matrix().to_dense();
        let k = c.transpose() * dd.mass_matrix(SpaceKind::Div).to_dense() * &c;
        let l = m.cholesky().ok_or(VerifyError::IndefiniteMass)?.l();
        let linv = l.clone().try_inverse().ok_or(VerifyError::IndefiniteMass)?;
        let a = &linv * k * linv.transpose();
        let eig = ((&a + a.transpose()) * 0.5).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let rank_grad = numerical_rank(&dd.gradient_matrix().to_dense());
        let kept = &order[rank_grad.min(n)..];
        if kept.is_empty() {
            return Err(VerifyError::EmptyComplement);
        }
        let values = DVector::from_iterator(kept.len(), kept.iter().map(|&i| eig.eigenvalues[i]));
        if values[0] <= 0.0 {
            return Err(VerifyError::EmptyComplement);
        }
        let w = DMatrix::from_fn(n, kept.len(), |r, j| eig.eigenvectors[(r, kept[j])]);
        let vectors = linv.transpose() * w;
        Ok(CurlSpectrum {
            values,
            vectors,
            rank_grad,
        })
    }

    /// `max ‖v‖_{CURL,h} / ‖uC v‖_{DIV,h}` over the complement.
    pub fn poincare(&self) -> f64 {
        1.0 / self.values[0].sqrt()
    }
}

pub fn estimate_poincare(dd: &DdrComplex, cap: usize) -> Result<f64, VerifyError> {
    Ok(CurlSpectrum::new(dd, cap)?.poincare())
}

/// The Poincaré constant by inverse iteration, for complexes beyond the
/// dense cap. Each step solves the saddle-point system
///
/// ```text
/// [ uCᵀ M_DIV uC   M_CURL uG ] [w]   [M_CURL v]
/// [ uGᵀ M_CURL     0         ] [φ] = [   0    ]
/// ```
///
/// with one pressure unknown pinned against the constants, which maps `v`
/// to the inverse curl-curl operator applied to its component orthogonal
/// to the gradients. Iterates until the Rayleigh quotient changes by less
/// than `tol` relative.
pub fn estimate_poincare_iterative(dd: &DdrComplex, tol: f64, max_iter: usize) -> Result<f64, VerifyError> {
    let (nc, ng) = (dd.n_dofs(SpaceKind::Curl), dd.n_dofs(SpaceKind::Grad));
    let (c, g) = (dd.curl_matrix(), dd.gradient_matrix());
    let n = nc + ng - 1;
    let mut saddle = Triplets::new(n, n);
    let mut stiffness = Triplets::new(nc, nc);
    for t in 0..dd.mesh().n_cells() {
        let cd = dd.cell_dofs(SpaceKind::Curl, t);
        let vd = dd.cell_dofs(SpaceKind::Div, t);
        let gd = dd.cell_dofs(SpaceKind::Grad, t);
        let ct = c.block(vd, cd);
        let kt = ct.transpose() * dd.cell_mass(SpaceKind::Div, t) * &ct;
        saddle.add_block(cd, cd, &kt);
        stiffness.add_block(cd, cd, &kt);
        let bt = dd.cell_mass(SpaceKind::Curl, t) * g.block(cd, gd);
        // grad unknown 0 is pinned
        let kept: Vec<usize> = (0..gd.len()).filter(|&b| gd[b] != 0).collect();
        let cols: Vec<usize> = kept.iter().map(|&b| nc + gd[b] - 1).collect();
        let bk = bt.select_columns(&kept);
        saddle.add_block(cd, &cols, &bk);
        saddle.add_block(&cols, cd, &bk.transpose());
    }
    let factor = SparseLuFactor::new(&Csr::from_triplets(&saddle))?;
    let k = Csr::from_triplets(&stiffness);
    let m = dd.mass_matrix(SpaceKind::Curl);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut v = DVector::from_fn(nc, |_, _| rng.random_range(-1.0..1.0));
    let mut lambda = f64::INFINITY;
    for _ in 0..max_iter {
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, nc).copy_from(&m.mul_vec(&v));
        let w = factor.solve(&rhs)?.rows(0, nc).into_owned();
        let mw = w.dot(&m.mul_vec(&w));
        if !(mw > 0.0) {
            return Err(VerifyError::EmptyComplement);
        }
        let next = w.dot(&k.mul_vec(&w)) / mw;
        v = w / mw.sqrt();
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(1.0 / lambda.sqrt())
}

/// Upper bounds on the continuity constants of `P_curl` and `P_div`:
/// the largest cellwise generalised eigenvalue of `(PᵀP, M_T)`, which
/// bounds the global quotient since both forms are sums of cell terms.
pub fn continuity_constants(dd: &DdrComplex) -> (f64, f64) {
    let cell_max = |p: &DMatrix<f64>, m: &DMatrix<f64>| -> f64 {
        let Some(chol) = m.clone().cholesky() else {
            return f64::INFINITY;
        };
        let linv = chol.l().try_inverse().expect("triangular factor");
        let a = &linv * p.transpose() * p * linv.transpose();
        a.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
    };
    (0..dd.mesh().n_cells()).fold((0.0, 0.0), |(cc, cd), c| {
        let co = dd.cell(c);
        (
            f64::max(cc, cell_max(&co.potential_curl, &co.mass_curl)),
            f64::max(cd, cell_max(&co.potential_div, &co.mass_div)),
        )
    })
}

/// `‖P_curl v‖_{L⁴}` as a function of coordinates `z` in the basis
/// `v_i / √λ_i`, for which `‖uC v‖_{DIV,h} = |z|`.
struct QuarticForm {
    /// Per cell and component: values at quadrature points (points × basis).
    tables: Vec<[DMatrix<f64>; 3]>,
    weights: Vec<DVector<f64>>,
}

impl QuarticForm {
    fn new(dd: &DdrComplex, spectrum: &CurlSpectrum) -> Self {
        let mesh = dd.mesh();
        let scaled = DMatrix::from_fn(spectrum.vectors.nrows(), spectrum.vectors.ncols(), |r, j| {
            spectrum.vectors[(r, j)] / spectrum.values[j].sqrt()
        });
        let mut tables = Vec::with_capacity(mesh.n_cells());
        let mut weights = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let co = dd.cell(c);
            let rule = cell_rule(mesh, c, 4 * (dd.k() + 1));
            let dofs = dd.cell_dofs(SpaceKind::Curl, c);
            let local = scaled.select_rows(dofs);
            let p = &co.potential_curl * local;
            let vals = co.vk.eval(&rule.points);
            tables.push([0, 1, 2].map(|x| vals[x].transpose() * &p));
            weights.push(DVector::from_column_slice(&rule.weights));
        }
        QuarticForm { tables, weights }
    }

    /// `∫|P v|⁴` and its gradient in `z`.
    fn eval(&self, z: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut value = 0.0;
        let mut grad = DVector::zeros(z.len());
        for (t, w) in self.tables.iter().zip(&self.weights) {
            let f = [0, 1, 2].map(|x| &t[x] * z);
            let sq = f[0].component_mul(&f[0]) + f[1].component_mul(&f[1]) + f[2].component_mul(&f[2]);
            value += w.dot(&sq.component_mul(&sq));
            let ws = w.component_mul(&sq) * 4.0;
            for x in 0..3 {
                grad += t[x].tr_mul(&ws.component_mul(&f[x]));
            }
        }
        (value, grad)
    }

    fn quotient(&self, z: &DVector<f64>) -> f64 {
        self.eval(z).0.powf(0.25) / z.norm()
    }
}

/// Lower bound on `max ‖P_curl v‖_{L⁴} / ‖uC v‖_{DIV,h}` over the complement
/// of the gradients: the best of `samples` random starts, each improved by
/// `ascent_steps` steps of normalised gradient ascent with backtracking.
///
/// Sample `i` only depends on `seed` and `i`, so the bound is non-decreasing
/// in `samples`.
pub fn estimate_sobolev_lower_bound(
    dd: &DdrComplex,
    samples: usize,
    ascent_steps: usize,
    seed: u64,
    cap: usize,
) -> Result<f64, VerifyError> {
    let spectrum = CurlSpectrum::new(dd, cap)?;
    Ok(sobolev_from_spectrum(dd, &spectrum, samples, ascent_steps, seed))
}

fn sobolev_from_spectrum(dd: &DdrComplex, spectrum: &CurlSpectrum, samples: usize, ascent_steps: usize, seed: u64) -> f64 {
    let form = QuarticForm::new(dd, spectrum);
    let m = spectrum.values.len();
    let mut best: f64 = 0.0;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut z = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        z /= z.norm();
        let mut q = form.quotient(&z);
        let mut step = 0.5;
        for _ in 0..ascent_steps {
            // gradient of ¼ log ∫|Pv|⁴ on the unit sphere
            let (n, g) = form.eval(&z);
            let mut g = g / (4.0 * n);
            g -= &z * z.dot(&g);
            let gn = g.norm();
            if gn < 1e-14 {
                break;
            }
            let mut improved = false;
            while step > 1e-8 {
                let mut trial = &z + &g * (step / gn);
                trial /= trial.norm();
                let tq = form.quotient(&trial);
                if tq > q {
                    z = trial;
                    q = tq;
                    step *= 2.0;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.max(q);
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    pub n_cells: usize,
    pub k: usize,
    pub h: f64,
    pub poincare: f64,
    pub continuity_curl: f64,
    pub continuity_div: f64,
    /// Lower bound only.
    pub sobolev_lower_bound: f64,
}

pub fn estimate_constants(
    dd: &DdrComplex,
    samples: usize,
    ascent_steps: usize,
    seed: u64,
    cap: usize,
) -> Result<ConstantsReport, VerifyError> {
    let spectrum = CurlSpectrum::new(dd, cap)?;
    let (continuity_curl, continuity_div) = continuity_constants(dd);
    Ok(ConstantsReport {
        n_cells: dd.mesh().n_cells(),
        k: dd.k(),
        h: dd.mesh().h(),
        poincare: spectrum.poincare(),
        continuity_curl,
        continuity_div,
        sobolev_lower_bound: sobolev_from_spectrum(dd, &spectrum, samples, ascent_steps, seed),
    })
}
