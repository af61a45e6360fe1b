//! Numerical checks shared by the property suite and the acceptance tests.

use nalgebra::{DVector, Vector3};
use rand::Rng;
use serde::Serialize;

use crate::ddr::{DdrComplex, DofVector, SpaceKind};
use crate::ns::{Linearisation, NsSystem};
use crate::quadrature::{cell_rule, face_rule};

type V3 = Vector3<f64>;

/// Exponents `[a, b, c]` with `a + b + c ≤ deg`.
fn exponents(deg: usize) -> Vec<[i32; 3]> {
    let deg = deg as i32;
    let mut out = Vec::new();
    for a in 0..=deg {
        for b in 0..=deg - a {
            for c in 0..=deg - a - b {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn mono(e: [i32; 3], x: &V3) -> f64 {
    (0..3).map(|i| x[i].powi(e[i])).product()
}

fn grad_mono(e: [i32; 3], x: &V3) -> V3 {
    V3::from_fn(|axis, _| {
        if e[axis] == 0 {
            return 0.0;
        }
        let mut f = e;
        f[axis] -= 1;
        e[axis] as f64 * mono(f, x)
    })
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Largest relative coefficient error of the local reconstructions applied
/// to interpolates of monomials, over every face and cell:
/// traces, gradients, curls and divergences up to degree `k + 1`, tangential
/// traces and the three potentials up to the degree they reproduce.
pub fn consistency_defect(dd: &DdrComplex) -> f64 {
    let mesh = dd.mesh();
    let k = dd.k();
    let deg = dd.data_degree;
    let mut worst: f64 = 0.0;
    for e in exponents(k + 1) {
        let low = e.iter().sum::<i32>() <= k as i32;
        let q = move |x: &V3| mono(e, x);
        let gq = move |x: &V3| grad_mono(e, x);
        let iq = dd.interpolate_grad(q);
        for f in 0..mesh.n_faces() {
            let fo = dd.face(f);
            let rule = face_rule(mesh, f, deg);
            worst = worst.max(rel(&dd.face_trace(f, &iq), &fo.pk1.project_scalar(&rule, q)));
            worst = worst.max(rel(&dd.face_gradient(f, &iq), &fo.vk.project_vector(&rule, gq)));
        }
        for c in 0..mesh.n_cells() {
            let co = dd.cell(c);
            let rule = cell_rule(mesh, c, deg);
            worst = worst.max(rel(&dd.cell_potential_grad(c, &iq), &co.pk1.project_scalar(&rule, q)));
            worst = worst.max(rel(&dd.cell_gradient(c, &iq), &co.vk.project_vector(&rule, gq)));
        }
        for axis in 0..3 {
            let v = move |x: &V3| V3::ith(axis, mono(e, x));
            // curl(m e_a) = ∇m × e_a
            let cv = move |x: &V3| grad_mono(e, x).cross(&V3::ith(axis, 1.0));
            let dv = move |x: &V3| grad_mono(e, x)[axis];
            let iv = dd.interpolate_curl(v);
            let iw = dd.interpolate_div(v);
            for f in 0..mesh.n_faces() {
                let fo = dd.face(f);
                let n = mesh.face(f).normal;
                let rule = face_rule(mesh, f, deg);
                worst = worst.max(rel(&dd.face_curl(f, &iv), &fo.pk.project_scalar(&rule, |x| cv(x).dot(&n))));
                if low {
                    worst = worst.max(rel(&dd.face_tangential_trace(f, &iv), &fo.vk.project_vector(&rule, v)));
                }
            }
            for c in 0..mesh.n_cells() {
                let co = dd.cell(c);
                let rule = cell_rule(mesh, c, deg);
                worst = worst.max(rel(&dd.cell_curl(c, &iv), &co.vk.project_vector(&rule, cv)));
                worst = worst.max(rel(&dd.cell_divergence(c, &iw), &co.pk.project_scalar(&rule, dv)));
                if low {
                    let pv = co.vk.project_vector(&rule, v);
                    worst = worst.max(rel(&dd.cell_potential_curl(c, &iv), &pv));
                    worst = worst.max(rel(&dd.cell_potential_div(c, &iw), &pv));
                }
            }
        }
    }
    worst
}

/// Largest coefficientwise defect of `uG I_grad = I_curl grad` and
/// `uC I_curl = I_div curl` on monomials of degree `≤ k + 1`.
pub fn commutation_defect(dd: &DdrComplex) -> f64 {
    let mut worst: f64 = 0.0;
    for e in exponents(dd.k() + 1) {
        let lhs = dd.global_gradient(&dd.interpolate_grad(|x| mono(e, x)));
        let rhs = dd.interpolate_curl(|x| grad_mono(e, x));
        worst = worst.max(rel(&lhs.values, &rhs.values));
        for axis in 0..3 {
            let lhs = dd.global_curl(&dd.interpolate_curl(|x| V3::ith(axis, mono(e, x))));
            let rhs = dd.interpolate_div(|x| grad_mono(e, x).cross(&V3::ith(axis, 1.0)));
            worst = worst.max(rel(&lhs.values, &rhs.values));
        }
    }
    worst
}

fn random_vector(dd: &DdrComplex, kind: SpaceKind, rng: &mut impl Rng) -> DofVector {
    let v = DVector::from_fn(dd.n_dofs(kind), |_, _| rng.random_range(-1.0..1.0));
    dd.vector(kind, v).expect("matching layout")
}

/// Largest `‖uC uG q‖_{DIV,h}` over random `q`, relative to the round-off
/// scale `‖ |uC| |uG| |q| ‖_{DIV,h}` of the same product.
pub fn complex_defect(dd: &DdrComplex, samples: usize, rng: &mut impl Rng) -> f64 {
    let (g, c) = (dd.gradient_matrix(), dd.curl_matrix());
    let (ga, ca) = (g.abs(), c.abs());
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q = random_vector(dd, SpaceKind::Grad, rng);
        let cq = dd.vector(SpaceKind::Div, c.mul_vec(&g.mul_vec(&q.values))).expect("div layout");
        let scale = dd
            .vector(SpaceKind::Div, ca.mul_vec(&ga.mul_vec(&q.values.abs())))
            .expect("div layout");
        worst = worst.max(dd.l2_norm(&cq) / dd.l2_norm(&scale));
    }
    worst
}

/// Largest `|t(u; u, u)| / ‖u‖³` over random DoF vectors (Euclidean norm).
pub fn trilinear_skew_defect(sys: &NsSystem<'_>, samples: usize, rng: &mut impl Rng) -> f64 {
    let dd = sys.complex();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_vector(dd, SpaceKind::Curl, rng).values;
        worst = worst.max(sys.trilinear(&u, &u, &u).abs() / u.norm().powi(3));
    }
    worst
}

/// Finite-difference errors `‖(r(x + εd) − r(x))/ε − J(x)d‖` for each `ε`,
/// and the slopes `log10(err_i / err_{i+1}) / log10(ε_i / ε_{i+1})`.
pub fn jacobian_slopes(sys: &NsSystem<'_>, x: &DVector<f64>, d: &DVector<f64>, eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let jd = sys.jacobian(x, Linearisation::Newton).mul_vec(d);
    let r0 = sys.residual(x, true);
    let mut free = DVector::from_element(x.len(), 1.0);
    for i in 0..x.len() {
        if sys.is_fixed(i) {
            free[i] = 0.0;
        }
    }
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| ((sys.residual(&(x + d * e), true) - &r0) / e - &jd).component_mul(&free).norm())
        .collect();
    let slopes = errs
        .windows(2)
        .zip(eps.windows(2))
        .map(|(r, e)| (r[0] / r[1]).log10() / (e[0] / e[1]).log10())
        .collect();
    (errs, slopes)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
}

impl Bracket {
    fn empty() -> Self {
        Bracket {
            min: f64::INFINITY,
            max: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Largest factor between the matching endpoints of two brackets.
    pub fn variation(&self, other: &Bracket) -> f64 {
        let f = |a: f64, b: f64| (a / b).max(b / a);
        f(self.min, other.min).max(f(self.max, other.max))
    }

    pub fn is_finite_positive(&self) -> bool {
        self.min > 0.0 && self.max.is_finite()
    }
}

/// Observed ranges of the cellwise ratios controlled by the local
/// boundedness, norm-equivalence and Lebesgue-embedding results on the curl
/// space, over random cell-supported vectors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AppendixRatios {
    /// Potential-based over component norm, `s = 4`.
    pub equivalence: Bracket,
    /// `|||v|||_2 / (h^{3(1/2 − 1/4)} |||v|||_4)`.
    pub lebesgue: Bracket,
    /// `‖P v‖_{L⁴(T)} / |||v|||_4`.
    pub potential: Bracket,
    /// `h_T ‖C_T v‖_{L⁴(T)} / |||v|||_4`.
    pub curl: Bracket,
}

impl AppendixRatios {
    pub fn brackets(&self) -> [(&'static str, Bracket); 4] {
        [
            ("equivalence", self.equivalence),
            ("lebesgue", self.lebesgue),
            ("potential", self.potential),
            ("curl", self.curl),
        ]
    }

    pub fn variation(&self, other: &AppendixRatios) -> f64 {
        self.brackets()
            .iter()
            .zip(other.brackets())
            .map(|((_, a), (_, b))| a.variation(&b))
            .fold(1.0, f64::max)
    }
}

fn cell_curl_l4(dd: &DdrComplex, c: usize, v: &DofVector) -> f64 {
    let mesh = dd.mesh();
    let co = dd.cell(c);
    let rule = cell_rule(mesh, c, 4 * (dd.k() + 1));
    let comps: Vec<DVector<f64>> = co.vk.eval(&rule.points).iter().map(|m| m.tr_mul(&dd.cell_curl(c, v))).collect();
    let s: f64 = rule
        .weights
        .iter()
        .enumerate()
        .map(|(q, w)| w * (comps[0][q].powi(2) + comps[1][q].powi(2) + comps[2][q].powi(2)).powi(2))
        .sum();
    s.powf(0.25)
}

pub fn appendix_ratios(dd: &DdrComplex, samples: usize, rng: &mut impl Rng) -> AppendixRatios {
    let mesh = dd.mesh();
    let mut out = AppendixRatios {
        equivalence: Bracket::empty(),
        lebesgue: Bracket::empty(),
        potential: Bracket::empty(),
        curl: Bracket::empty(),
    };
    for _ in 0..samples {
        let c = rng.random_range(0..mesh.n_cells());
        let mut v = dd.zeros(SpaceKind::Curl);
        let dofs = dd.cell_dofs(SpaceKind::Curl, c).to_vec();
        let local = DVector::from_fn(dofs.len(), |_, _| rng.random_range(-1.0..1.0));
        v.scatter(&dofs, &local);
        let h = mesh.cell(c).diameter;
        let comp4 = dd.cell_component_norm_curl(4.0, c, &v);
        let comp2 = dd.cell_component_norm_curl(2.0, c, &v);
        out.equivalence.add(dd.cell_potential_norm_curl(4.0, c, &v) / comp4);
        out.lebesgue.add(comp2 / (h.powf(3.0 * (0.5 - 0.25)) * comp4));
        out.potential.add(dd.cell_potential_ls_norm(4.0, c, &v) / comp4);
        out.curl.add(h * cell_curl_l4(dd, c, &v) / comp4);
    }
    out
}
