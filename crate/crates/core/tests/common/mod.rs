//! Dense oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use sbltomo::model::AcquisitionGeometry;
use sbltomo::{DMatrix, DVector, C64};

/// A random small problem: dictionary, snapshot and hyperparameters.
#[derive(Debug, Clone)]
pub struct Instance {
    pub dict: DMatrix<C64>,
    pub g: DVector<C64>,
    pub w: Vec<f64>,
    pub sigma2: f64,
}

/// `C_gg = σ²I + R diag(w) Rᴴ`, built entry by entry.
pub fn dense_cgg(inst: &Instance) -> DMatrix<C64> {
    let n = inst.dict.nrows();
    DMatrix::from_fn(n, n, |a, b| {
        let mut v: C64 = (0..inst.dict.ncols())
            .map(|i| inst.dict[(a, i)] * inst.dict[(b, i)].conj() * inst.w[i])
            .sum();
        if a == b {
            v += C64::new(inst.sigma2, 0.0);
        }
        v
    })
}

/// Normal equations: `Σ = (RᴴR/σ² + W⁻¹)⁻¹`, `μ = Σ Rᴴ g / σ²`, via LU.
pub fn normal_equation_oracle(inst: &Instance) -> (DVector<C64>, Vec<f64>) {
    let l = inst.dict.ncols();
    let a = inst.dict.adjoint() * &inst.dict / C64::new(inst.sigma2, 0.0)
        + DMatrix::from_fn(l, l, |p, q| {
            if p == q {
                C64::new(1.0 / inst.w[p], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
    let sigma = a.lu().try_inverse().expect("positive definite");
    let mu = &sigma * (inst.dict.adjoint() * &inst.g) / C64::new(inst.sigma2, 0.0);
    (mu, (0..l).map(|i| sigma[(i, i)].re).collect())
}

/// `N ln π + ln det C_gg + gᴴ C_gg⁻¹ g` with an LU determinant and solve.
pub fn dense_cost(inst: &Instance) -> f64 {
    let n = inst.dict.nrows() as f64;
    let lu = dense_cgg(inst).lu();
    let det = lu.determinant();
    let x = lu.solve(&inst.g).expect("nonsingular");
    n * PI.ln() + det.re.ln() + inst.g.dotc(&x).re
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn with_w(inst: &Instance, i: usize, value: f64) -> Instance {
    let mut out = inst.clone();
    out.w[i] = value;
    out
}

/// Mean of one acquisition vector, `a·e^{jφ}·r(s)` for θ = (s, a, φ).
fn mean(geo: &AcquisitionGeometry, theta: &Vector3<f64>) -> DVector<C64> {
    geo.steering_vector(theta[0]) * C64::from_polar(theta[1], theta[2])
}

/// Elevation standard deviation bound from the numerical Fisher information
/// over (elevation, amplitude, phase): `J = (2/σ²) Re(∂mᴴ ∂m)`.
pub fn fisher_crlb(geo: &AcquisitionGeometry, snr: f64) -> f64 {
    let theta = Vector3::new(120.0, 1.0, 0.3);
    let sigma2 = theta[1] * theta[1] / snr;
    let steps = [1e-4, 1e-6, 1e-6];
    let derivs: Vec<DVector<C64>> = (0..3)
        .map(|k| {
            let mut up = theta;
            up[k] += steps[k];
            let mut down = theta;
            down[k] -= steps[k];
            (mean(geo, &up) - mean(geo, &down)) / C64::new(2.0 * steps[k], 0.0)
        })
        .collect();
    let j = Matrix3::from_fn(|p, q| 2.0 / sigma2 * derivs[p].dotc(&derivs[q]).re);
    j.try_inverse().expect("identifiable")[(0, 0)].sqrt()
}
