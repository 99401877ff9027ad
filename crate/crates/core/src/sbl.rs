//! Sparse Bayesian learning over a steering dictionary.
//!
//! Each grid position carries a circular complex Gaussian prior
//! `γ_i ~ CN(0, w_i)`. The hyperparameters `w` and the noise variance `σ²`
//! are learned by minimizing the negative log evidence
//!
//! ```text
//! L(w, σ²) = ln(π^N det C_gg) + gᴴ C_gg⁻¹ g,   C_gg = σ²I + R diag(w) Rᴴ
//! ```
//!
//! with MacKay's fixed-point updates. The inner step is a Tikhonov MAP
//! solve with the current prior (the posterior mean). Positions whose `w_i`
//! collapses are pruned so the system shrinks as iterations proceed.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{Snapshot, SteeringMatrix};
use crate::C64;

/// Lower clamp for `q_i = 1 − Σ_ii / w_i`.
pub const Q_MIN: f64 = 1e-10;

/// Lower clamp for the noise-update denominator.
pub const DENOM_MIN: f64 = 1e-6;

/// How the effective number of fitted parameters enters the noise update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDenominator {
    /// `N − Σ_i (1 − Σ_ii / w_i)`.
    #[default]
    Mackay,
    /// `N − Σ_i Σ_ii / w_i`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SblOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest per-element relative change of `w`.
    pub tolerance: f64,
    /// Prune positions with `w_i < prune_threshold · max(w)`.
    pub prune_threshold: f64,
    pub noise_floor: f64,
    /// Known noise variance; disables the noise update when set.
    pub fixed_noise: Option<f64>,
    /// Record `w` after every iteration.
    pub trace: bool,
    pub max_scatterers: usize,
    pub noise_denominator: NoiseDenominator,
}

impl Default for SblOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-4,
            prune_threshold: 1e-3,
            noise_floor: 1e-12,
            fixed_noise: None,
            trace: false,
            max_scatterers: 2,
            noise_denominator: NoiseDenominator::Mackay,
        }
    }
}

impl SblOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidOptions("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidOptions("tolerance must be > 0".into()));
        }
        if !(self.prune_threshold > 0.0 && self.prune_threshold < 1.0) {
            return Err(Error::InvalidOptions(
                "prune_threshold must lie in (0, 1)".into(),
            ));
        }
        if !(self.noise_floor > 0.0) {
            return Err(Error::InvalidOptions("noise_floor must be > 0".into()));
        }
        if let Some(v) = self.fixed_noise {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidOptions("fixed_noise must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Solver iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SblState {
    /// Prior variances, zero at pruned positions.
    pub w: Vec<f64>,
    pub sigma2: f64,
    /// Posterior mean (Tikhonov MAP estimate of γ).
    pub mu: DVector<C64>,
    /// Diagonal of the posterior covariance.
    pub post_var: Vec<f64>,
    /// Unpruned grid indices, ascending.
    pub active: Vec<usize>,
    pub iteration: usize,
    /// Negative log evidence at (`w`, `sigma2`).
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedScatterer {
    pub grid_index: usize,
    pub elevation: f64,
    pub amplitude: C64,
}

#[derive(Debug, Clone)]
pub struct SblResult {
    /// Sorted by elevation.
    pub scatterers: Vec<DetectedScatterer>,
    pub state: SblState,
    pub converged: bool,
    /// `w` at initialization followed by `w` after each iteration.
    pub trace: Option<Vec<Vec<f64>>>,
}

/// Posterior moments together with the pieces of the evidence computed from
/// the same factorization.
#[derive(Debug, Clone)]
pub(crate) struct Posterior {
    pub mu: DVector<C64>,
    pub post_var: Vec<f64>,
    pub log_det: f64,
    pub quad: f64,
}

impl Posterior {
    fn cost(&self, n: usize) -> f64 {
        n as f64 * PI.ln() + self.log_det + self.quad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PosteriorForm {
    /// Factor the N×N evidence covariance.
    Measurement,
    /// Factor `I + D RᴴR D / σ²` over the active columns.
    Active,
}

fn check_inputs(g: &Snapshot, dict: &DMatrix<C64>, w: &[f64], sigma2: f64) -> Result<()> {
    if g.len() != dict.nrows() {
        return Err(Error::DimensionMismatch {
            expected: dict.nrows(),
            actual: g.len(),
            context: "snapshot length vs dictionary rows",
        });
    }
    if w.len() != dict.ncols() {
        return Err(Error::DimensionMismatch {
            expected: dict.ncols(),
            actual: w.len(),
            context: "hyperparameter length vs dictionary columns",
        });
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(
            "hyperparameters must be finite and nonnegative".into(),
        ));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

/// Complex product through four real products, which use the blocked real
/// GEMM kernel.
fn complex_mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

fn active_columns(dict: &DMatrix<C64>, active: &[usize]) -> DMatrix<C64> {
    dict.select_columns(active)
}

fn chol_log_det(chol: &Cholesky<C64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.re.ln())
        .sum::<f64>()
}

fn posterior_measurement(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
) -> Option<Posterior> {
    let n = g.len();
    let ra = active_columns(dict, active);
    let mut scaled = ra.clone();
    for (j, &i) in active.iter().enumerate() {
        scaled.column_mut(j).scale_mut(w[i].sqrt());
    }
    let mut cgg = complex_mul(&scaled, &scaled.adjoint());
    for k in 0..n {
        cgg[(k, k)] += C64::new(sigma2, 0.0);
    }
    let chol = Cholesky::new(cgg)?;
    let z = chol.solve(g);
    // r_iᴴ C⁻¹ r_i = ‖L⁻¹ r_i‖² with C = L Lᴴ.
    let l_inv = chol.l().solve_lower_triangular(&DMatrix::identity(n, n))?;
    let y = complex_mul(&l_inv, &ra);

    let mut mu = DVector::zeros(dict.ncols());
    let mut post_var = vec![0.0; dict.ncols()];
    for (j, &i) in active.iter().enumerate() {
        let col = ra.column(j);
        mu[i] = col.dotc(&z) * w[i];
        let rcr = y.column(j).norm_squared();
        post_var[i] = (w[i] - w[i] * w[i] * rcr).clamp(0.0, w[i]);
    }
    let log_det = chol_log_det(&chol);
    let quad = g.dotc(&z).re;
    (log_det.is_finite() && quad.is_finite()).then_some(Posterior {
        mu,
        post_var,
        log_det,
        quad,
    })
}

fn posterior_active(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
) -> Option<Posterior> {
    let ra = active_columns(dict, active);
    let gram = ra.adjoint() * &ra;
    let h = ra.adjoint() * g;
    posterior_from_gram(g, dict.ncols(), w, sigma2, active, &gram, &h)
}

/// Active-set posterior from `RₐᴴRₐ` and `Rₐᴴg`.
fn posterior_from_gram(
    g: &Snapshot,
    l: usize,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
    gram: &DMatrix<C64>,
    h: &DVector<C64>,
) -> Option<Posterior> {
    let n = g.len();
    let m = active.len();
    let d: Vec<f64> = active.iter().map(|&i| w[i].sqrt()).collect();
    let b = DMatrix::from_fn(m, m, |p, q| {
        let v = gram[(p, q)] * (d[p] * d[q] / sigma2);
        if p == q {
            v + C64::new(1.0, 0.0)
        } else {
            v
        }
    });
    let chol = Cholesky::new(b)?;
    let binv = chol.inverse();
    let dh = DVector::from_iterator(m, (0..m).map(|p| h[p] * d[p]));
    let t = &binv * dh;

    let mut mu = DVector::zeros(l);
    let mut post_var = vec![0.0; l];
    let mut fit = 0.0;
    for (p, &i) in active.iter().enumerate() {
        mu[i] = t[p] * (d[p] / sigma2);
        post_var[i] = (w[i] * binv[(p, p)].re).clamp(0.0, w[i]);
        fit += (h[p].conj() * mu[i]).re;
    }
    let log_det = n as f64 * sigma2.ln() + chol_log_det(&chol);
    let quad = (g.norm_squared() - fit) / sigma2;
    (log_det.is_finite() && quad.is_finite()).then_some(Posterior {
        mu,
        post_var,
        log_det,
        quad,
    })
}

/// `RᴴR` and `Rᴴg` over the active set at the first switch to the active
/// form. Pruning only shrinks the active set, so later sets are subsets.
struct GramCache {
    columns: Vec<usize>,
    gram: DMatrix<C64>,
    h: DVector<C64>,
}

impl GramCache {
    fn new(g: &Snapshot, dict: &DMatrix<C64>, active: &[usize]) -> Self {
        let ra = active_columns(dict, active);
        Self {
            columns: active.to_vec(),
            gram: ra.adjoint() * &ra,
            h: ra.adjoint() * g,
        }
    }

    fn posterior(
        &self,
        g: &Snapshot,
        l: usize,
        w: &[f64],
        sigma2: f64,
        active: &[usize],
    ) -> Option<Posterior> {
        let pos: Vec<usize> = active
            .iter()
            .map(|i| self.columns.binary_search(i).ok())
            .collect::<Option<_>>()?;
        let gram = DMatrix::from_fn(pos.len(), pos.len(), |p, q| self.gram[(pos[p], pos[q])]);
        let h = DVector::from_iterator(pos.len(), pos.iter().map(|&p| self.h[p]));
        posterior_from_gram(g, l, w, sigma2, active, &gram, &h)
    }
}

pub(crate) fn posterior_with(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
    form: PosteriorForm,
) -> Result<Posterior> {
    let out = match form {
        PosteriorForm::Measurement => posterior_measurement(g, dict, w, sigma2, active),
        PosteriorForm::Active => posterior_active(g, dict, w, sigma2, active),
    };
    out.ok_or_else(|| {
        Error::IllConditioned(format!(
            "posterior factorization failed ({} active columns, sigma2 = {sigma2:e})",
            active.len()
        ))
    })
}

pub(crate) fn posterior_on(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
) -> Result<Posterior> {
    if active.len() > g.len() {
        if let Ok(p) = posterior_with(g, dict, w, sigma2, active, PosteriorForm::Measurement) {
            return Ok(p);
        }
    }
    posterior_with(g, dict, w, sigma2, active, PosteriorForm::Active)
}

/// Posterior for the solver loop, reusing `cache` for the active form.
fn solver_posterior(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
    active: &[usize],
    cache: &mut Option<GramCache>,
) -> Result<Posterior> {
    if active.len() > g.len() {
        if let Ok(p) = posterior_with(g, dict, w, sigma2, active, PosteriorForm::Measurement) {
            return Ok(p);
        }
    }
    cache
        .get_or_insert_with(|| GramCache::new(g, dict, active))
        .posterior(g, dict.ncols(), w, sigma2, active)
        .ok_or_else(|| {
            Error::IllConditioned(format!(
                "posterior factorization failed ({} active columns, sigma2 = {sigma2:e})",
                active.len()
            ))
        })
}

/// Posterior mean and marginal variances of γ given `w` and `σ²`.
///
/// Only columns with `w_i > 0` take part; the remaining entries are zero.
pub fn posterior_moments(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
) -> Result<(DVector<C64>, Vec<f64>)> {
    check_inputs(g, dict, w, sigma2)?;
    let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let p = posterior_on(g, dict, w, sigma2, &active)?;
    Ok((p.mu, p.post_var))
}

fn evidence_factor(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
) -> Result<Cholesky<C64, Dyn>> {
    check_inputs(g, dict, w, sigma2)?;
    let n = dict.nrows();
    let mut cgg = DMatrix::from_diagonal_element(n, n, C64::new(sigma2, 0.0));
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            let col = dict.column(i);
            cgg.ger(
                C64::new(wi, 0.0),
                &col,
                &col.map(|z| z.conj()),
                C64::new(1.0, 0.0),
            );
        }
    }
    Cholesky::new(cgg).ok_or_else(|| Error::IllConditioned("C_gg is not positive definite".into()))
}

/// Negative log evidence `ln(π^N det C_gg) + gᴴ C_gg⁻¹ g`.
pub fn evidence_cost(g: &Snapshot, dict: &DMatrix<C64>, w: &[f64], sigma2: f64) -> Result<f64> {
    let chol = evidence_factor(g, dict, w, sigma2)?;
    let z = chol.solve(g);
    let cost = g.len() as f64 * PI.ln() + chol_log_det(&chol) + g.dotc(&z).re;
    if !cost.is_finite() {
        return Err(Error::IllConditioned("evidence cost is not finite".into()));
    }
    Ok(cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceGradient {
    pub w: Vec<f64>,
    pub sigma2: f64,
}

/// Analytic gradient of [`evidence_cost`]:
/// `∂L/∂w_i = r_iᴴC⁻¹r_i − |r_iᴴC⁻¹g|²` and `∂L/∂σ² = tr C⁻¹ − ‖C⁻¹g‖²`.
pub fn evidence_gradient(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    w: &[f64],
    sigma2: f64,
) -> Result<EvidenceGradient> {
    let chol = evidence_factor(g, dict, w, sigma2)?;
    let z = chol.solve(g);
    let y = chol.solve(dict);
    let dw = (0..dict.ncols())
        .map(|i| {
            let col = dict.column(i);
            col.dotc(&y.column(i)).re - col.dotc(&z).norm_sqr()
        })
        .collect();
    let inv = chol.inverse();
    let trace: f64 = inv.diagonal().iter().map(|d| d.re).sum();
    Ok(EvidenceGradient {
        w: dw,
        sigma2: trace - z.norm_squared(),
    })
}

/// `q_i = 1 − Σ_ii / w_i` clamped to `[Q_MIN, 1]`; zero where `w_i = 0`.
pub fn well_determined(post_var: &[f64], w: &[f64]) -> Vec<f64> {
    post_var
        .iter()
        .zip(w)
        .map(|(&v, &wi)| {
            if wi > 0.0 {
                (1.0 - v / wi).clamp(Q_MIN, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// MacKay hyperparameter update `w_i' = |μ_i|² / q_i`.
pub fn mackay_update_w(mu: &DVector<C64>, post_var: &[f64], w: &[f64]) -> Vec<f64> {
    well_determined(post_var, w)
        .into_iter()
        .enumerate()
        .map(|(i, q)| if q > 0.0 { mu[i].norm_sqr() / q } else { 0.0 })
        .collect()
}

/// MacKay noise update `σ² = ‖g − Rμ‖² / (N − Σ q_i)`, floored at
/// `options.noise_floor`. Returns `options.fixed_noise` unchanged when set.
pub fn update_noise(
    g: &Snapshot,
    dict: &DMatrix<C64>,
    mu: &DVector<C64>,
    post_var: &[f64],
    w: &[f64],
    options: &SblOptions,
) -> f64 {
    if let Some(fixed) = options.fixed_noise {
        return fixed;
    }
    let rss = (g - dict * mu).norm_squared();
    update_noise_from_rss(rss, g.len(), post_var, w, options)
}

fn update_noise_from_rss(
    rss: f64,
    n: usize,
    post_var: &[f64],
    w: &[f64],
    options: &SblOptions,
) -> f64 {
    let used: f64 = match options.noise_denominator {
        NoiseDenominator::Mackay => well_determined(post_var, w).iter().sum(),
        NoiseDenominator::Literal => post_var
            .iter()
            .zip(w)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&v, &wi)| v / wi)
            .sum(),
    };
    let denom = (n as f64 - used).max(DENOM_MIN);
    (rss / denom).max(options.noise_floor)
}

/// Deactivate positions whose hyperparameter fell below
/// `prune_threshold · max(w)`. The largest position always survives.
pub fn prune(mut state: SblState, options: &SblOptions) -> SblState {
    let Some(&keep) = state
        .active
        .iter()
        .max_by(|&&a, &&b| state.w[a].total_cmp(&state.w[b]).then(b.cmp(&a)))
    else {
        return state;
    };
    let cut = options.prune_threshold * state.w[keep];
    let (kept, dropped): (Vec<usize>, Vec<usize>) = state
        .active
        .iter()
        .partition(|&&i| i == keep || state.w[i] >= cut);
    for i in dropped {
        state.w[i] = 0.0;
        state.mu[i] = C64::new(0.0, 0.0);
        state.post_var[i] = 0.0;
    }
    state.active = kept;
    state
}

fn max_relative_change(old: &[f64], new: &[f64], active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&i| {
            let (a, b) = (old[i], new[i]);
            if a > 0.0 {
                (b - a).abs() / a
            } else if b > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Run sparse Bayesian learning on one snapshot.
pub fn sbl_solve(
    g: &Snapshot,
    steering: &SteeringMatrix,
    options: &SblOptions,
) -> Result<SblResult> {
    options.validate()?;
    let dict = steering.matrix();
    let (n, l) = (dict.nrows(), dict.ncols());
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g.len(),
            context: "snapshot length vs number of acquisitions",
        });
    }
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput(
            "snapshot contains non-finite values".into(),
        ));
    }

    let power = g.norm_squared() / n as f64;
    if power == 0.0 {
        let sigma2 = options.fixed_noise.unwrap_or(options.noise_floor);
        let state = SblState {
            w: vec![0.0; l],
            sigma2,
            mu: DVector::zeros(l),
            post_var: vec![0.0; l],
            active: vec![0],
            iteration: 0,
            cost: n as f64 * (PI * sigma2).ln(),
        };
        return Ok(SblResult {
            scatterers: Vec::new(),
            trace: options.trace.then(|| vec![state.w.clone()]),
            state,
            converged: true,
        });
    }

    let mut w = vec![power / l as f64; l];
    let mut sigma2 = options
        .fixed_noise
        .unwrap_or((0.01 * power).max(options.noise_floor));
    let mut active: Vec<usize> = (0..l).collect();
    let mut trace = options.trace.then(|| vec![w.clone()]);

    let mut cache = None;
    let mut post = solver_posterior(g, dict, &w, sigma2, &active, &mut cache)?;
    let mut cost = post.cost(n);
    let mut converged = false;
    let mut iteration = 0;

    while iteration < options.max_iterations {
        iteration += 1;
        let w_new = mackay_update_w(&post.mu, &post.post_var, &w);
        if options.fixed_noise.is_none() {
            let mut residual = g.clone();
            for &i in &active {
                residual.axpy(-post.mu[i], &dict.column(i), C64::new(1.0, 0.0));
            }
            let rss = residual.norm_squared();
            sigma2 = update_noise_from_rss(rss, n, &post.post_var, &w, options);
        }
        let change = max_relative_change(&w, &w_new, &active);

        let before = active.len();
        let state = prune(
            SblState {
                w: w_new,
                sigma2,
                mu: post.mu,
                post_var: post.post_var,
                active,
                iteration,
                cost,
            },
            options,
        );
        w = state.w;
        active = state.active;
        if let Some(t) = trace.as_mut() {
            t.push(w.clone());
        }

        post = solver_posterior(g, dict, &w, sigma2, &active, &mut cache)?;
        let prev_cost = cost;
        cost = post.cost(n);

        if change < options.tolerance {
            converged = true;
            break;
        }
        if active.len() == before && (cost - prev_cost).abs() < 1e-8 * cost.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let state = SblState {
        w,
        sigma2,
        mu: post.mu,
        post_var: post.post_var,
        active,
        iteration,
        cost,
    };
    let scatterers = extract_scatterers(g, steering, &state, options.max_scatterers)?;
    Ok(SblResult {
        scatterers,
        state,
        converged,
        trace,
    })
}

/// Local maxima of `w`. A run of equal values counts once, at its lowest index.
pub fn local_maxima(w: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let mut a = 0;
    while a < w.len() {
        let mut b = a;
        while b + 1 < w.len() && w[b + 1] == w[a] {
            b += 1;
        }
        let left = if a > 0 { w[a - 1] } else { f64::NEG_INFINITY };
        let right = if b + 1 < w.len() {
            w[b + 1]
        } else {
            f64::NEG_INFINITY
        };
        if w[a] > 0.0 && w[a] > left && w[a] > right {
            peaks.push(a);
        }
        a = b + 1;
    }
    peaks
}

/// Indices of the `k` largest local maxima of `w`, strongest first; ties go
/// to the lower index.
pub fn strongest_local_maxima(w: &[f64], k: usize) -> Vec<usize> {
    let mut peaks = local_maxima(w);
    peaks.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    peaks.truncate(k);
    peaks
}

/// Pick up to `max_scatterers` peaks of `w` and re-estimate their amplitudes
/// by unregularized least squares on the selected steering columns.
pub fn extract_scatterers(
    g: &Snapshot,
    steering: &SteeringMatrix,
    state: &SblState,
    max_scatterers: usize,
) -> Result<Vec<DetectedScatterer>> {
    let dict = steering.matrix();
    if g.len() != dict.nrows() || state.w.len() != dict.ncols() {
        return Err(Error::DimensionMismatch {
            expected: dict.ncols(),
            actual: state.w.len(),
            context: "solver state vs steering matrix",
        });
    }
    let mut peaks = strongest_local_maxima(&state.w, max_scatterers);

    // Strongest first, so dropping from the back removes the weakest.
    while !peaks.is_empty() {
        let mut chosen = peaks.clone();
        chosen.sort_unstable();
        if let Some(amplitudes) = least_squares(g, dict, &chosen) {
            return Ok(chosen
                .iter()
                .zip(amplitudes.iter())
                .map(|(&i, &amplitude)| DetectedScatterer {
                    grid_index: i,
                    elevation: steering.grid().position(i),
                    amplitude,
                })
                .collect());
        }
        peaks.pop();
    }
    Ok(Vec::new())
}

fn least_squares(g: &Snapshot, dict: &DMatrix<C64>, columns: &[usize]) -> Option<DVector<C64>> {
    let a = dict.select_columns(columns);
    let gram = a.adjoint() * &a;
    let chol = Cholesky::new(gram)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.re), hi.max(d.re))
    });
    if !(lo > 0.0) || (lo / hi).powi(2) < 1e-12 {
        return None;
    }
    let x = chol.solve(&(a.adjoint() * g));
    x.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(x)
}
