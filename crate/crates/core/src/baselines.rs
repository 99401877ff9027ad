//! Covariance-based steering-vector estimators used for comparison: linear
//! PCA on the sample covariance, and kernel PCA with a Gaussian kernel and
//! fixed-point pre-images.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

/// Several independent looks of the same pixel.
#[derive(Debug, Clone)]
pub struct LookStack {
    looks: Vec<DVector<C64>>,
}

impl LookStack {
    pub fn new(looks: Vec<DVector<C64>>) -> Result<Self> {
        if looks.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a look stack needs at least 2 looks, got {}",
                looks.len()
            )));
        }
        let n = looks[0].len();
        if let Some(bad) = looks.iter().find(|l| l.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
                context: "look length",
            });
        }
        Ok(Self { looks })
    }

    pub fn looks(&self) -> &[DVector<C64>] {
        &self.looks
    }

    /// Number of looks K.
    pub fn len(&self) -> usize {
        self.looks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.looks.is_empty()
    }

    /// Number of acquisitions N.
    pub fn dim(&self) -> usize {
        self.looks[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// Median pairwise distance between looks.
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: Bandwidth,
}

/// `C = (1/K) Σ_k g_k g_kᴴ`.
pub fn sample_covariance(stack: &LookStack) -> DMatrix<C64> {
    let n = stack.dim();
    let mut c = DMatrix::zeros(n, n);
    let scale = C64::new(1.0 / stack.len() as f64, 0.0);
    for look in stack.looks() {
        c.gerc(scale, look, look, C64::new(1.0, 0.0));
    }
    c
}

/// Project onto unit modulus entrywise and fix the global phase so the first
/// entry is real positive. Near-zero entries become `1`.
pub fn to_unit_modulus(v: &DVector<C64>) -> DVector<C64> {
    let mut out = v.map(|z| {
        let m = z.norm();
        if m < 1e-12 {
            C64::new(1.0, 0.0)
        } else {
            z / m
        }
    });
    if !out.is_empty() {
        let rot = out[0].conj();
        out.apply(|z| *z *= rot);
    }
    out
}

/// Steering vectors from the `num` dominant eigenvectors of a Hermitian
/// covariance matrix.
pub fn pca_estimate(covariance: &DMatrix<C64>, num: usize) -> Result<Vec<DVector<C64>>> {
    let n = covariance.nrows();
    if covariance.ncols() != n {
        return Err(Error::InvalidInput("covariance must be square".into()));
    }
    if num > n {
        return Err(Error::InvalidInput(format!(
            "requested {num} components from a {n}x{n} covariance"
        )));
    }
    if covariance
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Eigen("covariance has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(covariance.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(num)
        .map(|k| to_unit_modulus(&eig.eigenvectors.column(k).into_owned()))
        .collect())
}

#[derive(Debug, Clone)]
pub struct KpcaEstimate {
    pub vectors: Vec<DVector<C64>>,
    /// Set where the pre-image iteration failed and the loading-weighted
    /// mean of the looks was used instead.
    pub fallback: Vec<bool>,
    pub bandwidth: f64,
}

const PREIMAGE_MAX_ITERATIONS: usize = 100;
const PREIMAGE_TOLERANCE: f64 = 1e-8;
const ALIGNMENT_PASSES: usize = 3;

/// Kernel-PCA steering vectors.
///
/// Looks are phase-aligned, embedded in `R^{2N}` and compared with a Gaussian
/// kernel. The first estimate is the pre-image of the feature-space centroid;
/// estimate `k + 1` is the input-space direction between the pre-images of
/// the centroid shifted by one score standard deviation either way along the
/// `k`-th centered kernel principal axis. Every estimate is projected to unit
/// modulus.
pub fn kpca_estimate(stack: &LookStack, kernel: &KernelSpec, num: usize) -> Result<KpcaEstimate> {
    let k = stack.len();
    if num == 0 {
        return Ok(KpcaEstimate {
            vectors: Vec::new(),
            fallback: Vec::new(),
            bandwidth: 0.0,
        });
    }
    if k < num + 1 {
        return Err(Error::InvalidInput(format!(
            "kernel PCA with {num} components needs at least {} looks, got {k}",
            num + 1
        )));
    }
    let n = stack.dim();
    let points = embed(&align_looks(stack.looks()));

    let mut d2 = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let d = (&points[a] - &points[b]).norm_squared();
            d2[(a, b)] = d;
            d2[(b, a)] = d;
        }
    }
    let h = match kernel.bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be > 0, got {h}"
            )))
        }
        Bandwidth::Median => {
            let mut dists: Vec<f64> = (0..k)
                .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
                .map(|(a, b)| d2[(a, b)].sqrt())
                .collect();
            dists.sort_by(f64::total_cmp);
            let m = dists.len();
            let med = if m % 2 == 1 {
                dists[m / 2]
            } else {
                0.5 * (dists[m / 2 - 1] + dists[m / 2])
            };
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    let two_h2 = 2.0 * h * h;
    let gram = d2.map(|d| (-d / two_h2).exp());

    // Double centering.
    let row_mean: Vec<f64> = (0..k).map(|a| gram.row(a).sum() / k as f64).collect();
    let total_mean = row_mean.iter().sum::<f64>() / k as f64;
    let centered = DMatrix::from_fn(k, k, |a, b| {
        gram[(a, b)] - row_mean[a] - row_mean[b] + total_mean
    });
    let eig = SymmetricEigen::new(centered);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let lead = eig.eigenvalues[order[0]].max(0.0);

    let kernel_at = |z: &DVector<f64>| -> Vec<f64> {
        points
            .iter()
            .map(|y| (-(y - z).norm_squared() / two_h2).exp())
            .collect()
    };
    let fixed_point = |coef: &[f64], start: &DVector<f64>| -> Option<DVector<f64>> {
        let mut z = start.clone();
        for _ in 0..PREIMAGE_MAX_ITERATIONS {
            let kz = kernel_at(&z);
            let weights: Vec<f64> = coef.iter().zip(&kz).map(|(c, kv)| c * kv).collect();
            let den: f64 = weights.iter().sum();
            if !(den.abs() > 1e-12) {
                return None;
            }
            let mut next = DVector::zeros(2 * n);
            for (wt, y) in weights.iter().zip(&points) {
                next.axpy(*wt / den, y, 1.0);
            }
            if next.iter().any(|x| !x.is_finite()) {
                return None;
            }
            let step = (&next - &z).norm();
            z = next;
            if step <= PREIMAGE_TOLERANCE * z.norm().max(1.0) {
                return Some(z);
            }
        }
        None
    };

    let mut vectors = Vec::with_capacity(num);
    let mut fallback = Vec::with_capacity(num);

    let uniform = vec![1.0 / k as f64; k];
    let mean: DVector<f64> = points.iter().fold(DVector::zeros(2 * n), |acc, y| acc + y) / k as f64;
    let (centroid, failed) = match fixed_point(&uniform, &mean) {
        Some(z) => (z, false),
        None => (mean.clone(), true),
    };
    let first = to_unit_modulus(&to_complex(&centroid));
    vectors.push(first.clone());
    fallback.push(failed);

    for &idx in order.iter().take(num - 1) {
        let lambda = eig.eigenvalues[idx];
        let loadings: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        if !(lambda > 1e-12 * lead.max(f64::MIN_POSITIVE)) {
            vectors.push(first.clone());
            fallback.push(true);
            continue;
        }
        let scaled: Vec<f64> = loadings.iter().map(|a| a / lambda.sqrt()).collect();
        let avg = scaled.iter().sum::<f64>() / k as f64;
        let beta = (lambda / k as f64).sqrt();

        let mut ends = Vec::with_capacity(2);
        for sign in [1.0, -1.0] {
            let coef: Vec<f64> = scaled
                .iter()
                .map(|a| 1.0 / k as f64 + sign * beta * (a - avg))
                .collect();
            let start = (0..k)
                .max_by(|&a, &b| (sign * loadings[a]).total_cmp(&(sign * loadings[b])))
                .expect("nonempty");
            ends.push(fixed_point(&coef, &points[start]));
        }
        let (direction, failed) = match (&ends[0], &ends[1]) {
            (Some(plus), Some(minus)) if (plus - minus).norm() > 0.0 => (plus - minus, false),
            _ => {
                let mut acc = DVector::zeros(2 * n);
                for (a, y) in loadings.iter().zip(&points) {
                    acc.axpy(*a, y, 1.0);
                }
                (acc, true)
            }
        };
        vectors.push(to_unit_modulus(&to_complex(&direction)));
        fallback.push(failed);
    }

    Ok(KpcaEstimate {
        vectors,
        fallback,
        bandwidth: h,
    })
}

/// Remove the per-look global phase: first entry real positive, then a few
/// passes rotating each look onto the mean of the aligned looks.
pub fn align_looks(looks: &[DVector<C64>]) -> Vec<DVector<C64>> {
    let rotate = |v: &mut DVector<C64>, reference: C64| {
        let m = reference.norm();
        if m > 0.0 {
            let rot = reference.conj() / m;
            v.apply(|z| *z *= rot);
        }
    };
    let mut aligned: Vec<DVector<C64>> = looks
        .iter()
        .map(|l| {
            let mut v = l.clone();
            if !v.is_empty() {
                let first = v[0];
                rotate(&mut v, first);
            }
            v
        })
        .collect();
    for _ in 0..ALIGNMENT_PASSES {
        let mean = aligned
            .iter()
            .fold(DVector::zeros(aligned[0].len()), |acc, v| acc + v)
            / C64::new(aligned.len() as f64, 0.0);
        for v in aligned.iter_mut() {
            let ip = mean.dotc(v);
            rotate(v, ip);
        }
    }
    aligned
}

fn embed(looks: &[DVector<C64>]) -> Vec<DVector<f64>> {
    looks
        .iter()
        .map(|v| {
            let n = v.len();
            DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
        })
        .collect()
}

fn to_complex(y: &DVector<f64>) -> DVector<C64> {
    let n = y.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(y[i], y[i + n]))
}
