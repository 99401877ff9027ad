//! Scoring: angular bias between steering vectors, the single-scatterer
//! elevation CRLB, detection classification and Monte Carlo aggregation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::AcquisitionGeometry;
use crate::sbl::DetectedScatterer;
use crate::C64;

/// Upper bounds (degrees, inclusive) of the reporting buckets. A fourth
/// bucket collects everything above the last bound.
pub const BUCKET_EDGES_DEG: [f64; 3] = [1.0, 3.0, 6.0];

/// `arccos(|aᴴb| / (‖a‖‖b‖))` in radians, within `[0, π/2]`.
///
/// Evaluated as `2·asin(‖â − e^{jφ} b̂‖ / 2)` with the global phase `φ`
/// aligning `b̂` to `â`, which stays accurate for nearly parallel vectors
/// where `arccos` loses half the significant digits.
pub fn angular_bias(est: &DVector<C64>, truth: &DVector<C64>) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: est.len(),
            context: "estimated vs true steering vector",
        });
    }
    let (ne, nt) = (est.norm(), truth.norm());
    if ne == 0.0 || nt == 0.0 {
        return Err(Error::InvalidInput("angular bias of a zero vector".into()));
    }
    let (a, b) = (est.unscale(ne), truth.unscale(nt));
    let c = a.dotc(&b);
    if c.norm() == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let chord = (a - b * (c / c.norm()).conj()).norm();
    Ok(2.0 * (chord / 2.0).min(1.0).asin())
}

/// Single-scatterer elevation CRLB (standard deviation, meters):
/// `σ_s = λr / (4π σ_b √(2·N·SNR))`, with `σ_b` the population standard
/// deviation of the baselines and SNR the scatterer power over the
/// per-acquisition noise variance.
pub fn crlb_elevation(geometry: &AcquisitionGeometry, snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0 && snr_linear.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "SNR must be positive, got {snr_linear}"
        )));
    }
    let sigma_b = geometry.baseline_std();
    if !(sigma_b > 0.0) {
        return Err(Error::InvalidGeometry("baseline spread is zero".into()));
    }
    let n = geometry.len() as f64;
    Ok(geometry.wavelength() * geometry.slant_range()
        / (4.0 * PI * sigma_b * (2.0 * n * snr_linear).sqrt()))
}

/// Two-scatterer detection: exactly two scatterers found and, pairing both
/// lists in elevation order, each within `4·crlb` of its true position.
pub fn classify_detection(
    true_elevations: &[f64],
    detected: &[DetectedScatterer],
    crlb: f64,
) -> bool {
    if detected.len() != true_elevations.len() || true_elevations.len() != 2 {
        return false;
    }
    let mut truth = true_elevations.to_vec();
    truth.sort_by(f64::total_cmp);
    let mut found: Vec<f64> = detected.iter().map(|d| d.elevation).collect();
    found.sort_by(f64::total_cmp);
    truth
        .iter()
        .zip(&found)
        .all(|(t, f)| (t - f).abs() <= 4.0 * crlb)
}

/// Assign estimates to true steering vectors and return one bias per truth
/// (radians) together with the index of the estimate used.
///
/// With at least as many estimates as truths, the injective assignment with
/// the smallest total bias wins. With fewer, every truth is scored against
/// its closest estimate. With none, every truth scores π/2.
pub fn match_min_bias(
    estimates: &[DVector<C64>],
    truths: &[DVector<C64>],
) -> Result<Vec<(f64, Option<usize>)>> {
    let table: Vec<Vec<f64>> = truths
        .iter()
        .map(|t| estimates.iter().map(|e| angular_bias(e, t)).collect())
        .collect::<Result<_>>()?;
    if estimates.is_empty() {
        return Ok(vec![(FRAC_PI_2, None); truths.len()]);
    }
    if estimates.len() < truths.len() {
        return Ok(table
            .iter()
            .map(|row| {
                let (j, b) = row
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("nonempty");
                (*b, Some(j))
            })
            .collect());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut used = vec![false; estimates.len()];
    let mut current = Vec::with_capacity(truths.len());
    search(&table, 0, 0.0, &mut used, &mut current, &mut best);
    let (_, assignment) = best.expect("at least one assignment");
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(t, &e)| (table[t][e], Some(e)))
        .collect())
}

fn search(
    table: &[Vec<f64>],
    t: usize,
    total: f64,
    used: &mut [bool],
    current: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if t == table.len() {
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            *best = Some((total, current.clone()));
        }
        return;
    }
    for e in 0..used.len() {
        if !used[e] {
            used[e] = true;
            current.push(e);
            search(table, t + 1, total + table[t][e], used, current, best);
            current.pop();
            used[e] = false;
        }
    }
}

/// One scored slot of a Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotScore {
    pub true_elevation: f64,
    pub est_elevation: Option<f64>,
    /// Radians; `None` when nothing could be scored (counts as 90°).
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub sample_index: usize,
    pub slots: Vec<SlotScore>,
    pub detection_success: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotStats {
    pub n: usize,
    pub mean_deg: f64,
    /// Population standard deviation.
    pub std_deg: f64,
    /// Percentages for ≤1°, ≤3°, ≤6° (cumulative) and >6°.
    pub buckets_pct: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub slots: Vec<SlotStats>,
    pub detection_rate: Option<f64>,
    pub detections: usize,
    pub samples: usize,
}

/// Summary statistics over records. Order-independent up to floating-point
/// summation order, which is fixed by sorting on `sample_index` first.
pub fn aggregate(records: &[MetricsRecord]) -> Result<AggregateStats> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate zero records".into()));
    }
    let mut sorted: Vec<&MetricsRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sample_index);

    let num_slots = sorted.iter().map(|r| r.slots.len()).max().unwrap_or(0);
    let slots = (0..num_slots)
        .map(|s| {
            let degs: Vec<f64> = sorted
                .iter()
                .filter_map(|r| r.slots.get(s))
                .map(|slot| slot.bias.unwrap_or(FRAC_PI_2).to_degrees())
                .collect();
            slot_stats(&degs)
        })
        .collect();

    let flagged: Vec<bool> = sorted.iter().filter_map(|r| r.detection_success).collect();
    let detections = flagged.iter().filter(|&&ok| ok).count();
    let detection_rate = (!flagged.is_empty()).then(|| detections as f64 / flagged.len() as f64);
    Ok(AggregateStats {
        slots,
        detection_rate,
        detections,
        samples: sorted.len(),
    })
}

fn slot_stats(degs: &[f64]) -> SlotStats {
    let n = degs.len();
    if n == 0 {
        return SlotStats {
            n,
            mean_deg: f64::NAN,
            std_deg: f64::NAN,
            buckets_pct: [0.0; 4],
        };
    }
    let nf = n as f64;
    let mean = degs.iter().sum::<f64>() / nf;
    let var = degs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / nf;
    let mut buckets = [0.0; 4];
    for (k, edge) in BUCKET_EDGES_DEG.iter().enumerate() {
        buckets[k] = 100.0 * degs.iter().filter(|&&d| d <= *edge).count() as f64 / nf;
    }
    buckets[3] = 100.0 - buckets[2];
    SlotStats {
        n,
        mean_deg: mean,
        std_deg: var.sqrt(),
        buckets_pct: buckets,
    }
}

/// Wilson score interval for a binomial proportion at ~95% (z = 1.96).
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
