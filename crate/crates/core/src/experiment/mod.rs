//! Experiment runners behind the `sbltomo` binary.
//!
//! Each runner partitions work per Monte Carlo sample, seeds every sample
//! independently and sorts results by sample index before formatting, so the
//! output is identical for any number of workers.

pub mod bundle;
pub mod config;

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::baselines::{kpca_estimate, pca_estimate, sample_covariance, KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, classify_detection, crlb_elevation, match_min_bias, wilson_interval, AggregateStats,
    MetricsRecord, SlotScore,
};
use crate::model::{Snapshot, SteeringMatrix};
use crate::sbl::{sbl_solve, strongest_local_maxima};
use crate::sim::{trace_scene, AngularBiasPreset, NoiseSpec, SuperresPreset};
use crate::{DVector, C64};

pub use bundle::{fmt_opt, fmt_sig, ResultBundle, Table};
pub use config::{ConfigError, ExperimentConfig, ExperimentKind, RawConfig};

/// Steering-vector estimators compared in the angular-bias study.
pub const METHODS: [&str; 3] = ["sbl", "pca", "kpca"];
pub const SLOTS: [&str; 2] = ["first", "second"];

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {workers} workers: {e}")))
}

fn steering(cfg: &ExperimentConfig) -> Result<SteeringMatrix> {
    SteeringMatrix::build_with_cap(&cfg.geometry()?, &cfg.grid()?, cfg.max_steering_entries)
}

fn manifest(cfg: &ExperimentConfig, started: SystemTime, elapsed: f64) -> String {
    let unix = started
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# run manifest; rerun with `sbltomo {} --config <this file>`",
        cfg.experiment
    );
    let _ = writeln!(text, "meta.version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "meta.started_unix = {unix}");
    let _ = writeln!(text, "meta.elapsed_seconds = {elapsed:.3}");
    text.push_str(&cfg.to_text());
    text
}

/// Grid index of the matched-filter peak `argmax_l |r_lᴴ v|`.
fn matched_filter_peak(steering: &SteeringMatrix, v: &DVector<C64>) -> usize {
    steering
        .matrix()
        .ad_mul(v)
        .iter()
        .map(|z| z.norm())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i)
}

/// Per-method outcome of the angular-bias study.
#[derive(Debug, Clone)]
pub struct AngularBiasReport {
    pub bundle: ResultBundle,
    /// Aggregates in [`METHODS`] order; slots in [`SLOTS`] order.
    pub stats: Vec<AggregateStats>,
    /// Per-method, per-sample records sorted by sample index.
    pub records: Vec<Vec<MetricsRecord>>,
}

impl AngularBiasReport {
    pub fn method(&self, name: &str) -> Option<&AggregateStats> {
        METHODS
            .iter()
            .position(|m| *m == name)
            .map(|i| &self.stats[i])
    }

    /// Bias (degrees) per sample for `method` and `slot`.
    pub fn biases_deg(&self, method: &str, slot: usize) -> Vec<f64> {
        let i = METHODS
            .iter()
            .position(|m| *m == method)
            .expect("known method");
        self.records[i]
            .iter()
            .map(|r| r.slots[slot].bias.map_or(90.0, f64::to_degrees))
            .collect()
    }
}

fn score_sample(
    cfg: &ExperimentConfig,
    preset: &AngularBiasPreset,
    steering: &SteeringMatrix,
    kernel: &KernelSpec,
    index: usize,
) -> Result<[MetricsRecord; 3]> {
    let sample = preset.sample(steering, index)?;
    let truths: Vec<DVector<C64>> = sample
        .scene
        .scatterers
        .iter()
        .map(|s| steering.geometry().steering_vector(s.elevation))
        .collect();
    let grid = steering.grid();

    let sbl = sbl_solve(&sample.snapshot, steering, &cfg.solver)?;
    let sbl_vectors: Vec<DVector<C64>> = sbl
        .scatterers
        .iter()
        .map(|d| steering.column(d.grid_index))
        .collect();
    let sbl_elev: Vec<f64> = sbl.scatterers.iter().map(|d| d.elevation).collect();

    let pca = pca_estimate(&sample_covariance(&sample.looks), 2)?;
    let kpca = kpca_estimate(&sample.looks, kernel, 2)?.vectors;
    let peak = |vs: &[DVector<C64>]| -> Vec<f64> {
        vs.iter()
            .map(|v| grid.position(matched_filter_peak(steering, v)))
            .collect()
    };

    let score = |vectors: &[DVector<C64>], elevations: &[f64]| -> Result<MetricsRecord> {
        let matched = match_min_bias(vectors, &truths)?;
        let slots = matched
            .iter()
            .zip(&sample.scene.scatterers)
            .map(|(&(bias, est), truth)| SlotScore {
                true_elevation: truth.elevation,
                est_elevation: est.map(|e| elevations[e]),
                bias: est.map(|_| bias),
            })
            .collect();
        Ok(MetricsRecord {
            sample_index: index,
            slots,
            detection_success: None,
        })
    };
    Ok([
        score(&sbl_vectors, &sbl_elev)?,
        score(&pca, &peak(&pca))?,
        score(&kpca, &peak(&kpca))?,
    ])
}

/// Angular bias of SBL, PCA and KPCA steering-vector estimates on the
/// two-scatterer layover preset.
pub fn run_angular_bias(cfg: &ExperimentConfig) -> Result<AngularBiasReport> {
    cfg.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let steering = steering(cfg)?;
    let preset = AngularBiasPreset {
        geometry: steering.geometry().clone(),
        grid: steering.grid().clone(),
        samples: cfg.samples,
        looks: cfg.looks,
        amplitudes: cfg.amplitudes,
        noise: NoiseSpec {
            snr_db: cfg.snr_db,
            convention: cfg.snr_convention,
        },
        base_seed: cfg.base_seed,
    };
    let kernel = KernelSpec {
        kind: KernelKind::Gaussian,
        bandwidth: cfg.kernel_bandwidth,
    };
    let per_sample: Vec<[MetricsRecord; 3]> = thread_pool(cfg.workers)?.install(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| score_sample(cfg, &preset, &steering, &kernel, i))
            .collect::<Result<_>>()
    })?;

    let mut records: Vec<Vec<MetricsRecord>> = (0..METHODS.len())
        .map(|_| Vec::with_capacity(cfg.samples))
        .collect();
    for sample in per_sample {
        for (m, rec) in sample.into_iter().enumerate() {
            records[m].push(rec);
        }
    }
    for r in &mut records {
        r.sort_by_key(|x| x.sample_index);
    }
    let stats = records
        .iter()
        .map(|r| aggregate(r))
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Table::new(&[
        "sample_index",
        "method",
        "slot",
        "bias_deg",
        "est_elevation",
        "true_elevation",
    ]);
    for i in 0..cfg.samples {
        for (method, recs) in METHODS.iter().zip(&records) {
            for (s, slot) in recs[i].slots.iter().enumerate() {
                samples.push(vec![
                    i.to_string(),
                    method.to_string(),
                    SLOTS[s].to_string(),
                    fmt_sig(slot.bias.map_or(90.0, f64::to_degrees)),
                    fmt_opt(slot.est_elevation),
                    fmt_sig(slot.true_elevation),
                ]);
            }
        }
    }

    let mut agg = Table::new(&[
        "method", "slot", "n", "mean_deg", "std_deg", "pct_le_1", "pct_le_3", "pct_le_6",
        "pct_gt_6",
    ]);
    let mut summary = format!(
        "angular bias: {} samples, {} baselines, rho = {} m\n\n",
        cfg.samples,
        cfg.baselines.len(),
        fmt_sig(steering.geometry().rayleigh_resolution())
    );
    let _ = writeln!(
        summary,
        "{:<6} {:<7} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "method", "slot", "mean", "std", "<=1", "<=3", "<=6", ">6"
    );
    for (m, method) in METHODS.iter().enumerate() {
        for (s, slot) in stats[m].slots.iter().enumerate() {
            let b = slot.buckets_pct;
            agg.push(vec![
                method.to_string(),
                SLOTS[s].to_string(),
                slot.n.to_string(),
                fmt_sig(slot.mean_deg),
                fmt_sig(slot.std_deg),
                fmt_sig(b[0]),
                fmt_sig(b[1]),
                fmt_sig(b[2]),
                fmt_sig(b[3]),
            ]);
            let _ = writeln!(
                summary,
                "{:<6} {:<7} {:>8.2}° {:>8.2}° {:>7.1}% {:>7.1}% {:>7.1}% {:>7.1}%",
                method, SLOTS[s], slot.mean_deg, slot.std_deg, b[0], b[1], b[2], b[3]
            );
        }
    }

    let bundle = ResultBundle {
        manifest: manifest(cfg, started, clock.elapsed().as_secs_f64()),
        tables: vec![
            ("samples.csv".into(), samples),
            ("aggregate.csv".into(), agg),
        ],
        summary,
    };
    Ok(AngularBiasReport {
        bundle,
        stats,
        records,
    })
}

/// One point of the detection-rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub kappa: f64,
    pub detections: usize,
    pub samples: usize,
    pub rate: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SuperresReport {
    pub bundle: ResultBundle,
    pub curve: Vec<CurvePoint>,
}

struct SuperresRow {
    kappa_index: usize,
    index: usize,
    truth: [f64; 2],
    found: Vec<f64>,
    crlb: f64,
    success: bool,
}

/// Detection rate of two equal scatterers versus their separation.
pub fn run_superres(cfg: &ExperimentConfig) -> Result<SuperresReport> {
    cfg.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let steering = steering(cfg)?;
    let preset = SuperresPreset {
        geometry: steering.geometry().clone(),
        grid: steering.grid().clone(),
        samples: cfg.samples,
        kappas: cfg.kappas.clone(),
        first_range: cfg.first_range,
        noise: NoiseSpec {
            snr_db: cfg.snr_db,
            convention: cfg.snr_convention,
        },
        base_seed: cfg.base_seed,
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.kappas.len())
        .flat_map(|k| (0..cfg.samples).map(move |i| (k, i)))
        .collect();
    let mut rows: Vec<SuperresRow> = thread_pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(k, i)| -> Result<SuperresRow> {
                let sample = preset.sample(&steering, k, i)?;
                let result = sbl_solve(&sample.snapshot, &steering, &cfg.solver)?;
                let weakest = sample
                    .scene
                    .scatterers
                    .iter()
                    .map(|s| s.amplitude * s.amplitude)
                    .fold(f64::INFINITY, f64::min);
                let crlb = if sample.noise_variance > 0.0 {
                    crlb_elevation(steering.geometry(), weakest / sample.noise_variance)?
                } else {
                    0.0
                };
                let truth = [
                    sample.scene.scatterers[0].elevation,
                    sample.scene.scatterers[1].elevation,
                ];
                Ok(SuperresRow {
                    kappa_index: k,
                    index: i,
                    truth,
                    found: result.scatterers.iter().map(|d| d.elevation).collect(),
                    crlb,
                    success: classify_detection(&truth, &result.scatterers, crlb),
                })
            })
            .collect::<Result<_>>()
    })?;
    rows.sort_by_key(|r| (r.kappa_index, r.index));

    let mut per_sample = Table::new(&[
        "kappa",
        "sample_index",
        "true_elevation_1",
        "true_elevation_2",
        "n_detected",
        "est_elevation_1",
        "est_elevation_2",
        "crlb",
        "success",
    ]);
    for r in &rows {
        let mut found = r.found.clone();
        found.sort_by(f64::total_cmp);
        per_sample.push(vec![
            fmt_sig(cfg.kappas[r.kappa_index]),
            r.index.to_string(),
            fmt_sig(r.truth[0]),
            fmt_sig(r.truth[1]),
            found.len().to_string(),
            fmt_opt(found.first().copied()),
            fmt_opt(found.get(1).copied()),
            fmt_sig(r.crlb),
            u8::from(r.success).to_string(),
        ]);
    }

    let mut curve_table = Table::new(&[
        "kappa",
        "detection_rate",
        "n_samples",
        "wilson_ci_low",
        "wilson_ci_high",
    ]);
    let mut summary = format!(
        "detection rate: {} samples per kappa, {} baselines, rho = {} m, snr = {} dB\n\n",
        cfg.samples,
        cfg.baselines.len(),
        fmt_sig(steering.geometry().rayleigh_resolution()),
        cfg.snr_db.map_or("none".into(), fmt_sig)
    );
    let _ = writeln!(
        summary,
        "{:>6} {:>8} {:>18}",
        "kappa", "rate", "95% interval"
    );
    let mut curve = Vec::with_capacity(cfg.kappas.len());
    for (k, &kappa) in cfg.kappas.iter().enumerate() {
        let detections = rows
            .iter()
            .filter(|r| r.kappa_index == k && r.success)
            .count();
        let rate = detections as f64 / cfg.samples as f64;
        let ci = wilson_interval(detections, cfg.samples);
        curve_table.push(vec![
            fmt_sig(kappa),
            fmt_sig(rate),
            cfg.samples.to_string(),
            fmt_sig(ci.0),
            fmt_sig(ci.1),
        ]);
        let _ = writeln!(
            summary,
            "{:>6.2} {:>7.1}% {:>8.1}% – {:>5.1}%",
            kappa,
            100.0 * rate,
            100.0 * ci.0,
            100.0 * ci.1
        );
        curve.push(CurvePoint {
            kappa,
            detections,
            samples: cfg.samples,
            rate,
            ci,
        });
    }

    let bundle = ResultBundle {
        manifest: manifest(cfg, started, clock.elapsed().as_secs_f64()),
        tables: vec![
            ("curve.csv".into(), curve_table),
            ("samples.csv".into(), per_sample),
        ],
        summary,
    };
    Ok(SuperresReport { bundle, curve })
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    pub bundle: ResultBundle,
    /// True grid indices, ascending.
    pub true_indices: [usize; 2],
    /// Grid indices of the two largest local maxima of the final `w`, ascending.
    pub peak_indices: Vec<usize>,
    /// `w` over the grid at initialization and after every iteration.
    pub trace: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub seconds: f64,
}

/// Trace of the learned prior on a noise-free pair of close scatterers.
pub fn run_trace_prior(cfg: &ExperimentConfig) -> Result<TraceReport> {
    cfg.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let steering = steering(cfg)?;
    let grid = steering.grid();
    let rho = steering.geometry().rayleigh_resolution();
    let scene = trace_scene(grid, rho, cfg.trace_first_elevation, cfg.trace_separation);
    let g = crate::sim::generate_snapshot(
        &scene,
        &steering,
        &NoiseSpec::noiseless(),
        crate::sim::RngSeed::new(cfg.base_seed, 0),
    )?;
    let mut options = cfg.solver.clone();
    options.trace = true;
    let result = sbl_solve(&g, &steering, &options)?;
    let seconds = clock.elapsed().as_secs_f64();
    let trace = result.trace.unwrap_or_default();

    let index = |s: f64| {
        grid.index_of(s)
            .ok_or_else(|| Error::InvalidInput(format!("trace scatterer {s} is off grid")))
    };
    let true_indices = [
        index(scene.scatterers[0].elevation)?,
        index(scene.scatterers[1].elevation)?,
    ];
    let mut peak_indices = strongest_local_maxima(&result.state.w, 2);
    peak_indices.sort_unstable();

    let mut table = Table::new(&["iteration", "grid_index", "elevation_m", "w"]);
    for (it, w) in trace.iter().enumerate() {
        for (l, &wl) in w.iter().enumerate() {
            table.push(vec![
                it.to_string(),
                l.to_string(),
                fmt_sig(grid.position(l)),
                fmt_sig(wl),
            ]);
        }
    }
    let summary = format!(
        "prior trace: scatterers at {} m and {} m (separation {} rho, rho = {} m)\n\
         iterations: {}, converged: {}\n\
         true grid indices: {:?}\nlargest local maxima of w: {:?}\n",
        fmt_sig(scene.scatterers[0].elevation),
        fmt_sig(scene.scatterers[1].elevation),
        fmt_sig(cfg.trace_separation),
        fmt_sig(rho),
        result.state.iteration,
        result.converged,
        true_indices,
        peak_indices
    );
    let bundle = ResultBundle {
        manifest: manifest(cfg, started, seconds),
        tables: vec![("trace.csv".into(), table)],
        summary,
    };
    Ok(TraceReport {
        bundle,
        true_indices,
        peak_indices,
        trace,
        converged: result.converged,
        iterations: result.state.iteration,
        seconds,
    })
}

/// One pixel of a measurement file.
#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub id: String,
    pub g: Snapshot,
}

/// Parse a measurement file with header `pixel_id, re_1, im_1, …, re_N, im_N`.
///
/// Records are numbered from 1 (the first line after the header).
pub fn read_pixels(text: &str, expected_n: usize) -> Result<Vec<Pixel>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedInput {
            record: 0,
            message: e.to_string(),
        })?
        .clone();
    let cols = header.len();
    if cols < 3 || (cols - 1) % 2 != 0 || &header[0] != "pixel_id" {
        return Err(Error::MalformedInput {
            record: 0,
            message: format!(
                "header must be `pixel_id, re_1, im_1, …, re_N, im_N`, got {cols} columns"
            ),
        });
    }
    for k in 0..(cols - 1) / 2 {
        let (re, im) = (&header[1 + 2 * k], &header[2 + 2 * k]);
        if re != format!("re_{}", k + 1) || im != format!("im_{}", k + 1) {
            return Err(Error::MalformedInput {
                record: 0,
                message: format!("unexpected column names `{re}`, `{im}` at pair {}", k + 1),
            });
        }
    }
    let n = (cols - 1) / 2;
    if n != expected_n {
        return Err(Error::DimensionMismatch {
            expected: expected_n,
            actual: n,
            context: "configured baselines vs complex samples per pixel in the measurement file",
        });
    }
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let record = i + 1;
            let rec = rec.map_err(|e| Error::MalformedInput {
                record,
                message: e.to_string(),
            })?;
            let value = |c: usize| -> Result<f64> {
                let v: f64 = rec[c].parse().map_err(|_| Error::MalformedInput {
                    record,
                    message: format!("`{}` in column `{}` is not a number", &rec[c], &header[c]),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::MalformedInput {
                        record,
                        message: format!("non-finite value in column `{}`", &header[c]),
                    })
                }
            };
            let g = (0..n)
                .map(|k| Ok(C64::new(value(1 + 2 * k)?, value(2 + 2 * k)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Pixel {
                id: rec[0].to_string(),
                g: DVector::from_vec(g),
            })
        })
        .collect()
}

/// Format pixels as a measurement file readable by [`read_pixels`].
pub fn write_pixels(pixels: &[Pixel]) -> Result<String> {
    let n = pixels.first().map_or(0, |p| p.g.len());
    let mut header = vec!["pixel_id".to_string()];
    for k in 1..=n {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for p in pixels {
        if p.g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: p.g.len(),
                context: "pixels written to one measurement file",
            });
        }
        let mut row = vec![p.id.clone()];
        for z in p.g.iter() {
            row.push(format!("{:e}", z.re));
            row.push(format!("{:e}", z.im));
        }
        table.rows.push(row);
    }
    table.to_csv()
}

/// Invert every pixel of the configured measurement file.
pub fn run_invert(cfg: &ExperimentConfig, input: &Path) -> Result<ResultBundle> {
    cfg.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let steering = steering(cfg)?;
    let text = std::fs::read_to_string(input)?;
    let pixels = read_pixels(&text, steering.nrows())?;
    let results = thread_pool(cfg.workers)?.install(|| {
        pixels
            .par_iter()
            .map(|p| sbl_solve(&p.g, &steering, &cfg.solver))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = Table::new(&[
        "pixel_id",
        "elevation_m",
        "amplitude_abs",
        "amplitude_phase",
        "n_iterations",
        "converged",
    ]);
    let mut found = 0;
    for (p, r) in pixels.iter().zip(&results) {
        let mut scatterers = r.scatterers.clone();
        scatterers.sort_by(|a, b| a.elevation.total_cmp(&b.elevation));
        for d in &scatterers {
            found += 1;
            table.push(vec![
                p.id.clone(),
                fmt_sig(d.elevation),
                fmt_sig(d.amplitude.norm()),
                fmt_sig(d.amplitude.arg()),
                r.state.iteration.to_string(),
                r.converged.to_string(),
            ]);
        }
    }
    let converged = results.iter().filter(|r| r.converged).count();
    let summary = format!(
        "inverted {} pixels from {}: {} scatterers, {} pixels converged\n",
        pixels.len(),
        input.display(),
        found,
        converged
    );
    let mut cfg = cfg.clone();
    cfg.input = Some(input.to_path_buf());
    Ok(ResultBundle {
        manifest: manifest(&cfg, started, clock.elapsed().as_secs_f64()),
        tables: vec![("scatterers.csv".into(), table)],
        summary,
    })
}

/// Run the configured experiment and write its bundle to `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let bundle = match cfg.experiment {
        ExperimentKind::AngularBias => run_angular_bias(cfg)?.bundle,
        ExperimentKind::Superres => run_superres(cfg)?.bundle,
        ExperimentKind::TracePrior => run_trace_prior(cfg)?.bundle,
        ExperimentKind::Invert => {
            let input = cfg.input.as_deref().ok_or_else(|| {
                Error::InvalidInput(
                    "invert needs an input file (`--input` or `input = ...`)".into(),
                )
            })?;
            run_invert(cfg, input)?
        }
    };
    bundle.write(&cfg.out)?;
    Ok(bundle)
}
