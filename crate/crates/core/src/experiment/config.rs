//! Flat key-value experiment configuration.
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored; a repeated key overrides the earlier one. Keys prefixed with
//! `meta.` are informational (written to run manifests) and ignored when
//! parsing, so a manifest is itself a valid configuration file.
//!
//! | key | value |
//! |-----|-------|
//! | `experiment` | `angular-bias`, `superres`, `trace-prior` or `invert` |
//! | `seed` | base seed (u64) |
//! | `workers` | worker threads (≥ 1) |
//! | `samples` | Monte Carlo samples per point (≥ 1) |
//! | `out` | output directory |
//! | `input` | measurement file (`invert`) |
//! | `wavelength`, `slant_range` | metres |
//! | `baseline_layout` | `irregular` or `even` (13 baselines in ±200 m) |
//! | `baselines` | comma-separated perpendicular baselines (m); overrides the layout |
//! | `grid_min`, `grid_max`, `grid_spacing` | elevation grid (m) |
//! | `max_steering_entries` | cap on `N·L` |
//! | `max_iterations`, `tolerance`, `prune_threshold`, `noise_floor` | solver |
//! | `fixed_noise` | known noise variance or `none` (learned) |
//! | `noise_denominator` | `mackay` or `literal` |
//! | `max_scatterers` | scatterers reported per pixel |
//! | `looks` | looks per sample for the PCA/KPCA estimators |
//! | `amplitude_first`, `amplitude_second` | scatterer amplitudes (`angular-bias`) |
//! | `snr_db` | SNR in dB or `none` (noiseless) |
//! | `snr_convention` | `per-scatterer` or `total` |
//! | `kappas` | comma-separated separations in Rayleigh cells (`superres`) |
//! | `first_min`, `first_max` | range of the first elevation (`superres`) |
//! | `trace_first_elevation`, `trace_separation` | `trace-prior` scene |
//! | `kernel_bandwidth` | `median` or a positive number |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::baselines::Bandwidth;
use crate::model::{AcquisitionGeometry, ElevationGrid, DEFAULT_MAX_ENTRIES};
use crate::sbl::{NoiseDenominator, SblOptions};
use crate::sim::{
    default_kappas, SnrConvention, ANGULAR_BIAS_BASELINES, ANGULAR_BIAS_SLANT_RANGE,
    SUPERRES_SLANT_RANGE, WAVELENGTH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{location}: {message}")]
    Syntax { location: String, message: String },

    #[error("{location}: unknown key `{key}`")]
    UnknownKey { location: String, key: String },

    #[error("{location}: invalid value for `{key}`: {message}")]
    InvalidValue {
        location: String,
        key: String,
        message: String,
    },

    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    AngularBias,
    Superres,
    TracePrior,
    Invert,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::AngularBias => "angular-bias",
            Self::Superres => "superres",
            Self::TracePrior => "trace-prior",
            Self::Invert => "invert",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "angular-bias" => Ok(Self::AngularBias),
            "superres" => Ok(Self::Superres),
            "trace-prior" => Ok(Self::TracePrior),
            "invert" => Ok(Self::Invert),
            _ => Err(format!(
                "expected angular-bias, superres, trace-prior or invert, got `{s}`"
            )),
        }
    }
}

/// A parsed `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    pub location: String,
    pub key: String,
    pub value: String,
}

/// Entries of a configuration file in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<ConfigEntry>,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let location = format!("{source}:{}", i + 1);
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    location,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    location,
                    message: "empty key".into(),
                });
            }
            if key.starts_with("meta.") {
                continue;
            }
            entries.push(ConfigEntry {
                location,
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn push(&mut self, location: &str, key: &str, value: impl Into<String>) {
        self.entries.push(ConfigEntry {
            location: location.to_string(),
            key: key.to_string(),
            value: value.into(),
        });
    }

    /// The last `experiment` entry, if any.
    pub fn experiment(&self) -> Result<Option<ExperimentKind>, ConfigError> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == "experiment")
            .map(|e| e.value.parse().map_err(|m| invalid(e, m)))
            .transpose()
    }
}

fn invalid(entry: &ConfigEntry, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        location: entry.location.clone(),
        key: entry.key.clone(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(entry: &ConfigEntry) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    entry
        .value
        .parse()
        .map_err(|e: T::Err| invalid(entry, e.to_string()))
}

fn parse_f64(entry: &ConfigEntry) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(entry)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(entry, "must be finite"))
    }
}

fn parse_optional_f64(entry: &ConfigEntry) -> Result<Option<f64>, ConfigError> {
    if entry.value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_f64(entry).map(Some)
    }
}

fn parse_list(entry: &ConfigEntry) -> Result<Vec<f64>, ConfigError> {
    entry
        .value
        .split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| invalid(entry, format!("`{}` is not a number", s.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(entry, "list entries must be finite"))
            }
        })
        .collect()
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub base_seed: u64,
    pub workers: usize,
    pub samples: usize,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub wavelength: f64,
    pub slant_range: f64,
    pub baselines: Vec<f64>,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_spacing: f64,
    pub max_steering_entries: usize,
    pub solver: SblOptions,
    pub looks: usize,
    pub amplitudes: [f64; 2],
    pub snr_db: Option<f64>,
    pub snr_convention: SnrConvention,
    pub kappas: Vec<f64>,
    pub first_range: (f64, f64),
    pub trace_first_elevation: f64,
    pub trace_separation: f64,
    pub kernel_bandwidth: Bandwidth,
}

/// Known noise variance used for the noise-free presets.
pub const NOISELESS_FIXED_NOISE: f64 = 1e-6;

fn even_layout() -> Vec<f64> {
    (0..13).map(|i| -200.0 + 400.0 * i as f64 / 12.0).collect()
}

impl ExperimentConfig {
    /// Preset defaults for `kind`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            base_seed: 0,
            workers: 1,
            samples: 1000,
            out: PathBuf::from(format!("results/{}", kind.name())),
            input: None,
            wavelength: WAVELENGTH,
            slant_range: ANGULAR_BIAS_SLANT_RANGE,
            baselines: ANGULAR_BIAS_BASELINES.to_vec(),
            grid_min: 0.0,
            grid_max: 300.0,
            grid_spacing: 1.0,
            max_steering_entries: DEFAULT_MAX_ENTRIES,
            solver: SblOptions::default(),
            looks: 60,
            amplitudes: [1.0, 2.0],
            snr_db: None,
            snr_convention: SnrConvention::PerScatterer,
            kappas: default_kappas(),
            first_range: (0.0, 200.0),
            trace_first_elevation: 100.0,
            trace_separation: 0.6,
            kernel_bandwidth: Bandwidth::Median,
        };
        match kind {
            ExperimentKind::AngularBias | ExperimentKind::TracePrior => {
                cfg.solver.fixed_noise = Some(NOISELESS_FIXED_NOISE);
            }
            ExperimentKind::Superres => {
                cfg.slant_range = SUPERRES_SLANT_RANGE;
                cfg.baselines = (0..25).map(|i| -135.0 + 270.0 * i as f64 / 24.0).collect();
                cfg.grid_max = 260.0;
                cfg.snr_db = Some(6.0);
            }
            ExperimentKind::Invert => {}
        }
        if kind == ExperimentKind::TracePrior {
            cfg.solver.trace = true;
            cfg.samples = 1;
        }
        cfg
    }

    /// Preset for the experiment named in `raw` (or `default_kind`), with
    /// every entry of `raw` applied in order.
    pub fn from_raw(raw: &RawConfig, default_kind: ExperimentKind) -> Result<Self, ConfigError> {
        let kind = raw.experiment()?.unwrap_or(default_kind);
        let mut cfg = Self::preset(kind);
        for entry in &raw.entries {
            cfg.apply(entry)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &ConfigEntry) -> Result<(), ConfigError> {
        match e.key.as_str() {
            "experiment" => {
                let kind: ExperimentKind = e.value.parse().map_err(|m| invalid(e, m))?;
                if kind != self.experiment {
                    return Err(invalid(
                        e,
                        format!(
                            "config is for `{kind}` but the run is `{}`",
                            self.experiment
                        ),
                    ));
                }
            }
            "seed" => self.base_seed = parse_value(e)?,
            "workers" => self.workers = parse_value(e)?,
            "samples" => self.samples = parse_value(e)?,
            "out" => self.out = PathBuf::from(&e.value),
            "input" => self.input = Some(PathBuf::from(&e.value)),
            "wavelength" => self.wavelength = parse_f64(e)?,
            "slant_range" => self.slant_range = parse_f64(e)?,
            "baseline_layout" => {
                self.baselines = match e.value.as_str() {
                    "irregular" => ANGULAR_BIAS_BASELINES.to_vec(),
                    "even" => even_layout(),
                    _ => return Err(invalid(e, "expected `irregular` or `even`")),
                }
            }
            "baselines" => self.baselines = parse_list(e)?,
            "grid_min" => self.grid_min = parse_f64(e)?,
            "grid_max" => self.grid_max = parse_f64(e)?,
            "grid_spacing" => self.grid_spacing = parse_f64(e)?,
            "max_steering_entries" => self.max_steering_entries = parse_value(e)?,
            "max_iterations" => self.solver.max_iterations = parse_value(e)?,
            "tolerance" => self.solver.tolerance = parse_f64(e)?,
            "prune_threshold" => self.solver.prune_threshold = parse_f64(e)?,
            "noise_floor" => self.solver.noise_floor = parse_f64(e)?,
            "fixed_noise" => self.solver.fixed_noise = parse_optional_f64(e)?,
            "noise_denominator" => {
                self.solver.noise_denominator = match e.value.as_str() {
                    "mackay" => NoiseDenominator::Mackay,
                    "literal" => NoiseDenominator::Literal,
                    _ => return Err(invalid(e, "expected `mackay` or `literal`")),
                }
            }
            "max_scatterers" => self.solver.max_scatterers = parse_value(e)?,
            "looks" => self.looks = parse_value(e)?,
            "amplitude_first" => self.amplitudes[0] = parse_f64(e)?,
            "amplitude_second" => self.amplitudes[1] = parse_f64(e)?,
            "snr_db" => self.snr_db = parse_optional_f64(e)?,
            "snr_convention" => {
                self.snr_convention = match e.value.as_str() {
                    "per-scatterer" => SnrConvention::PerScatterer,
                    "total" => SnrConvention::Total,
                    _ => return Err(invalid(e, "expected `per-scatterer` or `total`")),
                }
            }
            "kappas" => self.kappas = parse_list(e)?,
            "first_min" => self.first_range.0 = parse_f64(e)?,
            "first_max" => self.first_range.1 = parse_f64(e)?,
            "trace_first_elevation" => self.trace_first_elevation = parse_f64(e)?,
            "trace_separation" => self.trace_separation = parse_f64(e)?,
            "kernel_bandwidth" => {
                self.kernel_bandwidth = if e.value == "median" {
                    Bandwidth::Median
                } else {
                    let h = parse_f64(e)?;
                    if h <= 0.0 {
                        return Err(invalid(e, "bandwidth must be > 0"));
                    }
                    Bandwidth::Fixed(h)
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    location: e.location.clone(),
                    key: e.key.clone(),
                })
            }
        }
        Ok(())
    }

    /// Cross-field checks, reported against the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| ConfigError::InvalidValue {
            location: "config".into(),
            key: key.into(),
            message,
        };
        if self.samples == 0 {
            return Err(fail("samples", "must be ≥ 1".into()));
        }
        if self.workers == 0 {
            return Err(fail("workers", "must be ≥ 1".into()));
        }
        if self.experiment == ExperimentKind::AngularBias && self.looks < 3 {
            return Err(fail("looks", "must be ≥ 3".into()));
        }
        if self.kappas.is_empty() || self.kappas.iter().any(|&k| k <= 0.0) {
            return Err(fail(
                "kappas",
                "must be a non-empty list of positive values".into(),
            ));
        }
        if self.amplitudes.iter().any(|&a| a <= 0.0) {
            return Err(fail("amplitude_first", "amplitudes must be > 0".into()));
        }
        if self.first_range.0 > self.first_range.1 {
            return Err(fail("first_min", "must not exceed first_max".into()));
        }
        if self.trace_separation <= 0.0 {
            return Err(fail("trace_separation", "must be > 0".into()));
        }
        self.solver
            .validate()
            .map_err(|e| fail("solver", e.to_string()))?;
        self.geometry()
            .map_err(|e| fail("baselines", e.to_string()))?;
        self.grid()
            .map_err(|e| fail("grid_spacing", e.to_string()))?;
        Ok(())
    }

    pub fn geometry(&self) -> crate::Result<AcquisitionGeometry> {
        AcquisitionGeometry::new(self.wavelength, self.slant_range, self.baselines.clone())
    }

    pub fn grid(&self) -> crate::Result<ElevationGrid> {
        ElevationGrid::new(self.grid_min, self.grid_max, self.grid_spacing)
    }

    /// Every key with its effective value, in a fixed order; feeding the
    /// output back through [`RawConfig::parse`] reproduces `self`.
    pub fn to_entries(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let mut entries = vec![
            ("experiment", self.experiment.to_string()),
            ("seed", self.base_seed.to_string()),
            ("workers", self.workers.to_string()),
            ("samples", self.samples.to_string()),
            ("out", self.out.display().to_string()),
        ];
        if let Some(input) = &self.input {
            entries.push(("input", input.display().to_string()));
        }
        entries.extend([
            ("wavelength", self.wavelength.to_string()),
            ("slant_range", self.slant_range.to_string()),
            ("baselines", list(&self.baselines)),
            ("grid_min", self.grid_min.to_string()),
            ("grid_max", self.grid_max.to_string()),
            ("grid_spacing", self.grid_spacing.to_string()),
            (
                "max_steering_entries",
                self.max_steering_entries.to_string(),
            ),
            ("max_iterations", self.solver.max_iterations.to_string()),
            ("tolerance", self.solver.tolerance.to_string()),
            ("prune_threshold", self.solver.prune_threshold.to_string()),
            ("noise_floor", self.solver.noise_floor.to_string()),
            ("fixed_noise", opt(self.solver.fixed_noise)),
            (
                "noise_denominator",
                match self.solver.noise_denominator {
                    NoiseDenominator::Mackay => "mackay",
                    NoiseDenominator::Literal => "literal",
                }
                .to_string(),
            ),
            ("max_scatterers", self.solver.max_scatterers.to_string()),
            ("looks", self.looks.to_string()),
            ("amplitude_first", self.amplitudes[0].to_string()),
            ("amplitude_second", self.amplitudes[1].to_string()),
            ("snr_db", opt(self.snr_db)),
            (
                "snr_convention",
                match self.snr_convention {
                    SnrConvention::PerScatterer => "per-scatterer",
                    SnrConvention::Total => "total",
                }
                .to_string(),
            ),
            ("kappas", list(&self.kappas)),
            ("first_min", self.first_range.0.to_string()),
            ("first_max", self.first_range.1.to_string()),
            (
                "trace_first_elevation",
                self.trace_first_elevation.to_string(),
            ),
            ("trace_separation", self.trace_separation.to_string()),
            (
                "kernel_bandwidth",
                match self.kernel_bandwidth {
                    Bandwidth::Median => "median".to_string(),
                    Bandwidth::Fixed(h) => h.to_string(),
                },
            ),
        ]);
        entries
    }

    pub fn to_text(&self) -> String {
        self.to_entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
