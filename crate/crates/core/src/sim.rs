//! Scene and measurement generation for the Monte Carlo experiments.

use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::LookStack;
use crate::error::{Error, Result};
use crate::model::{AcquisitionGeometry, ElevationGrid, Snapshot, SteeringMatrix};
use crate::C64;

/// X-band wavelength (m).
pub const WAVELENGTH: f64 = 0.031;

/// Slant range giving a 30 m Rayleigh resolution over a 400 m aperture.
pub const ANGULAR_BIAS_SLANT_RANGE: f64 = 774_200.0;

/// Irregular repeat-pass layout of 13 perpendicular baselines in ±200 m.
pub const ANGULAR_BIAS_BASELINES: [f64; 13] = [
    -200.0, -182.82, -124.0, -84.46, 38.59, 38.62, 75.26, 116.11, 133.99, 164.14, 189.46, 192.59,
    200.0,
];

/// Slant range giving a 42 m Rayleigh resolution over a 270 m aperture.
pub const SUPERRES_SLANT_RANGE: f64 = 731_600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub elevation: f64,
    pub amplitude: f64,
    /// Radians in `[0, 2π)`.
    pub phase: f64,
}

impl Scatterer {
    pub fn new(elevation: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            elevation,
            amplitude,
            phase: phase.rem_euclid(TAU),
        }
    }

    pub fn complex_amplitude(&self) -> C64 {
        C64::from_polar(self.amplitude, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    pub snap_to_grid: bool,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>, snap_to_grid: bool) -> Self {
        Self {
            scatterers,
            snap_to_grid,
        }
    }

    pub fn elevations(&self) -> Vec<f64> {
        self.scatterers.iter().map(|s| s.elevation).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// `SNR = a₁² / σ²` (first scatterer's power).
    #[default]
    PerScatterer,
    /// `SNR = Σ a_p² / σ²`.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub convention: SnrConvention,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn snr_db(snr_db: f64) -> Self {
        Self {
            snr_db: Some(snr_db),
            convention: SnrConvention::default(),
        }
    }

    /// Per-acquisition noise variance σ² implied for `scene`.
    pub fn variance(&self, scene: &Scene) -> Result<f64> {
        let Some(db) = self.snr_db else {
            return Ok(0.0);
        };
        if !db.is_finite() {
            return Err(Error::InvalidInput(format!("SNR must be finite, got {db}")));
        }
        let power = match self.convention {
            SnrConvention::PerScatterer => scene
                .scatterers
                .first()
                .map_or(0.0, |s| s.amplitude * s.amplitude),
            SnrConvention::Total => scene
                .scatterers
                .iter()
                .map(|s| s.amplitude * s.amplitude)
                .sum(),
        };
        Ok(power / 10f64.powf(db / 10.0))
    }
}

/// Deterministic per-sample random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed {
    pub base_seed: u64,
    pub sample_index: u64,
}

impl RngSeed {
    pub fn new(base_seed: u64, sample_index: u64) -> Self {
        Self {
            base_seed,
            sample_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.base_seed));
        rng.set_stream(self.sample_index);
        rng
    }
}

/// Seed for an independent sub-experiment (e.g. one κ value).
pub fn derive_seed(base_seed: u64, tag: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn scene_steering(scene: &Scene, steering: &SteeringMatrix) -> Result<Vec<DVector<C64>>> {
    let grid = steering.grid();
    scene
        .scatterers
        .iter()
        .map(|s| {
            if !grid.contains(s.elevation) {
                return Err(Error::InvalidInput(format!(
                    "scatterer elevation {} outside grid [{}, {}]",
                    s.elevation,
                    grid.s_min(),
                    grid.position(grid.len() - 1)
                )));
            }
            if scene.snap_to_grid {
                let l = grid.index_of(s.elevation).ok_or_else(|| {
                    Error::InvalidInput(format!("scatterer elevation {} is off grid", s.elevation))
                })?;
                Ok(steering.column(l))
            } else {
                Ok(steering.geometry().steering_vector(s.elevation))
            }
        })
        .collect()
}

fn add_noise<R: Rng + ?Sized>(g: &mut Snapshot, variance: f64, rng: &mut R) {
    if variance > 0.0 {
        let s = (variance / 2.0).sqrt();
        for z in g.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += C64::new(s * re, s * im);
        }
    }
}

/// `g = Σ_p a_p e^{jφ_p} r(s_p) + ε`, `ε ~ CN(0, σ²I)`.
pub fn generate_snapshot_with<R: Rng + ?Sized>(
    scene: &Scene,
    steering: &SteeringMatrix,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Snapshot> {
    let columns = scene_steering(scene, steering)?;
    let mut g = Snapshot::zeros(steering.nrows());
    for (s, col) in scene.scatterers.iter().zip(&columns) {
        g.axpy(s.complex_amplitude(), col, C64::new(1.0, 0.0));
    }
    add_noise(&mut g, noise.variance(scene)?, rng);
    Ok(g)
}

pub fn generate_snapshot(
    scene: &Scene,
    steering: &SteeringMatrix,
    noise: &NoiseSpec,
    seed: RngSeed,
) -> Result<Snapshot> {
    generate_snapshot_with(scene, steering, noise, &mut seed.rng())
}

/// `looks` realizations of the scene with i.i.d. uniform scatterer phases
/// per look; amplitudes stay fixed.
pub fn generate_looks_with<R: Rng + ?Sized>(
    scene: &Scene,
    steering: &SteeringMatrix,
    noise: &NoiseSpec,
    looks: usize,
    rng: &mut R,
) -> Result<LookStack> {
    let columns = scene_steering(scene, steering)?;
    let variance = noise.variance(scene)?;
    let stack = (0..looks)
        .map(|_| {
            let mut g = Snapshot::zeros(steering.nrows());
            for (s, col) in scene.scatterers.iter().zip(&columns) {
                let phase = rng.random_range(0.0..TAU);
                g.axpy(C64::from_polar(s.amplitude, phase), col, C64::new(1.0, 0.0));
            }
            add_noise(&mut g, variance, rng);
            g
        })
        .collect();
    LookStack::new(stack)
}

/// Layover experiment scoring steering-vector estimates.
#[derive(Debug, Clone)]
pub struct AngularBiasPreset {
    pub geometry: AcquisitionGeometry,
    pub grid: ElevationGrid,
    pub samples: usize,
    pub looks: usize,
    /// Amplitudes of the first (weaker) and second (stronger) scatterer.
    pub amplitudes: [f64; 2],
    pub noise: NoiseSpec,
    pub base_seed: u64,
}

#[derive(Debug, Clone)]
pub struct AngularBiasSample {
    pub index: usize,
    /// Scatterers in slot order: first, second.
    pub scene: Scene,
    pub snapshot: Snapshot,
    pub looks: LookStack,
}

impl AngularBiasPreset {
    pub fn new(base_seed: u64) -> Self {
        Self {
            geometry: AcquisitionGeometry::new(
                WAVELENGTH,
                ANGULAR_BIAS_SLANT_RANGE,
                ANGULAR_BIAS_BASELINES.to_vec(),
            )
            .expect("preset geometry is valid"),
            grid: ElevationGrid::new(0.0, 300.0, 1.0).expect("preset grid is valid"),
            samples: 1000,
            looks: 60,
            amplitudes: [1.0, 2.0],
            noise: NoiseSpec::noiseless(),
            base_seed,
        }
    }

    pub fn sample(&self, steering: &SteeringMatrix, index: usize) -> Result<AngularBiasSample> {
        let mut rng = RngSeed::new(derive_seed(self.base_seed, 1), index as u64).rng();
        let (lo, hi) = (self.grid.s_min(), self.grid.position(self.grid.len() - 1));
        let scatterers = self
            .amplitudes
            .iter()
            .map(|&a| {
                let s = self.grid.snap(rng.random_range(lo..=hi));
                (s, a)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(s, a)| Scatterer::new(s, a, rng.random_range(0.0..TAU)))
            .collect();
        let scene = Scene::new(scatterers, true);
        let snapshot = generate_snapshot_with(&scene, steering, &self.noise, &mut rng)?;
        let looks = generate_looks_with(&scene, steering, &self.noise, self.looks, &mut rng)?;
        Ok(AngularBiasSample {
            index,
            scene,
            snapshot,
            looks,
        })
    }
}

/// Default κ sweep: 0.05 to 1.25 in steps of 0.05.
pub fn default_kappas() -> Vec<f64> {
    (1..=25).map(|k| k as f64 * 0.05).collect()
}

/// Two equal, in-phase scatterers separated by κ Rayleigh cells in noise.
#[derive(Debug, Clone)]
pub struct SuperresPreset {
    pub geometry: AcquisitionGeometry,
    pub grid: ElevationGrid,
    pub samples: usize,
    pub kappas: Vec<f64>,
    /// Range of the first scatterer's elevation.
    pub first_range: (f64, f64),
    pub noise: NoiseSpec,
    pub base_seed: u64,
}

#[derive(Debug, Clone)]
pub struct SuperresSample {
    pub index: usize,
    pub kappa: f64,
    pub scene: Scene,
    pub snapshot: Snapshot,
    pub noise_variance: f64,
}

impl SuperresPreset {
    pub fn new(base_seed: u64) -> Self {
        let geometry =
            AcquisitionGeometry::evenly_spaced(WAVELENGTH, SUPERRES_SLANT_RANGE, -135.0, 135.0, 25)
                .expect("preset geometry is valid");
        Self {
            geometry,
            grid: ElevationGrid::new(0.0, 260.0, 1.0).expect("preset grid is valid"),
            samples: 1000,
            kappas: default_kappas(),
            first_range: (0.0, 200.0),
            noise: NoiseSpec::snr_db(6.0),
            base_seed,
        }
    }

    pub fn sample(
        &self,
        steering: &SteeringMatrix,
        kappa_index: usize,
        index: usize,
    ) -> Result<SuperresSample> {
        let kappa = *self.kappas.get(kappa_index).ok_or_else(|| {
            Error::InvalidInput(format!("kappa index {kappa_index} out of range"))
        })?;
        if !(kappa > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kappa must be > 0, got {kappa}"
            )));
        }
        let seed = derive_seed(self.base_seed, 0x100 + kappa_index as u64);
        let mut rng = RngSeed::new(seed, index as u64).rng();
        let rho = self.geometry.rayleigh_resolution();
        let s1 = self
            .grid
            .snap(rng.random_range(self.first_range.0..=self.first_range.1));
        let s2 = self.grid.snap(s1 + kappa * rho);
        let phase = rng.random_range(0.0..TAU);
        let scene = Scene::new(
            vec![
                Scatterer::new(s1, 1.0, phase),
                Scatterer::new(s2, 1.0, phase),
            ],
            true,
        );
        let noise_variance = self.noise.variance(&scene)?;
        let snapshot = generate_snapshot_with(&scene, steering, &self.noise, &mut rng)?;
        Ok(SuperresSample {
            index,
            kappa,
            scene,
            snapshot,
            noise_variance,
        })
    }
}

/// Noise-free pair of equal, in-phase, on-grid scatterers `separation`
/// Rayleigh cells apart, starting at `first_elevation`.
pub fn trace_scene(grid: &ElevationGrid, rho: f64, first_elevation: f64, separation: f64) -> Scene {
    let s1 = grid.snap(first_elevation);
    let s2 = grid.snap(s1 + separation * rho);
    Scene::new(
        vec![Scatterer::new(s1, 1.0, 0.0), Scatterer::new(s2, 1.0, 0.0)],
        true,
    )
}
