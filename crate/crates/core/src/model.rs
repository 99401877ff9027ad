//! Multi-baseline acquisition geometry, elevation grids and the discrete
//! imaging model `g = R·γ + ε`.
//!
//! A scatterer at elevation `s` contributes the phase `exp(+j·2π·ξ_n·s)` to
//! acquisition `n`, with spatial frequency `ξ_n = 2·b_n / (λ·r)`. The same
//! sign convention is used by the simulator, the solver and every metric.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Single-look measurement vector (length N).
pub type Snapshot = DVector<C64>;

/// Discrete reflectivity profile along elevation (length L).
pub type Reflectivity = DVector<C64>;

/// Default cap on `N·L` for a steering matrix.
pub const DEFAULT_MAX_ENTRIES: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionGeometry {
    wavelength: f64,
    slant_range: f64,
    baselines: Vec<f64>,
}

impl AcquisitionGeometry {
    pub fn new(wavelength: f64, slant_range: f64, baselines: Vec<f64>) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(slant_range.is_finite() && slant_range > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "slant range must be positive, got {slant_range}"
            )));
        }
        if baselines.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 baselines, got {}",
                baselines.len()
            )));
        }
        if baselines.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidGeometry("baselines must be finite".into()));
        }
        let geometry = Self {
            wavelength,
            slant_range,
            baselines,
        };
        if geometry.baseline_span() <= 0.0 {
            return Err(Error::InvalidGeometry(
                "baseline span must be positive".into(),
            ));
        }
        Ok(geometry)
    }

    /// `n` baselines evenly spaced over `[min, max]`.
    pub fn evenly_spaced(
        wavelength: f64,
        slant_range: f64,
        min: f64,
        max: f64,
        n: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 baselines, got {n}"
            )));
        }
        let step = (max - min) / (n - 1) as f64;
        let baselines = (0..n).map(|i| min + step * i as f64).collect();
        Self::new(wavelength, slant_range, baselines)
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn slant_range(&self) -> f64 {
        self.slant_range
    }

    pub fn baselines(&self) -> &[f64] {
        &self.baselines
    }

    /// Number of acquisitions N.
    pub fn len(&self) -> usize {
        self.baselines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baselines.is_empty()
    }

    /// `ξ_n = 2·b_n / (λ·r)` for the zero-based acquisition index `n`.
    pub fn spatial_frequency(&self, n: usize) -> f64 {
        2.0 * self.baselines[n] / (self.wavelength * self.slant_range)
    }

    pub fn spatial_frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.spatial_frequency(n)).collect()
    }

    /// Δb = max(b) − min(b).
    pub fn baseline_span(&self) -> f64 {
        let (lo, hi) = self
            .baselines
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
                (lo.min(b), hi.max(b))
            });
        hi - lo
    }

    /// Population standard deviation of the baselines.
    pub fn baseline_std(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.baselines.iter().sum::<f64>() / n;
        let var = self
            .baselines
            .iter()
            .map(|b| (b - mean) * (b - mean))
            .sum::<f64>()
            / n;
        var.sqrt()
    }

    /// Rayleigh resolution `ρ = λ·r / (2·Δb)` in meters.
    pub fn rayleigh_resolution(&self) -> f64 {
        self.wavelength * self.slant_range / (2.0 * self.baseline_span())
    }

    /// Steering vector `r(s)` for an arbitrary (possibly off-grid) elevation.
    pub fn steering_vector(&self, elevation: f64) -> DVector<C64> {
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|n| phasor(2.0 * PI * self.spatial_frequency(n) * elevation)),
        )
    }
}

/// Uniform elevation grid `s_l = s_min + l·δs`, `l = 0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    s_min: f64,
    s_max: f64,
    spacing: f64,
    positions: Vec<f64>,
}

impl ElevationGrid {
    pub fn new(s_min: f64, s_max: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if !(s_min.is_finite() && s_max.is_finite()) || s_max <= s_min {
            return Err(Error::InvalidGrid(format!(
                "need s_min < s_max, got [{s_min}, {s_max}]"
            )));
        }
        // Tolerate representation error so 0..300 at 1 m keeps its last point.
        let steps = ((s_max - s_min) / spacing + 1e-9).floor() as usize;
        let len = steps + 1;
        if len < 2 {
            return Err(Error::InvalidGrid("grid needs at least 2 points".into()));
        }
        let positions = (0..len).map(|l| s_min + spacing * l as f64).collect();
        Ok(Self {
            s_min,
            s_max,
            spacing,
            positions,
        })
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, l: usize) -> f64 {
        self.positions[l]
    }

    /// Number of grid points L.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Nearest grid index, clamped to the grid.
    pub fn nearest_index(&self, elevation: f64) -> usize {
        let l = ((elevation - self.s_min) / self.spacing).round();
        if l <= 0.0 {
            0
        } else {
            (l as usize).min(self.len() - 1)
        }
    }

    /// Grid index of `elevation` if it lies on the grid.
    pub fn index_of(&self, elevation: f64) -> Option<usize> {
        let l = self.nearest_index(elevation);
        ((self.positions[l] - elevation).abs() <= 1e-9 * self.spacing.max(1.0)).then_some(l)
    }

    /// Nearest grid position.
    pub fn snap(&self, elevation: f64) -> f64 {
        self.positions[self.nearest_index(elevation)]
    }

    pub fn contains(&self, elevation: f64) -> bool {
        let tol = 1e-9 * self.spacing;
        elevation >= self.s_min - tol && elevation <= self.position(self.len() - 1) + tol
    }
}

/// N×L dictionary of steering vectors over an elevation grid.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    entries: DMatrix<C64>,
    geometry: AcquisitionGeometry,
    grid: ElevationGrid,
}

impl SteeringMatrix {
    pub fn build(geometry: &AcquisitionGeometry, grid: &ElevationGrid) -> Result<Self> {
        Self::build_with_cap(geometry, grid, DEFAULT_MAX_ENTRIES)
    }

    pub fn build_with_cap(
        geometry: &AcquisitionGeometry,
        grid: &ElevationGrid,
        max_entries: usize,
    ) -> Result<Self> {
        let (rows, cols) = (geometry.len(), grid.len());
        if rows.checked_mul(cols).is_none_or(|n| n > max_entries) {
            return Err(Error::DimensionOverflow {
                rows,
                cols,
                cap: max_entries,
            });
        }
        if cols <= rows {
            return Err(Error::InvalidGrid(format!(
                "grid must be overcomplete (L > N), got L = {cols}, N = {rows}"
            )));
        }
        let xi = geometry.spatial_frequencies();
        let entries = DMatrix::from_fn(rows, cols, |n, l| {
            phasor(2.0 * PI * xi[n] * grid.position(l))
        });
        Ok(Self {
            entries,
            geometry: geometry.clone(),
            grid: grid.clone(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn geometry(&self) -> &AcquisitionGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &ElevationGrid {
        &self.grid
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, l: usize) -> DVector<C64> {
        self.entries.column(l).into_owned()
    }
}

/// Noise-free forward model `g = R·γ`.
pub fn forward(steering: &SteeringMatrix, gamma: &Reflectivity) -> Result<Snapshot> {
    if gamma.len() != steering.ncols() {
        return Err(Error::DimensionMismatch {
            expected: steering.ncols(),
            actual: gamma.len(),
            context: "reflectivity length vs grid size",
        });
    }
    Ok(steering.matrix() * gamma)
}

#[inline]
pub(crate) fn phasor(phase: f64) -> C64 {
    let (s, c) = phase.sin_cos();
    C64::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tsx(baselines: Vec<f64>) -> AcquisitionGeometry {
        AcquisitionGeometry::new(0.031, 775_000.0, baselines).unwrap()
    }

    #[test]
    fn spatial_frequency_examples() {
        let g = tsx(vec![0.0, 200.0, -200.0]);
        assert_eq!(g.spatial_frequency(0), 0.0);
        let expected = 2.0 * 200.0 / (0.031 * 775_000.0);
        assert_relative_eq!(g.spatial_frequency(1), expected, max_relative = 1e-15);
        assert_relative_eq!(g.spatial_frequency(1), 1.665e-2, max_relative = 1e-3);
        assert_eq!(g.spatial_frequency(2), -g.spatial_frequency(1));
    }

    #[test]
    fn rayleigh_resolution_examples() {
        let g = AcquisitionGeometry::evenly_spaced(0.031, 774_200.0, -200.0, 200.0, 13).unwrap();
        assert_relative_eq!(g.rayleigh_resolution(), 30.0, max_relative = 1e-3);
        let g = AcquisitionGeometry::evenly_spaced(0.031, 731_600.0, -135.0, 135.0, 25).unwrap();
        assert_relative_eq!(g.rayleigh_resolution(), 42.0, max_relative = 1e-3);
        let wide = AcquisitionGeometry::evenly_spaced(0.031, 731_600.0, -270.0, 270.0, 25).unwrap();
        assert_relative_eq!(
            wide.rayleigh_resolution(),
            g.rayleigh_resolution() / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn geometry_rejects_bad_input() {
        assert!(AcquisitionGeometry::new(0.0, 1.0, vec![0.0, 1.0]).is_err());
        assert!(AcquisitionGeometry::new(0.03, -1.0, vec![0.0, 1.0]).is_err());
        assert!(AcquisitionGeometry::new(0.03, 1.0, vec![0.0]).is_err());
        assert!(AcquisitionGeometry::new(0.03, 1.0, vec![5.0, 5.0]).is_err());
    }

    #[test]
    fn grid_construction() {
        let grid = ElevationGrid::new(0.0, 300.0, 1.0).unwrap();
        assert_eq!(grid.len(), 301);
        assert_eq!(grid.position(300), 300.0);
        assert_eq!(grid.index_of(137.0), Some(137));
        assert_eq!(grid.index_of(137.5), None);
        assert_eq!(grid.snap(137.4), 137.0);
        assert!(ElevationGrid::new(0.0, 10.0, 0.0).is_err());
        assert!(ElevationGrid::new(10.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn steering_matrix_shape_and_modulus() {
        let g = AcquisitionGeometry::evenly_spaced(0.031, 774_200.0, -200.0, 200.0, 13).unwrap();
        let grid = ElevationGrid::new(0.0, 300.0, 1.0).unwrap();
        let r = SteeringMatrix::build(&g, &grid).unwrap();
        assert_eq!((r.nrows(), r.ncols()), (13, 301));
        for z in r.matrix().iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        for l in [0, 17, 300] {
            let col = r.column(l);
            let direct = g.steering_vector(grid.position(l));
            assert!((col - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_baselines_give_unit_entries() {
        // Span must be positive, so use a geometry whose frequencies we override via a tiny grid.
        let g = tsx(vec![0.0, 0.0, 1e-300]);
        let grid = ElevationGrid::new(0.0, 5.0, 1.0).unwrap();
        let r = SteeringMatrix::build(&g, &grid).unwrap();
        for z in r.matrix().iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_cycle_phase_is_j() {
        // ξ = 0.01 and s = 25 give a phase of π/2.
        let wavelength = 0.031;
        let slant_range = 775_000.0;
        let b = 0.01 * wavelength * slant_range / 2.0;
        let g = tsx(vec![0.0, b]);
        assert_relative_eq!(g.spatial_frequency(1), 0.01, max_relative = 1e-14);
        let grid = ElevationGrid::new(0.0, 50.0, 25.0).unwrap();
        let r = SteeringMatrix::build(&g, &grid).unwrap();
        assert!((r.matrix()[(1, 1)] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn overflow_cap() {
        let g = tsx(vec![-1.0, 1.0]);
        let grid = ElevationGrid::new(0.0, 100.0, 1.0).unwrap();
        let err = SteeringMatrix::build_with_cap(&g, &grid, 100).unwrap_err();
        assert!(matches!(err, Error::DimensionOverflow { .. }));
    }

    #[test]
    fn forward_examples() {
        let g = AcquisitionGeometry::evenly_spaced(0.031, 774_200.0, -200.0, 200.0, 13).unwrap();
        let grid = ElevationGrid::new(0.0, 300.0, 1.0).unwrap();
        let r = SteeringMatrix::build(&g, &grid).unwrap();
        let zero = forward(&r, &Reflectivity::zeros(301)).unwrap();
        assert_eq!(zero.norm(), 0.0);

        let mut e = Reflectivity::zeros(301);
        e[42] = C64::new(1.0, 0.0);
        assert!((forward(&r, &e).unwrap() - r.column(42)).norm() < 1e-12);

        // Two unit scatterers in the same bin superpose.
        e[42] = C64::new(2.0, 0.0);
        assert!((forward(&r, &e).unwrap() - r.column(42) * C64::new(2.0, 0.0)).norm() < 1e-12);

        assert!(forward(&r, &Reflectivity::zeros(3)).is_err());
    }
}
