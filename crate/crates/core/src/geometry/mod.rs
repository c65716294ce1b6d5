//! Acquisition geometry and the multi-baseline forward model `g = R γ + n`.
//!
//! A [`BaselineSet`] and an [`ElevationGrid`] define the steering matrix
//! [`MeasurementMatrix`]. Scenes are described by a [`SceneSpec`], rasterised
//! into a [`GroundTruthVolume`], and observed through the steering matrix with
//! additive circular Gaussian noise into an [`ObservationVolume`].

mod observe;
mod scene;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

pub use observe::{synthesize_observation, synthesize_observation_with, ObservationVolume};
pub use scene::{generate_scene, GroundTruthVolume, SceneComponent, SceneSpec};

/// Relative tolerance of the power iteration behind [`MeasurementMatrix::lipschitz`].
pub const POWER_ITERATION_TOL: f64 = 1e-6;

const DEFAULT_GEOMETRY_JSON: &str = include_str!("../../configs/geometry.json");

/// All numeric knobs of the acquisition and discretisation.
///
/// The shipped defaults live in `configs/geometry.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub baseline_count: usize,
    pub baseline_min: f64,
    pub baseline_max: f64,
    pub wavelength: f64,
    pub reference_range: f64,
    pub incidence_deg: f64,
    /// Height of the reference track; carried as metadata only.
    pub reference_height: f64,
    pub elevation_bins: usize,
    pub elevation_min: f64,
    pub elevation_max: f64,
    /// Meters per azimuth cell when exporting coordinates.
    pub azimuth_spacing: f64,
    /// Meters per range cell when exporting coordinates.
    pub range_spacing: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_GEOMETRY_JSON).expect("bundled geometry config is valid")
    }
}

impl GeometryConfig {
    pub fn baselines(&self) -> Result<BaselineSet> {
        let mut set = build_baselines(
            self.baseline_count,
            self.baseline_min,
            self.baseline_max,
            self.wavelength,
            self.reference_range,
        )?;
        set.incidence_deg = self.incidence_deg;
        Ok(set)
    }

    pub fn grid(&self) -> Result<ElevationGrid> {
        ElevationGrid::new(self.elevation_bins, self.elevation_min, self.elevation_max)
    }

    pub fn measurement_matrix(&self) -> Result<MeasurementMatrix> {
        Ok(build_measurement_matrix(&self.baselines()?, &self.grid()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSet {
    offsets: Vec<f64>,
    wavelength: f64,
    reference_range: f64,
    pub incidence_deg: f64,
}

impl BaselineSet {
    pub fn new(offsets: Vec<f64>, wavelength: f64, reference_range: f64) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 baselines, got {}",
                offsets.len()
            )));
        }
        if offsets.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGeometry(
                "baseline offsets must be strictly increasing".into(),
            ));
        }
        if !(wavelength > 0.0) || !(reference_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavelength ({wavelength}) and reference range ({reference_range}) must be positive"
            )));
        }
        Ok(Self {
            offsets,
            wavelength,
            reference_range,
            incidence_deg: 34.78,
        })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn reference_range(&self) -> f64 {
        self.reference_range
    }

    /// Rayleigh elevation resolution `λ r0 / (2 Δb)` for the total aperture.
    pub fn rayleigh_resolution(&self) -> f64 {
        let aperture = self.offsets[self.offsets.len() - 1] - self.offsets[0];
        self.wavelength * self.reference_range / (2.0 * aperture)
    }
}

/// `count` uniformly spaced perpendicular baselines from `b_min` to `b_max` inclusive.
pub fn build_baselines(
    count: usize,
    b_min: f64,
    b_max: f64,
    wavelength: f64,
    reference_range: f64,
) -> Result<BaselineSet> {
    if count < 2 {
        return Err(Error::InvalidGeometry(format!(
            "need at least 2 baselines, got {count}"
        )));
    }
    if !(b_min < b_max) {
        return Err(Error::InvalidGeometry(format!(
            "baseline span [{b_min}, {b_max}] is empty"
        )));
    }
    let step = (b_max - b_min) / (count - 1) as f64;
    let offsets = (0..count)
        .map(|i| if i + 1 == count { b_max } else { b_min + step * i as f64 })
        .collect();
    BaselineSet::new(offsets, wavelength, reference_range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationGrid {
    s_min: f64,
    s_max: f64,
    centers: Vec<f64>,
}

impl ElevationGrid {
    pub fn new(n_bins: usize, s_min: f64, s_max: f64) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidGeometry(format!(
                "elevation grid needs at least 2 bins, got {n_bins}"
            )));
        }
        if !(s_min < s_max) {
            return Err(Error::InvalidGeometry(format!(
                "elevation extent [{s_min}, {s_max}] is empty"
            )));
        }
        let step = (s_max - s_min) / (n_bins - 1) as f64;
        let centers = (0..n_bins)
            .map(|i| if i + 1 == n_bins { s_max } else { s_min + step * i as f64 })
            .collect();
        Ok(Self {
            s_min,
            s_max,
            centers,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn spacing(&self) -> f64 {
        (self.s_max - self.s_min) / (self.centers.len() - 1) as f64
    }

    /// Index of the bin whose center is closest to `s`.
    pub fn nearest_bin(&self, s: f64) -> Result<usize> {
        if !(s >= self.s_min && s <= self.s_max) {
            return Err(Error::OutOfGrid {
                elevation: s,
                min: self.s_min,
                max: self.s_max,
            });
        }
        let idx = ((s - self.s_min) / self.spacing()).round() as usize;
        Ok(idx.min(self.centers.len() - 1))
    }
}

/// Steering matrix `R[m][n] = exp(i 4π b_m s_n / (λ r0))`.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    entries: CMatrix,
    baselines: BaselineSet,
    grid: ElevationGrid,
    lipschitz: OnceLock<f64>,
}

pub fn steering_phase(offset: f64, elevation: f64, wavelength: f64, reference_range: f64) -> f64 {
    4.0 * PI * offset * elevation / (wavelength * reference_range)
}

pub fn build_measurement_matrix(baselines: &BaselineSet, grid: &ElevationGrid) -> MeasurementMatrix {
    let entries = CMatrix::from_fn(baselines.len(), grid.n_bins(), |m, n| {
        let phase = steering_phase(
            baselines.offsets[m],
            grid.centers[n],
            baselines.wavelength,
            baselines.reference_range,
        );
        C64::from_polar(1.0, phase)
    });
    MeasurementMatrix {
        entries,
        baselines: baselines.clone(),
        grid: grid.clone(),
        lipschitz: OnceLock::new(),
    }
}

impl MeasurementMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn baselines(&self) -> &BaselineSet {
        &self.baselines
    }

    pub fn grid(&self) -> &ElevationGrid {
        &self.grid
    }

    /// Number of acquisitions M.
    pub fn m(&self) -> usize {
        self.entries.rows()
    }

    /// Number of elevation bins N.
    pub fn n(&self) -> usize {
        self.entries.cols()
    }

    /// Largest eigenvalue of `R^H R`, computed once by power iteration.
    pub fn lipschitz(&self) -> f64 {
        *self
            .lipschitz
            .get_or_init(|| linalg::spectral_norm_sq(&self.entries, POWER_ITERATION_TOL, 100_000))
    }

    pub fn apply(&self, gamma: &[C64]) -> Result<Vec<C64>> {
        self.entries.apply(gamma)
    }

    pub fn apply_adjoint(&self, g: &[C64]) -> Result<Vec<C64>> {
        self.entries.apply_adjoint(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_config_matches_acquisition_constants() {
        let cfg = GeometryConfig::default();
        assert_eq!(cfg.baseline_count, 24);
        assert_eq!(cfg.baseline_min, -200.0);
        assert_eq!(cfg.baseline_max, 200.0);
        assert_eq!(cfg.wavelength, 0.031);
        assert_eq!(cfg.reference_range, 6.1434e5);
        assert_eq!(cfg.incidence_deg, 34.78);
        assert_eq!(cfg.reference_height, 5.0456e5);
        assert_eq!(cfg.elevation_bins, 128);
    }

    #[test]
    fn twenty_four_baselines_are_evenly_spaced() {
        let b = build_baselines(24, -200.0, 200.0, 0.031, 6.1434e5).unwrap();
        assert_eq!(b.len(), 24);
        assert_eq!(b.offsets()[0], -200.0);
        assert_eq!(b.offsets()[23], 200.0);
        for w in b.offsets().windows(2) {
            assert!((w[1] - w[0] - 400.0 / 23.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_point_baselines() {
        let b = build_baselines(2, 0.0, 1.0, 0.031, 6.1434e5).unwrap();
        assert_eq!(b.offsets(), &[0.0, 1.0]);
    }

    #[test]
    fn baseline_errors() {
        assert!(matches!(
            build_baselines(1, -200.0, 200.0, 0.031, 6.1434e5),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            build_baselines(4, -200.0, 200.0, 0.0, 6.1434e5),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_baselines(4, -200.0, 200.0, 0.031, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(BaselineSet::new(vec![0.0, 0.0], 0.031, 1.0).is_err());
    }

    #[test]
    fn grid_is_uniform_and_rejects_outside_points() {
        let g = ElevationGrid::new(128, -50.0, 50.0).unwrap();
        assert_eq!(g.centers()[0], -50.0);
        assert_eq!(g.centers()[127], 50.0);
        assert!((g.spacing() - 100.0 / 127.0).abs() < 1e-15);
        assert_eq!(g.nearest_bin(0.3).unwrap(), 64);
        assert_eq!(g.nearest_bin(-50.0).unwrap(), 0);
        assert_eq!(g.nearest_bin(50.0).unwrap(), 127);
        assert!(matches!(g.nearest_bin(51.0), Err(Error::OutOfGrid { .. })));
        assert!(ElevationGrid::new(1, 0.0, 1.0).is_err());
        assert!(ElevationGrid::new(4, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_baseline_row_is_all_ones() {
        let b = BaselineSet::new(vec![-10.0, 0.0, 10.0], 0.031, 6.1434e5).unwrap();
        let g = ElevationGrid::new(16, -50.0, 50.0).unwrap();
        let r = build_measurement_matrix(&b, &g);
        for n in 0..16 {
            assert_eq!(r.matrix().get(1, n), C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn steering_entry_matches_hand_evaluated_phase() {
        // 4π·200·10 / (0.031·6.1434e5), evaluated independently: 1.31968224...
        let expected_phase = 1.319_682_241_141_993_8;
        let phase = steering_phase(200.0, 10.0, 0.031, 6.1434e5);
        assert!((phase - expected_phase).abs() < 1e-12, "{phase}");

        let b = BaselineSet::new(vec![0.0, 200.0], 0.031, 6.1434e5).unwrap();
        let g = ElevationGrid::new(3, -10.0, 10.0).unwrap();
        let r = build_measurement_matrix(&b, &g);
        let e = r.matrix().get(1, 2);
        assert!((e.re - expected_phase.cos()).abs() < 1e-12);
        assert!((e.im - expected_phase.sin()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_modulus(
            m in 2usize..30,
            n in 2usize..64,
            span in 1.0f64..1000.0,
            ext in 1.0f64..500.0,
            wl in 0.01f64..0.3,
        ) {
            let b = build_baselines(m, -span / 2.0, span / 2.0, wl, 6.0e5).unwrap();
            let g = ElevationGrid::new(n, -ext, ext).unwrap();
            let r = build_measurement_matrix(&b, &g);
            for v in r.matrix().as_slice() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn adjoint_is_consistent(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = GeometryConfig::default().measurement_matrix().unwrap();
            let x: Vec<C64> = (0..r.n()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let y: Vec<C64> = (0..r.m()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let rx = r.apply(&x).unwrap();
            let rhy = r.apply_adjoint(&y).unwrap();
            // <Rx, y> = y^H R x ; <x, R^H y> = (R^H y)^H x
            let lhs: C64 = rx.iter().zip(&y).map(|(a, b)| b.conj() * a).sum();
            let rhs: C64 = x.iter().zip(&rhy).map(|(a, b)| b.conj() * a).sum();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }
}
