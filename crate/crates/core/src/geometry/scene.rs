use serde::{Deserialize, Serialize};

use super::ElevationGrid;
use crate::error::{Error, Result};

fn default_sparsity_cap() -> usize {
    3
}

/// Synthetic scene description, read from JSON.
///
/// Plane slopes are in meters of elevation per azimuth (or range) cell, so a
/// scene stays valid whatever the physical cell spacing is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub azimuth_count: usize,
    pub range_count: usize,
    #[serde(default = "default_sparsity_cap")]
    pub max_scatterers_per_cell: usize,
    pub components: Vec<SceneComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneComponent {
    Point {
        azimuth: usize,
        range: usize,
        elevation: f64,
        amplitude: f64,
    },
    HorizontalPlane {
        elevation: f64,
        amplitude: f64,
        /// Half-open azimuth cell span; whole scene when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        azimuth_span: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range_span: Option<[usize; 2]>,
    },
    /// `elevation(a, r) = elevation + azimuth_slope * a + range_slope * r`
    ObliquePlane {
        elevation: f64,
        azimuth_slope: f64,
        range_slope: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        azimuth_span: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range_span: Option<[usize; 2]>,
    },
}

impl SceneSpec {
    pub fn single_point(
        azimuth_count: usize,
        range_count: usize,
        azimuth: usize,
        range: usize,
        elevation: f64,
        amplitude: f64,
    ) -> Self {
        Self {
            azimuth_count,
            range_count,
            max_scatterers_per_cell: default_sparsity_cap(),
            components: vec![SceneComponent::Point {
                azimuth,
                range,
                elevation,
                amplitude,
            }],
        }
    }

    /// A plane rising linearly from `from` to `to` meters across the azimuth
    /// extent, with an additional per-range tilt.
    pub fn oblique_plane(
        azimuth_count: usize,
        range_count: usize,
        from: f64,
        to: f64,
        range_slope: f64,
        amplitude: f64,
    ) -> Self {
        let azimuth_slope = if azimuth_count > 1 {
            (to - from) / (azimuth_count - 1) as f64
        } else {
            0.0
        };
        Self {
            azimuth_count,
            range_count,
            max_scatterers_per_cell: default_sparsity_cap(),
            components: vec![SceneComponent::ObliquePlane {
                elevation: from,
                azimuth_slope,
                range_slope,
                amplitude,
                azimuth_span: None,
                range_span: None,
            }],
        }
    }
}

/// Non-negative real reflectivity laid out as `[elevation][azimuth][range]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthVolume {
    reflectivity: Vec<f64>,
    grid: ElevationGrid,
    azimuth_count: usize,
    range_count: usize,
}

impl GroundTruthVolume {
    pub fn zeros(grid: ElevationGrid, azimuth_count: usize, range_count: usize) -> Self {
        Self {
            reflectivity: vec![0.0; grid.n_bins() * azimuth_count * range_count],
            grid,
            azimuth_count,
            range_count,
        }
    }

    pub fn from_vec(
        grid: ElevationGrid,
        azimuth_count: usize,
        range_count: usize,
        reflectivity: Vec<f64>,
    ) -> Result<Self> {
        if reflectivity.len() != grid.n_bins() * azimuth_count * range_count {
            return Err(Error::Shape(format!(
                "truth volume has {} values, expected {}x{}x{}",
                reflectivity.len(),
                grid.n_bins(),
                azimuth_count,
                range_count
            )));
        }
        if reflectivity.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "reflectivity must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            reflectivity,
            grid,
            azimuth_count,
            range_count,
        })
    }

    fn index(&self, n: usize, a: usize, d: usize) -> usize {
        (n * self.azimuth_count + a) * self.range_count + d
    }

    pub fn get(&self, n: usize, a: usize, d: usize) -> f64 {
        self.reflectivity[self.index(n, a, d)]
    }

    pub fn grid(&self) -> &ElevationGrid {
        &self.grid
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn azimuth_count(&self) -> usize {
        self.azimuth_count
    }

    pub fn range_count(&self) -> usize {
        self.range_count
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.grid.n_bins(), self.azimuth_count, self.range_count]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.reflectivity
    }

    /// Elevation profile of one range-azimuth cell.
    pub fn cell(&self, a: usize, d: usize) -> Vec<f64> {
        (0..self.n_bins()).map(|n| self.get(n, a, d)).collect()
    }

    /// Azimuth-elevation slice at range `d`, row-major `[elevation][azimuth]`.
    pub fn slice(&self, d: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_bins() * self.azimuth_count);
        for n in 0..self.n_bins() {
            for a in 0..self.azimuth_count {
                out.push(self.get(n, a, d));
            }
        }
        out
    }

    pub fn nonzero_count(&self) -> usize {
        self.reflectivity.iter().filter(|v| **v != 0.0).count()
    }

    fn add(&mut self, n: usize, a: usize, d: usize, amplitude: f64) {
        let i = self.index(n, a, d);
        self.reflectivity[i] += amplitude;
    }
}

/// Rasterise a scene onto the elevation grid by nearest-bin assignment.
pub fn generate_scene(spec: &SceneSpec, grid: &ElevationGrid) -> Result<GroundTruthVolume> {
    let (na, nd) = (spec.azimuth_count, spec.range_count);
    if na == 0 || nd == 0 {
        return Err(Error::InvalidParameter(
            "scene needs at least one azimuth and one range cell".into(),
        ));
    }
    let mut vol = GroundTruthVolume::zeros(grid.clone(), na, nd);

    let span = |s: Option<[usize; 2]>, len: usize, what: &str| -> Result<std::ops::Range<usize>> {
        match s {
            None => Ok(0..len),
            Some([lo, hi]) if lo < hi && hi <= len => Ok(lo..hi),
            Some([lo, hi]) => Err(Error::InvalidParameter(format!(
                "{what} span [{lo}, {hi}) does not fit in {len} cells"
            ))),
        }
    };
    let positive = |amp: f64| -> Result<()> {
        if amp > 0.0 && amp.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "scatterer amplitude must be positive, got {amp}"
            )))
        }
    };

    for component in &spec.components {
        match *component {
            SceneComponent::Point {
                azimuth,
                range,
                elevation,
                amplitude,
            } => {
                positive(amplitude)?;
                if azimuth >= na || range >= nd {
                    return Err(Error::InvalidParameter(format!(
                        "point at cell ({azimuth}, {range}) outside a {na}x{nd} scene"
                    )));
                }
                vol.add(grid.nearest_bin(elevation)?, azimuth, range, amplitude);
            }
            SceneComponent::HorizontalPlane {
                elevation,
                amplitude,
                azimuth_span,
                range_span,
            } => {
                positive(amplitude)?;
                let n = grid.nearest_bin(elevation)?;
                for a in span(azimuth_span, na, "azimuth")? {
                    for d in span(range_span, nd, "range")? {
                        vol.add(n, a, d, amplitude);
                    }
                }
            }
            SceneComponent::ObliquePlane {
                elevation,
                azimuth_slope,
                range_slope,
                amplitude,
                azimuth_span,
                range_span,
            } => {
                positive(amplitude)?;
                for a in span(azimuth_span, na, "azimuth")? {
                    for d in span(range_span, nd, "range")? {
                        let s = elevation + azimuth_slope * a as f64 + range_slope * d as f64;
                        vol.add(grid.nearest_bin(s)?, a, d, amplitude);
                    }
                }
            }
        }
    }

    let cap = spec.max_scatterers_per_cell;
    for a in 0..na {
        for d in 0..nd {
            let count = (0..grid.n_bins()).filter(|&n| vol.get(n, a, d) != 0.0).count();
            if count > cap {
                return Err(Error::SparsityExceeded {
                    azimuth: a,
                    range: d,
                    count,
                    cap,
                });
            }
        }
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ElevationGrid {
        ElevationGrid::new(128, -50.0, 50.0).unwrap()
    }

    #[test]
    fn single_point_places_one_nonzero() {
        let g = grid();
        let spec = SceneSpec::single_point(1, 1, 0, 0, g.centers()[64], 1.0);
        let vol = generate_scene(&spec, &g).unwrap();
        assert_eq!(vol.nonzero_count(), 1);
        assert_eq!(vol.get(64, 0, 0), 1.0);
    }

    #[test]
    fn oblique_plane_has_one_monotone_scatterer_per_column() {
        let g = grid();
        let spec = SceneSpec::oblique_plane(100, 1, -40.0, 40.0, 0.0, 1.0);
        let vol = generate_scene(&spec, &g).unwrap();
        let mut last = None;
        for a in 0..100 {
            let bins: Vec<usize> = (0..128).filter(|&n| vol.get(n, a, 0) != 0.0).collect();
            assert_eq!(bins.len(), 1, "column {a}");
            if let Some(prev) = last {
                assert!(bins[0] >= prev);
            }
            last = Some(bins[0]);
        }
        assert!(last.unwrap() > 100);
    }

    #[test]
    fn point_beyond_grid_is_rejected() {
        let g = grid();
        let spec = SceneSpec::single_point(1, 1, 0, 0, 51.0, 1.0);
        assert!(matches!(
            generate_scene(&spec, &g),
            Err(Error::OutOfGrid { .. })
        ));
    }

    #[test]
    fn sparsity_cap_is_enforced() {
        let g = grid();
        let mut spec = SceneSpec::single_point(1, 1, 0, 0, -30.0, 1.0);
        spec.max_scatterers_per_cell = 1;
        spec.components.push(SceneComponent::Point {
            azimuth: 0,
            range: 0,
            elevation: 30.0,
            amplitude: 0.5,
        });
        assert!(matches!(
            generate_scene(&spec, &g),
            Err(Error::SparsityExceeded { count: 2, .. })
        ));
        spec.max_scatterers_per_cell = 2;
        assert_eq!(generate_scene(&spec, &g).unwrap().nonzero_count(), 2);
    }

    #[test]
    fn horizontal_plane_span_and_amplitude_checks() {
        let g = grid();
        let spec = SceneSpec {
            azimuth_count: 4,
            range_count: 3,
            max_scatterers_per_cell: 3,
            components: vec![SceneComponent::HorizontalPlane {
                elevation: 0.0,
                amplitude: 2.0,
                azimuth_span: Some([1, 3]),
                range_span: None,
            }],
        };
        assert_eq!(generate_scene(&spec, &g).unwrap().nonzero_count(), 6);

        let mut bad = spec.clone();
        bad.components = vec![SceneComponent::HorizontalPlane {
            elevation: 0.0,
            amplitude: -1.0,
            azimuth_span: None,
            range_span: None,
        }];
        assert!(generate_scene(&bad, &g).is_err());
    }

    #[test]
    fn scene_json_round_trip() {
        let spec = SceneSpec::oblique_plane(100, 8, -35.0, 35.0, 1.5, 1.0);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
