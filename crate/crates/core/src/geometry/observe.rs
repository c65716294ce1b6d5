use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GroundTruthVolume, MeasurementMatrix};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::parallel;

/// Complex observations laid out as `[baseline][azimuth][range]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVolume {
    data: Vec<C64>,
    baseline_count: usize,
    azimuth_count: usize,
    range_count: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ObservationVolume {
    pub fn from_vec(
        baseline_count: usize,
        azimuth_count: usize,
        range_count: usize,
        data: Vec<C64>,
    ) -> Result<Self> {
        if data.len() != baseline_count * azimuth_count * range_count {
            return Err(Error::Shape(format!(
                "observation volume has {} values, expected {baseline_count}x{azimuth_count}x{range_count}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            baseline_count,
            azimuth_count,
            range_count,
            noise_sigma: 0.0,
            seed: 0,
        })
    }

    fn index(&self, m: usize, a: usize, d: usize) -> usize {
        (m * self.azimuth_count + a) * self.range_count + d
    }

    pub fn get(&self, m: usize, a: usize, d: usize) -> C64 {
        self.data[self.index(m, a, d)]
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.baseline_count, self.azimuth_count, self.range_count]
    }

    pub fn baseline_count(&self) -> usize {
        self.baseline_count
    }

    pub fn azimuth_count(&self) -> usize {
        self.azimuth_count
    }

    pub fn range_count(&self) -> usize {
        self.range_count
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Observation vector `g` of one range-azimuth cell.
    pub fn cell(&self, a: usize, d: usize) -> Vec<C64> {
        (0..self.baseline_count).map(|m| self.get(m, a, d)).collect()
    }

    /// Observations of the azimuth-elevation slice at range `d`, row-major `[baseline][azimuth]`.
    pub fn slice(&self, d: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.baseline_count * self.azimuth_count);
        for m in 0..self.baseline_count {
            for a in 0..self.azimuth_count {
                out.push(self.get(m, a, d));
            }
        }
        out
    }
}

/// Per-cell generator: one ChaCha stream per (range, azimuth) pair.
fn cell_rng(seed: u64, azimuth_count: usize, a: usize, d: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((d * azimuth_count + a) as u64);
    rng
}

/// `g = R γ + n` for every range-azimuth cell, serially.
pub fn synthesize_observation(
    r: &MeasurementMatrix,
    truth: &GroundTruthVolume,
    noise_sigma: f64,
    seed: u64,
) -> Result<ObservationVolume> {
    synthesize_observation_with(r, truth, noise_sigma, seed, 1)
}

/// As [`synthesize_observation`], fanning range lines out over `threads` workers.
/// Output is identical for every thread count.
pub fn synthesize_observation_with(
    r: &MeasurementMatrix,
    truth: &GroundTruthVolume,
    noise_sigma: f64,
    seed: u64,
    threads: usize,
) -> Result<ObservationVolume> {
    if truth.n_bins() != r.n() {
        return Err(Error::Shape(format!(
            "truth has {} elevation bins, steering matrix has {}",
            truth.n_bins(),
            r.n()
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    let (m, na, nd) = (r.m(), truth.azimuth_count(), truth.range_count());

    let lines = parallel::map_indexed(nd, threads, |d| {
        let mut line = Vec::with_capacity(na);
        for a in 0..na {
            let gamma: Vec<C64> = truth
                .cell(a, d)
                .into_iter()
                .map(|v| C64::new(v, 0.0))
                .collect();
            let mut g = r.apply(&gamma)?;
            if noise_sigma > 0.0 {
                let mut rng = cell_rng(seed, na, a, d);
                for v in g.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *v += C64::new(noise_sigma * re, noise_sigma * im);
                }
            }
            line.push(g);
        }
        Ok(line)
    })?;

    let mut data = vec![C64::new(0.0, 0.0); m * na * nd];
    for (d, line) in lines.into_iter().enumerate() {
        for (a, g) in line.into_iter().enumerate() {
            for (mi, v) in g.into_iter().enumerate() {
                data[(mi * na + a) * nd + d] = v;
            }
        }
    }
    let mut obs = ObservationVolume::from_vec(m, na, nd, data)?;
    obs.noise_sigma = noise_sigma;
    obs.seed = seed;
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scene, GeometryConfig, SceneSpec};

    #[test]
    fn zero_scene_without_noise_is_zero() {
        let cfg = GeometryConfig::default();
        let r = cfg.measurement_matrix().unwrap();
        let truth = GroundTruthVolume::zeros(r.grid().clone(), 5, 2);
        let obs = synthesize_observation(&r, &truth, 0.0, 7).unwrap();
        assert!(obs.as_slice().iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn one_hot_reproduces_scaled_column() {
        let r = GeometryConfig::default().measurement_matrix().unwrap();
        let elevation = r.grid().centers()[37];
        let spec = SceneSpec::single_point(3, 2, 1, 1, elevation, 2.5);
        let truth = generate_scene(&spec, r.grid()).unwrap();
        let obs = synthesize_observation(&r, &truth, 0.0, 0).unwrap();
        for m in 0..r.m() {
            assert_eq!(obs.get(m, 1, 1), r.matrix().get(m, 37) * 2.5);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible_and_thread_independent() {
        let r = GeometryConfig::default().measurement_matrix().unwrap();
        let spec = SceneSpec::oblique_plane(10, 4, -20.0, 20.0, 1.0, 1.0);
        let truth = generate_scene(&spec, r.grid()).unwrap();
        let a = synthesize_observation(&r, &truth, 0.1, 42).unwrap();
        let b = synthesize_observation(&r, &truth, 0.1, 42).unwrap();
        let c = synthesize_observation_with(&r, &truth, 0.1, 42, 3).unwrap();
        let d = synthesize_observation(&r, &truth, 0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a.as_slice(), d.as_slice());
    }

    #[test]
    fn noise_has_requested_spread() {
        let r = GeometryConfig::default().measurement_matrix().unwrap();
        let truth = GroundTruthVolume::zeros(r.grid().clone(), 50, 20);
        let obs = synthesize_observation(&r, &truth, 0.1, 1).unwrap();
        let n = obs.as_slice().len() as f64;
        let var_re = obs.as_slice().iter().map(|v| v.re * v.re).sum::<f64>() / n;
        assert!((var_re.sqrt() - 0.1).abs() < 0.005, "{}", var_re.sqrt());
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let r = GeometryConfig::default().measurement_matrix().unwrap();
        let grid = crate::geometry::ElevationGrid::new(16, -5.0, 5.0).unwrap();
        let truth = GroundTruthVolume::zeros(grid, 2, 2);
        assert!(matches!(
            synthesize_observation(&r, &truth, 0.0, 0),
            Err(Error::Shape(_))
        ));
        let truth = GroundTruthVolume::zeros(r.grid().clone(), 2, 2);
        assert!(synthesize_observation(&r, &truth, -1.0, 0).is_err());
    }
}
