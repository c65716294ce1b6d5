//! Point clouds from reconstructed volumes and the accuracy / completeness /
//! outlier metrics used to compare reconstructions.

mod export;
mod nearest;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ElevationGrid, GroundTruthVolume};
use crate::volume::ComplexVolume;

pub use export::{
    format_g, metrics_csv, metrics_row, ply_bytes, read_xyz, write_ply, write_xyz, xyz_string,
    METRICS_HEADER,
};
pub use nearest::{distance, nearest_distances, nearest_distances_brute, GridIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Azimuth, meters.
    pub x: f64,
    /// Range, meters.
    pub y: f64,
    /// Elevation, meters.
    pub z: f64,
    pub amplitude: f64,
}

impl Point {
    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, by: [f64; 3]) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point {
                    x: p.x + by[0],
                    y: p.y + by[1],
                    z: p.z + by[2],
                    amplitude: p.amplitude,
                })
                .collect(),
        }
    }
}

/// Meters per azimuth and range cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpacing {
    pub azimuth: f64,
    pub range: f64,
}

impl Default for CellSpacing {
    fn default() -> Self {
        Self {
            azimuth: 1.0,
            range: 1.0,
        }
    }
}

/// Local maxima along elevation whose magnitude is at least
/// `threshold_rel` times the largest magnitude in the volume.
///
/// A bin is a local maximum when it is strictly above its lower neighbour and
/// not below its upper neighbour (bins outside the grid count as zero), so a
/// flat-topped peak yields its first bin.
pub fn extract_point_cloud(
    volume: &ComplexVolume,
    grid: &ElevationGrid,
    spacing: CellSpacing,
    threshold_rel: f64,
) -> Result<PointCloud> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold_rel must lie in (0, 1), got {threshold_rel}"
        )));
    }
    let [n, a_count, d_count] = volume.dims();
    if n != grid.n_bins() {
        return Err(Error::Shape(format!(
            "volume has {n} elevation bins, grid has {}",
            grid.n_bins()
        )));
    }
    let peak = volume.as_slice().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut points = Vec::new();
    if peak == 0.0 {
        return Ok(PointCloud { points });
    }
    let floor = threshold_rel * peak;
    for d in 0..d_count {
        for a in 0..a_count {
            let mags: Vec<f64> = volume.cell(a, d).iter().map(|c| c.norm()).collect();
            for k in 0..n {
                let v = mags[k];
                let below = if k > 0 { mags[k - 1] } else { 0.0 };
                let above = if k + 1 < n { mags[k + 1] } else { 0.0 };
                if v >= floor && v > below && v >= above {
                    points.push(Point {
                        x: a as f64 * spacing.azimuth,
                        y: d as f64 * spacing.range,
                        z: grid.centers()[k],
                        amplitude: v,
                    });
                }
            }
        }
    }
    Ok(PointCloud { points })
}

/// Every non-zero voxel of the ground truth.
pub fn truth_point_cloud(truth: &GroundTruthVolume, spacing: CellSpacing) -> PointCloud {
    let [n, a_count, d_count] = truth.dims();
    let mut points = Vec::new();
    for d in 0..d_count {
        for a in 0..a_count {
            for k in 0..n {
                let v = truth.get(k, a, d);
                if v != 0.0 {
                    points.push(Point {
                        x: a as f64 * spacing.azimuth,
                        y: d as f64 * spacing.range,
                        z: truth.grid().centers()[k],
                        amplitude: v.abs(),
                    });
                }
            }
        }
    }
    PointCloud { points }
}

fn require(cloud: &PointCloud, what: &'static str) -> Result<()> {
    if cloud.is_empty() {
        Err(Error::UndefinedMetric(what))
    } else {
        Ok(())
    }
}

/// Mean distance from reconstructed points to their nearest truth point,
/// over reconstructed points within `inlier_tau`.
pub fn accuracy(recon: &PointCloud, truth: &PointCloud, inlier_tau: f64) -> Result<f64> {
    require(recon, "accuracy of an empty reconstruction")?;
    require(truth, "accuracy against an empty truth cloud")?;
    let d = nearest_distances(recon, truth);
    let inliers: Vec<f64> = d.into_iter().filter(|v| *v <= inlier_tau).collect();
    if inliers.is_empty() {
        return Err(Error::UndefinedMetric("accuracy with no inliers"));
    }
    Ok(inliers.iter().sum::<f64>() / inliers.len() as f64)
}

/// Mean distance from every truth point to its nearest reconstructed point.
pub fn completeness(recon: &PointCloud, truth: &PointCloud) -> Result<f64> {
    require(truth, "completeness of an empty truth cloud")?;
    require(recon, "completeness against an empty reconstruction")?;
    let d = nearest_distances(truth, recon);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Percentage of reconstructed points farther than `tau` from every truth point.
pub fn outlier_pct(recon: &PointCloud, truth: &PointCloud, tau: f64) -> Result<f64> {
    require(recon, "outlier percentage of an empty reconstruction")?;
    require(truth, "outlier percentage against an empty truth cloud")?;
    let d = nearest_distances(recon, truth);
    let outliers = d.iter().filter(|v| **v > tau).count();
    Ok(100.0 * outliers as f64 / d.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub threshold_rel: f64,
    /// Outlier and inlier cutoff in meters; three elevation bins when absent.
    pub tau: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold_rel: 0.2,
            tau: None,
        }
    }
}

impl EvalConfig {
    pub fn tau_for(&self, grid: &ElevationGrid) -> f64 {
        self.tau.unwrap_or(3.0 * grid.spacing())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: String,
    pub accuracy: f64,
    pub completeness: f64,
    pub outlier_pct: f64,
    pub wall_time_seconds: f64,
}

/// Extracts both clouds and computes all metrics; the wall time is supplied by the caller.
pub fn evaluate(
    method: &str,
    recon: &ComplexVolume,
    truth: &GroundTruthVolume,
    spacing: CellSpacing,
    cfg: &EvalConfig,
    wall_time_seconds: f64,
) -> Result<Metrics> {
    if recon.dims() != truth.dims() {
        return Err(Error::Shape(format!(
            "reconstruction is {:?}, truth is {:?}",
            recon.dims(),
            truth.dims()
        )));
    }
    let grid = truth.grid();
    let recon_cloud = extract_point_cloud(recon, grid, spacing, cfg.threshold_rel)?;
    let truth_cloud = truth_point_cloud(truth, spacing);
    let tau = cfg.tau_for(grid);
    Ok(Metrics {
        method: method.to_string(),
        accuracy: accuracy(&recon_cloud, &truth_cloud, tau)?,
        completeness: completeness(&recon_cloud, &truth_cloud)?,
        outlier_pct: outlier_pct(&recon_cloud, &truth_cloud, tau)?,
        wall_time_seconds,
    })
}
