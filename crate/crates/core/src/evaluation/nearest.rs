use std::collections::HashMap;

use super::PointCloud;

/// Euclidean distance; every search path uses this exact expression.
#[inline]
pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// For every point of `from`, the distance to its nearest point of `to` by exhaustive search.
pub fn nearest_distances_brute(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    from.points
        .iter()
        .map(|p| {
            to.points
                .iter()
                .map(|q| distance(p.coords(), q.coords()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Uniform bucket grid over a point cloud.
#[derive(Debug)]
pub struct GridIndex {
    cell: f64,
    coords: Vec<[f64; 3]>,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl GridIndex {
    /// `cell` is the bucket side in meters and must be positive.
    pub fn new(cloud: &PointCloud, cell: f64) -> Self {
        assert!(cell > 0.0, "bucket side must be positive");
        let coords: Vec<[f64; 3]> = cloud.points.iter().map(|p| p.coords()).collect();
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, c) in coords.iter().enumerate() {
            let key = Self::key_of(cell, *c);
            for k in 0..3 {
                lo[k] = lo[k].min(key[k]);
                hi[k] = hi[k].max(key[k]);
            }
            buckets.entry(key).or_default().push(i);
        }
        Self {
            cell,
            coords,
            buckets,
            lo,
            hi,
        }
    }

    fn key_of(cell: f64, c: [f64; 3]) -> [i64; 3] {
        c.map(|v| (v / cell).floor() as i64)
    }

    /// Distance to the nearest indexed point; infinity for an empty index.
    pub fn nearest(&self, q: [f64; 3]) -> f64 {
        if self.coords.is_empty() {
            return f64::INFINITY;
        }
        let center = Self::key_of(self.cell, q);
        // rings beyond this radius hold no buckets
        let max_r = (0..3)
            .map(|k| (center[k] - self.lo[k]).abs().max((self.hi[k] - center[k]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in 0..=max_r {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                        if let Some(ids) = self.buckets.get(&key) {
                            for &i in ids {
                                best = best.min(distance(q, self.coords[i]));
                            }
                        }
                    }
                }
            }
            // anything in ring r + 1 is at least r cells away
            if best <= r as f64 * self.cell {
                break;
            }
        }
        best
    }
}

/// Nearest distances using a [`GridIndex`] for larger targets; identical to
/// [`nearest_distances_brute`].
pub fn nearest_distances(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    if to.len() < 64 {
        return nearest_distances_brute(from, to);
    }
    let index = GridIndex::new(to, suggested_cell(to));
    from.points.iter().map(|p| index.nearest(p.coords())).collect()
}

/// Bucket side giving on the order of a few points per occupied bucket.
fn suggested_cell(cloud: &PointCloud) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for (k, v) in p.coords().into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let side = extent / (cloud.len() as f64).cbrt();
    if side > 0.0 && side.is_finite() {
        side
    } else {
        1.0
    }
}
