use crate::error::{Error, Result};
use crate::linalg::C64;

/// Complex reflectivity estimate laid out as `[elevation][azimuth][range]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    dims: [usize; 3],
    data: Vec<C64>,
}

impl ComplexVolume {
    pub fn zeros(n_bins: usize, azimuth_count: usize, range_count: usize) -> Self {
        Self {
            dims: [n_bins, azimuth_count, range_count],
            data: vec![C64::new(0.0, 0.0); n_bins * azimuth_count * range_count],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<C64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "volume of dims {dims:?} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Real volume promoted to complex with zero imaginary part.
    pub fn from_real(dims: [usize; 3], data: &[f64]) -> Result<Self> {
        Self::from_vec(dims, data.iter().map(|v| C64::new(*v, 0.0)).collect())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    fn index(&self, n: usize, a: usize, d: usize) -> usize {
        (n * self.dims[1] + a) * self.dims[2] + d
    }

    pub fn get(&self, n: usize, a: usize, d: usize) -> C64 {
        self.data[self.index(n, a, d)]
    }

    pub fn cell(&self, a: usize, d: usize) -> Vec<C64> {
        (0..self.dims[0]).map(|n| self.get(n, a, d)).collect()
    }

    pub fn set_cell(&mut self, a: usize, d: usize, profile: &[C64]) {
        for (n, v) in profile.iter().enumerate() {
            let i = self.index(n, a, d);
            self.data[i] = *v;
        }
    }

    /// Azimuth-elevation slice at range `d`, row-major `[elevation][azimuth]`.
    pub fn slice(&self, d: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dims[0] * self.dims[1]);
        for n in 0..self.dims[0] {
            for a in 0..self.dims[1] {
                out.push(self.get(n, a, d));
            }
        }
        out
    }

    pub fn set_slice(&mut self, d: usize, slice: &[C64]) {
        let na = self.dims[1];
        for (k, v) in slice.iter().enumerate() {
            let i = self.index(k / na, k % na, d);
            self.data[i] = *v;
        }
    }
}
