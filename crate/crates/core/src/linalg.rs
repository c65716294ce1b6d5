//! Dense row-major complex matrices and the handful of kernels the solvers need.
//!
//! Every reduction runs in ascending index order so results are bit-stable
//! across calls and threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// `A x`
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `A^H y`
    pub fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        if y.len() != self.rows {
            return Err(Error::Shape(format!(
                "adjoint expects {} entries, got {}",
                self.rows,
                y.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, yr) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * yr;
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// `A B`
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                for (d, b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("matrix difference of unequal shapes".into()));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm1(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm()).sum()
}

pub fn norm_inf(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest eigenvalue of `A^H A` by power iteration.
///
/// Stops once successive Rayleigh quotients agree to `rel_tol`. The start
/// vector is drawn from a fixed-seed generator so the estimate is reproducible.
pub fn spectral_norm_sq(a: &CMatrix, rel_tol: f64, max_iters: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2b);
    let mut v: Vec<C64> = (0..a.cols())
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);

    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let w = a.apply_adjoint(&a.apply(&v).expect("square shapes")).expect("square shapes");
        let next: f64 = v
            .iter()
            .zip(&w)
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        let wn = norm2(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / wn).collect();
        if estimate > 0.0 && (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_diagonal() {
        let a = CMatrix::from_fn(3, 3, |r, c| {
            if r == c {
                C64::new([1.0, 3.0, 2.0][r], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let l = spectral_norm_sq(&a, 1e-12, 10_000);
        assert!((l - 9.0).abs() < 1e-9, "{l}");
    }

    #[test]
    fn adjoint_apply_agrees_with_explicit_adjoint() {
        let a = CMatrix::from_fn(2, 3, |r, c| C64::new(r as f64 + 1.0, c as f64 - 1.0));
        let y = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)];
        let lhs = a.apply_adjoint(&y).unwrap();
        let rhs = a.adjoint().apply(&y).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-14);
        }
    }

    #[test]
    fn shape_errors() {
        let a = CMatrix::zeros(2, 3);
        assert!(a.apply(&[C64::new(0.0, 0.0); 2]).is_err());
        assert!(a.matmul(&CMatrix::zeros(2, 2)).is_err());
        assert!(CMatrix::from_vec(2, 2, vec![]).is_err());
    }
}
