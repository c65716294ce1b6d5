//! Raw forward and adjoint kernels on flat row-major buffers.
//!
//! Loop orders are fixed, so every output element is accumulated in the same
//! order on every call.

use crate::linalg::C64;

/// Valid output index range `[lo, hi)` for a tap at offset `tap - pad` along an axis of `len`.
#[inline]
fn tap_range(len: usize, tap: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(tap);
    let hi = (len + pad).saturating_sub(tap).min(len);
    (lo, hi.max(lo))
}

/// `C ← A B` through the blocked complex GEMM, with explicit strides.
#[allow(clippy::too_many_arguments)]
fn zgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[C64],
    (rsa, csa): (usize, usize),
    b: &[C64],
    (rsb, csb): (usize, usize),
    c: &mut [C64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        return;
    }
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    // SAFETY: `Complex<f64>` is `repr(C)` with fields (re, im), identical in
    // layout to `[f64; 2]`; the extents were checked above and C is dense
    // row-major with `n` columns.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr().cast(),
            rsa as isize,
            csa as isize,
            b.as_ptr().cast(),
            rsb as isize,
            csb as isize,
            [0.0, 0.0],
            c.as_mut_ptr().cast(),
            n as isize,
            1,
        );
    }
}

/// `C ← A B` through the blocked real GEMM, with explicit strides.
#[allow(clippy::too_many_arguments)]
fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    // SAFETY: extents checked above; C is dense row-major with `n` columns.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conj(v: &[C64]) -> Vec<C64> {
    v.iter().map(|c| c.conj()).collect()
}

/// `Y[p, a] = Σ_q W[p, q] X[q, a]`
pub fn cmatmul(w: &[C64], x: &[C64], p: usize, q: usize, a: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); p * a];
    zgemm(p, q, a, w, (q, 1), x, (a, 1), &mut out);
    out
}

/// `dX̄ = W^H G`
pub fn cmatmul_grad_x(w: &[C64], g: &[C64], p: usize, q: usize, a: usize) -> Vec<C64> {
    let wc = conj(w);
    let mut out = vec![C64::new(0.0, 0.0); q * a];
    zgemm(q, p, a, &wc, (1, q), g, (a, 1), &mut out);
    out
}

/// `dW̄ = G X^H`
pub fn cmatmul_grad_w(x: &[C64], g: &[C64], p: usize, q: usize, a: usize) -> Vec<C64> {
    let xc = conj(x);
    let mut out = vec![C64::new(0.0, 0.0); p * q];
    zgemm(p, a, q, g, (a, 1), &xc, (1, a), &mut out);
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    /// Square kernel side, odd.
    pub k: usize,
}

impl ConvDims {
    fn pad(&self) -> usize {
        self.k / 2
    }

    fn patch(&self) -> usize {
        self.c_in * self.k * self.k
    }
}

/// Patch matrix `(c_in·k·k) × (h·w)`: row `(ci, dy, dx)` holds the input
/// shifted by `(dy − pad, dx − pad)` with zeros outside.
fn im2col(x: &[f64], d: ConvDims) -> Vec<f64> {
    let (h, w, k, p) = (d.h, d.w, d.k, d.pad());
    let plane = h * w;
    let mut cols = vec![0.0; d.patch() * plane];
    for ci in 0..d.c_in {
        let src = &x[ci * plane..(ci + 1) * plane];
        for dy in 0..k {
            let (y0, y1) = tap_range(h, dy, p);
            for dx in 0..k {
                let (x0, x1) = tap_range(w, dx, p);
                let row = &mut cols[((ci * k + dy) * k + dx) * plane..][..plane];
                for y in y0..y1 {
                    let sy = y + dy - p;
                    row[y * w + x0..y * w + x1]
                        .copy_from_slice(&src[sy * w + x0 + dx - p..sy * w + x1 + dx - p]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch rows back onto the input grid.
fn col2im(cols: &[f64], d: ConvDims) -> Vec<f64> {
    let (h, w, k, p) = (d.h, d.w, d.k, d.pad());
    let plane = h * w;
    let mut x = vec![0.0; d.c_in * plane];
    for ci in 0..d.c_in {
        let dst = &mut x[ci * plane..(ci + 1) * plane];
        for dy in 0..k {
            let (y0, y1) = tap_range(h, dy, p);
            for dx in 0..k {
                let (x0, x1) = tap_range(w, dx, p);
                let row = &cols[((ci * k + dy) * k + dx) * plane..][..plane];
                for y in y0..y1 {
                    let sy = y + dy - p;
                    let out = &mut dst[sy * w + x0 + dx - p..sy * w + x1 + dx - p];
                    for (o, v) in out.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *o += v;
                    }
                }
            }
        }
    }
    x
}

/// "Same" cross-correlation with zero padding `k / 2`, stride 1.
pub fn conv2d(x: &[f64], kernel: &[f64], bias: &[f64], d: ConvDims) -> Vec<f64> {
    let plane = d.h * d.w;
    let mut out = vec![0.0; d.c_out * plane];
    if d.k == 1 {
        dgemm(d.c_out, d.c_in, plane, kernel, (d.c_in, 1), x, (plane, 1), &mut out);
    } else {
        let cols = im2col(x, d);
        dgemm(d.c_out, d.patch(), plane, kernel, (d.patch(), 1), &cols, (plane, 1), &mut out);
    }
    for (co, b) in bias.iter().enumerate() {
        out[co * plane..(co + 1) * plane].iter_mut().for_each(|v| *v += b);
    }
    out
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    x: &[f64],
    kernel: &[f64],
    g: &[f64],
    d: ConvDims,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plane = d.h * d.w;
    let patch = d.patch();
    let db = (0..d.c_out)
        .map(|co| g[co * plane..(co + 1) * plane].iter().sum())
        .collect();
    let mut dk = vec![0.0; d.c_out * patch];
    let mut dcols = vec![0.0; patch * plane];
    // dK = G colsᵀ, dcols = Kᵀ G
    if d.k == 1 {
        dgemm(d.c_out, plane, patch, g, (plane, 1), x, (1, plane), &mut dk);
        dgemm(patch, d.c_out, plane, kernel, (1, patch), g, (plane, 1), &mut dcols);
        return (dcols, dk, db);
    }
    let cols = im2col(x, d);
    dgemm(d.c_out, plane, patch, g, (plane, 1), &cols, (1, plane), &mut dk);
    dgemm(patch, d.c_out, plane, kernel, (1, patch), g, (plane, 1), &mut dcols);
    (col2im(&dcols, d), dk, db)
}

/// 2×2 max pooling with stride 2. Returns values and the flat input index of
/// each maximum; ties go to the first position in row-major window order.
pub fn maxpool2(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut idx = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        let base = ch * h * w;
        for i in 0..ho {
            for j in 0..wo {
                let candidates = [
                    base + 2 * i * w + 2 * j,
                    base + 2 * i * w + 2 * j + 1,
                    base + (2 * i + 1) * w + 2 * j,
                    base + (2 * i + 1) * w + 2 * j + 1,
                ];
                let mut best = candidates[0];
                for &cand in &candidates[1..] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

#[derive(Debug, Clone, Copy)]
pub struct UpDims {
    pub c_in: usize,
    pub c_out: usize,
    /// Input spatial size; output is `2h × 2w`.
    pub h: usize,
    pub w: usize,
}

/// Stride-2 transposed convolution with a `c_in × c_out × 2 × 2` kernel.
pub fn conv_transpose2(x: &[f64], kernel: &[f64], d: UpDims) -> Vec<f64> {
    let (h, w) = (d.h, d.w);
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![0.0; d.c_out * ho * wo];
    for ci in 0..d.c_in {
        let src = &x[ci * h * w..(ci + 1) * h * w];
        for co in 0..d.c_out {
            let dst = &mut out[co * ho * wo..(co + 1) * ho * wo];
            for dy in 0..2 {
                for dx in 0..2 {
                    let wv = kernel[((ci * d.c_out + co) * 2 + dy) * 2 + dx];
                    for y in 0..h {
                        let row = &mut dst[(2 * y + dy) * wo..(2 * y + dy + 1) * wo];
                        for (xx, s) in src[y * w..(y + 1) * w].iter().enumerate() {
                            row[2 * xx + dx] += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Stride-2, 2×2 strided convolution: the adjoint of [`conv_transpose2`] in its input.
///
/// `y` has shape `c_out × 2h × 2w`; the result has shape `c_in × h × w`.
pub fn conv_stride2(y: &[f64], kernel: &[f64], d: UpDims) -> Vec<f64> {
    let (h, w) = (d.h, d.w);
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![0.0; d.c_in * h * w];
    for ci in 0..d.c_in {
        let dst = &mut out[ci * h * w..(ci + 1) * h * w];
        for co in 0..d.c_out {
            let src = &y[co * ho * wo..(co + 1) * ho * wo];
            for dy in 0..2 {
                for dx in 0..2 {
                    let wv = kernel[((ci * d.c_out + co) * 2 + dy) * 2 + dx];
                    for yy in 0..h {
                        let row = &src[(2 * yy + dy) * wo..(2 * yy + dy + 1) * wo];
                        for (xx, o) in dst[yy * w..(yy + 1) * w].iter_mut().enumerate() {
                            *o += wv * row[2 * xx + dx];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Kernel gradient of [`conv_transpose2`].
pub fn conv_transpose2_grad_kernel(x: &[f64], g: &[f64], d: UpDims) -> Vec<f64> {
    let (h, w) = (d.h, d.w);
    let (ho, wo) = (2 * h, 2 * w);
    let mut dk = vec![0.0; d.c_in * d.c_out * 4];
    for ci in 0..d.c_in {
        let src = &x[ci * h * w..(ci + 1) * h * w];
        for co in 0..d.c_out {
            let gp = &g[co * ho * wo..(co + 1) * ho * wo];
            for dy in 0..2 {
                for dx in 0..2 {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let row = &gp[(2 * y + dy) * wo..(2 * y + dy + 1) * wo];
                        for (xx, s) in src[y * w..(y + 1) * w].iter().enumerate() {
                            acc += s * row[2 * xx + dx];
                        }
                    }
                    dk[((ci * d.c_out + co) * 2 + dy) * 2 + dx] = acc;
                }
            }
        }
    }
    dk
}

/// Centered zero-pad or crop of every `h × w` plane to `h2 × w2`.
///
/// The source is shifted by `(h2 - h) / 2` rows and `(w2 - w) / 2` columns
/// (truncating toward zero), so resizing back restores the original exactly.
pub fn resize_center<T: Copy + Default>(
    x: &[T],
    planes: usize,
    (h, w): (usize, usize),
    (h2, w2): (usize, usize),
) -> Vec<T> {
    let oy = (h2 as isize - h as isize) / 2;
    let ox = (w2 as isize - w as isize) / 2;
    let mut out = vec![T::default(); planes * h2 * w2];
    for c in 0..planes {
        for y2 in 0..h2 {
            let y = y2 as isize - oy;
            if y < 0 || y >= h as isize {
                continue;
            }
            let y = y as usize;
            let x_lo = ox.max(0) as usize;
            let x_hi = ((w as isize + ox).min(w2 as isize)).max(0) as usize;
            for x2 in x_lo..x_hi {
                let sx = (x2 as isize - ox) as usize;
                out[(c * h2 + y2) * w2 + x2] = x[(c * h + y) * w + sx];
            }
        }
    }
    out
}
