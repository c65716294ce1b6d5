use super::kernels::{self, ConvDims, UpDims};
use super::tensor::{DType, Data, Tensor};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    ZeroPad,
    CenterCrop,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { w: Var, x: Var },
    Add { a: Var, b: Var },
    Scale { x: Var, c: f64 },
    SoftThreshold { z: Var, theta: Var },
    ToChannels { z: Var },
    FromChannels { x: Var },
    Resize { x: Var },
    Conv2d { x: Var, k: Var, b: Var },
    Relu { x: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    ConvTranspose { x: Var, k: Var },
    Concat { a: Var, b: Var },
    SumSquares { a: Var, b: Var },
    SumAbs { x: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of recorded operations.
///
/// Nodes are appended in evaluation order, which is also a topological order;
/// [`Graph::backward`] walks them once in reverse.
///
/// Gradients of complex values are stored as `∂L/∂conj(z)` (Wirtinger
/// convention). For a real loss the partial derivatives with respect to the
/// real and imaginary parts are `2·Re` and `2·Im` of the stored value.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; its gradient is available after [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn take_value(&mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::scalar(0.0))
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    // ---- operations -------------------------------------------------------

    /// Complex matrix product `W X` with `W: P×Q` and `X: Q` or `Q×A`.
    pub fn matmul(&mut self, w: Var, x: Var) -> Result<Var> {
        let (ws, xs) = (self.value(w).shape(), self.value(x).shape());
        if ws.len() != 2 || xs.is_empty() || xs.len() > 2 || ws[1] != xs[0] {
            return shape_err(format!("matmul of {ws:?} and {xs:?}"));
        }
        let (p, q) = (ws[0], ws[1]);
        let a = if xs.len() == 2 { xs[1] } else { 1 };
        let out_shape = if xs.len() == 2 { vec![p, a] } else { vec![p] };
        let out = kernels::cmatmul(
            self.value(w).complex_data()?,
            self.value(x).complex_data()?,
            p,
            q,
            a,
        );
        let t = Tensor::complex(out_shape, out)?;
        Ok(self.push(t, Op::MatMul { w, x }, &[w, x]))
    }

    /// Matrix-vector product; alias of [`Graph::matmul`] with a vector right-hand side.
    pub fn linear_complex(&mut self, w: Var, x: Var) -> Result<Var> {
        if self.value(x).shape().len() != 1 {
            return shape_err("linear_complex expects a vector input");
        }
        self.matmul(w, x)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() || ta.dtype() != tb.dtype() {
            return shape_err(format!("add of {:?} and {:?}", ta.shape(), tb.shape()));
        }
        let data = match (ta.data(), tb.data()) {
            (Data::Real(x), Data::Real(y)) => {
                Tensor::real(ta.shape(), x.iter().zip(y).map(|(p, q)| p + q).collect())?
            }
            (Data::Complex(x), Data::Complex(y)) => {
                Tensor::complex(ta.shape(), x.iter().zip(y).map(|(p, q)| p + q).collect())?
            }
            _ => unreachable!(),
        };
        Ok(self.push(data, Op::Add { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let t = self.value(x);
        let out = match t.data() {
            Data::Real(v) => Tensor::real(t.shape(), v.iter().map(|a| a * c).collect())?,
            Data::Complex(v) => Tensor::complex(t.shape(), v.iter().map(|a| a * c).collect())?,
        };
        Ok(self.push(out, Op::Scale { x, c }, &[x]))
    }

    /// Phase-preserving shrinkage of every entry of a complex tensor by a real scalar threshold.
    pub fn soft_threshold(&mut self, z: Var, theta: Var) -> Result<Var> {
        let th = self.value(theta).item()?;
        let t = self.value(z);
        let out: Vec<C64> = t
            .complex_data()?
            .iter()
            .map(|v| crate::solvers::shrink(*v, th.max(0.0)))
            .collect();
        let out = Tensor::complex(t.shape(), out)?;
        Ok(self.push(out, Op::SoftThreshold { z, theta }, &[z, theta]))
    }

    /// Complex tensor of shape `S` to a real `[2, S...]` tensor (real part, then imaginary part).
    pub fn to_channels(&mut self, z: Var) -> Result<Var> {
        let t = self.value(z);
        let v = t.complex_data()?;
        let mut data = Vec::with_capacity(2 * v.len());
        data.extend(v.iter().map(|c| c.re));
        data.extend(v.iter().map(|c| c.im));
        let mut shape = vec![2];
        shape.extend_from_slice(t.shape());
        let out = Tensor::real(shape, data)?;
        Ok(self.push(out, Op::ToChannels { z }, &[z]))
    }

    /// Inverse of [`Graph::to_channels`].
    pub fn from_channels(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.shape().first() != Some(&2) {
            return shape_err(format!("from_channels expects 2 channels, got {:?}", t.shape()));
        }
        let v = t.real_data()?;
        let half = v.len() / 2;
        let data = (0..half).map(|i| C64::new(v[i], v[half + i])).collect();
        let out = Tensor::complex(&t.shape()[1..], data)?;
        Ok(self.push(out, Op::FromChannels { x }, &[x]))
    }

    /// Centered zero-pad or crop of the last two axes of a `C×H×W` tensor.
    pub fn pad_crop(&mut self, x: Var, h2: usize, w2: usize, mode: ResizeMode) -> Result<Var> {
        let t = self.value(x);
        let s = t.shape();
        if s.len() != 3 {
            return shape_err(format!("pad_crop expects C×H×W, got {s:?}"));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let ok = match mode {
            ResizeMode::ZeroPad => h2 >= h && w2 >= w,
            ResizeMode::CenterCrop => h2 <= h && w2 <= w,
        };
        if !ok {
            return shape_err(format!("{mode:?} from {h}x{w} to {h2}x{w2}"));
        }
        let data = kernels::resize_center(t.real_data()?, c, (h, w), (h2, w2));
        let out = Tensor::real(vec![c, h2, w2], data)?;
        Ok(self.push(out, Op::Resize { x }, &[x]))
    }

    /// Same-size cross-correlation; `kernel` is `C_out×C_in×K×K` with odd `K`.
    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let d = self.conv_dims(x, kernel, bias)?;
        let out = kernels::conv2d(
            self.value(x).real_data()?,
            self.value(kernel).real_data()?,
            self.value(bias).real_data()?,
            d,
        );
        let out = Tensor::real(vec![d.c_out, d.h, d.w], out)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                x,
                k: kernel,
                b: bias,
            },
            &[x, kernel, bias],
        ))
    }

    fn conv_dims(&self, x: Var, kernel: Var, bias: Var) -> Result<ConvDims> {
        let (xs, ks, bs) = (
            self.value(x).shape(),
            self.value(kernel).shape(),
            self.value(bias).shape(),
        );
        if xs.len() != 3
            || ks.len() != 4
            || ks[1] != xs[0]
            || ks[2] != ks[3]
            || ks[2] % 2 == 0
            || bs != [ks[0]]
        {
            return shape_err(format!("conv2d of input {xs:?}, kernel {ks:?}, bias {bs:?}"));
        }
        if xs[1] == 0 || xs[2] == 0 {
            return shape_err(format!("conv2d of empty input {xs:?}"));
        }
        Ok(ConvDims {
            c_in: xs[0],
            c_out: ks[0],
            h: xs[1],
            w: xs[2],
            k: ks[2],
        })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let out = Tensor::real(t.shape(), t.real_data()?.iter().map(|v| v.max(0.0)).collect())?;
        Ok(self.push(out, Op::Relu { x }, &[x]))
    }

    /// 2×2 max pooling, stride 2.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.shape();
        if s.len() != 3 || s[1] % 2 != 0 || s[2] % 2 != 0 {
            return shape_err(format!("maxpool2d needs C×H×W with even H, W; got {s:?}"));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (out, argmax) = kernels::maxpool2(t.real_data()?, c, h, w);
        let out = Tensor::real(vec![c, h / 2, w / 2], out)?;
        Ok(self.push(out, Op::MaxPool { x, argmax }, &[x]))
    }

    /// Indices (into the flattened input) chosen by a max-pool node.
    pub fn pool_argmax(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::MaxPool { argmax, .. } => Some(argmax),
            _ => None,
        }
    }

    /// Stride-2 transposed convolution; `kernel` is `C_in×C_out×2×2`.
    pub fn conv_transpose2d(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let d = self.up_dims(x, kernel)?;
        let out = kernels::conv_transpose2(
            self.value(x).real_data()?,
            self.value(kernel).real_data()?,
            d,
        );
        let out = Tensor::real(vec![d.c_out, 2 * d.h, 2 * d.w], out)?;
        Ok(self.push(out, Op::ConvTranspose { x, k: kernel }, &[x, kernel]))
    }

    fn up_dims(&self, x: Var, kernel: Var) -> Result<UpDims> {
        let (xs, ks) = (self.value(x).shape(), self.value(kernel).shape());
        if xs.len() != 3 || ks.len() != 4 || ks[0] != xs[0] || ks[2] != 2 || ks[3] != 2 {
            return shape_err(format!("conv_transpose2d of input {xs:?}, kernel {ks:?}"));
        }
        Ok(UpDims {
            c_in: xs[0],
            c_out: ks[1],
            h: xs[1],
            w: xs[2],
        })
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
            return shape_err(format!("concat of {sa:?} and {sb:?}"));
        }
        let mut data = ta.real_data()?.to_vec();
        data.extend_from_slice(tb.real_data()?);
        let out = Tensor::real(vec![sa[0] + sb[0], sa[1], sa[2]], data)?;
        Ok(self.push(out, Op::Concat { a, b }, &[a, b]))
    }

    /// `Σ |a − b|²` over all entries (real or complex).
    pub fn mse_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() || ta.dtype() != tb.dtype() {
            return shape_err(format!("mse of {:?} and {:?}", ta.shape(), tb.shape()));
        }
        let s = match (ta.data(), tb.data()) {
            (Data::Real(x), Data::Real(y)) => x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum(),
            (Data::Complex(x), Data::Complex(y)) => {
                x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum()
            }
            _ => unreachable!(),
        };
        Ok(self.push(Tensor::scalar(s), Op::SumSquares { a, b }, &[a, b]))
    }

    /// `Σ |x|` over all entries (real or complex).
    pub fn l1_loss(&mut self, x: Var) -> Result<Var> {
        let s = match self.value(x).data() {
            Data::Real(v) => v.iter().map(|a| a.abs()).sum(),
            Data::Complex(v) => v.iter().map(|a| a.norm()).sum(),
        };
        Ok(self.push(Tensor::scalar(s), Op::SumAbs { x }, &[x]))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse-mode accumulation from a real scalar `loss` into every leaf
    /// created with [`Graph::param`]. May be called once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Graph(
                "backward already ran on this graph; record a new one".into(),
            ));
        }
        let lv = self.value(loss);
        if lv.dtype() != DType::Real64 || lv.len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a real scalar loss, got {:?} {:?}",
                lv.dtype(),
                lv.shape()
            )));
        }
        let seed = Tensor::real(lv.shape(), vec![1.0])?;
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(seed);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let contributions = self.node_backward(i, &g)?;
            for (v, t) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.accumulate(&t)?,
                    slot @ None => *slot = Some(t),
                }
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn node_backward(&self, i: usize, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[i];
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul { w, x } => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                let (p, q) = (tw.shape()[0], tw.shape()[1]);
                let a = tx.len() / q;
                let gd = g.complex_data()?;
                let mut v = Vec::with_capacity(2);
                if self.nodes[w.0].requires_grad {
                    let dw = kernels::cmatmul_grad_w(tx.complex_data()?, gd, p, q, a);
                    v.push((*w, Tensor::complex(tw.shape(), dw)?));
                }
                if self.nodes[x.0].requires_grad {
                    let dx = kernels::cmatmul_grad_x(tw.complex_data()?, gd, p, q, a);
                    v.push((*x, Tensor::complex(tx.shape(), dx)?));
                }
                v
            }
            Op::Add { a, b } => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Scale { x, c } => {
                let t = match g.data() {
                    Data::Real(v) => Tensor::real(g.shape(), v.iter().map(|a| a * c).collect())?,
                    Data::Complex(v) => {
                        Tensor::complex(g.shape(), v.iter().map(|a| a * c).collect())?
                    }
                };
                vec![(*x, t)]
            }
            Op::SoftThreshold { z, theta } => {
                let tz = self.value(*z);
                let th = self.value(*theta).item()?.max(0.0);
                let zd = tz.complex_data()?;
                let gd = g.complex_data()?;
                let mut dz = Vec::with_capacity(zd.len());
                let mut dtheta = 0.0;
                for (zv, gv) in zd.iter().zip(gd) {
                    let mag = zv.norm();
                    if mag > th {
                        // ∂out/∂z = 1 − θ/(2|z|), ∂out/∂z̄ = θ z² / (2|z|³)
                        let holo = 1.0 - th / (2.0 * mag);
                        let anti = zv * zv * (th / (2.0 * mag * mag * mag));
                        dz.push(gv * holo + gv.conj() * anti);
                        // ∂out/∂θ = −z/|z|
                        dtheta -= 2.0 * (gv.conj() * (zv / mag)).re;
                    } else {
                        dz.push(C64::new(0.0, 0.0));
                    }
                }
                vec![
                    (*z, Tensor::complex(tz.shape(), dz)?),
                    (*theta, Tensor::real(self.value(*theta).shape(), vec![dtheta])?),
                ]
            }
            Op::ToChannels { z } => {
                let gd = g.real_data()?;
                let half = gd.len() / 2;
                let dz = (0..half)
                    .map(|k| C64::new(0.5 * gd[k], 0.5 * gd[half + k]))
                    .collect();
                vec![(*z, Tensor::complex(self.value(*z).shape(), dz)?)]
            }
            Op::FromChannels { x } => {
                let gd = g.complex_data()?;
                let mut dx = Vec::with_capacity(2 * gd.len());
                dx.extend(gd.iter().map(|c| 2.0 * c.re));
                dx.extend(gd.iter().map(|c| 2.0 * c.im));
                vec![(*x, Tensor::real(self.value(*x).shape(), dx)?)]
            }
            Op::Resize { x } => {
                let s = self.value(*x).shape();
                let gs = g.shape();
                let dx = kernels::resize_center(g.real_data()?, s[0], (gs[1], gs[2]), (s[1], s[2]));
                vec![(*x, Tensor::real(s, dx)?)]
            }
            Op::Conv2d { x, k, b } => {
                let d = self.conv_dims(*x, *k, *b)?;
                let (dx, dk, db) = kernels::conv2d_backward(
                    self.value(*x).real_data()?,
                    self.value(*k).real_data()?,
                    g.real_data()?,
                    d,
                );
                vec![
                    (*x, Tensor::real(self.value(*x).shape(), dx)?),
                    (*k, Tensor::real(self.value(*k).shape(), dk)?),
                    (*b, Tensor::real(self.value(*b).shape(), db)?),
                ]
            }
            Op::Relu { x } => {
                let tx = self.value(*x);
                let dx = tx
                    .real_data()?
                    .iter()
                    .zip(g.real_data()?)
                    .map(|(v, gv)| if *v > 0.0 { *gv } else { 0.0 })
                    .collect();
                vec![(*x, Tensor::real(tx.shape(), dx)?)]
            }
            Op::MaxPool { x, argmax } => {
                let tx = self.value(*x);
                let mut dx = vec![0.0; tx.len()];
                for (src, gv) in argmax.iter().zip(g.real_data()?) {
                    dx[*src] += gv;
                }
                vec![(*x, Tensor::real(tx.shape(), dx)?)]
            }
            Op::ConvTranspose { x, k } => {
                let d = self.up_dims(*x, *k)?;
                let gd = g.real_data()?;
                let dx = kernels::conv_stride2(gd, self.value(*k).real_data()?, d);
                let dk = kernels::conv_transpose2_grad_kernel(self.value(*x).real_data()?, gd, d);
                vec![
                    (*x, Tensor::real(self.value(*x).shape(), dx)?),
                    (*k, Tensor::real(self.value(*k).shape(), dk)?),
                ]
            }
            Op::Concat { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let gd = g.real_data()?;
                vec![
                    (*a, Tensor::real(ta.shape(), gd[..ta.len()].to_vec())?),
                    (*b, Tensor::real(tb.shape(), gd[ta.len()..].to_vec())?),
                ]
            }
            Op::SumSquares { a, b } => {
                let up = g.item()?;
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (da, db) = match (ta.data(), tb.data()) {
                    (Data::Real(x), Data::Real(y)) => {
                        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| 2.0 * up * (p - q)).collect();
                        let n: Vec<f64> = d.iter().map(|v| -v).collect();
                        (Tensor::real(ta.shape(), d)?, Tensor::real(tb.shape(), n)?)
                    }
                    (Data::Complex(x), Data::Complex(y)) => {
                        // ∂|a−b|²/∂ā = a − b
                        let d: Vec<C64> = x.iter().zip(y).map(|(p, q)| (p - q) * up).collect();
                        let n: Vec<C64> = d.iter().map(|v| -v).collect();
                        (Tensor::complex(ta.shape(), d)?, Tensor::complex(tb.shape(), n)?)
                    }
                    _ => unreachable!(),
                };
                vec![(*a, da), (*b, db)]
            }
            Op::SumAbs { x } => {
                let up = g.item()?;
                let tx = self.value(*x);
                let dx = match tx.data() {
                    Data::Real(v) => Tensor::real(
                        tx.shape(),
                        v.iter()
                            .map(|a| if *a == 0.0 { 0.0 } else { up * a.signum() })
                            .collect(),
                    )?,
                    // ∂|z|/∂z̄ = z / (2|z|)
                    Data::Complex(v) => Tensor::complex(
                        tx.shape(),
                        v.iter()
                            .map(|a| {
                                let m = a.norm();
                                if m == 0.0 {
                                    C64::new(0.0, 0.0)
                                } else {
                                    a * (up / (2.0 * m))
                                }
                            })
                            .collect(),
                    )?,
                };
                vec![(*x, dx)]
            }
        };
        Ok(out)
    }
}
