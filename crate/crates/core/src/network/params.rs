use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffengine::Tensor;
use crate::error::{Error, Result};
use crate::geometry::MeasurementMatrix;
use crate::linalg::CMatrix;

/// Encoder levels below the bottleneck; each halves both spatial dimensions.
pub const DEPTH: usize = 3;

/// Spatial dimensions must be divisible by this to survive [`DEPTH`] poolings.
pub const SPATIAL_MULTIPLE: usize = 1 << DEPTH;

/// Architecture knobs that are not fixed by the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Channels of the first encoder level.
    pub c0: usize,
    /// Blocks in the pre-imaging stack.
    pub n1: usize,
    /// Blocks in the final-imaging stack.
    pub n2: usize,
    /// Azimuth cells per slice.
    pub slice_width: usize,
    pub theta_init: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            c0: 16,
            n1: 16,
            n2: 32,
            slice_width: 100,
            theta_init: 1e-2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self, n_bins: usize) -> Result<()> {
        if self.c0 < 1 {
            return Err(Error::InvalidParameter("c0 must be at least 1".into()));
        }
        if self.slice_width < 1 {
            return Err(Error::InvalidParameter("slice_width must be at least 1".into()));
        }
        if !(self.theta_init >= 0.0) {
            return Err(Error::InvalidParameter("theta_init must be non-negative".into()));
        }
        if n_bins % SPATIAL_MULTIPLE != 0 {
            return Err(Error::InvalidParameter(format!(
                "elevation bins ({n_bins}) must be a multiple of {SPATIAL_MULTIPLE}"
            )));
        }
        Ok(())
    }

    /// Slice width after zero-padding to a multiple of [`SPATIAL_MULTIPLE`].
    pub fn padded_width(&self) -> usize {
        self.slice_width.div_ceil(SPATIAL_MULTIPLE) * SPATIAL_MULTIPLE
    }

    /// Output channels of encoder level `l` (`l = DEPTH` is the bottleneck).
    pub fn channels(&self, level: usize) -> usize {
        self.c0 << level
    }
}

/// One unrolled shrinkage iteration `γ ← soft_θ(W1 g + W2 γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListaBlock<T> {
    /// `N × M`
    pub w1: T,
    /// `N × N`
    pub w2: T,
    /// Scalar threshold, kept non-negative.
    pub theta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    /// `C_out × C_in × K × K`
    pub kernel: T,
    pub bias: T,
}

/// Two 3×3 conv + ReLU layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleConv<T> {
    pub first: ConvLayer<T>,
    pub second: ConvLayer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpBlock<T> {
    /// Transposed-conv kernel, `C_in × C_out × 2 × 2`.
    pub up: T,
    pub convs: DoubleConv<T>,
}

/// Every tensor of the network, generic over storage so the same layout can
/// hold values, graph handles or optimizer state.
///
/// The canonical order (used by [`NetParams::iter`], archives and optimizers)
/// is: pre blocks, encoder levels, decoder blocks, head, final blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub pre: Vec<ListaBlock<T>>,
    /// `DEPTH` levels followed by the bottleneck.
    pub encoder: Vec<DoubleConv<T>>,
    /// Deepest block first.
    pub decoder: Vec<UpBlock<T>>,
    /// 1×1 conv to the two real/imaginary channels.
    pub head: ConvLayer<T>,
    pub fin: Vec<ListaBlock<T>>,
}

fn lista_names(prefix: &str, count: usize, out: &mut Vec<String>) {
    for k in 0..count {
        for field in ["w1", "w2", "theta"] {
            out.push(format!("{prefix}.{k}.{field}"));
        }
    }
}

fn conv_names(prefix: &str, out: &mut Vec<String>) {
    out.push(format!("{prefix}.kernel"));
    out.push(format!("{prefix}.bias"));
}

/// Tensor names in canonical order for a network with `n1` and `n2` shrinkage blocks.
pub fn tensor_names(n1: usize, n2: usize) -> Vec<String> {
    let mut out = Vec::new();
    lista_names("pre", n1, &mut out);
    for l in 0..=DEPTH {
        conv_names(&format!("enc.{l}.conv0"), &mut out);
        conv_names(&format!("enc.{l}.conv1"), &mut out);
    }
    for j in 0..DEPTH {
        out.push(format!("dec.{j}.up"));
        conv_names(&format!("dec.{j}.conv0"), &mut out);
        conv_names(&format!("dec.{j}.conv1"), &mut out);
    }
    conv_names("head", &mut out);
    lista_names("fin", n2, &mut out);
    out
}

impl<T> NetParams<T> {
    /// References in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        fn lista<T>(b: &ListaBlock<T>) -> [&T; 3] {
            [&b.w1, &b.w2, &b.theta]
        }
        fn double<T>(d: &DoubleConv<T>) -> [&T; 4] {
            [&d.first.kernel, &d.first.bias, &d.second.kernel, &d.second.bias]
        }
        self.pre
            .iter()
            .flat_map(lista)
            .chain(self.encoder.iter().flat_map(double))
            .chain(self.decoder.iter().flat_map(|u| {
                std::iter::once(&u.up).chain(double(&u.convs))
            }))
            .chain([&self.head.kernel, &self.head.bias])
            .chain(self.fin.iter().flat_map(lista))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        fn lista<T>(b: &mut ListaBlock<T>) -> [&mut T; 3] {
            [&mut b.w1, &mut b.w2, &mut b.theta]
        }
        fn double<T>(d: &mut DoubleConv<T>) -> [&mut T; 4] {
            [
                &mut d.first.kernel,
                &mut d.first.bias,
                &mut d.second.kernel,
                &mut d.second.bias,
            ]
        }
        self.pre
            .iter_mut()
            .flat_map(lista)
            .chain(self.encoder.iter_mut().flat_map(double))
            .chain(self.decoder.iter_mut().flat_map(|u| {
                std::iter::once(&mut u.up).chain(double(&mut u.convs))
            }))
            .chain([&mut self.head.kernel, &mut self.head.bias])
            .chain(self.fin.iter_mut().flat_map(lista))
    }

    /// Thresholds of both shrinkage stacks.
    pub fn thetas_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.pre
            .iter_mut()
            .chain(self.fin.iter_mut())
            .map(|b| &mut b.theta)
    }

    /// Rebuilds the layout from values in canonical order.
    pub fn from_flat(n1: usize, n2: usize, values: impl IntoIterator<Item = T>) -> Result<Self> {
        let mut it = values.into_iter();
        let mut next = || {
            it.next()
                .ok_or_else(|| Error::Shape("too few tensors for the network layout".into()))
        };
        let lista = |count: usize, next: &mut dyn FnMut() -> Result<T>| -> Result<Vec<ListaBlock<T>>> {
            (0..count)
                .map(|_| {
                    Ok(ListaBlock {
                        w1: next()?,
                        w2: next()?,
                        theta: next()?,
                    })
                })
                .collect()
        };
        let conv = |next: &mut dyn FnMut() -> Result<T>| -> Result<ConvLayer<T>> {
            Ok(ConvLayer {
                kernel: next()?,
                bias: next()?,
            })
        };
        let double = |next: &mut dyn FnMut() -> Result<T>| -> Result<DoubleConv<T>> {
            Ok(DoubleConv {
                first: conv(next)?,
                second: conv(next)?,
            })
        };
        let pre = lista(n1, &mut next)?;
        let encoder = (0..=DEPTH)
            .map(|_| double(&mut next))
            .collect::<Result<_>>()?;
        let decoder = (0..DEPTH)
            .map(|_| {
                Ok(UpBlock {
                    up: next()?,
                    convs: double(&mut next)?,
                })
            })
            .collect::<Result<_>>()?;
        let head = conv(&mut next)?;
        let fin = lista(n2, &mut next)?;
        if next().is_ok() {
            return Err(Error::Shape("too many tensors for the network layout".into()));
        }
        Ok(Self {
            pre,
            encoder,
            decoder,
            head,
            fin,
        })
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> NetParams<U> {
        NetParams::from_flat(self.pre.len(), self.fin.len(), self.iter().map(f))
            .expect("layout preserved by map")
    }
}

/// Trained or freshly initialised network together with the dimensions it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    /// Acquisitions M.
    pub m: usize,
    /// Elevation bins N.
    pub n: usize,
    pub seed: u64,
    pub tensors: NetParams<Tensor>,
}

impl NetworkParams {
    /// Number of real scalars, complex entries counting twice.
    pub fn real_scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::real_dof).sum()
    }

    pub fn names(&self) -> Vec<String> {
        tensor_names(self.config.n1, self.config.n2)
    }

    /// Expected shape of every tensor in canonical order.
    pub fn expected_shapes(config: &NetworkConfig, m: usize, n: usize) -> Vec<Vec<usize>> {
        let lista = |out: &mut Vec<Vec<usize>>, count| {
            for _ in 0..count {
                out.push(vec![n, m]);
                out.push(vec![n, n]);
                out.push(vec![1]);
            }
        };
        let conv = |out: &mut Vec<Vec<usize>>, c_out: usize, c_in: usize, k: usize| {
            out.push(vec![c_out, c_in, k, k]);
            out.push(vec![c_out]);
        };
        let mut out = Vec::new();
        lista(&mut out, config.n1);
        let mut c_in = 2;
        for l in 0..=DEPTH {
            let c = config.channels(l);
            conv(&mut out, c, c_in, 3);
            conv(&mut out, c, c, 3);
            c_in = c;
        }
        for j in 0..DEPTH {
            let c = config.channels(DEPTH - 1 - j);
            out.push(vec![2 * c, c, 2, 2]);
            conv(&mut out, c, 2 * c, 3);
            conv(&mut out, c, c, 3);
        }
        conv(&mut out, 2, config.c0, 1);
        lista(&mut out, config.n2);
        out
    }

    /// Checks every tensor against the layout implied by `config`, `m` and `n`.
    pub fn validate(&self) -> Result<()> {
        self.config.validate(self.n)?;
        let shapes = Self::expected_shapes(&self.config, self.m, self.n);
        let names = self.names();
        let actual: Vec<&Tensor> = self.tensors.iter().collect();
        if actual.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                actual.len()
            )));
        }
        for ((t, s), name) in actual.iter().zip(&shapes).zip(&names) {
            let complex = name.ends_with("w1") || name.ends_with("w2");
            let dtype_ok = (t.dtype() == crate::diffengine::DType::Complex128) == complex;
            if t.shape() != s.as_slice() || !dtype_ok {
                return Err(Error::Shape(format!(
                    "{name}: expected {s:?}, found {:?} {:?}",
                    t.dtype(),
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form count of real scalars for the network layout:
///
/// `(n1 + n2)(2NM + 2N² + 1) + 1878 c0² + 64 c0 + 2`.
///
/// Each shrinkage block holds complex `W1` (N×M) and `W2` (N×N) plus one
/// threshold. The conv path contributes `1143 c0² + 48 c0` (encoder and
/// bottleneck), `735 c0² + 14 c0` (decoder) and `2 c0 + 2` (head).
pub fn parameter_count(m: usize, n: usize, c0: usize, n1: usize, n2: usize) -> usize {
    (n1 + n2) * (2 * n * m + 2 * n * n + 1) + 1878 * c0 * c0 + 64 * c0 + 2
}

/// Analytic shrinkage initialisation: `W1 = R^H / L`, `W2 = I − R^H R / L`.
pub fn analytic_lista_block(r: &MeasurementMatrix, theta: f64) -> ListaBlock<Tensor> {
    let l = r.lipschitz();
    let rh = r.matrix().adjoint();
    let w1 = rh.scale(1.0 / l);
    let gram = rh.matmul(r.matrix()).expect("R^H R is square");
    let w2 = CMatrix::identity(r.n())
        .sub(&gram.scale(1.0 / l))
        .expect("same shape");
    ListaBlock {
        w1: Tensor::complex([r.n(), r.m()], w1.into_vec()).expect("shape"),
        w2: Tensor::complex([r.n(), r.n()], w2.into_vec()).expect("shape"),
        theta: Tensor::real([1], vec![theta]).expect("shape"),
    }
}

/// Deterministic initial parameters.
///
/// Shrinkage blocks start from the analytic ISTA matrices with threshold
/// `theta_init`. Conv kernels are drawn uniformly from `±sqrt(6 / fan_in)`
/// in canonical order from a ChaCha8 stream seeded with `seed`; biases start
/// at zero.
pub fn init_params(r: &MeasurementMatrix, config: NetworkConfig, seed: u64) -> Result<NetworkParams> {
    config.validate(r.n())?;
    let block = analytic_lista_block(r, config.theta_init);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = NetworkParams::expected_shapes(&config, r.m(), r.n());
    let names = tensor_names(config.n1, config.n2);

    let mut tensors = Vec::with_capacity(shapes.len());
    for (shape, name) in shapes.into_iter().zip(&names) {
        let t = if name.ends_with("w1") {
            block.w1.clone()
        } else if name.ends_with("w2") {
            block.w2.clone()
        } else if name.ends_with("theta") {
            block.theta.clone()
        } else if name.ends_with("bias") {
            Tensor::real(shape.clone(), vec![0.0; shape[0]])?
        } else {
            // conv kernels are C_out×C_in×K×K, transposed-conv kernels C_in×C_out×2×2
            let fan_in = if name.ends_with(".up") {
                shape[0] * 4
            } else {
                shape[1] * shape[2] * shape[3]
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            let count = shape.iter().product();
            let v = (0..count).map(|_| rng.random_range(-bound..bound)).collect();
            Tensor::real(shape, v)?
        };
        tensors.push(t);
    }
    Ok(NetworkParams {
        config,
        m: r.m(),
        n: r.n(),
        seed,
        tensors: NetParams::from_flat(config.n1, config.n2, tensors)?,
    })
}

/// Helper for tests and oracles: every block of `stack` set to the analytic matrices with threshold `theta`.
pub fn analytic_stack(r: &MeasurementMatrix, count: usize, theta: f64) -> Vec<ListaBlock<Tensor>> {
    vec![analytic_lista_block(r, theta); count]
}
