use super::params::{ConvLayer, DoubleConv, ListaBlock, NetParams, NetworkParams, DEPTH};
use crate::diffengine::{DType, Graph, ResizeMode, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::ObservationVolume;
use crate::linalg::C64;
use crate::parallel;
use crate::volume::ComplexVolume;

/// The three staged estimates of one slice, each `N × A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutputs<T> {
    pub gamma_1d: T,
    pub gamma_2d: T,
    pub gamma_final: T,
}

/// Records every parameter on `g`, as trainable leaves or as constants.
pub fn bind(params: &NetworkParams, g: &mut Graph, trainable: bool) -> NetParams<Var> {
    params.tensors.map(|t| {
        if trainable {
            g.param(t.clone())
        } else {
            g.constant(t.clone())
        }
    })
}

/// Shrinkage blocks applied in order from `gamma0`; `obs` is `M × A`, `gamma0` is `N × A`.
///
/// Returns the output of every block.
pub fn lista_stack_graph(
    g: &mut Graph,
    blocks: &[ListaBlock<Var>],
    obs: Var,
    gamma0: Var,
) -> Result<Vec<Var>> {
    let mut gamma = gamma0;
    let mut outputs = Vec::with_capacity(blocks.len());
    for b in blocks {
        let data = g.matmul(b.w1, obs)?;
        let feedback = g.matmul(b.w2, gamma)?;
        let z = g.add(data, feedback)?;
        gamma = g.soft_threshold(z, b.theta)?;
        outputs.push(gamma);
    }
    Ok(outputs)
}

fn conv_relu(g: &mut Graph, x: Var, layer: &ConvLayer<Var>) -> Result<Var> {
    let y = g.conv2d(x, layer.kernel, layer.bias)?;
    g.relu(y)
}

fn double_conv(g: &mut Graph, x: Var, d: &DoubleConv<Var>) -> Result<Var> {
    let y = conv_relu(g, x, &d.first)?;
    conv_relu(g, y, &d.second)
}

/// Encoder over a `2 × N × A_pad` input. Returns the `DEPTH` skip levels
/// followed by the bottleneck.
pub fn encode_graph(g: &mut Graph, p: &NetParams<Var>, x: Var) -> Result<Vec<Var>> {
    let mut levels = Vec::with_capacity(DEPTH + 1);
    let mut cur = x;
    for (l, d) in p.encoder.iter().enumerate() {
        let y = double_conv(g, cur, d)?;
        levels.push(y);
        if l < DEPTH {
            cur = g.maxpool2d(y)?;
        }
    }
    Ok(levels)
}

/// Decoder and head: `2 × N × A_pad` output from the encoder pyramid.
pub fn fuse_graph(g: &mut Graph, p: &NetParams<Var>, pyramid: &[Var]) -> Result<Var> {
    if pyramid.len() != DEPTH + 1 {
        return Err(Error::Shape(format!(
            "pyramid has {} levels, expected {}",
            pyramid.len(),
            DEPTH + 1
        )));
    }
    let mut x = pyramid[DEPTH];
    for (j, block) in p.decoder.iter().enumerate() {
        let up = g.conv_transpose2d(x, block.up)?;
        let merged = g.concat_channels(pyramid[DEPTH - 1 - j], up)?;
        x = double_conv(g, merged, &block.convs)?;
    }
    g.conv2d(x, p.head.kernel, p.head.bias)
}

/// Whole network on one slice, recorded on `g`. `obs` must be a complex `M × A` node.
pub fn forward_graph(
    g: &mut Graph,
    p: &NetParams<Var>,
    obs: Var,
    n: usize,
    padded_width: usize,
) -> Result<StageOutputs<Var>> {
    let a = match g.value(obs).shape() {
        [_, a] => *a,
        s => return Err(Error::Shape(format!("observation slice must be M×A, got {s:?}"))),
    };
    let zero = g.constant(Tensor::zeros([n, a], DType::Complex128));
    let gamma_1d = lista_stack_graph(g, &p.pre, obs, zero)
        .map_err(Error::stage("pre_image"))?
        .last()
        .copied()
        .unwrap_or(zero);

    let fused = (|| {
        let ch = g.to_channels(gamma_1d)?;
        let padded = g.pad_crop(ch, n, padded_width, ResizeMode::ZeroPad)?;
        let pyramid = encode_graph(g, p, padded).map_err(Error::stage("encode"))?;
        let out = fuse_graph(g, p, &pyramid).map_err(Error::stage("fuse"))?;
        let cropped = g.pad_crop(out, n, a, ResizeMode::CenterCrop)?;
        g.from_channels(cropped)
    })()
    .map_err(|e| match e {
        Error::Stage { .. } => e,
        e => Error::stage("conv_path")(e),
    })?;

    let gamma_final = lista_stack_graph(g, &p.fin, obs, fused)
        .map_err(Error::stage("final_image"))?
        .last()
        .copied()
        .unwrap_or(fused);
    Ok(StageOutputs {
        gamma_1d,
        gamma_2d: fused,
        gamma_final,
    })
}

fn check_obs(params: &NetworkParams, obs: &[C64]) -> Result<usize> {
    if params.m == 0 || obs.len() % params.m != 0 || obs.is_empty() {
        return Err(Error::Shape(format!(
            "observation slice of {} values does not split into {} rows",
            obs.len(),
            params.m
        )));
    }
    Ok(obs.len() / params.m)
}

fn complex_node(g: &mut Graph, rows: usize, cols: usize, v: &[C64]) -> Result<Var> {
    Ok(g.constant(Tensor::complex([rows, cols], v.to_vec())?))
}

/// Runs the network on one `M × A` observation slice (row-major) and returns
/// the three `N × A` estimates.
pub fn forward(params: &NetworkParams, obs: &[C64]) -> Result<StageOutputs<Vec<C64>>> {
    let a = check_obs(params, obs)?;
    let mut g = Graph::new();
    let p = bind(params, &mut g, false);
    let ov = complex_node(&mut g, params.m, a, obs)?;
    let padded = a.div_ceil(super::SPATIAL_MULTIPLE) * super::SPATIAL_MULTIPLE;
    let out = forward_graph(&mut g, &p, ov, params.n, padded)?;
    Ok(StageOutputs {
        gamma_1d: g.take_value(out.gamma_1d).into_complex()?,
        gamma_2d: g.take_value(out.gamma_2d).into_complex()?,
        gamma_final: g.take_value(out.gamma_final).into_complex()?,
    })
}

/// Applies `blocks` to a single observation vector `g_obs` (length M) from `gamma0` (length N).
///
/// Returns the final estimate and the output of every block.
pub fn lista_stack_forward(
    blocks: &[ListaBlock<Tensor>],
    g_obs: &[C64],
    gamma0: &[C64],
) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
    let mut g = Graph::new();
    let vars: Vec<ListaBlock<Var>> = blocks
        .iter()
        .map(|b| ListaBlock {
            w1: g.constant(b.w1.clone()),
            w2: g.constant(b.w2.clone()),
            theta: g.constant(b.theta.clone()),
        })
        .collect();
    let obs = g.constant(Tensor::complex([g_obs.len(), 1], g_obs.to_vec())?);
    let start = g.constant(Tensor::complex([gamma0.len(), 1], gamma0.to_vec())?);
    let outs = lista_stack_graph(&mut g, &vars, obs, start)?;
    let per_block: Vec<Vec<C64>> = outs
        .iter()
        .map(|v| g.value(*v).complex_data().map(<[C64]>::to_vec))
        .collect::<Result<_>>()?;
    let last = per_block.last().cloned().unwrap_or_else(|| gamma0.to_vec());
    Ok((last, per_block))
}

/// Pre-imaging stack applied to every azimuth column of an `M × A` slice from zero.
pub fn pre_image(params: &NetworkParams, obs: &[C64]) -> Result<Vec<C64>> {
    let a = check_obs(params, obs)?;
    let mut g = Graph::new();
    let p = bind(params, &mut g, false);
    let ov = complex_node(&mut g, params.m, a, obs)?;
    let zero = g.constant(Tensor::zeros([params.n, a], DType::Complex128));
    let outs = lista_stack_graph(&mut g, &p.pre, ov, zero).map_err(Error::stage("pre_image"))?;
    let last = outs.last().copied().unwrap_or(zero);
    g.take_value(last).into_complex()
}

/// Encoder pyramid of a real `2 × N × A_pad` tensor.
pub fn encode(params: &NetworkParams, input: &Tensor) -> Result<Vec<Tensor>> {
    let mut g = Graph::new();
    let p = bind(params, &mut g, false);
    let x = g.constant(input.clone());
    let levels = encode_graph(&mut g, &p, x).map_err(Error::stage("encode"))?;
    Ok(levels.into_iter().map(|v| g.take_value(v)).collect())
}

/// Decoder and head over an encoder pyramid, cropped to `out_width` azimuth cells.
pub fn fuse(params: &NetworkParams, pyramid: &[Tensor], out_width: usize) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = bind(params, &mut g, false);
    let levels: Vec<Var> = pyramid.iter().map(|t| g.constant(t.clone())).collect();
    let out = fuse_graph(&mut g, &p, &levels).map_err(Error::stage("fuse"))?;
    let cropped = g.pad_crop(out, params.n, out_width, ResizeMode::CenterCrop)?;
    Ok(g.take_value(cropped))
}

/// Final-imaging stack per azimuth column, starting from `gamma2d` (`N × A`).
pub fn final_image(params: &NetworkParams, obs: &[C64], gamma2d: &[C64]) -> Result<Vec<C64>> {
    let a = check_obs(params, obs)?;
    if gamma2d.len() != params.n * a {
        return Err(Error::Shape(format!(
            "initial estimate has {} values, expected {}",
            gamma2d.len(),
            params.n * a
        )));
    }
    let mut g = Graph::new();
    let p = bind(params, &mut g, false);
    let ov = complex_node(&mut g, params.m, a, obs)?;
    let start = complex_node(&mut g, params.n, a, gamma2d)?;
    let outs = lista_stack_graph(&mut g, &p.fin, ov, start).map_err(Error::stage("final_image"))?;
    let last = outs.last().copied().unwrap_or(start);
    g.take_value(last).into_complex()
}

/// Runs the network on every range slice of `obs` and assembles the final
/// estimates into a volume. Slices are spread over `threads` workers; the
/// result does not depend on the thread count.
pub fn reconstruct_volume(
    params: &NetworkParams,
    obs: &ObservationVolume,
    threads: usize,
) -> Result<ComplexVolume> {
    let [m, na, nd] = obs.dims();
    if m != params.m {
        return Err(Error::Shape(format!(
            "observations have {m} baselines, network expects {}",
            params.m
        )));
    }
    let slices = parallel::map_indexed(nd, threads, |d| {
        forward(params, &obs.slice(d))
            .map(|out| out.gamma_final)
            .map_err(|e| Error::Slice {
                range: d,
                source: Box::new(e),
            })
    })?;
    let mut vol = ComplexVolume::zeros(params.n, na, nd);
    for (d, s) in slices.iter().enumerate() {
        vol.set_slice(d, s);
    }
    Ok(vol)
}
