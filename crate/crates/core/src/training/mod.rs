//! Slice datasets, the staged composite loss and the optimisation loop.

mod optim;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diffengine::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{GroundTruthVolume, ObservationVolume};
use crate::linalg::C64;
use crate::network::{bind, forward_graph, NetworkParams, StageOutputs, SPATIAL_MULTIPLE};

pub use optim::{OptimizerKind, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the conv-path term.
    pub alpha: f64,
    /// Weight of the final-image term.
    pub beta: f64,
    /// ℓ1 weight inside the final-image term.
    pub lambda_sparse: f64,
    pub learning_rate: f64,
    /// Learning rate of the shrinkage-block tensors; `learning_rate` when absent.
    pub lista_learning_rate: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Fraction of slices held out by [`SliceDataset::split`].
    pub holdout: f64,
    /// Epochs between checkpoints; 0 disables intermediate checkpoints.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta: 2.2,
            lambda_sparse: 0.05,
            learning_rate: 1e-3,
            lista_learning_rate: None,
            epochs: 100,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            holdout: 0.2,
            checkpoint_interval: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.lambda_sparse >= 0.0) {
            return bad("alpha, beta and lambda_sparse must be non-negative");
        }
        if !(self.learning_rate >= 0.0) || self.lista_learning_rate.is_some_and(|v| !(v >= 0.0)) {
            return bad("learning rates must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad("holdout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One azimuth-elevation slice: observations `M × A` and reflectivity target `N × A`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceItem {
    pub range_index: usize,
    pub obs: Vec<C64>,
    pub target: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceDataset {
    pub m: usize,
    pub n: usize,
    pub azimuth_count: usize,
    pub items: Vec<SliceItem>,
}

/// One item per range line, in range order.
pub fn make_slices(truth: &GroundTruthVolume, obs: &ObservationVolume) -> Result<SliceDataset> {
    let [_, ta, td] = truth.dims();
    let [m, oa, od] = obs.dims();
    if ta != oa || td != od {
        return Err(Error::Shape(format!(
            "truth covers {ta}×{td} cells, observations cover {oa}×{od}"
        )));
    }
    let items = (0..td)
        .map(|d| SliceItem {
            range_index: d,
            obs: obs.slice(d),
            target: truth.slice(d).into_iter().map(|v| C64::new(v, 0.0)).collect(),
        })
        .collect();
    Ok(SliceDataset {
        m,
        n: truth.n_bins(),
        azimuth_count: ta,
        items,
    })
}

impl SliceDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Training part and the last `round(holdout · len)` slices.
    pub fn split(&self, holdout: f64) -> (SliceDataset, SliceDataset) {
        let held = ((self.len() as f64) * holdout).round() as usize;
        let cut = self.len() - held.min(self.len());
        let part = |items: &[SliceItem]| SliceDataset {
            m: self.m,
            n: self.n,
            azimuth_count: self.azimuth_count,
            items: items.to_vec(),
        };
        (part(&self.items[..cut]), part(&self.items[cut..]))
    }
}

/// Loss components of one slice, or their means over an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub l1d: f64,
    pub l2d: f64,
    pub lim: f64,
}

/// `L = L1D + α L2D + β Lim` on one slice of width `A`:
///
/// - `L1D = Σ_i ‖γ1D_i − γ*_i‖² / A`
/// - `L2D = Σ_i ‖γ2D_i − γ*_i‖² / A`
/// - `Lim = Σ_i (‖γ_i − γ*_i‖² + λ ‖γ_i‖₁) / A`
///
/// where `i` runs over azimuth columns and norms are over complex magnitudes.
pub fn composite_loss_graph(
    g: &mut Graph,
    out: &StageOutputs<Var>,
    target: Var,
    width: usize,
    cfg: &TrainConfig,
) -> Result<(Var, [Var; 3])> {
    let inv = 1.0 / width as f64;
    let e1 = g.mse_loss(out.gamma_1d, target)?;
    let l1d = g.scale(e1, inv)?;
    let e2 = g.mse_loss(out.gamma_2d, target)?;
    let l2d = g.scale(e2, inv)?;
    let ef = g.mse_loss(out.gamma_final, target)?;
    let sparse = g.l1_loss(out.gamma_final)?;
    let sparse = g.scale(sparse, cfg.lambda_sparse)?;
    let lim = g.add(ef, sparse)?;
    let lim = g.scale(lim, inv)?;
    let a = g.scale(l2d, cfg.alpha)?;
    let b = g.scale(lim, cfg.beta)?;
    let total = g.add(l1d, a)?;
    let total = g.add(total, b)?;
    Ok((total, [l1d, l2d, lim]))
}

/// Evaluates [`composite_loss_graph`] on plain `N × A` arrays.
pub fn composite_loss(
    out: &StageOutputs<Vec<C64>>,
    target: &[C64],
    width: usize,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    if width == 0 || target.len() % width != 0 {
        return Err(Error::Shape(format!(
            "target of {} values is not a slice of width {width}",
            target.len()
        )));
    }
    let n = target.len() / width;
    let mut g = Graph::new();
    let mut node = |v: &[C64]| -> Result<Var> { Ok(g.constant(Tensor::complex([n, width], v.to_vec())?)) };
    let vars = StageOutputs {
        gamma_1d: node(&out.gamma_1d)?,
        gamma_2d: node(&out.gamma_2d)?,
        gamma_final: node(&out.gamma_final)?,
    };
    let t = node(target)?;
    let (total, [l1d, l2d, lim]) = composite_loss_graph(&mut g, &vars, t, width, cfg)?;
    let val = |v: Var| g.value(v).item();
    Ok(LossParts {
        total: val(total)?,
        l1d: val(l1d)?,
        l2d: val(l2d)?,
        lim: val(lim)?,
    })
}

/// Loss and parameter gradients (as stored by the engine) for one slice.
pub fn loss_and_gradients(
    params: &NetworkParams,
    item: &SliceItem,
    width: usize,
    cfg: &TrainConfig,
) -> Result<(LossParts, Vec<Tensor>)> {
    let mut g = Graph::new();
    let vars = bind(params, &mut g, true);
    let obs = g.constant(Tensor::complex([params.m, width], item.obs.clone())?);
    let target = g.constant(Tensor::complex([params.n, width], item.target.clone())?);
    let padded = width.div_ceil(SPATIAL_MULTIPLE) * SPATIAL_MULTIPLE;
    let out = forward_graph(&mut g, &vars, obs, params.n, padded)?;
    let (total, [l1d, l2d, lim]) = composite_loss_graph(&mut g, &out, target, width, cfg)?;
    let parts = LossParts {
        total: g.value(total).item()?,
        l1d: g.value(l1d).item()?,
        l2d: g.value(l2d).item()?,
        lim: g.value(lim).item()?,
    };
    if !parts.total.is_finite() {
        return Ok((parts, Vec::new()));
    }
    g.backward(total)?;
    let grads = vars
        .iter()
        .zip(params.tensors.iter())
        .map(|(v, t)| g.grad(*v).cloned().unwrap_or_else(|| t.zeros_like()))
        .collect();
    Ok((parts, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossParts,
}

/// Parameters plus optimizer state; enough to resume training exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: NetworkParams,
    pub optimizer: OptimizerState,
    /// Epochs completed so far; the next epoch gets this number.
    pub epoch: usize,
}

impl TrainState {
    pub fn new(params: NetworkParams) -> Self {
        let optimizer = OptimizerState::new(&params);
        Self {
            params,
            optimizer,
            epoch: 0,
        }
    }
}

fn check_dataset(dataset: &SliceDataset, params: &NetworkParams) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("training dataset is empty".into()));
    }
    if dataset.m != params.m || dataset.n != params.n {
        return Err(Error::Shape(format!(
            "dataset is {}×{} (M×N), network expects {}×{}",
            dataset.m, dataset.n, params.m, params.n
        )));
    }
    let a = dataset.azimuth_count;
    for item in &dataset.items {
        if item.obs.len() != dataset.m * a || item.target.len() != dataset.n * a {
            return Err(Error::Shape(format!(
                "slice at range {} does not match the dataset dimensions",
                item.range_index
            )));
        }
    }
    Ok(())
}

/// Runs `cfg.epochs` epochs starting from `state`, one optimizer step per
/// slice in dataset order. `on_epoch` sees the state after every epoch.
///
/// A non-finite loss aborts with the epoch and slice index.
pub fn train_resume(
    dataset: &SliceDataset,
    mut state: TrainState,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainState, &EpochRecord) -> Result<()>,
) -> Result<(TrainState, Vec<EpochRecord>)> {
    cfg.validate()?;
    check_dataset(dataset, &state.params)?;
    let width = dataset.azimuth_count;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let epoch = state.epoch;
        let mut sum = LossParts::default();
        for (s, item) in dataset.items.iter().enumerate() {
            let (parts, grads) = loss_and_gradients(&state.params, item, width, cfg)?;
            if !parts.total.is_finite() || !grads.iter().all(Tensor::is_finite) {
                return Err(Error::NonFinite { epoch, slice: s });
            }
            state.optimizer.step(&mut state.params, &grads, cfg)?;
            sum.total += parts.total;
            sum.l1d += parts.l1d;
            sum.l2d += parts.l2d;
            sum.lim += parts.lim;
        }
        let k = dataset.len() as f64;
        let record = EpochRecord {
            epoch,
            loss: LossParts {
                total: sum.total / k,
                l1d: sum.l1d / k,
                l2d: sum.l2d / k,
                lim: sum.lim / k,
            },
        };
        state.epoch += 1;
        on_epoch(&state, &record)?;
        history.push(record);
    }
    Ok((state, history))
}

/// Trains fresh optimizer state from `init`.
pub fn train(
    dataset: &SliceDataset,
    init: NetworkParams,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    let (state, history) = train_resume(dataset, TrainState::new(init), cfg, |_, _| Ok(()))?;
    Ok((state.params, history))
}

pub const HISTORY_HEADER: &str = "epoch,total,l1d,l2d,lim";

/// History rows without header, full round-trip precision.
pub fn history_rows(records: &[EpochRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let l = &r.loss;
        let _ = writeln!(s, "{},{:e},{:e},{:e},{:e}", r.epoch, l.total, l.l1d, l.l2d, l.lim);
    }
    s
}

pub fn history_csv(records: &[EpochRecord]) -> String {
    format!("{HISTORY_HEADER}\n{}", history_rows(records))
}

#[cfg(test)]
mod tests;
