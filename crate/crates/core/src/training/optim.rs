use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::diffengine::{Data, Tensor};
use crate::error::{Error, Result};
use crate::network::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Optimizer moments over the real parametrisation of every tensor.
///
/// Complex entries contribute two real coordinates (real part, then
/// imaginary part). The engine stores `∂L/∂conj(z)`, so the real partials fed
/// to the update are `2·Re` and `2·Im` of the stored gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Steps taken so far.
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

fn real_partials(grad: &Tensor) -> Vec<f64> {
    match grad.data() {
        Data::Real(v) => v.clone(),
        Data::Complex(v) => v.iter().flat_map(|c| [2.0 * c.re, 2.0 * c.im]).collect(),
    }
}

fn apply_delta(t: &mut Tensor, delta: impl Fn(usize) -> f64) {
    match t.dtype() {
        crate::diffengine::DType::Real64 => {
            for (i, v) in t.real_data_mut().expect("real").iter_mut().enumerate() {
                *v -= delta(i);
            }
        }
        crate::diffengine::DType::Complex128 => {
            for (j, c) in t.complex_data_mut().expect("complex").iter_mut().enumerate() {
                c.re -= delta(2 * j);
                c.im -= delta(2 * j + 1);
            }
        }
    }
}

impl OptimizerState {
    pub fn new(params: &NetworkParams) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors
            .iter()
            .map(|t| vec![0.0; t.real_dof()])
            .collect();
        Self {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// One update of `params` from per-tensor gradients in canonical order,
    /// followed by clamping every threshold to be non-negative.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &[Tensor], cfg: &TrainConfig) -> Result<()> {
        let count = params.tensors.iter().count();
        if grads.len() != count || self.first_moment.len() != count {
            return Err(Error::Shape(format!(
                "{} gradients and {} moment buffers for {count} tensors",
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step += 1;
        let conv_tensors = 3 * params.config.n1..count - 3 * params.config.n2;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powf(self.step as f64);
        let c2 = 1.0 - b2.powf(self.step as f64);
        for (k, (t, grad)) in params.tensors.iter_mut().zip(grads).enumerate() {
            let lr = if conv_tensors.contains(&k) {
                cfg.learning_rate
            } else {
                cfg.lista_learning_rate.unwrap_or(cfg.learning_rate)
            };
            let gr = real_partials(grad);
            if gr.len() != t.real_dof() {
                return Err(Error::Shape(format!("gradient {k} does not match its tensor")));
            }
            match cfg.optimizer {
                OptimizerKind::Sgd => apply_delta(t, |i| lr * gr[i]),
                OptimizerKind::Adam => {
                    let m = &mut self.first_moment[k];
                    let v = &mut self.second_moment[k];
                    for i in 0..gr.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * gr[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * gr[i] * gr[i];
                    }
                    let (m, v) = (&*m, &*v);
                    apply_delta(t, |i| lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps));
                }
            }
        }
        for theta in params.tensors.thetas_mut() {
            for v in theta.real_data_mut()? {
                *v = v.max(0.0);
            }
        }
        Ok(())
    }
}
