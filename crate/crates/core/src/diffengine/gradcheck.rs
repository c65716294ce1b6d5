//! Central finite-difference checks against [`Graph::backward`].

use super::graph::{Graph, Var};
use super::tensor::{Data, Tensor};
use crate::error::{Error, Result};

/// One real degree of freedom: input index and real offset within it.
///
/// Complex entry `j` owns offsets `2j` (real part) and `2j + 1` (imaginary part).
pub type Probe = (usize, usize);

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`, zero when both vanish.
    pub rel_error: f64,
}

fn perturbed(t: &Tensor, dof: usize, delta: f64) -> Tensor {
    let mut t = t.clone();
    match &t.data() {
        Data::Real(_) => t.real_data_mut().unwrap()[dof] += delta,
        Data::Complex(_) => {
            let c = &mut t.complex_data_mut().unwrap()[dof / 2];
            if dof % 2 == 0 {
                c.re += delta;
            } else {
                c.im += delta;
            }
        }
    }
    t
}

fn eval<F>(inputs: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.value(loss).item()
}

/// Real partial derivative of the loss along one probe, read off a stored gradient.
fn real_partial(grad: &Tensor, dof: usize) -> f64 {
    match grad.data() {
        Data::Real(v) => v[dof],
        Data::Complex(v) => {
            let c = v[dof / 2];
            if dof % 2 == 0 {
                2.0 * c.re
            } else {
                2.0 * c.im
            }
        }
    }
}

/// Compares backward gradients with central differences of step `h` at the given probes.
pub fn check_gradients_at<F>(inputs: &[Tensor], h: f64, probes: &[Probe], f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;

    let mut analytic = Vec::with_capacity(probes.len());
    let mut numeric = Vec::with_capacity(probes.len());
    for &(i, dof) in probes {
        if i >= inputs.len() || dof >= inputs[i].real_dof() {
            return Err(Error::Shape(format!("probe ({i}, {dof}) out of range")));
        }
        analytic.push(g.grad(vars[i]).map_or(0.0, |t| real_partial(t, dof)));

        let mut plus = inputs.to_vec();
        plus[i] = perturbed(&inputs[i], dof, h);
        let mut minus = inputs.to_vec();
        minus[i] = perturbed(&inputs[i], dof, -h);
        numeric.push((eval(&plus, &f)? - eval(&minus, &f)?) / (2.0 * h));
    }

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    let rel_error = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
    Ok(GradCheck {
        analytic,
        numeric,
        rel_error,
    })
}

/// [`check_gradients_at`] over every real degree of freedom of every input.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let probes: Vec<Probe> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.real_dof()).map(move |d| (i, d)))
        .collect();
    check_gradients_at(inputs, h, &probes, f)
}
