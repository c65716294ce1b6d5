//! Per-cell sparse inversion: complex soft-thresholding, ISTA and FISTA.
//!
//! Both solvers minimise `½‖g − Rγ‖² + λ‖γ‖₁` where the ℓ1 norm sums complex
//! magnitudes, starting from `γ₀ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MeasurementMatrix, ObservationVolume};
use crate::linalg::{norm1, norm2, norm_inf, C64};
use crate::parallel;
use crate::volume::ComplexVolume;

/// Consecutive objective increases tolerated before a solve is declared divergent.
pub const DIVERGENCE_PATIENCE: usize = 10;

/// Relative objective increase below which an ISTA step counts as flat.
pub const RISE_TOL: f64 = 1e-12;

/// Phase-preserving magnitude shrinkage, the proximal map of `θ|z|`.
pub fn soft_threshold(z: C64, theta: f64) -> Result<C64> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {theta}"
        )));
    }
    Ok(shrink(z, theta))
}

#[inline]
pub(crate) fn shrink(z: C64, theta: f64) -> C64 {
    let mag = z.norm();
    if mag > theta {
        z * ((mag - theta) / mag)
    } else if mag <= theta {
        C64::new(0.0, 0.0)
    } else {
        // NaN passes through so callers can detect it
        z
    }
}

/// `½‖g − Rγ‖₂² + λ Σ|γ_n|`
pub fn objective(r: &MeasurementMatrix, g: &[C64], gamma: &[C64], reg_lambda: f64) -> Result<f64> {
    if g.len() != r.m() {
        return Err(Error::Shape(format!(
            "observation has {} entries, steering matrix has {} rows",
            g.len(),
            r.m()
        )));
    }
    let rg = r.apply(gamma)?;
    let residual: f64 = g.iter().zip(&rg).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(0.5 * residual + reg_lambda * norm1(gamma))
}

/// ℓ1 weight: an absolute value, or a fraction of `‖R^H g‖_∞` evaluated per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegLambda {
    Fixed(f64),
    Relative { relative: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// Gradient step: `"auto"` (1/L with L the largest eigenvalue of `R^H R`) or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Fixed(f64),
    Auto(AutoKeyword),
}

impl Step {
    pub const AUTO: Step = Step::Auto(AutoKeyword::Auto);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub reg_lambda: RegLambda,
    pub max_iters: usize,
    /// Stop once `‖γ_{k+1} − γ_k‖ / ‖γ_{k+1}‖` falls below this.
    pub tol: f64,
    pub step: Step,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            reg_lambda: RegLambda::Relative { relative: 0.05 },
            max_iters: 2000,
            tol: 1e-6,
            step: Step::AUTO,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be non-negative".into()));
        }
        match self.reg_lambda {
            RegLambda::Fixed(v) | RegLambda::Relative { relative: v } if !(v >= 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "reg_lambda must be non-negative, got {v}"
                )))
            }
            _ => {}
        }
        if let Step::Fixed(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// The ℓ1 weight for one observation vector.
    pub fn lambda_for(&self, r: &MeasurementMatrix, g: &[C64]) -> Result<f64> {
        match self.reg_lambda {
            RegLambda::Fixed(v) => Ok(v),
            RegLambda::Relative { relative } => Ok(relative * norm_inf(&r.apply_adjoint(g)?)),
        }
    }

    pub fn step_for(&self, r: &MeasurementMatrix) -> f64 {
        match self.step {
            Step::Fixed(s) => s,
            Step::Auto(_) => 1.0 / r.lipschitz(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ista,
    Fista,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ista" => Ok(Method::Ista),
            "fista" => Ok(Method::Fista),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Momentum {
    /// `t_{k+1} = (1 + √(1 + 4t_k²)) / 2`
    Nesterov,
    /// `t_k ≡ 1`, which reduces FISTA to ISTA.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub gamma: Vec<C64>,
    /// Objective at `γ₀` followed by the objective after each iteration.
    pub history: Vec<f64>,
    pub reg_lambda: f64,
    pub step: f64,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// `γ ← soft_{λ·step}(γ + step · R^H (g − Rγ))`
fn prox_gradient_step(
    r: &MeasurementMatrix,
    g: &[C64],
    y: &[C64],
    step: f64,
    threshold: f64,
) -> Result<Vec<C64>> {
    let ry = r.apply(y)?;
    let residual: Vec<C64> = g.iter().zip(&ry).map(|(a, b)| a - b).collect();
    let grad = r.apply_adjoint(&residual)?;
    Ok(y
        .iter()
        .zip(&grad)
        .map(|(yv, gv)| shrink(yv + gv * step, threshold))
        .collect())
}

fn relative_change(next: &[C64], prev: &[C64]) -> f64 {
    let num = next
        .iter()
        .zip(prev)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if num == 0.0 {
        return 0.0;
    }
    let den = norm2(next);
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn proximal_gradient(
    r: &MeasurementMatrix,
    g: &[C64],
    cfg: &SolverConfig,
    momentum: Option<Momentum>,
) -> Result<Solution> {
    cfg.validate()?;
    let reg_lambda = cfg.lambda_for(r, g)?;
    let step = cfg.step_for(r);
    let threshold = reg_lambda * step;

    let mut x = vec![C64::new(0.0, 0.0); r.n()];
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut history = vec![objective(r, g, &x, reg_lambda)?];
    let mut rising = 0;

    for _ in 0..cfg.max_iters {
        let next = prox_gradient_step(r, g, &y, step, threshold)?;
        let change = relative_change(&next, &x);

        y = match momentum {
            Some(Momentum::Nesterov) => {
                let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
                let beta = (t - 1.0) / t_next;
                t = t_next;
                if beta == 0.0 {
                    next.clone()
                } else {
                    next.iter()
                        .zip(&x)
                        .map(|(n, p)| n + (n - p) * beta)
                        .collect()
                }
            }
            Some(Momentum::Off) | None => next.clone(),
        };
        x = next;

        let obj = objective(r, g, &x, reg_lambda)?;
        let prev = *history.last().expect("history starts non-empty");
        // Accelerated iterates ripple, so only a climb above the starting
        // objective counts against them.
        let rose = match momentum {
            Some(Momentum::Nesterov) => obj > history[0],
            _ => obj > prev + RISE_TOL * prev.abs().max(1.0),
        };
        if rose {
            rising += 1;
            if rising >= DIVERGENCE_PATIENCE {
                return Err(Error::StepSize(rising));
            }
        } else {
            rising = 0;
        }
        history.push(obj);
        if change < cfg.tol || change == 0.0 {
            break;
        }
    }

    Ok(Solution {
        gamma: x,
        history,
        reg_lambda,
        step,
    })
}

pub fn ista_solve(r: &MeasurementMatrix, g: &[C64], cfg: &SolverConfig) -> Result<Solution> {
    proximal_gradient(r, g, cfg, None)
}

pub fn fista_solve(r: &MeasurementMatrix, g: &[C64], cfg: &SolverConfig) -> Result<Solution> {
    proximal_gradient(r, g, cfg, Some(Momentum::Nesterov))
}

pub fn fista_solve_with(
    r: &MeasurementMatrix,
    g: &[C64],
    cfg: &SolverConfig,
    momentum: Momentum,
) -> Result<Solution> {
    proximal_gradient(r, g, cfg, Some(momentum))
}

pub fn solve(r: &MeasurementMatrix, g: &[C64], cfg: &SolverConfig, method: Method) -> Result<Solution> {
    match method {
        Method::Ista => ista_solve(r, g, cfg),
        Method::Fista => fista_solve(r, g, cfg),
    }
}

/// Apply `method` independently to every range-azimuth cell of `obs`.
///
/// Range lines are distributed over `threads` workers; the result does not
/// depend on the thread count.
pub fn solve_volume(
    r: &MeasurementMatrix,
    obs: &ObservationVolume,
    cfg: &SolverConfig,
    method: Method,
    threads: usize,
) -> Result<ComplexVolume> {
    if obs.baseline_count() != r.m() {
        return Err(Error::Shape(format!(
            "observations have {} baselines, steering matrix has {}",
            obs.baseline_count(),
            r.m()
        )));
    }
    cfg.validate()?;
    // Resolve the Lipschitz constant once before fanning out.
    let _ = r.lipschitz();
    let (na, nd) = (obs.azimuth_count(), obs.range_count());
    let lines = parallel::map_indexed(nd, threads, |d| {
        (0..na)
            .map(|a| {
                solve(r, &obs.cell(a, d), cfg, method)
                    .map(|s| s.gamma)
                    .map_err(|e| Error::Cell {
                        azimuth: a,
                        range: d,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut vol = ComplexVolume::zeros(r.n(), na, nd);
    for (d, line) in lines.iter().enumerate() {
        for (a, gamma) in line.iter().enumerate() {
            vol.set_cell(a, d, gamma);
        }
    }
    Ok(vol)
}
