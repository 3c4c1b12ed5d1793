//! Gradient descent at `1/L` and the Lipschitz-tracking variants of
//! momentum (AdaMo), RMSprop and Adam (Auto-Adam).
//!
//! "max‖g‖" is the largest Frobenius norm over the parameter tensors
//! (weights and biases of every layer); "max‖g²‖" is the same for the
//! elementwise-squared gradient.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipschitz::{LipschitzEstimate, LossSpec, Regularization};
use crate::models::{forward, model_constant, Gradients, ModelParams};
use crate::numeric::{l2, Matrix};

pub const DEFAULT_EPS: f64 = 1e-8;
/// First-epoch RMSprop scale above which the fallback rate is used.
pub const RMSPROP_FALLBACK_TRIGGER: f64 = 10.0;
pub const RMSPROP_FALLBACK_LR: f64 = 1e-3;
pub const ADAMO_FIRST_EPOCH_LR: f64 = 0.1;
pub const AUTOADAM_FIXED_K1: f64 = 1.0;
pub const AUTOADAM_FIXED_K2: f64 = 1e-6;

/// Anything that can be viewed as a list of flat parameter tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weights.as_slice());
            if let Some(b) = &l.bias {
                out.push(b.as_slice());
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            if let Some(b) = &mut l.bias {
                out.push(b.as_mut_slice());
            }
        }
        out
    }
}

impl Parameters for Gradients {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            if let Some(b) = b {
                out.push(b.as_slice());
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            out.push(w.as_mut_slice());
            if let Some(b) = b {
                out.push(b.as_mut_slice());
            }
        }
        out
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl Parameters for Vec<Vec<f64>> {
    fn tensors(&self) -> Vec<&[f64]> {
        self.iter().map(Vec::as_slice).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.iter_mut().map(Vec::as_mut_slice).collect()
    }
}

/// Largest tensor norm of the gradient.
pub fn max_tensor_norm(g: &impl Parameters) -> f64 {
    g.tensors().iter().map(|t| l2(t)).fold(0.0, f64::max)
}

/// Largest tensor norm of the elementwise-squared gradient.
pub fn max_squared_tensor_norm(g: &impl Parameters) -> f64 {
    g.tensors()
        .iter()
        .map(|t| t.iter().map(|v| v.powi(4)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn check_finite(g: &impl Parameters) -> Result<()> {
    if g.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
        Ok(())
    } else {
        Err(Error::Divergence("gradient contains non-finite values".into()))
    }
}

fn check_shapes(p: &impl Parameters, g: &impl Parameters) -> Result<()> {
    let ps: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    let gs: Vec<usize> = g.tensors().iter().map(|t| t.len()).collect();
    if ps == gs {
        Ok(())
    } else {
        Err(Error::Dimension(format!("parameter tensors {ps:?} vs gradient tensors {gs:?}")))
    }
}

/// Source of the value Auto-Adam averages into `K₂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K2Feed {
    /// `max‖g²‖` of the current gradient.
    #[default]
    Literal,
    /// The class-count estimate, see [`k2_estimate`].
    ClassificationEstimate,
    /// `K₁ = 1`, `K₂ = 1e-6` held fixed.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    AdaMo { beta: f64 },
    AdaRmsProp { beta: f64, eps: f64 },
    AutoAdam { beta1: f64, beta2: f64, eps: f64, k2_feed: K2Feed },
}

impl OptimizerKind {
    pub fn adamo() -> Self {
        OptimizerKind::AdaMo { beta: 0.9 }
    }

    pub fn adarmsprop() -> Self {
        OptimizerKind::AdaRmsProp {
            beta: 0.9,
            eps: DEFAULT_EPS,
        }
    }

    pub fn autoadam() -> Self {
        OptimizerKind::AutoAdam {
            beta1: 0.9,
            beta2: 0.999,
            eps: DEFAULT_EPS,
            k2_feed: K2Feed::Literal,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::AdaMo { .. } => "adamo",
            OptimizerKind::AdaRmsProp { .. } => "adarmsprop",
            OptimizerKind::AutoAdam { .. } => "autoadam",
        }
    }

    fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        let ok = match *self {
            OptimizerKind::Sgd => true,
            OptimizerKind::AdaMo { beta } => beta_ok(beta),
            OptimizerKind::AdaRmsProp { beta, eps } => beta_ok(beta) && eps > 0.0,
            OptimizerKind::AutoAdam { beta1, beta2, eps, .. } => beta_ok(beta1) && beta_ok(beta2) && eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer hyperparameters {self:?}")))
        }
    }
}

/// What the `t` in the `1 - βᵗ` divisor counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCorrection {
    #[default]
    Off,
    Epoch,
    Step,
}

/// One exponentially weighted average `x ← βx + (1-β)g`.
pub fn ewa(prev: f64, beta: f64, value: f64) -> f64 {
    beta * prev + (1.0 - beta) * value
}

/// `((k-1)² / (k² m²)) K_z² + λ² max‖w‖²`.
pub fn k2_estimate(k: usize, m: usize, kz: f64, lambda: f64, max_w: f64) -> f64 {
    let (k, m) = (k as f64, m as f64);
    (k - 1.0).powi(2) / (k * k * m * m) * kz * kz + lambda * lambda * max_w * max_w
}

/// Inputs to the class-count `K₂` estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct K2Inputs {
    pub kz: f64,
    pub k: usize,
    pub m: usize,
    pub lambda: f64,
    pub max_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    /// EWA of gradients.
    pub v: Vec<Vec<f64>>,
    /// EWA of squared gradients.
    pub s: Vec<Vec<f64>>,
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub step_count: u64,
    /// 1-based number of the epoch in progress, 0 before the first.
    pub epoch: u64,
    pub bias_correction: BiasCorrection,
    /// AdaMo: rate used throughout epoch 1. RMSprop: fallback rate for epoch 1.
    pub first_epoch_lr: Option<f64>,
    /// Set once the RMSprop fallback has been used.
    pub fallback_applied: bool,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        let first_epoch_lr = match kind {
            OptimizerKind::AdaMo { .. } => Some(ADAMO_FIRST_EPOCH_LR),
            OptimizerKind::AdaRmsProp { .. } => Some(RMSPROP_FALLBACK_LR),
            _ => None,
        };
        let (k1, k2) = match kind {
            OptimizerKind::AutoAdam {
                k2_feed: K2Feed::Fixed, ..
            } => (AUTOADAM_FIXED_K1, AUTOADAM_FIXED_K2),
            _ => (0.0, 0.0),
        };
        Ok(OptimizerState {
            kind,
            v: Vec::new(),
            s: Vec::new(),
            k: 0.0,
            k1,
            k2,
            step_count: 0,
            epoch: 0,
            bias_correction: BiasCorrection::Off,
            first_epoch_lr,
            fallback_applied: false,
        })
    }

    pub fn with_bias_correction(mut self, mode: BiasCorrection) -> Self {
        self.bias_correction = mode;
        self
    }

    pub fn with_first_epoch_lr(mut self, lr: Option<f64>) -> Self {
        self.first_epoch_lr = lr;
        self
    }

    pub fn begin_epoch(&mut self) {
        self.epoch += 1;
    }

    fn in_first_epoch(&self) -> bool {
        self.epoch <= 1
    }

    /// `1 - βᵗ`, or 1 without bias correction.
    pub fn correction(&self, beta: f64) -> f64 {
        let t = match self.bias_correction {
            BiasCorrection::Off => return 1.0,
            BiasCorrection::Epoch => self.epoch.max(1),
            BiasCorrection::Step => self.step_count.max(1),
        };
        1.0 - beta.powi(t.min(i32::MAX as u64) as i32)
    }

    fn ensure_buffers(&mut self, g: &impl Parameters, squares: bool) {
        let shape = |bufs: &Vec<Vec<f64>>| bufs.iter().map(Vec::len).collect::<Vec<_>>();
        let want: Vec<usize> = g.tensors().iter().map(|t| t.len()).collect();
        if shape(&self.v) != want {
            self.v = want.iter().map(|&n| vec![0.0; n]).collect();
        }
        if squares && shape(&self.s) != want {
            self.s = want.iter().map(|&n| vec![0.0; n]).collect();
        }
    }

    fn update_v(&mut self, g: &impl Parameters, beta: f64) {
        for (v, t) in self.v.iter_mut().zip(g.tensors()) {
            for (vi, gi) in v.iter_mut().zip(t) {
                *vi = ewa(*vi, beta, *gi);
            }
        }
    }

    fn update_s(&mut self, g: &impl Parameters, beta: f64) {
        for (s, t) in self.s.iter_mut().zip(g.tensors()) {
            for (si, gi) in s.iter_mut().zip(t) {
                *si = ewa(*si, beta, gi * gi);
            }
        }
    }
}

/// `w ← w - α g` with `α = 1/L`. Returns the rate used.
pub fn sgd_step(params: &mut impl Parameters, grads: &impl Parameters, est: &LipschitzEstimate) -> Result<f64> {
    if !(est.alpha > 0.0) || !est.alpha.is_finite() {
        return Err(Error::InvalidBound(format!("learning rate {} is not positive and finite", est.alpha)));
    }
    sgd_step_with_lr(params, grads, est.alpha)?;
    Ok(est.alpha)
}

/// `w ← w - lr g`.
pub fn sgd_step_with_lr(params: &mut impl Parameters, grads: &impl Parameters, lr: f64) -> Result<()> {
    check_shapes(params, grads)?;
    check_finite(grads)?;
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (w, d) in p.iter_mut().zip(g) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// AdaMo: momentum with the rate `1/K`, `K` an average of `max‖g‖`.
/// Returns the effective rate.
pub fn adamo_step(state: &mut OptimizerState, params: &mut impl Parameters, grads: &impl Parameters) -> Result<f64> {
    let OptimizerKind::AdaMo { beta } = state.kind else {
        return Err(Error::Config("adamo_step needs an AdaMo state".into()));
    };
    check_shapes(params, grads)?;
    check_finite(grads)?;
    state.ensure_buffers(grads, false);
    state.step_count += 1;
    state.update_v(grads, beta);
    state.k = ewa(state.k, beta, max_tensor_norm(grads));

    let c = state.correction(beta);
    let lr = match state.first_epoch_lr {
        Some(x) if state.in_first_epoch() => x,
        _ => {
            let k_hat = state.k / c;
            if k_hat == 0.0 {
                return Err(Error::DegenerateGradient("AdaMo K is zero".into()));
            }
            1.0 / k_hat
        }
    };
    for (p, v) in params.tensors_mut().into_iter().zip(&state.v) {
        for (w, vi) in p.iter_mut().zip(v) {
            *w -= lr * (vi / c);
        }
    }
    Ok(lr)
}

/// RMSprop whose step size is `(√K + ε) / max‖g‖`, `K` an average of
/// `max‖g²‖`. Returns that step size.
pub fn adarmsprop_step(
    state: &mut OptimizerState,
    params: &mut impl Parameters,
    grads: &impl Parameters,
) -> Result<f64> {
    let OptimizerKind::AdaRmsProp { beta, eps } = state.kind else {
        return Err(Error::Config("adarmsprop_step needs an AdaRmsProp state".into()));
    };
    check_shapes(params, grads)?;
    check_finite(grads)?;
    state.ensure_buffers(grads, true);
    state.step_count += 1;
    state.update_s(grads, beta);
    state.k = ewa(state.k, beta, max_squared_tensor_norm(grads));
    let g_max = max_tensor_norm(grads);
    if g_max == 0.0 {
        return Err(Error::DegenerateGradient("RMSprop gradient is zero".into()));
    }
    let c = state.correction(beta);
    let mut lr = ((state.k / c).sqrt() + eps) / g_max;
    if let Some(fallback) = state.first_epoch_lr {
        if state.in_first_epoch() && lr > RMSPROP_FALLBACK_TRIGGER {
            lr = fallback;
            state.fallback_applied = true;
        }
    }
    for ((p, g), s) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&state.s) {
        for ((w, gi), si) in p.iter_mut().zip(g).zip(s) {
            *w -= lr * gi / ((si / c).sqrt() + eps);
        }
    }
    Ok(lr)
}

/// Adam with step size `(√K₂ + ε) / K₁`. `feed` is required for the
/// class-count `K₂` estimate and ignored otherwise. Returns the step size.
pub fn autoadam_step(
    state: &mut OptimizerState,
    params: &mut impl Parameters,
    grads: &impl Parameters,
    feed: Option<&K2Inputs>,
) -> Result<f64> {
    let OptimizerKind::AutoAdam {
        beta1,
        beta2,
        eps,
        k2_feed,
    } = state.kind
    else {
        return Err(Error::Config("autoadam_step needs an AutoAdam state".into()));
    };
    check_shapes(params, grads)?;
    check_finite(grads)?;
    state.ensure_buffers(grads, true);
    state.step_count += 1;
    state.update_v(grads, beta1);
    state.update_s(grads, beta2);

    let (c1, c2) = (state.correction(beta1), state.correction(beta2));
    let (k1, k2) = match k2_feed {
        K2Feed::Fixed => (state.k1, state.k2),
        K2Feed::Literal | K2Feed::ClassificationEstimate => {
            let x2 = match (k2_feed, feed) {
                (K2Feed::Literal, _) => max_squared_tensor_norm(grads),
                (_, Some(f)) => k2_estimate(f.k, f.m, f.kz, f.lambda, f.max_w),
                (_, None) => {
                    return Err(Error::Config(
                        "the class-count K2 estimate needs K_z, k, m, lambda and max_w".into(),
                    ))
                }
            };
            state.k1 = ewa(state.k1, beta1, max_tensor_norm(grads));
            state.k2 = ewa(state.k2, beta2, x2);
            (state.k1 / c1, state.k2 / c2)
        }
    };
    if k1 == 0.0 {
        return Err(Error::DegenerateGradient("Auto-Adam K1 is zero".into()));
    }
    let lr = (k2.sqrt() + eps) / k1;
    for ((p, v), s) in params.tensors_mut().into_iter().zip(&state.v).zip(&state.s) {
        for ((w, vi), si) in p.iter_mut().zip(v).zip(s) {
            *w -= lr * (vi / c1) / ((si / c2).sqrt() + eps);
        }
    }
    Ok(lr)
}

/// Fresh constant for the current weights.
///
/// With `batch_size` set, the data are cut into consecutive full batches of
/// that size and the largest per-batch constant is returned, so `m` is the
/// batch size. The regularization increment uses the current max‖w‖.
pub fn epoch_lr_recompute(
    model: &ModelParams,
    x: &Matrix,
    y: &Matrix,
    spec: &LossSpec,
    k: f64,
    batch_size: Option<usize>,
) -> Result<LipschitzEstimate> {
    let est = base_constant(model, x, y, k, batch_size)?;
    with_weight_regularization(est, &spec.regularization, model.max_weight_norm())
}

/// The unregularized part of [`epoch_lr_recompute`].
pub fn base_constant(
    model: &ModelParams,
    x: &Matrix,
    y: &Matrix,
    k: f64,
    batch_size: Option<usize>,
) -> Result<LipschitzEstimate> {
    let rows = x.rows();
    let bs = batch_size.filter(|&b| b > 0 && b < rows).unwrap_or(rows);
    let n_batches = (rows / bs).max(1);
    let mut best: Option<LipschitzEstimate> = None;
    for b in 0..n_batches {
        let est = if bs == rows {
            model_constant(model, &forward(model, x)?, y, k)?
        } else {
            let idx: Vec<usize> = (b * bs..(b + 1) * bs).collect();
            let yb = y.select_rows(&idx);
            model_constant(model, &forward(model, &x.select_rows(&idx))?, &yb, k)?
        };
        if best.as_ref().is_none_or(|e| est.l > e.l) {
            best = Some(est);
        }
    }
    Ok(best.expect("at least one batch"))
}

/// Adds the regularization increment with weight bound `max_w`; a zero
/// `max_w` contributes nothing.
pub fn with_weight_regularization(est: LipschitzEstimate, reg: &Regularization, max_w: f64) -> Result<LipschitzEstimate> {
    if *reg == Regularization::None || max_w == 0.0 {
        return Ok(est);
    }
    let k = est.ingredients.k;
    let mut out = est.with_regularization(reg, max_w)?;
    out.ingredients.k = k;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrRecord {
    pub epoch: usize,
    pub lr: f64,
    pub kz: f64,
    pub max_w: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Per-epoch learning rates and the quantities behind them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LrTrace {
    pub records: Vec<LrRecord>,
}

impl LrTrace {
    pub fn push(&mut self, record: LrRecord) {
        self.records.push(record);
    }

    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lr).collect()
    }

    /// Every recorded rate is positive and finite.
    pub fn all_valid(&self) -> bool {
        self.records.iter().all(|r| r.lr > 0.0 && r.lr.is_finite())
    }

    /// CSV with columns `epoch,lr,kz,max_w,L`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "lr", "kz", "max_w", "L"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.lr.to_string(),
                r.kz.to_string(),
                r.max_w.to_string(),
                r.l.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<lr trace>", e))?;
        Ok(())
    }
}
