//! Dense feed-forward models with hand-written forward and backward passes.
//!
//! Linear, logistic and softmax regression are single-layer instances of
//! [`ModelParams`]; an MLP just has more layers. Each layer computes
//! `z = a W + b` with `W` of shape fan_in × fan_out, one row per example.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{argmax, Dataset, Task};
use crate::error::{Error, Result};
use crate::lipschitz::{
    compute_kz, lc_binary, lc_linear_regression, lc_multiclass, lc_nn_regression, LipschitzEstimate, LossKind,
    LossSpec,
};
use crate::numeric::{frobenius_norm, l2, matmul, matmul_nt, matmul_tn, Matrix, Rng};

/// Default half-width of the uniform weight initialization.
pub const DEFAULT_INIT_SCALE: f64 = 0.05;

const FORMAT_HEADER: &str = "lipschitz-lr-params v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    ReLU,
    Sigmoid,
    Softmax,
}

impl Activation {
    /// Output activation matching a task's loss.
    pub fn for_task(task: Task) -> Activation {
        match task {
            Task::Regression => Activation::Linear,
            Task::Binary => Activation::Sigmoid,
            Task::Multiclass => Activation::Softmax,
        }
    }

    fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Linear => z.clone(),
            Activation::ReLU => z.map(|v| v.max(0.0)),
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Elementwise derivative from the pre-activation `z` and activation `a`.
    /// The ReLU derivative at 0 is 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Softmax => unreachable!("softmax is only allowed on the output layer"),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::ReLU => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "identity" => Ok(Activation::Linear),
            "relu" => Ok(Activation::ReLU),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

/// Layer widths (input first) plus one activation per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub bias: bool,
}

impl Architecture {
    /// Single-layer, bias-free model: linear, logistic or softmax regression.
    pub fn classical(task: Task, n_inputs: usize, n_outputs: usize) -> Self {
        Architecture {
            widths: vec![n_inputs, n_outputs],
            activations: vec![Activation::for_task(task)],
            bias: false,
        }
    }

    /// Biased MLP with the given hidden widths.
    pub fn mlp(task: Task, n_inputs: usize, hidden: &[usize], hidden_activation: Activation, n_outputs: usize) -> Self {
        let mut widths = vec![n_inputs];
        widths.extend_from_slice(hidden);
        widths.push(n_outputs);
        let mut activations = vec![hidden_activation; hidden.len()];
        activations.push(Activation::for_task(task));
        Architecture {
            widths,
            activations,
            bias: true,
        }
    }

    pub fn init(&self, rng: &mut Rng, scale: f64) -> Result<ModelParams> {
        init_params(&self.widths, &self.activations, self.bias, rng, scale)
    }
}

/// Weights uniform in `[-scale, scale]`, biases zero (or absent).
pub fn init_params(
    widths: &[usize],
    activations: &[Activation],
    bias: bool,
    rng: &mut Rng,
    scale: f64,
) -> Result<ModelParams> {
    if widths.len() < 2 || activations.len() != widths.len() - 1 {
        return Err(Error::Config(format!(
            "{} widths need {} activations, got {}",
            widths.len(),
            widths.len().saturating_sub(1),
            activations.len()
        )));
    }
    if let Some(w) = widths.iter().position(|&w| w == 0) {
        return Err(Error::Config(format!("layer width {w} is zero")));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!("init scale {scale} must be finite and >= 0")));
    }
    let layers = widths
        .windows(2)
        .zip(activations)
        .map(|(io, &activation)| Layer {
            weights: if scale == 0.0 {
                Matrix::zeros(io[0], io[1])
            } else {
                rng.uniform_matrix(io[0], io[1], -scale, scale)
            },
            bias: bias.then(|| vec![0.0; io[1]]),
            activation,
        })
        .collect();
    let params = ModelParams { layers };
    params.validate()?;
    Ok(params)
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].weights.cols() != pair[1].weights.rows() {
                return Err(Error::Config(format!(
                    "layer {i} outputs {} units but layer {} expects {}",
                    pair[0].weights.cols(),
                    i + 1,
                    pair[1].weights.rows()
                )));
            }
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.activation == Activation::Softmax && i != last {
                return Err(Error::Config("softmax is only allowed on the output layer".into()));
            }
            if let Some(b) = &layer.bias {
                if b.len() != layer.weights.cols() {
                    return Err(Error::Config(format!("layer {i} bias has the wrong length")));
                }
            }
        }
        if self.output_activation() == Activation::Softmax && self.n_outputs() < 2 {
            return Err(Error::Config("softmax output needs at least 2 units".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.cols()
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    /// The loss this model's output activation pairs with.
    pub fn loss_kind(&self) -> LossKind {
        match self.output_activation() {
            Activation::Sigmoid => LossKind::BinaryCrossEntropy,
            Activation::Softmax => LossKind::MulticlassCrossEntropy,
            Activation::Linear | Activation::ReLU => LossKind::LeastSquares,
        }
    }

    /// Number of weight entries, biases excluded.
    pub fn n_weights(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len()).sum()
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + self.layers.iter().filter_map(|l| l.bias.as_ref()).map(Vec::len).sum::<usize>()
    }

    /// All weights concatenated layer by layer, biases excluded.
    pub fn flat_weights(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.as_slice().iter().copied()).collect()
    }

    pub fn set_flat_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_weights() {
            return Err(Error::Dimension(format!("{} weights for a model with {}", w.len(), self.n_weights())));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let dst = layer.weights.as_mut_slice();
            dst.copy_from_slice(&w[offset..offset + dst.len()]);
            offset += dst.len();
        }
        Ok(())
    }

    /// Largest Frobenius norm of any layer's weight matrix.
    pub fn max_weight_norm(&self) -> f64 {
        self.layers.iter().map(|l| l2(l.weights.as_slice())).fold(0.0, f64::max)
    }

    /// FNV-1a hash over shapes, activations and the bit patterns of every value.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for layer in &self.layers {
            eat(layer.weights.rows() as u64);
            eat(layer.weights.cols() as u64);
            eat(layer.activation as u64);
            for v in layer.weights.as_slice() {
                eat(v.to_bits());
            }
            if let Some(b) = &layer.bias {
                eat(u64::MAX);
                for v in b {
                    eat(v.to_bits());
                }
            }
        }
        h
    }

    /// Versioned plain-text form; see the crate README for the layout.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let mut out = format!("{FORMAT_HEADER}\nlayers {}\n", self.layers.len());
        for layer in &self.layers {
            out += &format!(
                "layer {} {} {} {}\nw {}\n",
                layer.weights.rows(),
                layer.weights.cols(),
                layer.activation,
                u8::from(layer.bias.is_some()),
                join(layer.weights.as_slice())
            );
            if let Some(b) = &layer.bias {
                out += &format!("b {}\n", join(b));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                row: 0,
                message: format!("unexpected end of parameter file, expected {what}"),
            })
        };
        let (row, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(Error::Parse {
                row,
                message: format!("unsupported parameter format `{header}`"),
            });
        }
        let bad = |row: usize, message: &str| Error::Parse {
            row,
            message: message.to_string(),
        };
        let (row, count) = next("layer count")?;
        let n: usize = count
            .strip_prefix("layers ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(row, "expected `layers <n>`"))?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let (row, spec) = next("layer header")?;
            let parts: Vec<&str> = spec.split_whitespace().collect();
            let [tag, r, c, act, has_bias] = parts[..] else {
                return Err(bad(row, "expected `layer <rows> <cols> <activation> <bias>`"));
            };
            if tag != "layer" {
                return Err(bad(row, "expected `layer`"));
            }
            let r: usize = r.parse().map_err(|_| bad(row, "bad row count"))?;
            let c: usize = c.parse().map_err(|_| bad(row, "bad column count"))?;
            let activation: Activation = act.parse()?;
            let mut values = |prefix: &str, len: usize| -> Result<Vec<f64>> {
                let (row, line) = next(prefix)?;
                let body = line
                    .strip_prefix(prefix)
                    .ok_or_else(|| bad(row, &format!("expected `{prefix}` line")))?;
                let xs = body
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(row, &format!("bad number `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if xs.len() != len {
                    return Err(bad(row, &format!("expected {len} values, found {}", xs.len())));
                }
                Ok(xs)
            };
            let weights = Matrix::new(r, c, values("w", r * c)?)?;
            let bias = match has_bias {
                "1" => Some(values("b", c)?),
                "0" => None,
                _ => return Err(bad(row, "bias flag must be 0 or 1")),
            };
            layers.push(Layer {
                weights,
                bias,
                activation,
            });
        }
        let params = ModelParams { layers };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `z` of layers 1..=L.
    pub pre_activations: Vec<Matrix>,
    /// `a` of layers 0..=L; entry 0 is the input batch.
    pub activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        &self.activations[self.activations.len() - 1]
    }

    /// Input to the output layer.
    pub fn penultimate(&self) -> &Matrix {
        &self.activations[self.activations.len() - 2]
    }
}

pub fn forward(params: &ModelParams, batch: &Matrix) -> Result<ForwardTrace> {
    if batch.cols() != params.n_inputs() {
        return Err(Error::Dimension(format!(
            "batch has {} columns, model expects {}",
            batch.cols(),
            params.n_inputs()
        )));
    }
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    activations.push(batch.clone());
    for layer in &params.layers {
        let mut z = matmul(&activations[activations.len() - 1], &layer.weights)?;
        if let Some(b) = &layer.bias {
            z.add_row_vector(b);
        }
        activations.push(layer.activation.apply(&z));
        pre_activations.push(z);
    }
    Ok(ForwardTrace {
        pre_activations,
        activations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Norm of the weight gradients taken as one vector, biases excluded.
    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(Matrix::sum_squares).sum::<f64>().sqrt()
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|w| w.as_slice().iter().copied()).collect()
    }
}

/// Exact gradient of [`crate::lipschitz::loss_value`] (regularization
/// included) with respect to every weight and bias.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    targets: &Matrix,
    spec: &LossSpec,
    m: usize,
) -> Result<Gradients> {
    if spec.kind != params.loss_kind() {
        return Err(Error::Config(format!(
            "{} output does not pair with {} loss",
            params.output_activation(),
            spec.kind
        )));
    }
    if targets.shape() != trace.output().shape() {
        return Err(Error::Config(format!(
            "targets {:?} do not match model outputs {:?}",
            targets.shape(),
            trace.output().shape()
        )));
    }
    if m == 0 {
        return Err(Error::Dimension("batch size m must be at least 1".into()));
    }
    let n = params.layers.len();
    let mut weights = vec![Matrix::zeros(0, 0); n];
    let mut biases = vec![None; n];

    // All three matched output/loss pairs share the delta (a - y) / m.
    let mut delta = trace.output().sub(targets)?.scale(1.0 / m as f64);
    for l in (0..n).rev() {
        weights[l] = matmul_tn(&trace.activations[l], &delta)?;
        if params.layers[l].bias.is_some() {
            biases[l] = Some(delta.column_sums());
        }
        if l > 0 {
            let mut back = matmul_nt(&delta, &params.layers[l].weights)?;
            let act = params.layers[l - 1].activation;
            let (z, a) = (&trace.pre_activations[l - 1], &trace.activations[l]);
            for ((d, &zv), &av) in back.as_mut_slice().iter_mut().zip(z.as_slice()).zip(a.as_slice()) {
                *d *= act.derivative(zv, av);
            }
            delta = back;
        }
    }

    let mut grads = Gradients { weights, biases };
    if spec.regularization != crate::lipschitz::Regularization::None {
        let reg = spec.regularization.penalty_gradient(&params.flat_weights())?;
        let mut offset = 0;
        for w in &mut grads.weights {
            for v in w.as_mut_slice() {
                *v += reg[offset];
                offset += 1;
            }
        }
    }
    Ok(grads)
}

/// Predictions, loss and gradients for one batch.
pub fn loss_and_gradients(
    params: &ModelParams,
    x: &Matrix,
    y: &Matrix,
    spec: &LossSpec,
) -> Result<(f64, Gradients, ForwardTrace)> {
    let trace = forward(params, x)?;
    let loss = crate::lipschitz::loss_value(spec, trace.output(), y, &params.flat_weights(), x.rows())?;
    let grads = backward(params, &trace, y, spec, x.rows())?;
    Ok((loss, grads, trace))
}

/// Penultimate-activation bound. With an output bias the activations are
/// augmented by a column of ones, since `aW + b = [a, 1][W; b]`.
pub fn penultimate_kz(params: &ModelParams, trace: &ForwardTrace) -> Result<f64> {
    let a = trace.penultimate();
    if params.layers[params.layers.len() - 1].bias.is_some() {
        compute_kz(&a.with_constant_column(1.0))
    } else {
        compute_kz(a)
    }
}

/// Closed-form constant for this model on one batch.
///
/// Zero-hidden-layer regression uses the linear-regression constant with
/// weight bound `k`; deeper regression models use the network constant with
/// the current output norm as `K_a`.
pub fn model_constant(
    params: &ModelParams,
    trace: &ForwardTrace,
    targets: &Matrix,
    k: f64,
) -> Result<LipschitzEstimate> {
    let m = trace.output().rows();
    let kz = penultimate_kz(params, trace)?;
    if kz == 0.0 {
        return Err(Error::ZeroActivations);
    }
    match params.loss_kind() {
        LossKind::BinaryCrossEntropy => lc_binary(kz, m),
        LossKind::MulticlassCrossEntropy => lc_multiclass(kz, params.n_outputs(), m),
        LossKind::LeastSquares if params.n_hidden_layers() == 0 && params.layers[0].bias.is_none() => {
            lc_linear_regression(trace.penultimate(), targets.as_slice(), k, m)
        }
        LossKind::LeastSquares => {
            let ka = frobenius_norm(trace.output())?;
            if ka == 0.0 {
                return Err(Error::ZeroActivations);
            }
            lc_nn_regression(ka, targets.as_slice(), kz, m)
        }
    }
}

/// Fraction of correctly classified rows.
pub fn accuracy(params: &ModelParams, dataset: &Dataset) -> Result<f64> {
    let classes = dataset
        .class_indices()
        .ok_or_else(|| Error::UnsupportedMetric("accuracy is undefined for regression".into()))?;
    if classes.is_empty() {
        return Err(Error::Dimension("accuracy of an empty dataset".into()));
    }
    let out = forward(params, dataset.features())?.activations.pop().expect("at least one layer");
    Ok(classification_accuracy(&out, &classes))
}

/// Accuracy of model outputs against class indices. A single output column
/// is a probability thresholded at 0.5; otherwise the argmax wins.
pub fn classification_accuracy(outputs: &Matrix, classes: &[usize]) -> f64 {
    let correct = (0..outputs.rows())
        .filter(|&r| {
            let predicted = if outputs.cols() == 1 {
                usize::from(outputs[(r, 0)] >= 0.5)
            } else {
                argmax(outputs.row(r))
            };
            predicted == classes[r]
        })
        .count();
    correct as f64 / classes.len() as f64
}

/// Outcome of [`grad_sup_bound_check`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradSupReport {
    pub samples: usize,
    /// Largest weight-gradient norm seen, all layers together.
    pub max_grad_norm: f64,
    pub max_last_layer_norm: f64,
    /// Largest single-layer weight-gradient norm.
    pub max_any_layer_norm: f64,
    /// Largest ratio of gradient norm to that draw's constant.
    pub max_ratio: f64,
    /// Constant for the first draw (for classical models it does not vary).
    pub l: f64,
    /// Draws whose gradient norm exceeded their constant.
    pub bound_violations: usize,
    /// Draws where some hidden layer's gradient exceeded the last layer's.
    pub dominance_violations: usize,
}

/// Samples weight vectors uniformly from the ball of radius `radius` and
/// compares each weight-gradient norm with the closed-form constant.
pub fn grad_sup_bound_check(
    params: &ModelParams,
    dataset: &Dataset,
    spec: &LossSpec,
    samples: usize,
    radius: f64,
    rng: &mut Rng,
) -> Result<GradSupReport> {
    let mut model = params.clone();
    let x = dataset.features();
    let y = dataset.target_matrix();
    let mut report = GradSupReport {
        samples,
        ..Default::default()
    };
    for s in 0..samples {
        model.set_flat_weights(&rng.in_ball(model.n_weights(), radius))?;
        let (_, grads, trace) = loss_and_gradients(&model, x, &y, spec)?;
        let est = model_constant(&model, &trace, &y, radius)?
            .with_regularization(&spec.regularization, radius)?;
        if s == 0 {
            report.l = est.l;
        }
        let norm = grads.weight_norm();
        let layer_norms: Vec<f64> = grads.weights.iter().map(|w| l2(w.as_slice())).collect();
        let last = layer_norms[layer_norms.len() - 1];
        let any = layer_norms.iter().copied().fold(0.0, f64::max);
        report.max_grad_norm = report.max_grad_norm.max(norm);
        report.max_last_layer_norm = report.max_last_layer_norm.max(last);
        report.max_any_layer_norm = report.max_any_layer_norm.max(any);
        report.max_ratio = report.max_ratio.max(norm / est.l);
        if norm > est.l {
            report.bound_violations += 1;
        }
        if any > last {
            report.dominance_violations += 1;
        }
    }
    Ok(report)
}
