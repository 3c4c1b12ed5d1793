#![allow(dead_code)]

use lipschitz_lr::data::Task;
use lipschitz_lr::lipschitz::{LossSpec, Regularization};
use lipschitz_lr::models::{loss_and_gradients, Activation, Architecture, Gradients, ModelParams};
use lipschitz_lr::{Matrix, Rng};

pub const FD_STEP: f64 = 1e-6;

/// Every trainable scalar of `p`, weights then bias per layer.
pub fn param_slots(p: &mut ModelParams) -> Vec<&mut f64> {
    let mut out = Vec::new();
    for layer in &mut p.layers {
        out.extend(layer.weights.as_mut_slice().iter_mut());
        if let Some(b) = &mut layer.bias {
            out.extend(b.iter_mut());
        }
    }
    out
}

pub fn grad_values(g: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in g.weights.iter().zip(&g.biases) {
        out.extend_from_slice(w.as_slice());
        if let Some(b) = b {
            out.extend_from_slice(b);
        }
    }
    out
}

/// Central-difference gradient of the full loss.
pub fn numeric_gradient(p: &ModelParams, x: &Matrix, y: &Matrix, spec: &LossSpec, h: f64) -> Vec<f64> {
    let n = p.n_params();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = p.clone();
        *param_slots(&mut plus).swap_remove(i) += h;
        let mut minus = p.clone();
        *param_slots(&mut minus).swap_remove(i) -= h;
        let fp = loss_and_gradients(&plus, x, y, spec).unwrap().0;
        let fm = loss_and_gradients(&minus, x, y, spec).unwrap().0;
        out.push((fp - fm) / (2.0 * h));
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|)` over coordinates; coordinates where
/// both values are exactly zero count as agreeing.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// A small labelled problem for `task` with `n` features and `m` rows.
pub fn toy_problem(task: Task, n: usize, m: usize, rng: &mut Rng) -> (Matrix, Matrix, usize) {
    let x = rng.uniform_matrix(m, n, -1.0, 1.0);
    let (y, outputs) = match task {
        Task::Regression => (rng.normal_matrix(m, 1), 1),
        Task::Binary => {
            let v: Vec<f64> = (0..m).map(|i| (i % 2) as f64).collect();
            (Matrix::new(m, 1, v).unwrap(), 1)
        }
        Task::Multiclass => {
            let k = 3;
            let mut y = Matrix::zeros(m, k);
            for i in 0..m {
                y[(i, i % k)] = 1.0;
            }
            (y, k)
        }
    };
    (x, y, outputs)
}

pub struct GradCase {
    pub name: String,
    pub n_params: usize,
    pub max_rel_err: f64,
}

/// Analytic against numeric gradients over 3 tasks, 2 regularizations and
/// 3 architectures, plus Tikhonov on each task.
pub fn gradient_check_cases() -> Vec<GradCase> {
    let mut rng = Rng::new(20240611);
    let mut cases = Vec::new();
    for task in [Task::Regression, Task::Binary, Task::Multiclass] {
        let (x, y, outputs) = toy_problem(task, 3, 7, &mut rng);
        let archs = [
            ("0-hidden", Architecture::classical(task, 3, outputs)),
            ("relu", Architecture::mlp(task, 3, &[4], Activation::ReLU, outputs)),
            ("sigmoid", Architecture::mlp(task, 3, &[4], Activation::Sigmoid, outputs)),
        ];
        for (arch_name, arch) in archs {
            let mut params = arch.init(&mut rng, 0.8).unwrap();
            for layer in &mut params.layers {
                if let Some(b) = &mut layer.bias {
                    for v in b.iter_mut() {
                        *v = rng.uniform(-0.5, 0.5);
                    }
                }
            }
            let n_w = params.n_weights();
            let diag: Vec<f64> = (0..n_w).map(|i| 0.2 + 0.1 * (i % 3) as f64).collect();
            let regs = [
                ("none", Regularization::None),
                ("l2", Regularization::L2(0.3)),
                ("tikhonov", Regularization::Tikhonov(Matrix::from_diagonal(&diag))),
            ];
            for (reg_name, reg) in regs {
                let spec = LossSpec::new(params.loss_kind()).with_regularization(reg);
                let (_, grads, _) = loss_and_gradients(&params, &x, &y, &spec).unwrap();
                let numeric = numeric_gradient(&params, &x, &y, &spec, FD_STEP);
                cases.push(GradCase {
                    name: format!("{task}/{arch_name}/{reg_name}"),
                    n_params: params.n_params(),
                    max_rel_err: max_relative_error(&grad_values(&grads), &numeric),
                });
            }
        }
    }
    cases
}

use lipschitz_lr::optimizers::{
    adamo_step, adarmsprop_step, autoadam_step, max_squared_tensor_norm, max_tensor_norm, BiasCorrection,
    K2Feed, OptimizerKind, OptimizerState,
};

/// `(1-β) Σ_i β^(n-i) x_i`, summed term by term.
pub fn ewa_oracle(xs: &[f64], beta: f64) -> f64 {
    let n = xs.len();
    xs.iter()
        .enumerate()
        .map(|(i, x)| (1.0 - beta) * beta.powi((n - 1 - i) as i32) * x)
        .sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Each optimizer at β = 0 on `w = 1, g = 2`; returns `(name, w')`.
pub fn beta_zero_reductions() -> Vec<(&'static str, f64)> {
    let kinds = [
        ("adamo", OptimizerKind::AdaMo { beta: 0.0 }),
        ("adarmsprop", OptimizerKind::AdaRmsProp { beta: 0.0, eps: 1e-8 }),
        (
            "autoadam",
            OptimizerKind::AutoAdam {
                beta1: 0.0,
                beta2: 0.0,
                eps: 1e-8,
                k2_feed: K2Feed::Literal,
            },
        ),
    ];
    kinds
        .into_iter()
        .map(|(name, kind)| {
            let mut state = OptimizerState::new(kind).unwrap().with_first_epoch_lr(None);
            state.begin_epoch();
            let mut w = vec![1.0];
            let g = vec![2.0];
            match kind {
                OptimizerKind::AdaMo { .. } => adamo_step(&mut state, &mut w, &g).unwrap(),
                OptimizerKind::AdaRmsProp { .. } => adarmsprop_step(&mut state, &mut w, &g).unwrap(),
                _ => autoadam_step(&mut state, &mut w, &g, None).unwrap(),
            };
            (name, w[0])
        })
        .collect()
}

/// Runs every optimizer for `steps` random two-tensor gradients and returns
/// the largest relative gap between its EWA state and the brute-force sums.
pub fn ewa_state_error(seed: u64, steps: usize) -> f64 {
    let mut rng = Rng::new(seed);
    let beta1 = rng.uniform(0.0, 0.99);
    let beta2 = rng.uniform(0.0, 0.999);
    let grads: Vec<Vec<Vec<f64>>> = (0..steps)
        .map(|_| vec![(0..3).map(|_| rng.uniform(-2.0, 2.0)).collect(), (0..2).map(|_| rng.uniform(-2.0, 2.0)).collect()])
        .collect();
    let norms: Vec<f64> = grads.iter().map(max_tensor_norm).collect();
    let sq_norms: Vec<f64> = grads.iter().map(max_squared_tensor_norm).collect();
    let elem = |t: usize, i: usize, sq: bool| -> Vec<f64> {
        grads.iter().map(|g| if sq { g[t][i] * g[t][i] } else { g[t][i] }).collect()
    };

    let mut worst = 0.0f64;
    let kinds = [
        OptimizerKind::AdaMo { beta: beta1 },
        OptimizerKind::AdaRmsProp { beta: beta1, eps: 1e-8 },
        OptimizerKind::AutoAdam {
            beta1,
            beta2,
            eps: 1e-8,
            k2_feed: K2Feed::Literal,
        },
    ];
    for kind in kinds {
        let mut state = OptimizerState::new(kind).unwrap().with_first_epoch_lr(None);
        state.begin_epoch();
        let mut w: Vec<Vec<f64>> = vec![vec![0.0; 3], vec![0.0; 2]];
        for g in &grads {
            match kind {
                OptimizerKind::AdaMo { .. } => adamo_step(&mut state, &mut w, g).unwrap(),
                OptimizerKind::AdaRmsProp { .. } => adarmsprop_step(&mut state, &mut w, g).unwrap(),
                _ => autoadam_step(&mut state, &mut w, g, None).unwrap(),
            };
        }
        let (bv, bs) = match kind {
            OptimizerKind::AdaMo { beta } => {
                worst = worst.max(rel_err(state.k, ewa_oracle(&norms, beta)));
                (Some(beta), None)
            }
            OptimizerKind::AdaRmsProp { beta, .. } => {
                worst = worst.max(rel_err(state.k, ewa_oracle(&sq_norms, beta)));
                (None, Some(beta))
            }
            _ => {
                worst = worst.max(rel_err(state.k1, ewa_oracle(&norms, beta1)));
                worst = worst.max(rel_err(state.k2, ewa_oracle(&sq_norms, beta2)));
                (Some(beta1), Some(beta2))
            }
        };
        for (t, len) in [(0, 3), (1, 2)] {
            for i in 0..len {
                if let Some(b) = bv {
                    worst = worst.max(rel_err(state.v[t][i], ewa_oracle(&elem(t, i, false), b)));
                }
                if let Some(b) = bs {
                    worst = worst.max(rel_err(state.s[t][i], ewa_oracle(&elem(t, i, true), b)));
                }
            }
        }
    }
    worst
}

/// Largest relative gap between the bias-corrected running constant and
/// `c` over `steps` steps of a constant gradient of norm `c`.
pub fn bias_corrected_constant_error(c: f64, beta: f64, steps: usize) -> f64 {
    let mut state = OptimizerState::new(OptimizerKind::AdaMo { beta })
        .unwrap()
        .with_first_epoch_lr(None)
        .with_bias_correction(BiasCorrection::Step);
    state.begin_epoch();
    let mut w = vec![0.0];
    let g = vec![c];
    let mut worst = 0.0f64;
    for _ in 0..steps {
        adamo_step(&mut state, &mut w, &g).unwrap();
        worst = worst.max((state.k / state.correction(beta) - c).abs() / c.abs());
    }
    worst
}
