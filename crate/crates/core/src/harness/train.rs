use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, FirstEpoch, LrPolicy, RegConfig, Recompute};
use crate::data::{self, bundled, CsvSchema, Dataset, ScalingMode, Task};
use crate::error::{Error, Result};
use crate::lipschitz::{loss_value, LipschitzEstimate, LossSpec, Regularization};
use crate::models::{
    accuracy, backward, classification_accuracy, forward, loss_and_gradients, model_constant, Architecture,
    ForwardTrace, Gradients, ModelParams,
};
use crate::numeric::{Matrix, Rng};
use crate::optimizers::{
    adamo_step, adarmsprop_step, autoadam_step, base_constant, sgd_step, sgd_step_with_lr, with_weight_regularization,
    K2Feed, K2Inputs, LrRecord, LrTrace, OptimizerKind, OptimizerState,
};

const SPLIT_STREAM: u64 = 0;
const INIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const SHUFFLE_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// Data after loading, cleaning, scaling and splitting.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    /// Weight bound K used by the regression constant.
    pub k_bound: f64,
    pub dropped_columns: Vec<String>,
}

pub fn load_source(source: &DataSource, task: Task) -> Result<Dataset> {
    let ds = match source {
        DataSource::Bundled { name } => {
            bundled::by_name(name).ok_or_else(|| Error::Config(format!("no bundled dataset named `{name}`")))?
        }
        DataSource::Csv {
            path,
            target,
            has_header,
        } => {
            let schema = CsvSchema {
                target: DataSource::target_column(target),
                has_header: *has_header,
                task,
            };
            data::load_csv(path, &schema)?
        }
    };
    if ds.task() != task {
        return Err(Error::Config(format!("dataset is {} but the task is {task}", ds.task())));
    }
    Ok(ds)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut ds = load_source(&cfg.data, cfg.task)?;
    let mut dropped_columns = Vec::new();
    if cfg.drop_degenerate && cfg.scaling == ScalingMode::SumToOne {
        let bad = ds.degenerate_columns();
        dropped_columns = bad.iter().map(|&j| ds.feature_names()[j].clone()).collect();
        ds = ds.drop_columns(&bad);
    }
    let (ds, _) = data::scale_with(&ds, cfg.scaling)?;
    let (train, validation) = match cfg.split {
        Some(f) if f < 1.0 => {
            let (a, b) = data::train_validation_split(&ds, f, &mut Rng::new(cfg.seed ^ SPLIT_STREAM))?;
            (a, Some(b))
        }
        _ => (ds, None),
    };
    if train.n_examples() == 0 {
        return Err(Error::Dimension("training split is empty".into()));
    }
    let k_bound = match cfg.weight_bound {
        Some(k) => k,
        None => data::estimate_k_bound(train.features())?,
    };
    Ok(Prepared {
        train,
        validation,
        k_bound,
        dropped_columns,
    })
}

pub fn architecture(cfg: &ExperimentConfig, prepared: &Prepared) -> Architecture {
    let (n_in, n_out) = (prepared.train.n_features(), prepared.train.n_outputs());
    if cfg.hidden.is_empty() {
        Architecture::classical(cfg.task, n_in, n_out)
    } else {
        Architecture::mlp(cfg.task, n_in, &cfg.hidden, cfg.hidden_activation, n_out)
    }
}

/// Seeded initial weights; both arms of a comparison start from these.
pub fn initial_params(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<ModelParams> {
    architecture(cfg, prepared).init(&mut Rng::new(cfg.seed ^ INIT_STREAM), cfg.init_scale)
}

pub fn loss_spec(cfg: &ExperimentConfig, model: &ModelParams) -> Result<LossSpec> {
    let n = model.n_weights();
    let regularization = match &cfg.regularization {
        RegConfig::None => Regularization::None,
        RegConfig::L2(l) => Regularization::L2(*l),
        RegConfig::TikhonovScaledIdentity(s) => Regularization::Tikhonov(Matrix::identity(n).scale(*s)),
        RegConfig::TikhonovDiagonal(d) => Regularization::Tikhonov(Matrix::from_diagonal(d)),
    };
    regularization.validate(Some(n))?;
    Ok(LossSpec::new(model.loss_kind()).with_regularization(regularization))
}

/// One row of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub lr: f64,
    pub kz: f64,
    pub max_w: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    pub init_checksum: u64,
    pub initial_loss: f64,
    pub initial_train_acc: f64,
    pub initial_val_acc: f64,
    /// Recorded epochs only (see `record_every`).
    pub metrics: Vec<EpochMetrics>,
    pub lr_trace: LrTrace,
    pub epochs_run: usize,
    pub iterations: u64,
    /// Set when a loss threshold was configured and reached.
    pub epochs_to_threshold: Option<usize>,
    /// A threshold was configured but not reached within the budget.
    pub censored: bool,
    pub final_loss: f64,
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    /// Whether the RMSprop first-epoch fallback was used.
    pub fallback_applied: bool,
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub final_params: Option<ModelParams>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.loss).collect()
    }
}

/// Called after every optimizer step with the step count and parameters.
pub type StepObserver<'a> = dyn FnMut(u64, &ModelParams) -> Result<()> + 'a;

pub fn train(cfg: &ExperimentConfig, prepared: &Prepared, init: &ModelParams) -> Result<TrainReport> {
    train_with_observer(cfg, prepared, init, &mut |_, _| Ok(()))
}

/// Constant of the current epoch. For classical models the unregularized
/// part does not depend on the weights and is computed once.
struct EpochConstant {
    cached: Option<LipschitzEstimate>,
}

impl EpochConstant {
    fn at(&mut self, params: &ModelParams, cfg: &ExperimentConfig, prepared: &Prepared, y: &Matrix, spec: &LossSpec) -> Result<LipschitzEstimate> {
        let x = prepared.train.features();
        let base = match &self.cached {
            Some(e) => e.clone(),
            None => {
                let e = base_constant(params, x, y, prepared.k_bound, cfg.batch_size)?;
                if params.n_hidden_layers() == 0 && params.layers[0].bias.is_none() {
                    self.cached = Some(e.clone());
                }
                e
            }
        };
        with_weight_regularization(base, &spec.regularization, params.max_weight_norm())
    }
}

struct Stepper<'a> {
    cfg: &'a ExperimentConfig,
    state: Option<OptimizerState>,
    n_classes: usize,
}

impl Stepper<'_> {
    fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &Gradients,
        est: Option<&LipschitzEstimate>,
        m: usize,
    ) -> Result<f64> {
        let need = |est: Option<&LipschitzEstimate>| -> Result<LipschitzEstimate> {
            est.cloned()
                .ok_or_else(|| Error::Config("this optimizer needs the Lipschitz constant, which is unavailable".into()))
        };
        match (&mut self.state, self.cfg.lr_policy) {
            (None, LrPolicy::Fixed(a)) => {
                sgd_step_with_lr(params, grads, a)?;
                Ok(a)
            }
            (None, LrPolicy::LipschitzAdaptive) => sgd_step(params, grads, &need(est)?),
            (Some(state), _) => match state.kind {
                OptimizerKind::AdaMo { .. } => adamo_step(state, params, grads),
                OptimizerKind::AdaRmsProp { .. } => adarmsprop_step(state, params, grads),
                OptimizerKind::AutoAdam { k2_feed, .. } => {
                    let feed = match k2_feed {
                        K2Feed::ClassificationEstimate => {
                            let e = need(est)?;
                            if self.n_classes < 2 {
                                return Err(Error::Config(
                                    "the class-count K2 estimate needs a classification task".into(),
                                ));
                            }
                            Some(K2Inputs {
                                kz: e.ingredients.kz.unwrap_or(0.0),
                                k: self.n_classes,
                                m,
                                lambda: self.cfg.regularization.l2_lambda(),
                                max_w: params.max_weight_norm(),
                            })
                        }
                        _ => None,
                    };
                    autoadam_step(state, params, grads, feed.as_ref())
                }
                OptimizerKind::Sgd => unreachable!("plain SGD keeps no state"),
            },
        }
    }

    fn needs_constant(&self) -> bool {
        match (&self.state, self.cfg.lr_policy) {
            (None, LrPolicy::LipschitzAdaptive) => true,
            (Some(s), _) => matches!(
                s.kind,
                OptimizerKind::AutoAdam {
                    k2_feed: K2Feed::ClassificationEstimate,
                    ..
                }
            ),
            _ => false,
        }
    }
}

fn accuracy_of(trace: &ForwardTrace, classes: Option<&[usize]>) -> f64 {
    classes.map_or(f64::NAN, |c| classification_accuracy(trace.output(), c))
}

fn finite_loss(loss: f64, epoch: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Divergence(format!("loss became {loss} in epoch {epoch}")))
    }
}

/// Trains one arm from `init`.
pub fn train_with_observer(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    init: &ModelParams,
    observer: &mut StepObserver<'_>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = loss_spec(cfg, init)?;
    let x = prepared.train.features();
    let y = prepared.train.target_matrix();
    let classes = prepared.train.class_indices();
    let m = x.rows();
    let batch = cfg.batch_size.filter(|&b| b < m);
    let val_acc = |p: &ModelParams| -> Result<f64> {
        match (&prepared.validation, cfg.task) {
            (Some(v), Task::Binary | Task::Multiclass) if v.n_examples() > 0 => accuracy(p, v),
            _ => Ok(f64::NAN),
        }
    };

    let state = match cfg.optimizer {
        OptimizerKind::Sgd => None,
        kind => {
            let s = OptimizerState::new(kind)?.with_bias_correction(cfg.bias_correction);
            Some(match cfg.first_epoch {
                FirstEpoch::Default => s,
                FirstEpoch::Disabled => s.with_first_epoch_lr(None),
                FirstEpoch::Rate(r) => s.with_first_epoch_lr(Some(r)),
            })
        }
    };
    let mut stepper = Stepper {
        cfg,
        state,
        n_classes: prepared.train.n_classes(),
    };
    let needs_constant = stepper.needs_constant();
    let mut constant = EpochConstant { cached: None };
    let mut shuffle = Rng::new(cfg.seed ^ SHUFFLE_STREAM);

    let mut params = init.clone();
    let (loss0, grads0, trace0) = loss_and_gradients(&params, x, &y, &spec)?;
    let loss0 = finite_loss(loss0, 0)?;
    let mut report = TrainReport {
        label: cfg.run_label(),
        init_checksum: init.checksum(),
        initial_loss: loss0,
        initial_train_acc: accuracy_of(&trace0, classes.as_deref()),
        initial_val_acc: val_acc(&params)?,
        metrics: Vec::new(),
        lr_trace: LrTrace::default(),
        epochs_run: 0,
        iterations: 0,
        epochs_to_threshold: None,
        censored: false,
        final_loss: loss0,
        final_train_acc: f64::NAN,
        final_val_acc: f64::NAN,
        fallback_applied: false,
        wall_time_secs: 0.0,
        final_params: None,
    };
    report.final_train_acc = report.initial_train_acc;
    report.final_val_acc = report.initial_val_acc;

    let reached = |loss: f64| cfg.loss_threshold.is_some_and(|t| loss <= t);
    if reached(loss0) {
        report.epochs_to_threshold = Some(0);
    }
    let mut pending = batch.is_none().then_some(grads0);

    let mut epoch = 0;
    while report.epochs_to_threshold.is_none() && epoch < cfg.epochs {
        if report.iterations >= cfg.max_iterations {
            break;
        }
        epoch += 1;
        if let Some(s) = &mut stepper.state {
            s.begin_epoch();
        }
        let max_w = params.max_weight_norm();
        let est = match constant.at(&params, cfg, prepared, &y, &spec) {
            Ok(e) => Some(e),
            Err(e) if needs_constant => return Err(e),
            Err(_) => None,
        };

        let mut lr = f64::NAN;
        match batch {
            None => {
                let g = pending.take().expect("full-batch gradient computed after each epoch");
                lr = stepper.step(&mut params, &g, est.as_ref(), m)?;
                report.iterations += 1;
                observer(report.iterations, &params)?;
            }
            Some(bs) => {
                let order = shuffle.permutation(m);
                for chunk in order.chunks(bs) {
                    if report.iterations >= cfg.max_iterations {
                        break;
                    }
                    let xb = x.select_rows(chunk);
                    let yb = y.select_rows(chunk);
                    let trace = forward(&params, &xb)?;
                    let g = backward(&params, &trace, &yb, &spec, chunk.len())?;
                    let step_est = match cfg.recompute {
                        Recompute::Epoch => est.clone(),
                        Recompute::Step => {
                            let e = model_constant(&params, &trace, &yb, prepared.k_bound).and_then(|e| {
                                with_weight_regularization(e, &spec.regularization, params.max_weight_norm())
                            });
                            match e {
                                Ok(e) => Some(e),
                                Err(e) if needs_constant => return Err(e),
                                Err(_) => None,
                            }
                        }
                    };
                    lr = stepper.step(&mut params, &g, step_est.as_ref(), chunk.len())?;
                    report.iterations += 1;
                    observer(report.iterations, &params)?;
                }
            }
        }

        let (loss, trace) = if batch.is_none() {
            let (loss, g, trace) = loss_and_gradients(&params, x, &y, &spec)?;
            pending = Some(g);
            (loss, trace)
        } else {
            let trace = forward(&params, x)?;
            let loss = loss_value(&spec, trace.output(), &y, &params.flat_weights(), m)?;
            (loss, trace)
        };
        let loss = finite_loss(loss, epoch)?;
        report.final_loss = loss;
        report.epochs_run = epoch;
        let hit = reached(loss);
        if hit {
            report.epochs_to_threshold = Some(epoch);
        }
        let last = hit || epoch == cfg.epochs || report.iterations >= cfg.max_iterations;
        if epoch % cfg.record_every == 0 || last {
            let row = EpochMetrics {
                epoch,
                loss,
                train_acc: accuracy_of(&trace, classes.as_deref()),
                val_acc: val_acc(&params)?,
                lr,
                kz: est.as_ref().and_then(|e| e.ingredients.kz).unwrap_or(f64::NAN),
                max_w,
                l: est.as_ref().map_or(f64::NAN, |e| e.l),
            };
            report.final_train_acc = row.train_acc;
            report.final_val_acc = row.val_acc;
            report.lr_trace.push(LrRecord {
                epoch,
                lr: row.lr,
                kz: row.kz,
                max_w: row.max_w,
                l: row.l,
            });
            report.metrics.push(row);
        }
    }

    report.censored = cfg.loss_threshold.is_some() && report.epochs_to_threshold.is_none();
    report.fallback_applied = stepper.state.as_ref().is_some_and(|s| s.fallback_applied);
    report.wall_time_secs = started.elapsed().as_secs_f64();
    report.final_params = Some(params);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    Threshold,
    Accuracy,
}

/// Both arms of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub mode: CompareMode,
    pub fixed_lr: f64,
    pub init_checksum: u64,
    pub fixed: TrainReport,
    pub adaptive: TrainReport,
}

impl PairedReport {
    /// `E_fixed / E_adaptive`; a censored fixed arm gives a lower bound.
    pub fn speedup(&self) -> Option<f64> {
        let a = self.adaptive.epochs_to_threshold? as f64;
        let f = self.fixed.epochs_to_threshold.unwrap_or(self.fixed.epochs_run) as f64;
        Some(f / a.max(1.0))
    }
}

/// Options of the fixed-rate arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareOptions {
    pub fixed_lr: f64,
    /// Epoch budget for the fixed arm, defaulting to the config's budget.
    pub fixed_epochs: Option<usize>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            fixed_lr: 0.1,
            fixed_epochs: None,
        }
    }
}

fn run_pair(cfg: &ExperimentConfig, opts: CompareOptions, mode: CompareMode) -> Result<PairedReport> {
    let prepared = prepare(cfg)?;
    let init = initial_params(cfg, &prepared)?;
    let adaptive_cfg = ExperimentConfig {
        optimizer: OptimizerKind::Sgd,
        lr_policy: LrPolicy::LipschitzAdaptive,
        ..cfg.clone()
    };
    let fixed_cfg = ExperimentConfig {
        optimizer: OptimizerKind::Sgd,
        lr_policy: LrPolicy::Fixed(opts.fixed_lr),
        epochs: opts.fixed_epochs.unwrap_or(cfg.epochs),
        ..cfg.clone()
    };
    let adaptive = train(&adaptive_cfg, &prepared, &init)?;
    let fixed = train(&fixed_cfg, &prepared, &init)?;
    if fixed.init_checksum != adaptive.init_checksum {
        return Err(Error::Config("arms did not start from the same weights".into()));
    }
    Ok(PairedReport {
        mode,
        fixed_lr: opts.fixed_lr,
        init_checksum: init.checksum(),
        fixed,
        adaptive,
    })
}

/// Epochs until the training loss reaches the threshold, at a fixed rate
/// and at `1/L`, from the same initial weights.
pub fn run_threshold_experiment(cfg: &ExperimentConfig, opts: CompareOptions) -> Result<PairedReport> {
    if cfg.loss_threshold.is_none() {
        return Err(Error::Config("threshold mode needs a loss threshold".into()));
    }
    run_pair(cfg, opts, CompareMode::Threshold)
}

/// Validation accuracy after exactly `cfg.epochs` epochs for both arms.
pub fn run_accuracy_experiment(cfg: &ExperimentConfig, opts: CompareOptions) -> Result<PairedReport> {
    if cfg.task == Task::Regression {
        return Err(Error::UnsupportedMetric("accuracy is undefined for regression".into()));
    }
    let cfg = ExperimentConfig {
        loss_threshold: None,
        ..cfg.clone()
    };
    run_pair(&cfg, opts, CompareMode::Accuracy)
}

/// Loss sampled every `checkpoint_every` steps of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub checkpoint_every: u64,
    pub iterations: Vec<u64>,
    pub losses: Vec<f64>,
    /// The last 20% of samples never rise by more than 1%.
    pub tail_non_increasing: bool,
}

/// Whether every step within the last `fraction` of `samples` stays below
/// `(1 + tol)` times its predecessor.
pub fn tail_non_increasing(samples: &[f64], fraction: f64, tol: f64) -> bool {
    let n = samples.len();
    let tail = ((n as f64 * fraction).ceil() as usize).clamp(2.min(n), n);
    samples[n - tail..].windows(2).all(|w| w[1] <= w[0] + tol * w[0].abs())
}

pub fn oscillation_probe(cfg: &ExperimentConfig, checkpoint_every: u64) -> Result<ProbeReport> {
    if checkpoint_every == 0 {
        return Err(Error::Config("checkpoint interval must be at least 1".into()));
    }
    let prepared = prepare(cfg)?;
    let init = initial_params(cfg, &prepared)?;
    let spec = loss_spec(cfg, &init)?;
    let x = prepared.train.features().clone();
    let y = prepared.train.target_matrix();
    let mut iterations = Vec::new();
    let mut losses = Vec::new();
    let mut sample = |step: u64, p: &ModelParams| -> Result<()> {
        if step.is_multiple_of(checkpoint_every) {
            let out = forward(p, &x)?;
            iterations.push(step);
            losses.push(loss_value(&spec, out.output(), &y, &p.flat_weights(), x.rows())?);
        }
        Ok(())
    };
    train_with_observer(cfg, &prepared, &init, &mut sample)?;
    let tail = tail_non_increasing(&losses, 0.2, 0.01);
    Ok(ProbeReport {
        checkpoint_every,
        iterations,
        losses,
        tail_non_increasing: tail,
    })
}
