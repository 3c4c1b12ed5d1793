use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{ScalingMode, TargetColumn, Task};
use crate::error::{Error, Result};
use crate::models::{Activation, DEFAULT_INIT_SCALE};
use crate::optimizers::{BiasCorrection, OptimizerKind};

/// Hard cap on optimizer steps for one run.
pub const MAX_ITERATIONS: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    /// One of the datasets shipped with the crate, by name.
    Bundled { name: String },
    Csv {
        path: PathBuf,
        /// Column name, 0-based index, or `last`.
        target: String,
        has_header: bool,
    },
}

impl DataSource {
    pub fn bundled(name: &str) -> Self {
        DataSource::Bundled { name: name.into() }
    }

    pub fn csv(path: impl Into<PathBuf>, target: &str) -> Self {
        DataSource::Csv {
            path: path.into(),
            target: target.into(),
            has_header: true,
        }
    }

    pub(crate) fn target_column(target: &str) -> TargetColumn {
        target.parse().expect("target column parsing is infallible")
    }

    /// Short label for file names.
    pub fn label(&self) -> String {
        match self {
            DataSource::Bundled { name } => name.clone(),
            DataSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum LrPolicy {
    Fixed(f64),
    LipschitzAdaptive,
}

impl LrPolicy {
    pub fn label(&self) -> String {
        match self {
            LrPolicy::Fixed(a) => format!("fixed{a}"),
            LrPolicy::LipschitzAdaptive => "adaptive".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum RegConfig {
    #[default]
    None,
    L2(f64),
    /// Tikhonov with `Γ = scale · I` over all weights.
    TikhonovScaledIdentity(f64),
    /// Tikhonov with a diagonal `Γ`, one entry per weight.
    TikhonovDiagonal(Vec<f64>),
}

impl RegConfig {
    pub fn l2_lambda(&self) -> f64 {
        match self {
            RegConfig::L2(l) => *l,
            _ => 0.0,
        }
    }
}

/// Epoch-1 learning-rate rule of the adaptive optimizers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "lr")]
pub enum FirstEpoch {
    /// 0.1 for AdaMo, a 1e-3 fallback for RMSprop, nothing otherwise.
    #[default]
    Default,
    Disabled,
    Rate(f64),
}

/// How often the constant is recomputed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recompute {
    #[default]
    Epoch,
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub task: Task,
    /// Hidden layer widths; empty for linear/logistic/softmax regression.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub optimizer: OptimizerKind,
    pub bias_correction: BiasCorrection,
    pub first_epoch: FirstEpoch,
    /// Only consulted by plain SGD.
    pub lr_policy: LrPolicy,
    /// Stop once the training loss is at or below this value.
    pub loss_threshold: Option<f64>,
    /// Epoch budget.
    pub epochs: usize,
    pub max_iterations: u64,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub scaling: ScalingMode,
    /// Drop all-zero feature columns instead of failing to scale them.
    pub drop_degenerate: bool,
    /// Training fraction of a seeded split; `None` trains on everything.
    pub split: Option<f64>,
    pub regularization: RegConfig,
    pub init_scale: f64,
    /// Weight bound K; estimated from the training features when absent.
    pub weight_bound: Option<f64>,
    pub recompute: Recompute,
    /// Metric rows are kept every this many epochs (and at the last one).
    pub record_every: usize,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, task: Task) -> Self {
        ExperimentConfig {
            data,
            task,
            hidden: Vec::new(),
            hidden_activation: Activation::ReLU,
            optimizer: OptimizerKind::Sgd,
            bias_correction: BiasCorrection::Off,
            first_epoch: FirstEpoch::Default,
            lr_policy: LrPolicy::LipschitzAdaptive,
            loss_threshold: None,
            epochs: 200,
            max_iterations: MAX_ITERATIONS,
            batch_size: None,
            seed: 0,
            scaling: ScalingMode::SumToOne,
            drop_degenerate: true,
            split: Some(0.7),
            regularization: RegConfig::None,
            init_scale: DEFAULT_INIT_SCALE,
            weight_bound: None,
            recompute: Recompute::Epoch,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Some(t) = self.loss_threshold {
            if !t.is_finite() {
                return fail(format!("loss threshold {t} must be finite"));
            }
        }
        if let LrPolicy::Fixed(a) = self.lr_policy {
            if !(a > 0.0) || !a.is_finite() {
                return fail(format!("fixed learning rate {a} must be positive"));
            }
        }
        if self.batch_size == Some(0) {
            return fail("batch size must be at least 1".into());
        }
        if self.record_every == 0 {
            return fail("record_every must be at least 1".into());
        }
        if let Some(s) = self.split {
            if !(s > 0.0 && s <= 1.0) {
                return fail(format!("split fraction {s} must be in (0, 1]"));
            }
        }
        if let Some(k) = self.weight_bound {
            if !(k > 0.0) {
                return Err(Error::InvalidBound(format!("weight bound {k} must be positive")));
            }
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        Ok(())
    }

    /// Label used in file names: data, policy (or optimizer) and seed.
    pub fn run_label(&self) -> String {
        let policy = match self.optimizer {
            OptimizerKind::Sgd => self.lr_policy.label(),
            other => other.name().to_string(),
        };
        format!("{}_{}_seed{}", self.data.label(), policy, self.seed)
    }
}
