//! Command-line front end: `lc`, `train`, `compare` and `bound-check`.
//!
//! Exit codes: 0 on success, 1 on a runtime error (or a failed bound check),
//! 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::data::{ScalingMode, Task};
use crate::error::{Error, Result};
use crate::harness::output::{output_dir, write_compare_outputs, write_summary, write_train_outputs};
use crate::harness::train::{loss_spec, CompareMode};
use crate::harness::{
    initial_params, prepare, run_accuracy_experiment, run_bound_check, run_threshold_experiment, train,
    CompareOptions, DataSource, ExperimentConfig, FirstEpoch, LrPolicy, Recompute, RegConfig,
};
use crate::models::Activation;
use crate::optimizers::{epoch_lr_recompute, BiasCorrection, K2Feed, OptimizerKind, DEFAULT_EPS};

#[derive(Parser, Debug)]
#[command(name = "lipschitz-lr", version, about = "Gradient descent with learning rates from closed-form Lipschitz constants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Lipschitz constant, learning rate and ingredients for a dataset.
    Lc(LcArgs),
    /// Train one model and write its metrics.
    Train(TrainArgs),
    /// Compare a fixed rate against 1/L from the same initial weights.
    Compare(CompareArgs),
    /// Check the decrease inequality and iteration bound on random quadratics.
    BoundCheck(BoundArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV path, or a bundled dataset: iris, digits, breast_cancer, two_moons, linear_regression.
    #[arg(long)]
    data: String,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Target column: header name, 0-based index, or `last`.
    #[arg(long, default_value = "last")]
    target: String,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
    #[arg(long, value_enum, default_value_t = ScalingArg::Sum)]
    scaling: ScalingArg,
    /// Training fraction; 1 trains on everything.
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail on all-zero feature columns instead of dropping them.
    #[arg(long)]
    keep_degenerate: bool,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Hidden layer widths, comma separated; empty for a single-layer model.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    activation: ActivationArg,
    /// Mini-batch size; full batch when omitted.
    #[arg(long)]
    batch_size: Option<usize>,
    /// L2 strength λ.
    #[arg(long)]
    l2: Option<f64>,
    /// Tikhonov with Γ = s·I.
    #[arg(long, conflicts_with = "l2")]
    tikhonov: Option<f64>,
    /// Weight bound K; estimated from the features when omitted.
    #[arg(long)]
    weight_bound: Option<f64>,
    #[arg(long, default_value_t = crate::models::DEFAULT_INIT_SCALE)]
    init_scale: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Stop when the training loss reaches this value.
    #[arg(long, alias = "tl")]
    threshold: Option<f64>,
    #[arg(long, default_value_t = crate::harness::MAX_ITERATIONS)]
    max_iterations: u64,
    /// Keep a metrics row every this many epochs.
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long, value_enum, default_value_t = RecomputeArg::Epoch)]
    recompute: RecomputeArg,
    /// Output directory (default: $LIPSCHITZ_LR_OUTPUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LcArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
    optimizer: OptimizerArg,
    /// Fixed learning rate for SGD; 1/L when omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = BiasArg::Off)]
    bias_correction: BiasArg,
    /// Epoch-1 rate (AdaMo) or fallback rate (RMSprop).
    #[arg(long)]
    first_epoch_lr: Option<f64>,
    #[arg(long, conflicts_with = "first_epoch_lr")]
    no_first_epoch_rule: bool,
    #[arg(long, value_enum, default_value_t = K2Arg::Literal)]
    k2_feed: K2Arg,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    fixed_lr: f64,
    /// Epoch budget of the fixed-rate arm (defaults to --epochs).
    #[arg(long)]
    fixed_epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value_t = 100)]
    quadratics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_dim: usize,
    /// Gradient tolerances, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-4])]
    eps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Regression,
    Binary,
    Multiclass,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScalingArg {
    Sum,
    Center,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActivationArg {
    Relu,
    Sigmoid,
    Linear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adamo,
    Adarmsprop,
    Autoadam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BiasArg {
    Off,
    Epoch,
    Step,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum K2Arg {
    Literal,
    Estimate,
    Fixed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RecomputeArg {
    Epoch,
    Step,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Threshold,
    Accuracy,
}

fn base_config(d: &DataArgs, m: &ModelArgs) -> ExperimentConfig {
    let source = if Path::new(&d.data).exists() {
        DataSource::Csv {
            path: PathBuf::from(&d.data),
            target: d.target.clone(),
            has_header: !d.no_header,
        }
    } else {
        DataSource::bundled(&d.data)
    };
    let task = match d.task {
        TaskArg::Regression => Task::Regression,
        TaskArg::Binary => Task::Binary,
        TaskArg::Multiclass => Task::Multiclass,
    };
    let regularization = match (m.l2, m.tikhonov) {
        (Some(l), _) => RegConfig::L2(l),
        (None, Some(s)) => RegConfig::TikhonovScaledIdentity(s),
        (None, None) => RegConfig::None,
    };
    ExperimentConfig {
        hidden: m.hidden.clone(),
        hidden_activation: match m.activation {
            ActivationArg::Relu => Activation::ReLU,
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Linear => Activation::Linear,
        },
        batch_size: m.batch_size,
        regularization,
        weight_bound: m.weight_bound,
        init_scale: m.init_scale,
        seed: d.seed,
        scaling: match d.scaling {
            ScalingArg::Sum => ScalingMode::SumToOne,
            ScalingArg::Center => ScalingMode::CenterDivide(255.0),
            ScalingArg::None => ScalingMode::None,
        },
        split: (d.split < 1.0).then_some(d.split),
        drop_degenerate: !d.keep_degenerate,
        ..ExperimentConfig::new(source, task)
    }
}

fn apply_run(cfg: &mut ExperimentConfig, r: &RunArgs) {
    cfg.epochs = r.epochs;
    cfg.loss_threshold = r.threshold;
    cfg.max_iterations = r.max_iterations;
    cfg.record_every = r.record_every;
    cfg.recompute = match r.recompute {
        RecomputeArg::Epoch => Recompute::Epoch,
        RecomputeArg::Step => Recompute::Step,
    };
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

fn cmd_lc(a: &LcArgs) -> Result<i32> {
    let cfg = base_config(&a.data, &a.model);
    let prepared = prepare(&cfg)?;
    let model = initial_params(&cfg, &prepared)?;
    let spec = loss_spec(&cfg, &model)?;
    let x = prepared.train.features();
    let est = epoch_lr_recompute(&model, x, &prepared.train.target_matrix(), &spec, prepared.k_bound, cfg.batch_size)?;
    let norm_x = crate::numeric::frobenius_norm(x)?;
    let ing = &est.ingredients;
    println!("L          {}", est.l);
    println!("alpha      {}", est.alpha);
    println!("norm_X     {norm_x}");
    println!("K_z        {}", fmt_opt(ing.kz));
    println!("K          {}", prepared.k_bound);
    println!("k          {}", ing.n_classes.map_or_else(|| "-".into(), |k| k.to_string()));
    println!("m          {}", ing.m);
    println!("reg_inc    {}", ing.reg_increment);
    if !prepared.dropped_columns.is_empty() {
        println!("dropped    {}", prepared.dropped_columns.join(","));
    }

    let dir = output_dir(a.out.as_deref());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let stem = format!("{}_lc", cfg.data.label());
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["L", "alpha", "norm_x", "kz", "K", "k", "m", "reg_increment"])?;
    w.write_record([
        est.l.to_string(),
        est.alpha.to_string(),
        norm_x.to_string(),
        ing.kz.unwrap_or(f64::NAN).to_string(),
        prepared.k_bound.to_string(),
        ing.n_classes.unwrap_or(0).to_string(),
        ing.m.to_string(),
        ing.reg_increment.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_summary(
        &dir.join(format!("{stem}.json")),
        &json!({ "config": cfg, "estimate": est, "norm_x": norm_x, "k_bound": prepared.k_bound }),
    )?;
    Ok(0)
}

fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let mut cfg = base_config(&a.data, &a.model);
    apply_run(&mut cfg, &a.run);
    cfg.optimizer = match a.optimizer {
        OptimizerArg::Sgd => OptimizerKind::Sgd,
        OptimizerArg::Adamo => OptimizerKind::AdaMo { beta: a.beta1 },
        OptimizerArg::Adarmsprop => OptimizerKind::AdaRmsProp {
            beta: a.beta1,
            eps: a.eps,
        },
        OptimizerArg::Autoadam => OptimizerKind::AutoAdam {
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            k2_feed: match a.k2_feed {
                K2Arg::Literal => K2Feed::Literal,
                K2Arg::Estimate => K2Feed::ClassificationEstimate,
                K2Arg::Fixed => K2Feed::Fixed,
            },
        },
    };
    cfg.lr_policy = a.lr.map_or(LrPolicy::LipschitzAdaptive, LrPolicy::Fixed);
    cfg.bias_correction = match a.bias_correction {
        BiasArg::Off => BiasCorrection::Off,
        BiasArg::Epoch => BiasCorrection::Epoch,
        BiasArg::Step => BiasCorrection::Step,
    };
    cfg.first_epoch = match (a.no_first_epoch_rule, a.first_epoch_lr) {
        (true, _) => FirstEpoch::Disabled,
        (false, Some(r)) => FirstEpoch::Rate(r),
        (false, None) => FirstEpoch::Default,
    };
    let prepared = prepare(&cfg)?;
    let init = initial_params(&cfg, &prepared)?;
    let report = train(&cfg, &prepared, &init)?;
    let files = write_train_outputs(&output_dir(a.run.out.as_deref()), &cfg, &report)?;
    println!("run          {}", report.label);
    println!("epochs       {}", report.epochs_run);
    println!("final loss   {}", report.final_loss);
    if cfg.task != Task::Regression {
        println!("train acc    {}", report.final_train_acc);
        println!("val acc      {}", report.final_val_acc);
    }
    if cfg.loss_threshold.is_some() {
        println!(
            "threshold    {}",
            report.epochs_to_threshold.map_or_else(|| "not reached (censored)".into(), |e| format!("reached after {e} epochs"))
        );
    }
    println!("summary      {}", files.summary.display());
    Ok(0)
}

fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    let mut cfg = base_config(&a.data, &a.model);
    apply_run(&mut cfg, &a.run);
    let opts = CompareOptions {
        fixed_lr: a.fixed_lr,
        fixed_epochs: a.fixed_epochs,
    };
    let paired = match a.mode {
        ModeArg::Threshold => run_threshold_experiment(&cfg, opts)?,
        ModeArg::Accuracy => run_accuracy_experiment(&cfg, opts)?,
    };
    let files = write_compare_outputs(&output_dir(a.run.out.as_deref()), &cfg, &paired)?;
    let (f, ad) = (&paired.fixed, &paired.adaptive);
    match paired.mode {
        CompareMode::Threshold => {
            let show = |r: &crate::harness::TrainReport| {
                r.epochs_to_threshold
                    .map_or_else(|| format!("> {} (censored)", r.epochs_run), |e| e.to_string())
            };
            println!("E at {}      {}", paired.fixed_lr, show(f));
            println!("E at 1/L      {}", show(ad));
            if let Some(s) = paired.speedup() {
                println!("speedup       {s}");
            }
        }
        CompareMode::Accuracy => {
            println!("A at {}      {}", paired.fixed_lr, f.final_val_acc);
            println!("A at 1/L      {}", ad.final_val_acc);
        }
    }
    println!("summary       {}", files.summary.display());
    Ok(0)
}

fn cmd_bound(a: &BoundArgs) -> Result<i32> {
    let report = run_bound_check(a.quadratics, a.max_dim, &a.eps, a.seed)?;
    let dir = output_dir(a.out.as_deref());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv_path = dir.join(format!("bound_check_seed{}.csv", a.seed));
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["quadratic", "eps", "observed", "bound"])?;
    for c in &report.iteration_checks {
        w.write_record([
            c.quadratic.to_string(),
            c.eps.to_string(),
            c.observed.map_or_else(|| "censored".into(), |k| k.to_string()),
            c.bound.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_summary(&dir.join(format!("bound_check_seed{}.json", a.seed)), &report)?;

    println!("quadratics               {}", report.quadratics);
    println!("max decrease violation   {:e}", report.max_decrease_violation);
    println!("decrease inequality      {}", if report.decrease_holds { "holds" } else { "VIOLATED" });
    println!("iteration bound          {}", if report.iterations_hold { "holds" } else { "VIOLATED" });
    println!(
        "divergence boundary      {}",
        if report.divergence_boundary_holds { "holds" } else { "VIOLATED" }
    );
    Ok(if report.all_hold() { 0 } else { 1 })
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Lc(a) => cmd_lc(a),
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::BoundCheck(a) => cmd_bound(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
