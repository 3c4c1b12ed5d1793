//! Momentum, RMSprop and Adam variants whose step sizes track running
//! averages of the gradient norms, trained side by side on Iris.
//!
//! cargo run --release --example adaptive_optimizers -- [epochs]

use lipschitz_lr::data::Task;
use lipschitz_lr::harness::{initial_params, prepare, train, DataSource, ExperimentConfig};
use lipschitz_lr::optimizers::{BiasCorrection, OptimizerKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(300), |s| s.parse())?;
    let base = ExperimentConfig {
        epochs,
        seed: 7,
        ..ExperimentConfig::new(DataSource::bundled("iris"), Task::Multiclass)
    };
    let prepared = prepare(&base)?;
    let init = initial_params(&base, &prepared)?;

    let runs = [
        ("sgd 1/L", OptimizerKind::Sgd, BiasCorrection::Off),
        ("adamo", OptimizerKind::adamo(), BiasCorrection::Off),
        ("adarmsprop", OptimizerKind::adarmsprop(), BiasCorrection::Off),
        ("autoadam", OptimizerKind::autoadam(), BiasCorrection::Off),
        ("autoadam+bc", OptimizerKind::autoadam(), BiasCorrection::Epoch),
    ];
    println!("{:<12} {:>10} {:>10} {:>9} {:>12}", "optimizer", "loss", "val acc", "fallback", "last lr");
    for (name, optimizer, bias_correction) in runs {
        let cfg = ExperimentConfig {
            optimizer,
            bias_correction,
            ..base.clone()
        };
        let r = train(&cfg, &prepared, &init)?;
        let last_lr = r.lr_trace.rates().last().copied().unwrap_or(f64::NAN);
        println!(
            "{name:<12} {:>10.5} {:>9.2}% {:>9} {:>12.4e}",
            r.final_loss,
            100.0 * r.final_val_acc,
            r.fallback_applied,
            last_lr
        );
    }
    Ok(())
}
