//! Validation accuracy after a fixed number of epochs at 0.1 and at 1/L.
//!
//! cargo run --release --example accuracy_comparison -- [dataset] [epochs] [scaling] [seed]

use lipschitz_lr::data::{ScalingMode, Task};
use lipschitz_lr::harness::{run_accuracy_experiment, CompareOptions, DataSource, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("iris", String::as_str);
    let task = if matches!(name, "breast_cancer" | "two_moons") { Task::Binary } else { Task::Multiclass };
    let epochs: usize = args.get(1).map_or(Ok(200), |s| s.parse())?;
    let scaling: ScalingMode = args.get(2).map_or(Ok(ScalingMode::SumToOne), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(7), |s| s.parse())?;

    let cfg = ExperimentConfig {
        epochs,
        scaling,
        seed,
        ..ExperimentConfig::new(DataSource::bundled(name), task)
    };
    let r = run_accuracy_experiment(&cfg, CompareOptions::default())?;
    let rate = r.adaptive.lr_trace.records.first().map_or(f64::NAN, |t| t.lr);
    println!("{name}: {epochs} epochs, 1/L = {rate:.3}");
    println!("  accuracy at 0.1   {:.2}%", 100.0 * r.fixed.final_val_acc);
    println!("  accuracy at 1/L   {:.2}%", 100.0 * r.adaptive.final_val_acc);
    println!("  final training loss {:.4} at 0.1, {:.4} at 1/L", r.fixed.final_loss, r.adaptive.final_loss);
    Ok(())
}
