//! Epochs needed to reach a training-loss threshold at a fixed rate of 0.1
//! and at 1/L, from the same initial weights.
//!
//! cargo run --release --example threshold_comparison -- [dataset] [threshold] [fixed-epoch-cap]

use lipschitz_lr::data::Task;
use lipschitz_lr::harness::{run_threshold_experiment, CompareOptions, DataSource, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("iris", String::as_str);
    let task = if matches!(name, "breast_cancer" | "two_moons") { Task::Binary } else { Task::Multiclass };
    let threshold: f64 = args.get(1).map_or(Ok(0.2), |s| s.parse())?;
    let cap: Option<usize> = args.get(2).map(|s| s.parse()).transpose()?;

    let cfg = ExperimentConfig {
        loss_threshold: Some(threshold),
        epochs: 10_000_000,
        record_every: 1000,
        seed: 7,
        ..ExperimentConfig::new(DataSource::bundled(name), task)
    };
    let opts = CompareOptions { fixed_epochs: cap, ..CompareOptions::default() };
    let r = run_threshold_experiment(&cfg, opts)?;

    let show = |e: Option<usize>, run: usize| e.map_or(format!("> {run} (censored)"), |e| e.to_string());
    println!("dataset            {name}");
    println!("1/L                {:.3}", r.adaptive.lr_trace.records.first().map_or(f64::NAN, |t| t.lr));
    println!("epochs at 0.1      {}", show(r.fixed.epochs_to_threshold, r.fixed.epochs_run));
    println!("epochs at 1/L      {}", show(r.adaptive.epochs_to_threshold, r.adaptive.epochs_run));
    if let Some(s) = r.speedup() {
        println!("speedup            {s:.1}x");
    }
    println!("wall time          {:.2}s + {:.2}s", r.fixed.wall_time_secs, r.adaptive.wall_time_secs);
    Ok(())
}
