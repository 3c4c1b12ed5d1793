//! A 16-unit ReLU network on the two-moons set, trained by mini-batch SGD
//! at a rate of 1/L recomputed every epoch from the hidden activations.
//!
//! cargo run --release --example mlp_two_moons -- [seed]

use lipschitz_lr::data::{ScalingMode, Task};
use lipschitz_lr::harness::{initial_params, prepare, train, DataSource, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(7), |s| s.parse())?;
    let cfg = ExperimentConfig {
        hidden: vec![16],
        batch_size: Some(16),
        init_scale: 1.0,
        scaling: ScalingMode::None,
        split: None,
        epochs: 200,
        seed,
        ..ExperimentConfig::new(DataSource::bundled("two_moons"), Task::Binary)
    };
    let prepared = prepare(&cfg)?;
    let report = train(&cfg, &prepared, &initial_params(&cfg, &prepared)?)?;

    for m in report.metrics.iter().filter(|m| m.epoch == 1 || m.epoch % 25 == 0) {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:>6.2}%  K_z {:>7.3}  lr {:.4}",
            m.epoch,
            m.loss,
            100.0 * m.train_acc,
            m.kz,
            m.lr
        );
    }
    println!("every rate positive and finite: {}", report.lr_trace.all_valid());
    Ok(())
}
