//! Samples the training loss at checkpoints to show whether a large rate
//! settles or oscillates.
//!
//! cargo run --release --example oscillation_probe -- [epochs] [every]

use lipschitz_lr::data::{ScalingMode, Task};
use lipschitz_lr::harness::{oscillation_probe, DataSource, ExperimentConfig, LrPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(Ok(5000), |s| s.parse())?;
    let every: u64 = args.next().map_or(Ok(500), |s| s.parse())?;
    let base = ExperimentConfig {
        epochs,
        split: None,
        scaling: ScalingMode::None,
        ..ExperimentConfig::new(DataSource::bundled("linear_regression"), Task::Regression)
    };
    for policy in [LrPolicy::LipschitzAdaptive, LrPolicy::Fixed(0.1)] {
        let cfg = ExperimentConfig {
            lr_policy: policy,
            ..base.clone()
        };
        let probe = match oscillation_probe(&cfg, every) {
            Ok(p) => p,
            Err(e) => {
                println!("{}: {e}", policy.label());
                continue;
            }
        };
        println!("{}: tail non-increasing = {}", policy.label(), probe.tail_non_increasing);
        for (it, loss) in probe.iterations.iter().zip(&probe.losses).step_by((probe.losses.len() / 8).max(1)) {
            println!("  step {it:>7}  loss {loss:.6e}");
        }
    }
    Ok(())
}
