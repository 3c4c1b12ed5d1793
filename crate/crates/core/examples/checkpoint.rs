//! Saving parameters to the versioned text format and training on from the
//! reloaded copy.
//!
//! cargo run --release --example checkpoint -- [dir]

use lipschitz_lr::data::Task;
use lipschitz_lr::harness::{initial_params, prepare, train, DataSource, ExperimentConfig};
use lipschitz_lr::models::ModelParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let cfg = ExperimentConfig {
        epochs: 100,
        seed: 3,
        ..ExperimentConfig::new(DataSource::bundled("breast_cancer"), Task::Binary)
    };
    let prepared = prepare(&cfg)?;
    let first = train(&cfg, &prepared, &initial_params(&cfg, &prepared)?)?;
    let params = first.final_params.as_ref().expect("final parameters");

    let path = dir.join("breast_cancer_params.txt");
    params.save(&path)?;
    let restored = ModelParams::load(&path)?;
    println!("saved {} ({} parameters)", path.display(), restored.n_params());
    println!("checksum before {:016x}, after {:016x}", params.checksum(), restored.checksum());

    let second = train(&cfg, &prepared, &restored)?;
    println!("loss after 100 epochs {:.6}, after 200 {:.6}", first.final_loss, second.final_loss);
    println!("validation accuracy {:.2}%", 100.0 * second.final_val_acc);
    Ok(())
}
