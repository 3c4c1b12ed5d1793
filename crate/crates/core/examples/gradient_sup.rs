//! Compares gradient norms at random weights with the closed-form constant,
//! and checks whether the last layer carries the largest gradient.
//!
//! cargo run --release --example gradient_sup -- [draws]

use lipschitz_lr::data::{bundled, scale_features, Task};
use lipschitz_lr::lipschitz::LossSpec;
use lipschitz_lr::models::{grad_sup_bound_check, Activation, Architecture};
use lipschitz_lr::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let draws: usize = std::env::args().nth(1).map_or(Ok(1000), |s| s.parse())?;
    let mut rng = Rng::new(11);
    for name in ["iris", "breast_cancer", "digits"] {
        let raw = bundled::by_name(name).expect("bundled");
        let (ds, _) = scale_features(&raw.drop_columns(&raw.degenerate_columns()))?;
        let arch = Architecture::classical(ds.task(), ds.n_features(), ds.n_outputs());
        let params = arch.init(&mut rng, 0.05)?;
        let spec = LossSpec::new(params.loss_kind());
        let r = grad_sup_bound_check(&params, &ds, &spec, draws, 10.0, &mut rng)?;
        println!(
            "{name:<14} L {:.4e}  max |grad| {:.4e}  worst ratio {:.3}  violations {}/{}",
            r.l, r.max_grad_norm, r.max_ratio, r.bound_violations, r.samples
        );
    }

    let moons = bundled::two_moons();
    let arch = Architecture::mlp(Task::Binary, 2, &[8, 8], Activation::Sigmoid, 1);
    let params = arch.init(&mut rng, 0.5)?;
    let spec = LossSpec::new(params.loss_kind());
    let r = grad_sup_bound_check(&params, &moons, &spec, draws, 10.0, &mut rng)?;
    println!(
        "sigmoid MLP    last-layer dominance violated on {}/{} draws",
        r.dominance_violations, r.samples
    );
    Ok(())
}
