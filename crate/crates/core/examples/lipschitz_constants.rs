//! Closed-form constants for each bundled dataset, from the raw features
//! up to the learning rate used on the first epoch.
//!
//! cargo run --release --example lipschitz_constants

use lipschitz_lr::data::{bundled, estimate_k_bound, scale_features, Task};
use lipschitz_lr::lipschitz::{lc_binary, lc_linear_regression, lc_multiclass, reg_increment, Regularization};
use lipschitz_lr::numeric::frobenius_norm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<18} {:>6} {:>4} {:>12} {:>12}", "dataset", "m", "k", "L", "1/L");
    for name in bundled::NAMES {
        let raw = bundled::by_name(name).expect("bundled");
        let drop = raw.degenerate_columns();
        let (ds, _) = scale_features(&raw.drop_columns(&drop))?;
        let x = ds.features();
        let m = ds.n_examples();
        let est = match ds.task() {
            Task::Binary => lc_binary(frobenius_norm(x)?, m)?,
            Task::Multiclass => lc_multiclass(frobenius_norm(x)?, ds.n_classes(), m)?,
            Task::Regression => {
                let y = ds.target_matrix().into_vec();
                lc_linear_regression(x, &y, estimate_k_bound(x)?, m)?
            }
        };
        let k = ds.n_classes();
        println!("{name:<18} {m:>6} {k:>4} {:>12.6e} {:>12.4}", est.l, est.alpha);
    }

    // Regularization only shifts the constant.
    let iris = scale_features(&bundled::iris())?.0;
    let base = lc_multiclass(frobenius_norm(iris.features())?, 3, iris.n_examples())?;
    for lambda in [1e-4, 1e-3, 1e-2] {
        let inc = reg_increment(&Regularization::L2(lambda), 1.0)?;
        println!("iris with L2 {lambda:e} and K = 1: L = {:.6e} (+{inc:e})", base.l + inc);
    }
    Ok(())
}
