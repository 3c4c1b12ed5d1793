//! Loading a CSV, scaling its features and estimating the weight bound.
//!
//! cargo run --release --example dataset_scaling -- [path.csv] [target] [task]

use lipschitz_lr::data::{bundled, estimate_k_bound, load_csv, scale_with, CsvSchema, ScalingMode, Task};
use lipschitz_lr::numeric::frobenius_norm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ds = match args.next() {
        Some(path) => {
            let target = args.next().unwrap_or_else(|| "last".into()).parse()?;
            let task: Task = args.next().unwrap_or_else(|| "multiclass".into()).parse()?;
            load_csv(path, &CsvSchema::new(task, target))?
        }
        None => bundled::iris(),
    };
    println!(
        "{} examples, {} features, task {}, {} outputs",
        ds.n_examples(),
        ds.n_features(),
        ds.task(),
        ds.n_outputs()
    );
    if !ds.labels().is_empty() {
        println!("labels: {}", ds.labels().join(", "));
    }
    let degenerate = ds.degenerate_columns();
    if !degenerate.is_empty() {
        println!("all-zero columns dropped before sum scaling: {degenerate:?}");
    }
    let ds = ds.drop_columns(&degenerate);

    for mode in [ScalingMode::None, ScalingMode::SumToOne, ScalingMode::CenterDivide(255.0)] {
        let (scaled, record) = scale_with(&ds, mode)?;
        let x = scaled.features();
        println!(
            "{mode:?}: ||X||_F = {:.6}, max |x| = {:.6}, K estimate = {:.6}, first divisor = {:?}",
            frobenius_norm(x)?,
            x.max_abs(),
            estimate_k_bound(x)?,
            record.divisors.first()
        );
    }
    Ok(())
}
