//! Gradient descent at 1/L on random convex quadratics: the per-step
//! decrease guarantee and the iteration count needed for a small gradient.
//!
//! cargo run --release --example bound_check -- [quadratics] [seed]

use lipschitz_lr::harness::bound::{decrease_violation, iterations_to_tolerance};
use lipschitz_lr::harness::{min_iterations_bound, run_bound_check, Quadratic};
use lipschitz_lr::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;

    let report = run_bound_check(count, 10, &[1e-2, 1e-4], seed)?;
    println!("quadratics checked         {}", report.quadratics);
    println!("worst decrease slack       {:e}", report.max_decrease_violation);
    let tight = report
        .iteration_checks
        .iter()
        .filter_map(|c| c.observed.map(|k| k as f64 / c.bound.max(1) as f64))
        .fold(0.0, f64::max);
    println!("largest observed/bound     {tight:.4}");
    println!("all checks hold            {}", report.all_hold());

    // One quadratic in detail, including steps beyond 2/L.
    let q = Quadratic::random(5, 0.1, 10.0, &mut Rng::new(seed))?;
    let w0 = vec![3.0; 5];
    let f0 = q.value(&w0);
    println!("\nL = {:.4}, f(w0) - f* = {:.4}", q.l, f0 - q.f_star);
    for eps in [1e-2, 1e-4, 1e-6] {
        let bound = min_iterations_bound(q.l, f0, q.f_star, eps)?;
        let seen = iterations_to_tolerance(&q, &w0, eps, bound);
        println!("eps {eps:e}: needed {seen:?}, bound {bound}");
    }
    for factor in [1.0, 1.9, 2.1] {
        let v = decrease_violation(&q, &w0, factor / q.l, 50);
        println!("eta = {factor}/L: worst slack {v:+.3e}");
    }
    Ok(())
}
