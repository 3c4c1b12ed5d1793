mod common;

use lipschitz_lr::data::{bundled, read_csv, write_csv, CsvSchema, Dataset, TargetColumn, Task};
use lipschitz_lr::harness::bound::decrease_violation;
use lipschitz_lr::harness::train::loss_spec;
use lipschitz_lr::harness::{initial_params, prepare, train, DataSource, ExperimentConfig, Quadratic};
use lipschitz_lr::lipschitz::{
    compute_kz, lc_binary, lc_linear_regression, lc_multiclass, lc_nn_regression, LipschitzEstimate, Regularization,
};
use lipschitz_lr::models::{forward, loss_and_gradients};
use lipschitz_lr::numeric::{frobenius_norm, vector_2norm};
use lipschitz_lr::optimizers::{epoch_lr_recompute, sgd_step};
use lipschitz_lr::{Matrix, Rng};
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1e3..1e3f64, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

fn rank_one(u: &[f64], v: &[f64]) -> Matrix {
    let mut x = Matrix::zeros(u.len(), v.len());
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            x[(i, j)] = ui * vj;
        }
    }
    x
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn frobenius_is_a_norm(a in matrix(6, 6), c in -10.0..10.0f64) {
        let n = frobenius_norm(&a).unwrap();
        prop_assert!(n >= 0.0);
        let direct = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(rel(n, direct) <= 1e-12 || n == direct);
        let scaled = frobenius_norm(&a.scale(c)).unwrap();
        prop_assert!((scaled - c.abs() * n).abs() <= 1e-12 * (1.0 + c.abs() * n));
        let b = a.map(|x| x.sin() * 50.0);
        let sum = frobenius_norm(&a.hadamard(&Matrix::filled(a.rows(), a.cols(), 1.0)).unwrap()).unwrap();
        prop_assert_eq!(sum, n);
        let tri = frobenius_norm(&matrix_add(&a, &b)).unwrap();
        prop_assert!(tri <= n + frobenius_norm(&b).unwrap() + 1e-9);
        prop_assert!(rel(frobenius_norm(&a.transpose()).unwrap(), n) <= 1e-14 || n == 0.0);
    }

    #[test]
    fn vector_norm_matches_single_column_frobenius(v in prop::collection::vec(-1e3..1e3f64, 1..20)) {
        let n = vector_2norm(&v).unwrap();
        let f = frobenius_norm(&Matrix::column_vector(&v)).unwrap();
        prop_assert!(rel(n, f) <= 1e-14 || n == f);
        prop_assert_eq!(compute_kz(&Matrix::column_vector(&v)).unwrap(), f);
    }

    #[test]
    fn two_class_softmax_constant_is_the_binary_one(kz in 1e-6..1e6f64, m in 1usize..100_000) {
        let multi = lc_multiclass(kz, 2, m).unwrap();
        let bin = lc_binary(kz, m).unwrap();
        prop_assert_eq!(multi.l.to_bits(), bin.l.to_bits());
        prop_assert_eq!(multi.alpha.to_bits(), bin.alpha.to_bits());
    }

    #[test]
    fn multiclass_constant_grows_with_k_towards_kz_over_m(kz in 1e-3..1e3f64, m in 1usize..1000, k in 2usize..200) {
        let lo = lc_multiclass(kz, k, m).unwrap().l;
        let hi = lc_multiclass(kz, k + 1, m).unwrap().l;
        prop_assert!(hi > lo);
        prop_assert!(hi < kz / m as f64);
    }

    #[test]
    fn constants_scale_with_kz_and_m(kz in 1e-3..1e3f64, c in 1e-3..1e3f64, m in 1usize..1000, k in 2usize..20) {
        let base = lc_multiclass(kz, k, m).unwrap().l;
        prop_assert!(rel(lc_multiclass(c * kz, k, m).unwrap().l, c * base) <= 1e-14);
        prop_assert!(rel(lc_multiclass(kz, k, 2 * m).unwrap().l, base / 2.0) <= 1e-14);
        let x = rank_one(&[1.0, 2.0, -1.0], &[0.5, 0.25]).scale(c);
        let y = [1.0, -1.0, 0.5];
        let l1 = lc_linear_regression(&x, &y, 1.0, 3).unwrap().l;
        let l2 = lc_linear_regression(&x.scale(2.0), &y, 1.0, 3).unwrap().l;
        // ‖XᵀX‖ scales by 4 and ‖yᵀX‖ by 2.
        let xtx = lipschitz_lr::numeric::matmul_tn(&x, &x).unwrap();
        let quad = frobenius_norm(&xtx).unwrap() / 3.0;
        prop_assert!(rel(l2, 4.0 * quad + 2.0 * (l1 - quad)) <= 1e-12);
    }

    #[test]
    fn regularization_adds_to_the_constant(kz in 1e-3..1e3f64, lambda in 0.0..10.0f64, k in 1e-3..1e3f64, s in 0.01..5.0f64) {
        let base = lc_binary(kz, 10).unwrap();
        let l2 = base.clone().with_regularization(&Regularization::L2(lambda), k).unwrap();
        prop_assert!(rel(l2.l, base.l + lambda * k) <= 1e-14 || l2.l == base.l + lambda * k);
        prop_assert_eq!(l2.alpha, 1.0 / l2.l);
        let gamma = Matrix::identity(3).scale(s);
        let tik = base.clone().with_regularization(&Regularization::Tikhonov(gamma), k).unwrap();
        let expected = base.l + 2.0 * k * (3.0f64).sqrt() * s * s;
        prop_assert!(rel(tik.l, expected) <= 1e-12);
    }

    #[test]
    fn rank_one_data_makes_the_two_regression_constants_agree(
        u in prop::collection::vec(-10.0..10.0f64, 2..12),
        v in prop::collection::vec(-10.0..10.0f64, 1..8),
        c in -5.0..5.0f64,
        k in 0.01..100.0f64,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3) && c.abs() > 1e-3);
        let x = rank_one(&u, &v);
        let y: Vec<f64> = u.iter().map(|ui| c * ui).collect();
        let m = u.len();
        let nx = frobenius_norm(&x).unwrap();
        let lin = lc_linear_regression(&x, &y, k, m).unwrap().l;
        let nn = lc_nn_regression(k * nx, &y, nx, m).unwrap().l;
        prop_assert!(rel(lin, nn) <= 1e-12, "{} vs {}", lin, nn);
    }

    #[test]
    fn network_constant_bounds_the_linear_one(x in matrix(8, 5), k in 0.01..100.0f64, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let y: Vec<f64> = (0..x.rows()).map(|_| rng.standard_normal()).collect();
        prop_assume!(x.max_abs() > 0.0);
        let nx = frobenius_norm(&x).unwrap();
        let lin = lc_linear_regression(&x, &y, k, x.rows()).unwrap().l;
        let nn = lc_nn_regression(k * nx, &y, nx, x.rows()).unwrap().l;
        prop_assert!(nn >= lin * (1.0 - 1e-12));
    }

    #[test]
    fn gradient_steps_at_inverse_smoothness_decrease_enough(seed in any::<u64>(), dim in 1usize..=10) {
        let mut rng = Rng::new(seed);
        let q = Quadratic::random(dim, 0.1, 10.0, &mut rng).unwrap();
        let w0: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
        prop_assert!(decrease_violation(&q, &w0, 1.0 / q.l, 50) <= 1e-10);
    }

    #[test]
    fn ewa_state_matches_brute_force(seed in any::<u64>(), steps in 1usize..=100) {
        prop_assert!(common::ewa_state_error(seed, steps) <= 1e-12);
    }

    #[test]
    fn bias_corrected_ewa_of_constant_is_constant(c in 1e-6..1e6f64, beta in 0.0..0.999f64) {
        prop_assert!(common::bias_corrected_constant_error(c, beta, 100) <= 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(x in matrix(12, 5).prop_filter("two rows", |x| x.rows() >= 2), seed in any::<u64>(), task in 0u8..3) {
        let mut rng = Rng::new(seed);
        let m = x.rows();
        let ds = match task {
            0 => Dataset::regression(x.clone(), (0..m).map(|_| rng.standard_normal()).collect()).unwrap(),
            1 => Dataset::binary(x.clone(), (0..m).map(|i| (i % 2) as f64).collect()).unwrap(),
            _ => {
                let offset = rng.next_u64() as usize;
                let classes: Vec<usize> = (0..m).map(|i| (i + offset) % 4).collect();
                Dataset::multiclass(x.clone(), &classes, 4).unwrap()
            }
        };
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::new(ds.task(), TargetColumn::Last)).unwrap();
        prop_assert_eq!(back.features(), ds.features());
        prop_assert_eq!(back.feature_names(), ds.feature_names());
        match ds.class_indices() {
            None => prop_assert_eq!(back.target_matrix(), ds.target_matrix()),
            Some(classes) => {
                let names = |d: &Dataset, c: &[usize]| c.iter().map(|&i| d.labels()[i].clone()).collect::<Vec<_>>();
                prop_assert_eq!(names(&back, &back.class_indices().unwrap()), names(&ds, &classes));
            }
        }
    }
}

fn matrix_add(a: &Matrix, b: &Matrix) -> Matrix {
    let v = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
    Matrix::new(a.rows(), a.cols(), v).unwrap()
}

#[test]
fn hundred_quadratics_satisfy_the_decrease_inequality() {
    let mut rng = Rng::new(99);
    for _ in 0..100 {
        let dim = 1 + (rng.next_u64() % 10) as usize;
        let q = Quadratic::random(dim, 0.1, 10.0, &mut rng).unwrap();
        let w0: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
        assert!(decrease_violation(&q, &w0, 1.0 / q.l, 50) <= 1e-10);
    }
}

#[test]
fn one_step_at_inverse_constant_lowers_the_loss_on_every_bundled_dataset() {
    let tasks = [
        ("iris", Task::Multiclass),
        ("digits", Task::Multiclass),
        ("breast_cancer", Task::Binary),
        ("two_moons", Task::Binary),
        ("linear_regression", Task::Regression),
    ];
    assert_eq!(tasks.len(), bundled::NAMES.len());
    for (name, task) in tasks {
        let cfg = ExperimentConfig {
            split: None,
            seed: 4,
            ..ExperimentConfig::new(DataSource::bundled(name), task)
        };
        let prepared = prepare(&cfg).unwrap();
        let mut params = initial_params(&cfg, &prepared).unwrap();
        let spec = loss_spec(&cfg, &params).unwrap();
        let x = prepared.train.features();
        let y = prepared.train.target_matrix();
        let (before, grads, _) = loss_and_gradients(&params, x, &y, &spec).unwrap();
        let est: LipschitzEstimate = epoch_lr_recompute(&params, x, &y, &spec, prepared.k_bound, None).unwrap();
        sgd_step(&mut params, &grads, &est).unwrap();
        let (after, _, _) = loss_and_gradients(&params, x, &y, &spec).unwrap();
        println!("{name}: {before} -> {after} at alpha {}", est.alpha);
        assert!(after < before, "{name}: {before} -> {after}");
    }
}

#[test]
fn forward_and_training_are_deterministic() {
    let cfg = ExperimentConfig {
        epochs: 30,
        hidden: vec![5],
        seed: 12,
        ..ExperimentConfig::new(DataSource::bundled("iris"), Task::Multiclass)
    };
    let prepared = prepare(&cfg).unwrap();
    let init = initial_params(&cfg, &prepared).unwrap();
    let a = forward(&init, prepared.train.features()).unwrap();
    let b = forward(&init, prepared.train.features()).unwrap();
    assert_eq!(a.activations, b.activations);
    assert_eq!(a.pre_activations, b.pre_activations);

    let r1 = train(&cfg, &prepared, &init).unwrap();
    let r2 = train(&cfg, &prepared, &initial_params(&cfg, &prepare(&cfg).unwrap()).unwrap()).unwrap();
    let bits = |r: &lipschitz_lr::harness::TrainReport| r.losses().iter().map(|l| l.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&r1), bits(&r2));
    assert_eq!(r1.init_checksum, r2.init_checksum);
    assert!(r1.lr_trace.all_valid());
}
