mod common;

use common::{beta_zero_reductions, bias_corrected_constant_error, ewa_state_error};

#[test]
fn beta_zero_steps_land_on_zero() {
    for (name, w) in beta_zero_reductions() {
        println!("{name}: w' = {w:e}");
        assert_eq!(w, 0.0, "{name}");
    }
}

#[test]
fn ewa_state_matches_brute_force_sums() {
    for seed in 0..20 {
        let err = ewa_state_error(seed, 100);
        assert!(err <= 1e-12, "seed {seed}: {err:e}");
    }
}

#[test]
fn bias_corrected_constant_is_constant() {
    for beta in [0.0, 0.5, 0.9, 0.99, 0.999] {
        for c in [1e-3, 1.0, 42.0] {
            assert!(bias_corrected_constant_error(c, beta, 200) <= 1e-12, "beta {beta}, c {c}");
        }
    }
}
