#[path = "common/gradcheck.rs"]
mod gradcheck;

use gradcheck::{check_layer, check_many, check_mlp, TOLERANCE};

#[test]
fn layer_gradient_matches_finite_differences_over_random_configs() {
    for seed in 0..100 {
        let r = check_layer(seed);
        assert!(r.worst < TOLERANCE, "config {seed}: worst relative error {}", r.worst);
    }
}

#[test]
fn backprop_gradient_matches_finite_differences_over_random_configs() {
    for seed in 0..100 {
        let r = check_mlp(seed);
        assert!(r.worst < TOLERANCE, "config {seed}: worst relative error {}", r.worst);
    }
}

#[test]
fn gate_flips_are_rare() {
    let (layers, mlps) = check_many(100);
    assert!(layers.checked > 2000, "{layers:?}");
    assert!(mlps.checked > 1000, "{mlps:?}");
    assert!(layers.skipped * 50 < layers.checked, "{layers:?}");
    assert!(mlps.skipped * 50 < mlps.checked, "{mlps:?}");
}
