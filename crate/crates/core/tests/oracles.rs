mod common;

use common::*;

#[test]
fn backprop_matches_finite_differences() {
    for seed in 0..8 {
        let err = backprop_fd_error(seed);
        assert!(err < 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    for seed in 0..16 {
        let err = penalty_fd_error(seed);
        assert!(err < 1e-6, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn adam_follows_reference_trace() {
    let err = adam_trace_error();
    assert!(err < 1e-12, "absolute error {err:e}");
}

#[test]
fn auc_equals_pairwise_definition() {
    assert_eq!(auc_mismatches(500, 3), 0);
}

#[test]
fn frozen_entries_survive_a_thousand_steps() {
    assert_eq!(frozen_violations(1000, 11), 0);
}

#[test]
fn copied_head_reproduces_source_exactly() {
    for seed in 0..4 {
        assert_eq!(copy_fidelity_gap(seed), 0.0);
    }
}

#[test]
fn disabled_links_are_inert() {
    for seed in 0..4 {
        assert_eq!(disabled_link_changes(seed), 0);
    }
}
