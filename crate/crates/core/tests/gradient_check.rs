//! Reverse-mode gradients against central finite differences.

mod common;

use common::oracles::{mlp_gradient_error, policy_gradient_error};

#[test]
fn mlp_gradients_match_finite_differences() {
    let worst = mlp_gradient_error();
    assert!(worst <= 1e-4, "max relative error {worst}");
}

#[test]
fn policy_log_prob_gradients_match_finite_differences() {
    let worst = policy_gradient_error();
    assert!(worst <= 1e-4, "max relative error {worst}");
}
