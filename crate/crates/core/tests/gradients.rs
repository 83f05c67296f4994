//! Analytic gradients versus central finite differences on a tiny model.

mod common;

use common::gradcheck::{mlm_gradient_errors, scan_gradient_errors};

#[test]
fn mlm_gradient_matches_finite_differences() {
    for (name, err) in mlm_gradient_errors() {
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}

#[test]
fn scan_gradient_matches_finite_differences() {
    for (name, err) in scan_gradient_errors() {
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}
