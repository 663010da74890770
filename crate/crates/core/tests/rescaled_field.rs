use hypflow_core::checks::keystone_error;
use hypflow_core::perturbed::IntegratorConfig;
use hypflow_core::potential::default_potential;
use hypflow_core::quotient::bolza_group;
use std::sync::Arc;

#[test]
fn vector_field_matches_flow_difference_quotient() {
    let pot = default_potential(Arc::new(bolza_group()));
    let worst = keystone_error(&pot, 100, 11, 1e-4, &IntegratorConfig::default()).unwrap();
    assert!(worst <= 1e-6, "worst Sasaki error {worst}");
}
