use spikeforge_web::{ground_state_json, lambda_curve_json};

#[test]
fn ground_state_summary_is_consistent() {
    let v = ground_state_json(2.0, 3.0, 3).unwrap();
    let u: Vec<f64> = serde_json::from_value(v["u"].clone()).unwrap();
    assert_eq!(u[0], v["u0"].as_f64().unwrap());
    assert!(v["pohozaev_residual"].as_f64().unwrap() < 1e-3);
    assert!(v["i_infinity"].as_f64().unwrap() > 0.0);
}

#[test]
fn degenerate_weights_give_a_flat_lambda() {
    // E = 0 for p = q = 3 with alpha(q+1) + beta(p+1) = pq - 1
    let v = lambda_curve_json(3.0, 3.0, 1.0, 1.0, 20).unwrap();
    assert_eq!(v["regime"], "degenerate");
    let lam: Vec<f64> = serde_json::from_value(v["lambda"].clone()).unwrap();
    assert!(lam.iter().all(|x| (x - lam[0]).abs() <= 1e-12 * lam[0]));
}

#[test]
fn outer_regime_when_exponent_is_negative() {
    let v = lambda_curve_json(3.0, 3.0, 2.0, 0.5, 20).unwrap();
    assert!(v["exponent"].as_f64().unwrap() < 0.0);
    assert_eq!(v["regime"], "outer_boundary");
}
