mod common;

use common::{cole_hopf_value, gauss_hermite, gaussian_expectation};

#[test]
fn weights_integrate_the_gaussian_weight() {
    let (x, w) = gauss_hermite(80);
    assert!((w.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    assert!(x.windows(2).all(|p| p[0] > p[1]));
}

#[test]
fn gaussian_moments() {
    assert!((gaussian_expectation(|x| x * x, 1.0) - 1.0).abs() < 1e-12);
    assert!((gaussian_expectation(|x| x.powi(4), 2.0) - 12.0).abs() < 1e-10);
    assert!((gaussian_expectation(f64::exp, 1.0) - 0.5_f64.exp()).abs() < 1e-12);
    assert!(gaussian_expectation(f64::tanh, 1.0).abs() < 1e-15);
}

#[test]
fn cole_hopf_reduces_to_the_mean_for_small_gamma() {
    let mean = gaussian_expectation(|x| x.clamp(-0.5, 1.0), 1.0);
    assert!((cole_hopf_value(|x| x.clamp(-0.5, 1.0), 1e-6, 1.0) - mean).abs() < 1e-6);
    assert!(cole_hopf_value(f64::tanh, 1.0, 1.0) > 0.0);
}
