mod common;

use proptest::prelude::*;

use qbsde_core::coupling::{simulate_coupled_bm, LocalCorrelation};
use qbsde_core::driver::truncate;
use qbsde_core::paths::TimeGrid;
use qbsde_core::pde::{solve_semilinear, SpaceGrid};
use qbsde_core::registry;

use common::{cole_hopf_value, gaussian_expectation};

fn clip(x: f64) -> f64 {
    x.clamp(-0.5, 1.0)
}

fn y0(driver: &str, terminal: &str, half_width: f64, dx: f64, steps: usize, k: Option<f64>) -> f64 {
    let mut f = registry::driver(driver, 1, 1, 1.0).unwrap();
    if let Some(k) = k {
        f = truncate(&f, k).unwrap();
    }
    let h = registry::terminal(terminal).unwrap();
    let vg = solve_semilinear(&f, &h, SpaceGrid::new(half_width, dx).unwrap(), TimeGrid::new(1.0, steps).unwrap()).unwrap();
    vg.y0()
}

#[test]
fn linear_driver_with_asymmetric_terminal() {
    let oracle = 0.5_f64.exp() * gaussian_expectation(clip, 1.0);
    assert!(oracle > 0.1);
    let got = y0("linear:alpha=0.5", "clip:lo=-0.5,hi=1", 8.0, 0.02, 200, None);
    assert!((got - oracle).abs() <= 1e-2, "{got} vs {oracle}");
}

#[test]
fn quadratic_driver_matches_cole_hopf_for_both_signs() {
    for gamma in [1.0, -1.0, 2.0] {
        let oracle = cole_hopf_value(clip, gamma, 1.0);
        let got = y0(&format!("quadratic:gamma={gamma}"), "clip:lo=-0.5,hi=1", 8.0, 0.02, 200, Some(16.0));
        assert!((got - oracle).abs() <= 2e-2, "gamma = {gamma}: {got} vs {oracle}");
    }
}

#[test]
fn refinement_changes_value_at_first_order() {
    let coarse = y0("quadratic:gamma=1", "tanh:scale=2", 6.0, 0.04, 100, Some(16.0));
    let fine = y0("quadratic:gamma=1", "tanh:scale=2", 6.0, 0.02, 200, Some(16.0));
    let oracle = cole_hopf_value(|x| (2.0 * x).tanh(), 1.0, 1.0);
    assert!((coarse - fine).abs() <= 0.5 * 0.04, "{coarse} vs {fine}");
    assert!((fine - oracle).abs() <= (coarse - oracle).abs() + 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn value_is_monotone_in_the_terminal_condition(lo in -1.0f64..0.0, lift in 0.05f64..0.5, gamma in -1.5f64..1.5) {
        let driver = format!("quadratic:gamma={gamma}");
        let low = y0(&driver, &format!("clip:lo={lo},hi=1"), 5.0, 0.05, 40, Some(8.0));
        let high = y0(&driver, &format!("clip:lo={},hi=1", lo + lift), 5.0, 0.05, 40, Some(8.0));
        prop_assert!(high >= low);
    }

    #[test]
    fn truncation_is_invisible_inside_the_ball(k in 0.5f64..4.0, t in 0.0f64..1.0, y in -2.0f64..2.0, zr in 0.0f64..1.0) {
        let f = registry::driver("mixed", 1, 1, 1.0).unwrap();
        let fk = truncate(&f, k).unwrap();
        let z = zr * k;
        prop_assert_eq!(fk.eval_scalar(t, y, &[z]), f.eval_scalar(t, y, &[z]));
        let outside = k + 1.0 + zr;
        let (projected, at_k) = (fk.eval_scalar(t, y, &[outside]), f.eval_scalar(t, y, &[k]));
        prop_assert!((projected - at_k).abs() <= 1e-12 * (1.0 + at_k.abs()));
    }

    #[test]
    fn full_correlation_reproduces_the_first_motion(seed in 0u64..1000) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let bm = simulate_coupled_bm(grid, 64, LocalCorrelation::Constant { r: 1.0 }, seed, None).unwrap();
        prop_assert_eq!(bm.b1.values(), bm.b2.values());
    }
}
