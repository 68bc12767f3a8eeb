use hartree_core::radial::{build_grid, integrate_radial, RadialFunction, Scheme};
use hartree_core::HartreeError;
use proptest::prelude::*;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn truncated_gamma_moment_on_panels() {
    let g = build_grid(5, 25.0, 256, Scheme::CompositeClenshawCurtis).unwrap();
    let f = RadialFunction::from_fn(&g, |r| (-r).exp());
    let got = integrate_radial(&g, &f).unwrap();
    let oracle = adaptive(&|r: f64| (-r).exp() * r.powi(4), 0.0, 25.0, 1e-13);
    assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    // the untruncated value differs by the missing tail
    assert!(((oracle - 24.0) / 24.0).abs() < 3e-7);
}

#[test]
fn cubic_volume_on_default_grids() {
    let g = build_grid(3, 30.0, 200, Scheme::GaussLegendreMapped).unwrap();
    let got = integrate_radial(&g, &RadialFunction::from_fn(&g, |_| 1.0)).unwrap();
    assert!((got - 9000.0).abs() < 1e-9 * 9000.0);
    let g = build_grid(4, 20.0, 128, Scheme::GaussLegendreMapped).unwrap();
    let got = integrate_radial(&g, &RadialFunction::from_fn(&g, |_| 1.0)).unwrap();
    assert!((got - 40000.0).abs() < 1e-12 * 40000.0);
    let z = integrate_radial(&g, &RadialFunction::zeros(&g)).unwrap();
    assert_eq!(z, 0.0);
}

#[test]
fn mapped_rule_converges_spectrally() {
    // int_0^inf e^{-r^2} r^2 dr = sqrt(pi)/4
    let exact = std::f64::consts::PI.sqrt() / 4.0;
    let err = |n: usize| {
        let g = build_grid(3, 8.0, n, Scheme::GaussLegendreMapped).unwrap();
        let f = RadialFunction::from_fn(&g, |r| (-r * r).exp());
        (integrate_radial(&g, &f).unwrap() - exact).abs()
    };
    let (e16, e32) = (err(16), err(32));
    assert!(e32 < 1e-13, "{e32:e}");
    assert!(e16 > 100.0 * e32.max(1e-16));
}

#[test]
fn grid_mismatch_is_rejected() {
    let a = build_grid(3, 10.0, 64, Scheme::GaussLegendreMapped).unwrap();
    let b = build_grid(3, 10.0, 80, Scheme::GaussLegendreMapped).unwrap();
    let f = RadialFunction::from_fn(&b, |_| 1.0);
    assert!(matches!(integrate_radial(&a, &f), Err(HartreeError::GridMismatch(_))));
}

#[test]
fn grids_are_deterministic() {
    for scheme in [Scheme::GaussLegendreMapped, Scheme::CompositeClenshawCurtis] {
        let a = build_grid(4, 12.0, 96, scheme).unwrap();
        let b = build_grid(4, 12.0, 96, scheme).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.weights(), b.weights());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.2f64..2.0, t in 0.2f64..2.0) {
        let g = build_grid(4, 20.0, 96, Scheme::GaussLegendreMapped).unwrap();
        let f = RadialFunction::from_fn(&g, |r| (-s * r * r).exp());
        let h = RadialFunction::from_fn(&g, |r| 1.0 / (1.0 + t * r * r).powi(3));
        let mix = RadialFunction::from_fn(&g, |r| a * (-s * r * r).exp() + b / (1.0 + t * r * r).powi(3));
        let lhs = integrate_radial(&g, &mix).unwrap();
        let rhs = a * integrate_radial(&g, &f).unwrap() + b * integrate_radial(&g, &h).unwrap();
        let scale = a.abs() * integrate_radial(&g, &f).unwrap().abs() + b.abs() * integrate_radial(&g, &h).unwrap().abs();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1e-300));
    }
}
