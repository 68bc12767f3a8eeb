use std::f64::consts::PI;

use hartree_core::ground_state::{solve_ground_state, SolverConfig};
use hartree_core::newton::harmonics::{expansion_value, project_real_harmonics, zonal_component};
use hartree_core::newton::{
    direct_newton_potential_nd, multipole_potential, newton_potential_at, potential_derivative_at,
    potential_radial_derivative, radial_newton_potential, sector_kernel_value, sector_potential_at, GriddedFunction,
};
use hartree_core::radial::{build_grid, sphere_area, RadialFunction, Scheme};
use proptest::prelude::*;

fn unit_ball(r: f64) -> f64 {
    if r < 1.0 {
        1.0
    } else {
        0.0
    }
}

#[test]
fn unit_ball_potential_is_exact_on_aligned_panels() {
    // panels of width 1 put the discontinuity on a panel boundary
    let g = build_grid(3, 3.0, 48, Scheme::CompositeClenshawCurtis).unwrap();
    let f = RadialFunction::from_fn(&g, unit_ball);
    assert!((newton_potential_at(&f, 0.0).unwrap() - 0.5).abs() < 1e-8);
    for r in [1.5, 2.0, 3.0] {
        let v = newton_potential_at(&f, r).unwrap();
        assert!((v - 1.0 / (3.0 * r)).abs() < 1e-8, "r={r}: {v}");
    }
    let v = radial_newton_potential(&g, &f).unwrap();
    for (&r, &x) in g.nodes().iter().zip(v.values()) {
        let exact = if r < 1.0 { 0.5 - r * r / 6.0 } else { 1.0 / (3.0 * r) };
        assert!((x - exact).abs() < 1e-12, "r={r}");
    }
    let d = potential_derivative_at(&f, 2.0).unwrap();
    assert!((d + 1.0 / 12.0).abs() < 1e-12);
}

#[test]
fn unit_ball_matches_cube_oracle() {
    let g = build_grid(3, 3.0, 48, Scheme::CompositeClenshawCurtis).unwrap();
    let f = RadialFunction::from_fn(&g, unit_ball);
    let cube = GriddedFunction::sample(
        |y| unit_ball((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()),
        [0.0; 3],
        2.0,
        63,
        3,
    )
    .unwrap();
    for x in [[0.0f64, 0.0, 0.0], [1.5, 0.0, 0.0], [0.0, 1.2, 1.2]] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let a = newton_potential_at(&f, r).unwrap();
        let b = direct_newton_potential_nd(3, &cube, &x).unwrap();
        assert!((a - b).abs() < 2e-3, "x={x:?}: {a} vs {b}");
    }
}

#[test]
fn derivative_matches_central_differences() {
    let g = build_grid(4, 12.0, 64, Scheme::GaussLegendreMapped).unwrap();
    let f = RadialFunction::from_fn(&g, |r| (1.0 + r * r).recip().powi(3));
    let d = potential_radial_derivative(&g, &f).unwrap();
    for (i, &r) in g.nodes().iter().enumerate().step_by(7) {
        let h = 1e-3;
        let fd = (newton_potential_at(&f, r + h).unwrap() - newton_potential_at(&f, r - h).unwrap()) / (2.0 * h);
        assert!((fd - d.values()[i]).abs() < 1e-6, "r={r}");
    }
}

#[test]
fn potential_is_harmonic_outside_support() {
    for n in 3..=5 {
        let g = build_grid(n, 4.0, 64, Scheme::CompositeClenshawCurtis).unwrap();
        let f = RadialFunction::from_fn(&g, |r| if r < 1.0 { (1.0 - r * r).powi(2) } else { 0.0 });
        let v = |r: f64| newton_potential_at(&f, r).unwrap();
        let h = 1e-3;
        for r in [1.3, 2.0, 3.1, 6.0] {
            let lap = (v(r + h) - 2.0 * v(r) + v(r - h)) / (h * h) + (n as f64 - 1.0) / r * (v(r + h) - v(r - h)) / (2.0 * h);
            assert!(lap.abs() < 1e-6, "n={n} r={r}: {lap}");
        }
    }
}

#[test]
fn radial_potential_equals_zeroth_sector() {
    for n in 3..=5 {
        let g = build_grid(n, 15.0, 96, Scheme::GaussLegendreMapped).unwrap();
        let f = RadialFunction::from_fn(&g, |r| (-r * r / 2.0).exp() * (1.0 + r * r));
        let v = radial_newton_potential(&g, &f).unwrap();
        let y0 = sphere_area(n).unwrap().sqrt().recip();
        let coeff = RadialFunction::new(g.clone(), f.values().iter().map(|x| x / y0).collect()).unwrap();
        let out = multipole_potential(&g, &[(0, 0, coeff)]).unwrap();
        for (a, b) in v.values().iter().zip(out[0].2.values()) {
            let b = b * y0;
            assert!(((a - b) / a).abs() < 1e-10, "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn sector_potential_on_both_schemes() {
    let mapped = build_grid(3, 12.0, 80, Scheme::GaussLegendreMapped).unwrap();
    let panels = build_grid(3, 12.0, 192, Scheme::CompositeClenshawCurtis).unwrap();
    for k in 0..4 {
        let shape = move |r: f64| r.powi(k as i32) * (-r * r).exp();
        let fm = RadialFunction::from_fn(&mapped, shape).with_parity(hartree_core::radial::Parity::of_degree(k));
        let fp = RadialFunction::from_fn(&panels, shape);
        let gm = multipole_potential(&mapped, &[(k, 0, fm.clone())]).unwrap();
        for r in [0.3, 1.0, 2.5] {
            let a = gm[0].2.evaluate(r);
            let b = sector_potential_at(&fp, k, r).unwrap();
            let c = sector_potential_at(&fm, k, r).unwrap();
            assert!((a - b).abs() < 1e-11 * b.abs().max(1e-3), "k={k} r={r}: {a} vs {b}");
            assert!((c - b).abs() < 1e-11 * b.abs().max(1e-3));
        }
    }
}

fn bumps(y: &[f64]) -> f64 {
    let centres = [[0.3, 0.1, -0.2], [-0.25, 0.2, 0.15], [0.05, -0.35, 0.1]];
    let amps = [1.0, -0.6, 0.8];
    let s2 = 0.12f64 * 0.12;
    centres
        .iter()
        .zip(amps)
        .map(|(c, a)| {
            let d2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2) + (y[2] - c[2]).powi(2);
            a * (-d2 / (2.0 * s2)).exp()
        })
        .sum()
}

#[test]
fn multipole_expansion_converges_to_oracle() {
    let g = build_grid(3, 2.5, 64, Scheme::CompositeClenshawCurtis).unwrap();
    let coeffs = project_real_harmonics(&g, 10, 40, bumps).unwrap();
    let pots = multipole_potential(&g, &coeffs).unwrap();
    let cube = GriddedFunction::sample(|y| bumps(&y), [0.0; 3], 2.5, 64, 1).unwrap();
    let points = [[2.0, 0.0, 0.0], [0.0, -1.2, 1.6], [1.1, 1.1, -1.1]];
    let truth: Vec<f64> = points.iter().map(|x| direct_newton_potential_nd(3, &cube, x).unwrap()).collect();
    let mut prev = f64::INFINITY;
    for k_max in 0..=8 {
        let part: Vec<_> = pots.iter().filter(|(k, _, _)| *k <= k_max).cloned().collect();
        let err = points
            .iter()
            .zip(&truth)
            .map(|(x, t)| (expansion_value(&part, x).unwrap() - t).abs())
            .fold(0.0, f64::max);
        assert!(err < prev, "k_max={k_max}: {err} !< {prev}");
        prev = err;
    }
    assert!(prev < 1e-4, "{prev}");
}

#[test]
fn ground_state_dipole_sector() {
    // U d_1 U = d_1(U^2/2): its Y_11 potential is v'/2 * sqrt(4 pi / 3)
    let g = build_grid(3, 30.0, 200, Scheme::GaussLegendreMapped).unwrap();
    let gs = solve_ground_state(&g, &SolverConfig::default()).unwrap();
    let u = gs.profile.clone();
    let du = hartree_core::ground_state::profile_derivative(&gs).unwrap();
    let c = (4.0 * PI / 3.0).sqrt();
    let f11 = RadialFunction::new(g.clone(), u.values().iter().zip(du.values()).map(|(a, b)| a * b * c).collect())
        .unwrap()
        .with_parity(hartree_core::radial::Parity::Odd);
    let out = multipole_potential(&g, &[(1, 1, f11)]).unwrap();
    let u2 = RadialFunction::new(g.clone(), u.values().iter().map(|x| x * x).collect()).unwrap();
    let dv = potential_radial_derivative(&g, &u2).unwrap();
    for (i, (&a, &b)) in out[0].2.values().iter().zip(dv.values()).enumerate() {
        let want = 0.5 * b * c;
        assert!((a - want).abs() < 1e-9 * want.abs().max(1e-6), "node {i}: {a} vs {want}");
    }
    // and against the cube oracle outside the bulk of the density
    let field = |y: [f64; 3]| {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        u.evaluate(r) * du.evaluate(r) * y[0] / r
    };
    let cube = GriddedFunction::sample(field, [0.0; 3], 14.0, 64, 2).unwrap();
    let x = [9.0f64, 3.0, -2.0];
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let exact = 0.5 * potential_derivative_at(&u2, r).unwrap() * x[0] / r;
    let oracle = direct_newton_potential_nd(3, &cube, &x).unwrap();
    let expanded = expansion_value(&out, &x).unwrap();
    assert!(((expanded - exact) / exact).abs() < 1e-8);
    assert!(((oracle - exact) / exact).abs() < 1e-4, "{oracle} vs {exact}");
}

#[test]
fn zonal_components_rebuild_the_kernel_series() {
    // the potential of a displaced bump along its own axis, for n = 4, 5
    for n in 4..=5 {
        let g = build_grid(n, 4.0, 96, Scheme::CompositeClenshawCurtis).unwrap();
        let centre = 0.4;
        let f = move |y: &[f64]| {
            let d2: f64 = y.iter().enumerate().map(|(i, c)| if i == 0 { (c - centre).powi(2) } else { c * c }).sum();
            (-d2 / (2.0 * 0.15 * 0.15)).exp()
        };
        let mut axis = vec![0.0; n];
        axis[0] = 1.0;
        let x_r = 3.0;
        let mut total = 0.0;
        for k in 0..=10 {
            let fk = zonal_component(&g, k, &axis, 30, f).unwrap();
            total += sector_potential_at(&fk, k, x_r).unwrap();
        }
        // the bump is nearly a point mass M at distance x_r - centre
        let s = 0.15f64;
        let mass = (2.0 * PI * s * s).powf(n as f64 / 2.0);
        let point = mass / ((n - 2) as f64 * sphere_area(n).unwrap() * (x_r - centre).powi(n as i32 - 2));
        assert!(((total - point) / point).abs() < 5e-3, "n={n}: {total} vs {point}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn sector_kernel_symmetric_and_homogeneous(
        n in 3usize..=5, k in 0usize..10, r in 0.01f64..50.0, rho in 0.01f64..50.0, lambda in 0.1f64..10.0
    ) {
        let a = sector_kernel_value(n, k, r, rho).unwrap();
        let b = sector_kernel_value(n, k, rho, r).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.abs());
        let s = sector_kernel_value(n, k, lambda * r, lambda * rho).unwrap();
        let want = lambda.powi(2 - n as i32) * a;
        prop_assert!((s - want).abs() <= 1e-12 * want.abs());
        if k >= 2 && (r - rho).abs() > 1e-9 {
            prop_assert!(sector_kernel_value(n, 1, r, rho).unwrap() > a);
        }
    }
}
