use std::sync::{Arc, OnceLock};

use hartree_core::discrete::SpectralOps;
use hartree_core::ground_state::*;
use hartree_core::newton::radial_newton_potential;
use hartree_core::quadrature::gamma;
use hartree_core::radial::{build_grid, sphere_area, Parity, RadialFunction, RadialGrid, Scheme};
use hartree_core::HartreeError;

const DEFAULT_R: [f64; 3] = [30.0, 25.0, 20.0];

fn grid(n: usize) -> Arc<RadialGrid> {
    build_grid(n, DEFAULT_R[n - 3], 400, Scheme::GaussLegendreMapped).unwrap()
}

fn ground(n: usize) -> &'static GroundState {
    static CELLS: [OnceLock<GroundState>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[n - 3].get_or_init(|| solve_ground_state(&grid(n), &SolverConfig::default()).unwrap())
}

fn rel_l2(g: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = g.weights().iter().zip(a).zip(b).map(|((w, x), y)| w * (x - y) * (x - y)).sum();
    let s: f64 = g.weights().iter().zip(b).map(|(w, y)| w * y * y).sum();
    (d / s).sqrt()
}

#[test]
fn profiles_are_positive_monotone_and_converged() {
    for n in 3..=5 {
        let gs = ground(n);
        let u = gs.values();
        assert!(u.iter().all(|&x| x > 0.0));
        assert!(u.windows(2).all(|w| w[1] <= w[0]));
        assert!(gs.residual <= SolverConfig::default().tol);
        assert!(equation_residual(gs).unwrap() <= SolverConfig::default().tol);
        let c = gamma((n as f64 - 2.0) / 2.0) / (4.0 * std::f64::consts::PI.powf(n as f64 / 2.0));
        let lhs = gs.nu.powi(n as i32 - 2);
        assert!((lhs / (c * gs.l2_mass) - 1.0).abs() < 1e-8, "n={n}");
    }
}

#[test]
fn shooting_agrees_with_fixed_point() {
    let gs = ground(3);
    let cfg = SolverConfig {
        method: Method::Shooting,
        tol: 1e-8,
        ..Default::default()
    };
    let sh = solve_ground_state(gs.grid(), &cfg).unwrap();
    assert_eq!(sh.method, Method::Shooting);
    let d = rel_l2(gs.grid(), sh.values(), gs.values());
    assert!(d < 10.0 * SolverConfig::default().tol, "{d:e}");
}

#[test]
fn shifted_solve_is_the_rescaled_ground_state() {
    let mu = 0.3;
    for n in 3..=5 {
        let gs = ground(n);
        let shifted = solve_ground_state_shifted(gs.grid(), &SolverConfig::default(), mu).unwrap();
        let z = rescale_state(gs, mu).unwrap();
        let d = rel_l2(gs.grid(), z.values(), shifted.values());
        assert!(d < 1e-6, "n={n}: {d:e}");
    }
}

#[test]
fn rescale_state_contracts() {
    let mu = 0.3f64;
    let (alpha, beta) = (1.0 + mu, (1.0 + mu).sqrt());
    for n in 3..=5 {
        let gs = ground(n);
        let g = gs.grid();
        let same = rescale_state(gs, 0.0).unwrap();
        for (a, b) in same.values().iter().zip(gs.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        let z = rescale_state(gs, mu).unwrap();
        let mass = sphere_area(n).unwrap() * g.weights().iter().zip(z.values()).map(|(w, v)| w * v * v).sum::<f64>();
        let want = alpha.powf(2.0 - n as f64 / 2.0) * gs.l2_mass;
        assert!((mass / want - 1.0).abs() < 1e-8, "n={n}");

        // defect of the exponential extension in the shifted equation, with
        // the far field of the potential from the mass
        let ops = SpectralOps::for_grid(g).unwrap();
        let tail = gs.profile.tail().unwrap();
        let nn = n as f64;
        let r_max = g.r_max();
        let mut ext = 0.0;
        for (&r, &w) in g.nodes().iter().zip(g.weights()) {
            let s = beta * r;
            if s < 0.6 * r_max {
                continue;
            }
            let zt = alpha * tail.value(s);
            let tau = tail.rate * beta;
            let far = gs.l2_mass / ((nn - 2.0) * sphere_area(n).unwrap() * s.powf(nn - 2.0));
            let d = (-tau * tau + (nn - 1.0) * tau / r + alpha - alpha * far) * zt;
            ext += w * d * d;
        }
        let ext = ext.sqrt() / ops.norm(z.values());
        let res = profile_residual(&ops, z.values(), mu).unwrap();
        assert!(res <= 10.0 * (gs.tol + ext), "n={n}: {res:e} vs {ext:e}");
    }
    assert!(rescale_state(ground(3), -1.0).is_err());
}

#[test]
fn rescaling_onto_the_contracted_grid_is_exact() {
    let mu = 0.3f64;
    let gs = ground(4);
    let g = gs.grid();
    let gc = build_grid(4, g.r_max() / (1.0 + mu).sqrt(), g.len(), g.scheme()).unwrap();
    let z = rescale_state_to(gs, mu, &gc).unwrap();
    for (a, b) in z.values().iter().zip(gs.values()) {
        assert!((a - (1.0 + mu) * b).abs() <= 1e-12 * b.abs().max(1e-8));
    }
}

#[test]
fn residual_detects_perturbation() {
    let gs = ground(3);
    let ops = SpectralOps::for_grid(gs.grid()).unwrap();
    let bumped: Vec<f64> = gs.values().iter().map(|u| 1.01 * u).collect();
    let r0 = profile_residual(&ops, gs.values(), 0.0).unwrap();
    let r1 = profile_residual(&ops, &bumped, 0.0).unwrap();
    assert!(r1 >= 10.0 * r0);
    let zero = vec![0.0; gs.grid().len()];
    assert_eq!(profile_residual(&ops, &zero, 0.0).unwrap(), 0.0);
    assert!(matches!(
        GroundState::from_profile(gs.grid(), zero, 0.0, Method::FixedPoint, 1e-10),
        Err(HartreeError::PositivityLost(_))
    ));
}

#[test]
fn decay_diagnostics() {
    for n in 3..=5 {
        let gs = ground(n);
        let r = gs.grid().r_max();
        let fit = fit_decay(gs, (0.5 * r, 0.8 * r)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "n={n}: {}", fit.slope);
        assert!((fit.nu - gs.nu).abs() < 1e-10 * gs.nu);
    }
    let gs = ground(3);
    let du = profile_derivative(gs).unwrap();
    let rate = fit_exponential_rate(gs.grid().nodes(), du.values(), (10.0, 24.0)).unwrap();
    assert!(rate >= 0.9, "{rate}");
    assert!(fit_decay(gs, (10.0, 10.01)).is_err());
    assert!(fit_decay(gs, (10.0, 40.0)).is_err());
}

#[test]
fn energy_is_stable_under_refinement() {
    let gs = ground(3);
    let fine = build_grid(3, 30.0, 800, Scheme::GaussLegendreMapped).unwrap();
    let cfg = SolverConfig {
        tol: 1e-8,
        ..Default::default()
    };
    let gf = solve_ground_state(&fine, &cfg).unwrap();
    assert!(((gf.energy - gs.energy) / gs.energy).abs() < 1e-8);
}

#[test]
fn quartic_pairing_two_ways() {
    for n in 3..=5 {
        let gs = ground(n);
        let g = gs.grid();
        let u2: Vec<f64> = gs.values().iter().map(|u| u * u).collect();
        let f = RadialFunction::new(Arc::clone(g), u2.clone()).unwrap();
        let v = radial_newton_potential(g, &f).unwrap();
        let paired: f64 = g.weights().iter().zip(v.values()).zip(&u2).map(|((w, p), q)| w * p * q).sum();
        // symmetric kernel: twice the half with rho < r, where G_0 = r^{2-n}/(n-2)
        let nn = n as f64;
        let half: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .zip(&u2)
            .map(|((&r, &w), &q)| {
                let inner = g.integrate_interval(&u2, Parity::Even, 0.0, r, |s| s.powf(nn - 1.0));
                w * q * inner / ((nn - 2.0) * r.powf(nn - 2.0))
            })
            .sum();
        let double = 2.0 * half;
        assert!(((paired - double) / paired).abs() < 1e-9, "n={n}: {paired} vs {double}");
    }
}

#[test]
fn cache_round_trips() {
    let gs = ground(5);
    let text = format_cache(gs);
    let parsed = parse_cache(&text).unwrap();
    assert_eq!(parsed.to_text(), text);
    let back = parsed.into_ground_state().unwrap();
    assert_eq!(back.values(), gs.values());
    assert!(parse_cache("n=3 r_max=1 N=16 scheme=bogus\n").is_err());
}

#[test]
fn configuration_is_validated() {
    let g = grid(3);
    for cfg in [
        SolverConfig { tol: 0.0, ..Default::default() },
        SolverConfig { max_iter: 0, ..Default::default() },
        SolverConfig { damping: 1.5, ..Default::default() },
    ] {
        assert!(solve_ground_state(&g, &cfg).is_err());
    }
    assert!(solve_ground_state_shifted(&g, &SolverConfig::default(), -2.0).is_err());
    assert_eq!("shooting".parse::<Method>().unwrap(), Method::Shooting);
    assert!("newton".parse::<Method>().is_err());
}
