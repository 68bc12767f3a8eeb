//! Normalized fixed-point iteration followed by a Newton polish.
//!
//! The iteration is `u <- m^{3/2} (K + omega W)^{-1} W (v u)` with the
//! stabilizing factor `m = <u, (K + omega W) u> / <u, W v u>`, which equals one
//! at the ground state and removes the scaling instability of the cubic map.
//! Once the defect is small the Jacobian, the `k = 0` linearized operator,
//! is used for a few Newton steps.

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::{weak_residual_of as residual_of, SolverConfig};
use crate::discrete::SpectralOps;
use crate::error::{HartreeError, Result};
use crate::radial::{sphere_area, Parity};

const NEWTON_SWITCH: f64 = 1e-5;

pub(super) fn solve(ops: &SpectralOps, cfg: &SolverConfig, mu: f64) -> Result<Vec<f64>> {
    let n = ops.len();
    let w = ops.weights();
    let omega = 1.0 + mu;
    let k0 = ops.stiffness(0);
    let g0 = ops.sector_kernel(0, Parity::Even);
    let mut m = (*k0).clone();
    for i in 0..n {
        m[(i, i)] += omega * w[i];
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| HartreeError::Eigen("K + omega W is not positive definite".into()))?;

    let area = sphere_area(ops.dim())?;
    let mut u = DVector::from_iterator(n, ops.nodes().iter().map(|r| (-0.5 * r * r).exp()));
    let norm = (area * ops.dot(u.as_slice(), u.as_slice())).sqrt();
    u /= norm;

    let potential = |u: &DVector<f64>| -> DVector<f64> { &*g0 * u.component_mul(u) };
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let v = potential(&u);
        let rhs = DVector::from_fn(n, |i, _| w[i] * v[i] * u[i]);
        let num = u.dot(&(&m * &u));
        let den = u.dot(&rhs);
        if !(den > 0.0) {
            return Err(HartreeError::PositivityLost(
                "fixed-point iterate lost its nonlinear pairing".into(),
            ));
        }
        let y = chol.solve(&rhs) * (num / den).powf(1.5);
        u = &u * (1.0 - cfg.damping) + y * cfg.damping;
        u.apply(|x| *x = x.max(0.0));
        if u.iter().all(|&x| x == 0.0) {
            return Err(HartreeError::PositivityLost("fixed-point iterate vanished".into()));
        }
        res = residual_of(ops, u.as_slice(), potential(&u).as_slice(), mu);
        if res < NEWTON_SWITCH.max(cfg.tol) {
            break;
        }
    }
    debug!("fixed point: {iterations} iterations, defect {res:e}");
    if res >= NEWTON_SWITCH.max(cfg.tol) {
        return Err(HartreeError::NotConverged {
            iterations,
            best_residual: res,
        });
    }

    let mut best = (res, u.clone());
    for step in 0..30 {
        if best.0 < 1e-3 * cfg.tol {
            break;
        }
        let v = potential(&u);
        let f = &m * &u - DVector::from_fn(n, |i, _| w[i] * v[i] * u[i]);
        let jac = DMatrix::from_fn(n, n, |i, j| {
            let mut x = m[(i, j)] - 2.0 * w[i] * u[i] * g0[(i, j)] * u[j];
            if i == j {
                x -= w[i] * v[i];
            }
            x
        });
        let delta = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| HartreeError::Eigen("singular Jacobian in Newton polish".into()))?;
        let cand = &u - delta;
        let r = residual_of(ops, cand.as_slice(), potential(&cand).as_slice(), mu);
        debug!("newton step {step}: defect {r:e}");
        if !(r < best.0) {
            break;
        }
        let gain = best.0 / r;
        u = cand;
        best = (r, u.clone());
        if gain < 2.0 {
            break;
        }
    }
    Ok(best.1.as_slice().to_vec())
}
